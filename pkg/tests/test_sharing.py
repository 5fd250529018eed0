import math

import numpy as np
import pytest

from riskmeter.core import ScenarioSpace
from riskmeter.acceptance import (HalfSpace, MinkowskiSum, Polyhedral,
                                  PositiveCone, ShortfallSet, TVaRSet)
from riskmeter.losses import ExponentialLoss
from riskmeter.market import EligibleSpace
from riskmeter.riskmeasure import RiskRegime, risk_primal
from riskmeter.sharing import (BusinessLine, SharingError, SharingProblem,
                               infconv_direct, infconv_dual, infconv_fold,
                               infconv_via_sum, span_market)

from zoo import random_space


def _problem(space, set_a, set_b, u=None, v=None, pu=1.0, pv=1.0):
    n = space.n
    u = np.ones(n) if u is None else u
    v = np.ones(n) if v is None else v
    return SharingProblem(space, BusinessLine(set_a, u, pu),
                          BusinessLine(set_b, v, pv))


def test_direct_examples():
    sp = ScenarioSpace.uniform(3)
    x = np.array([0.5, -1.5, 2.0])
    # worst-case pair: already subadditive, the convolution changes nothing
    p1 = _problem(sp, PositiveCone(3), PositiveCone(3))
    assert infconv_direct(p1, x).value == pytest.approx(1.5, abs=1e-9)
    # expectation line absorbs the orthant line
    p2 = _problem(sp, PositiveCone(3), HalfSpace(sp.p, 0.0))
    assert infconv_direct(p2, x).value == pytest.approx(-float(sp.p @ x), abs=1e-9)
    assert infconv_via_sum(p2, x).value == pytest.approx(-float(sp.p @ x), abs=1e-9)
    # coherent pairs vanish at zero
    for pb in (p1, p2):
        assert infconv_direct(pb, np.zeros(3)).value == pytest.approx(0.0, abs=1e-9)


def test_three_way_agreement_examples():
    sp = ScenarioSpace.uniform(4)
    rng = np.random.default_rng(0)
    v = np.array([0.5, 1.0, 1.5, 1.0])
    cases = [
        _problem(sp, PositiveCone(4), PositiveCone(4)),
        _problem(sp, TVaRSet(sp, 0.4), PositiveCone(4), v=v, pv=1.05),
        _problem(sp, Polyhedral(np.eye(4), [-1.0, 0.0, -0.5, -2.0]),
                 TVaRSet(sp, 0.6), v=v, pv=1.1),
    ]
    for problem in cases:
        for _ in range(5):
            x = rng.normal(size=4)
            d = infconv_direct(problem, x)
            s = infconv_via_sum(problem, x)
            assert d.value == pytest.approx(s.value, abs=1e-7)
            du = infconv_dual(problem, x)
            assert du.status == "ok"
            assert du.risk.value == pytest.approx(d.value, abs=1e-6)


def test_convolution_below_each_line():
    sp = ScenarioSpace.uniform(3)
    rng = np.random.default_rng(1)
    problem = _problem(sp, TVaRSet(sp, 0.5), PositiveCone(3))
    for _ in range(10):
        x = rng.normal(size=3)
        conv = infconv_direct(problem, x).value
        rho_a = risk_primal(problem.single_regime(problem.line_a), x).value
        rho_b = risk_primal(problem.single_regime(problem.line_b), x).value
        assert conv <= min(rho_a, rho_b) + 1e-8


def test_corollaries():
    """A multi-asset requirement is a convolution of single-asset ones:
    with the worst-case line for general sets, with itself when coherent."""
    sp = ScenarioSpace.uniform(4)
    rng = np.random.default_rng(2)
    u = np.ones(4)
    v = np.array([0.5, 1.0, 1.5, 1.0])
    pu, pv = 1.0, 1.05
    span = span_market(sp, [u, v], [pu, pv])
    for aset in (TVaRSet(sp, 0.45), PositiveCone(4),
                 Polyhedral(np.eye(4), [-1.0, -0.2, 0.0, -1.5])):
        multi = RiskRegime(aset, span)
        p_general = _problem(sp, aset, PositiveCone(4), u=u, v=v, pu=pu, pv=pv)
        for _ in range(5):
            x = rng.normal(size=4)
            lhs = risk_primal(multi, x).value
            assert infconv_via_sum(p_general, x).value == pytest.approx(lhs, abs=1e-7)
            if aset.is_cone:
                p_self = _problem(sp, aset, aset, u=u, v=v, pu=pu, pv=pv)
                assert infconv_via_sum(p_self, x).value == pytest.approx(lhs, abs=1e-7)


def test_barrier_of_sum_is_intersection():
    rng = np.random.default_rng(3)
    sp = ScenarioSpace.uniform(3)
    a = Polyhedral(np.eye(3), [-1.0, 0.0, -0.3])
    b = TVaRSet(sp, 0.5)
    s = MinkowskiSum(a, b)
    for _ in range(1000):
        w = rng.normal(size=3)
        in_a = a.support_function(w) > -math.inf
        in_b = b.support_function(w) > -math.inf
        in_sum = s.support_function(w) > -math.inf
        assert in_sum == (in_a and in_b)


def test_dual_hypothesis_checks():
    sp = ScenarioSpace.uniform(2)
    # span{(1,0)} only: no strictly positive payoff in the span
    p = SharingProblem(sp, BusinessLine(PositiveCone(2), np.array([1.0, 0.0]), 1.0),
                       BusinessLine(PositiveCone(2), np.array([2.0, 0.0]), 2.0))
    with pytest.raises(SharingError):
        infconv_dual(p, np.zeros(2))


def test_coherent_dual_domain():
    """For coherent pairs the maximizer prices every acceptable payoff of
    both lines nonnegatively (the corollary's domain)."""
    sp = ScenarioSpace.uniform(3)
    rng = np.random.default_rng(4)
    a = TVaRSet(sp, 0.4)
    b = PositiveCone(3)
    problem = _problem(sp, a, b, v=np.array([0.5, 1.0, 1.5]), pv=1.0)
    x = np.array([0.5, -1.5, 2.0])
    out = infconv_dual(problem, x)
    assert out.status == "ok"
    w = out.maximizer
    assert out.risk.value == pytest.approx(float(w @ -x), abs=1e-8)
    for _ in range(200):
        y = rng.normal(size=3)
        y_a = y + tvar_gap(sp, a, y)
        assert float(w @ y_a) >= -1e-7
        y_b = np.abs(y)
        assert float(w @ y_b) >= -1e-7


def tvar_gap(space, aset, y):
    from riskmeter.acceptance import tail_value_at_risk
    return tail_value_at_risk(space, y, aset.alpha) * np.ones(space.n)


def test_mixed_analytic_three_way():
    sp = ScenarioSpace.uniform(3)
    u = np.ones(3)
    v = np.array([0.5, 1.0, 2.0])
    problem = _problem(sp, ShortfallSet(sp, ExponentialLoss(), 0.2),
                       PositiveCone(3), u=u, v=v, pv=1.1)
    x = np.array([0.5, -1.5, 2.0])
    d = infconv_direct(problem, x)
    s = infconv_via_sum(problem, x)
    du = infconv_dual(problem, x)
    assert d.value == pytest.approx(s.value, abs=1e-4)
    assert du.risk.value == pytest.approx(d.value, abs=1e-4)


def test_fold_and_associativity():
    sp = ScenarioSpace.uniform(3)
    u = np.ones(3)
    v = np.array([0.5, 1.0, 1.5])
    lines = [BusinessLine(PositiveCone(3), u, 1.0),
             BusinessLine(TVaRSet(sp, 0.4), u, 1.0),
             BusinessLine(PositiveCone(3), v, 1.0)]
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = rng.normal(size=3)
        vals = [infconv_fold(sp, order, x).value
                for order in (lines, lines[::-1], [lines[1], lines[0], lines[2]])]
        assert max(vals) - min(vals) <= 1e-7


def test_span_market_dependent_payoffs():
    sp = ScenarioSpace.uniform(2)
    mk = span_market(sp, [np.ones(2), np.ones(2)], [1.0, 1.0])
    assert mk.k == 1
    with pytest.raises(SharingError):
        span_market(sp, [np.ones(2), np.ones(2)], [1.0, 2.0])
