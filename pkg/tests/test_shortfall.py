import math

import numpy as np
import pytest

from riskmeter.core import ScenarioSpace
from riskmeter.acceptance import ShortfallSet
from riskmeter.losses import ExponentialLoss, PowerLoss
from riskmeter.shortfall import (HedgedShortfallSet, OnePeriodMarket,
                                 ShortfallError, conjugate,
                                 shortfall_acceptance, shortfall_dual,
                                 shortfall_primal)


def binomial_market(up=1.3, down=0.8, s0=1.0, box=2.0):
    st = np.array([[up * s0], [down * s0]])
    return OnePeriodMarket([s0], st, [-box], [box])


def test_conjugate_frontdoor():
    loss = ExponentialLoss()
    assert conjugate(loss, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert conjugate(loss, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert conjugate(loss, math.e) == pytest.approx(1.0, abs=1e-12)


def test_one_scenario_closed_form():
    sp = ScenarioSpace(np.array([1.0]))
    for alpha in (math.e - 1.0, 0.5, 0.01):
        val = shortfall_primal(sp, ExponentialLoss(), alpha, None, [0.0])
        assert val.value == pytest.approx(-math.log1p(alpha), abs=1e-8)
        # the boundary identity: the loss of the repaired position hits alpha
        assert ExponentialLoss()(-val.value) == pytest.approx(alpha, abs=1e-7)


def test_cash_additivity():
    sp = ScenarioSpace(np.array([0.3, 0.7]))
    market = binomial_market()
    rng = np.random.default_rng(0)
    x = np.array([0.4, -0.6])
    base = shortfall_primal(sp, ExponentialLoss(), 0.2, market, x).value
    for _ in range(6):
        c = float(rng.uniform(-2, 2))
        shifted = shortfall_primal(sp, ExponentialLoss(), 0.2, market, x + c).value
        assert shifted == pytest.approx(base - c, abs=1e-6)


def test_acceptance_degenerates_without_trading():
    sp = ScenarioSpace(np.array([0.4, 0.6]))
    aset = shortfall_acceptance(sp, ExponentialLoss(), 0.3, None)
    assert isinstance(aset, ShortfallSet)
    frozen = shortfall_acceptance(sp, ExponentialLoss(), 0.3,
                                  OnePeriodMarket([1.0], [[1.2], [0.9]],
                                                  [0.0], [0.0]))
    assert isinstance(frozen, ShortfallSet)
    # very large constant payoffs are always acceptable
    assert aset.contains(50.0 * np.ones(2))


def test_hedged_acceptance_boundary_via_inner_oracle():
    sp = ScenarioSpace(np.array([0.5, 0.5]))
    market = binomial_market()
    aset = shortfall_acceptance(sp, ExponentialLoss(), 0.2, market)
    assert isinstance(aset, HedgedShortfallSet)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=2)
        inner = aset.inner_min(x)
        # dense theta-grid oracle for the inner minimum
        thetas = np.linspace(-2.0, 2.0, 4001)
        args = -(x[None, :] + thetas[:, None] * market.delta.T)
        grid = float(np.min(np.exp(args).sum(axis=1) * 0.5 - 1.0))
        assert inner <= grid + 1e-9
        assert inner == pytest.approx(grid, abs=1e-6)
        assert aset.contains(x) == (inner <= 0.2 + 1e-9)


def test_binomial_primal_vs_dense_grid():
    sp = ScenarioSpace(np.array([0.5, 0.5]))
    market = binomial_market()
    x = np.array([0.7, -1.2])
    alpha = 0.15
    val = shortfall_primal(sp, ExponentialLoss(), alpha, market, x).value

    def grid_best(m_lo, m_hi):
        ms = np.linspace(m_lo, m_hi, 1000)
        ths = np.linspace(-2.0, 2.0, 1000)
        gains = ths[:, None] * market.delta[:, 0][None, :]  # (theta, scenario)
        best = math.inf
        for m in ms:
            args = -(x[None, :] + m + gains)
            losses = (np.exp(args) - 1.0) @ sp.p
            if losses.min() <= alpha:
                best = min(best, m)
        return best

    # coarse window first, then a thousand-by-thousand grid at <=1e-3 step
    coarse = grid_best(-3.0, 3.0)
    best = grid_best(coarse - 0.4, coarse + 0.4)
    assert abs(val - best) <= 1e-3
    assert val <= best + 1e-9


def test_anti_monotonicity_in_strategy_set():
    sp = ScenarioSpace(np.array([0.5, 0.5]))
    x = np.array([0.7, -1.2])
    prev = math.inf
    for box in (0.0, 0.5, 1.0, 2.0, 4.0):
        market = binomial_market(box=box) if box > 0 else None
        val = shortfall_primal(sp, ExponentialLoss(), 0.15, market, x).value
        assert val <= prev + 1e-9
        prev = val


def test_dual_matches_primal():
    sp1 = ScenarioSpace(np.array([1.0]))
    alpha = 0.4
    d = shortfall_dual(sp1, ExponentialLoss(), alpha, None, [0.0])
    assert d.risk.value == pytest.approx(-math.log1p(alpha), abs=1e-6)

    # constant positions, no trading
    sp = ScenarioSpace(np.array([0.35, 0.65]))
    for c in (-1.0, 0.0, 2.0):
        p = shortfall_primal(sp, ExponentialLoss(), 0.2, None, c * np.ones(2))
        d = shortfall_dual(sp, ExponentialLoss(), 0.2, None, c * np.ones(2))
        assert d.risk.value == pytest.approx(p.value, abs=1e-6)

    # binomial market fixture: primal is the oracle
    market = binomial_market()
    x = np.array([0.7, -1.2])
    p = shortfall_primal(sp, ExponentialLoss(), 0.15, market, x)
    d = shortfall_dual(sp, ExponentialLoss(), 0.15, market, x)
    assert d.risk.value == pytest.approx(p.value, abs=1e-4)


def test_dual_maximizer_is_density():
    sp = ScenarioSpace(np.array([0.35, 0.65]))
    market = binomial_market()
    d = shortfall_dual(sp, PowerLoss(gamma=2.0), 0.2, market, [0.5, -0.8])
    assert d.density is not None
    assert np.all(d.measure >= -1e-12)
    assert float(sp.p @ d.density) == pytest.approx(1.0, abs=1e-9)


def test_power_loss_primal_dual():
    sp = ScenarioSpace(np.array([0.5, 0.5]))
    market = binomial_market()
    x = np.array([0.3, -0.9])
    p = shortfall_primal(sp, PowerLoss(gamma=2.0), 0.25, market, x)
    d = shortfall_dual(sp, PowerLoss(gamma=2.0), 0.25, market, x)
    assert d.risk.value == pytest.approx(p.value, abs=1e-4)


def test_market_validation():
    with pytest.raises(ShortfallError):
        OnePeriodMarket([1.0], [[1.2], [0.9]], [1.0], [-1.0])
    with pytest.raises(ShortfallError):
        OnePeriodMarket([1.0], [[1.2], [0.9]], [0.0], [np.inf])
