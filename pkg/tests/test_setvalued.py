import numpy as np
import pytest

from riskmeter.core import ScenarioSpace
from riskmeter.acceptance import Polyhedral, PositiveCone, TVaRSet
from riskmeter.market import EligibleSpace
from riskmeter.riskmeasure import RiskRegime, risk_primal
from riskmeter.setvalued import (BidAskMatrix, SolvencyCone, DualPair,
                                 consistent_pricing_systems,
                                 embed_multi_as_setvalued, embedding_agrees,
                                 flatten_positions, kt_augment, kt_dual_rows,
                                 scalarize, scalarized_dual, solvency_generators,
                                 solvency_member, SolvencyError)
from riskmeter.solver import LinearProgram, lp_solve


def test_bid_ask_validation():
    with pytest.raises(SolvencyError):
        BidAskMatrix(np.array([[1.0, -1.0], [1.0, 1.0]]))
    with pytest.raises(SolvencyError):
        BidAskMatrix(np.array([[2.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolvencyError):
        # two-leg round trip creating wealth
        BidAskMatrix(np.array([[1.0, 0.5], [0.5, 1.0]]))
    BidAskMatrix(np.array([[1.0, 1.1], [1.0, 1.0]]))  # product 1.1 >= 1


def test_solvency_member_examples():
    cone = SolvencyCone(BidAskMatrix(np.array([[1.0, 1.1], [1.0, 1.0]])))
    assert solvency_member(cone, [1.0, 1.0])           # no transfers needed
    # spending 1.1 units of asset one buys the missing unit of asset two
    assert solvency_member(cone, [1.1, -1.0])
    # an asset-one hole cannot be repaired without going short asset two
    assert not solvency_member(cone, [-1.0, 0.0])


def test_solvency_one_asset():
    cone = SolvencyCone(BidAskMatrix(np.array([[1.0]])))
    assert cone.member([0.5]) and not cone.member([-0.1])
    assert np.allclose(solvency_generators(cone), [[1.0]])


def test_generators_agree_with_transfer_lp():
    """Mandatory agreement test: cone(generators) membership must coincide
    with the transfer-system LP on a thousand random points per fixture."""
    rng = np.random.default_rng(0)
    fixtures = [
        BidAskMatrix(np.array([[1.0, 1.1], [1.0, 1.0]])),
        BidAskMatrix(np.array([[1.0, 1.4, 2.0],
                               [0.8, 1.0, 1.6],
                               [0.6, 0.7, 1.0]])),
    ]
    for ba in fixtures:
        cone = SolvencyCone(ba)
        for _ in range(1000):
            u = rng.normal(scale=1.5, size=ba.d)
            assert cone.member(u) == cone.member_via_generators(u)


def test_consistent_pricing_identity_and_spreads():
    # identity bid-ask: only the equal-components ray prices consistently
    k1 = SolvencyCone(BidAskMatrix(np.ones((2, 2))))
    rays = k1.sample_extreme_rays()
    assert rays and all(np.allclose(r, [0.5, 0.5], atol=1e-9) for r in rays)

    # huge spreads: the dual cone fills the positive quadrant
    spread = SolvencyCone(BidAskMatrix(np.array([[1.0, 50.0], [50.0, 1.0]])))
    rays2 = {tuple(np.round(r, 6)) for r in spread.sample_extreme_rays()}
    # vertices of the sliced quadrant approach the coordinate axes
    assert any(r[0] > 0.9 for r in rays2) and any(r[1] > 0.9 for r in rays2)

    # d=1: the dual cone is the nonnegative half-line
    k0 = SolvencyCone(BidAskMatrix(np.array([[1.0]])))
    assert all(np.allclose(r, [1.0]) for r in k0.sample_extreme_rays())


def test_nonzero_rays_strictly_positive():
    rng = np.random.default_rng(1)
    for _ in range(6):
        d = int(rng.integers(2, 4))
        base = rng.uniform(1.05, 1.6, size=(d, d))
        pi = np.maximum(base, 1.0 / base.T)
        np.fill_diagonal(pi, 1.0)
        cone = SolvencyCone(BidAskMatrix(pi))
        for ray in cone.sample_extreme_rays(seed=3):
            if np.linalg.norm(ray) > 1e-9:
                assert np.all(ray > 1e-12), f"ray {ray} has zero components"


def test_scalarize_componentwise_cone():
    sp = ScenarioSpace.uniform(3)
    x = np.array([[1.0, -2.0], [0.5, 3.0], [-1.0, 1.0]])
    val = scalarize(PositiveCone(6), sp, np.eye(2), [1.0, 1.0], x)
    # separable oracle: each asset needs its own worst slice repaired
    assert val.value == pytest.approx(-x[:, 0].min() - x[:, 1].min(), abs=1e-9)
    # nonnegative holdings cost nothing (zero portfolio already works)
    assert scalarize(PositiveCone(6), sp, np.eye(2), [1.0, 1.0],
                     np.abs(x)).value <= 1e-9
    # positive homogeneity in the pricing system
    doubled = scalarize(PositiveCone(6), sp, np.eye(2), [2.0, 2.0], x)
    assert doubled.value == pytest.approx(2.0 * val.value, abs=1e-9)


def test_scalarize_equals_direct_portfolio_lp():
    """Independent oracle: one LP directly over the deterministic
    portfolio, scenario-wise rows, no flattening machinery."""
    rng = np.random.default_rng(2)
    sp = ScenarioSpace.uniform(4)
    for _ in range(25):
        x = rng.normal(size=(4, 2))
        xi = rng.uniform(0.5, 1.5, 2)
        val = scalarize(PositiveCone(8), sp, np.eye(2), xi, x)
        # rows (omega, i): u_i >= -x[omega, i]
        rows = np.tile(np.eye(2), (4, 1))
        out = lp_solve(LinearProgram(c=xi, a_ub=-rows, b_ub=x.reshape(-1),
                                     bounds=[(None, None)] * 2))
        assert out.status == "optimal"
        assert val.value == pytest.approx(out.value, abs=1e-8)


def test_embedding_round_trips():
    sp = ScenarioSpace.uniform(3)
    mk_cash = EligibleSpace(sp, np.ones((1, 3)), [1.0])
    rng = np.random.default_rng(3)

    reg1 = RiskRegime(PositiveCone(3), mk_cash)
    emb1 = embed_multi_as_setvalued(reg1)
    for _ in range(5):
        assert embedding_agrees(reg1, emb1, rng.normal(size=3))

    # coherent zero: both sides vanish at the zero position
    regt = RiskRegime(TVaRSet(sp, 0.5), mk_cash)
    embt = embed_multi_as_setvalued(regt)
    assert risk_primal(regt, np.zeros(3)).value == pytest.approx(0.0, abs=1e-9)
    assert embedding_agrees(regt, embt, np.zeros(3))

    # two-asset regime round trip
    z = np.array([0.5, 1.0, 1.8])
    mk2 = EligibleSpace(sp, np.vstack([np.ones(3), z]), [1.0, 1.1])
    reg2 = RiskRegime(TVaRSet(sp, 0.45), mk2)
    emb2 = embed_multi_as_setvalued(reg2)
    for _ in range(5):
        assert embedding_agrees(reg2, emb2, rng.normal(size=3))


def test_kt_augment():
    sp = ScenarioSpace.uniform(3)
    rng = np.random.default_rng(4)
    ba = BidAskMatrix(np.array([[1.0, 1.3], [1.2, 1.0]]))
    cones = [SolvencyCone(ba)] * 3
    base = PositiveCone(6)
    aug = kt_augment(base, sp, cones)
    # augmentation is idempotent: augmenting twice changes no memberships
    aug2 = kt_augment(aug, sp, cones)
    for _ in range(1000):
        x = rng.normal(size=6)
        assert aug.contains(x) == aug2.contains(x)
    # frictionless terminal exchange only adds scenario-wise swaps
    ident = [SolvencyCone(BidAskMatrix(np.ones((2, 2))))] * 3
    aug_id = kt_augment(base, sp, ident)
    x = np.array([[1.0, -0.5], [0.2, 0.1], [0.3, 0.0]])
    flat = flatten_positions(x)
    assert not base.contains(flat)
    assert aug_id.contains(flat)  # swap one unit of asset one into asset two


def test_scalarized_dual_and_kt_restriction():
    sp = ScenarioSpace.uniform(3)
    x = np.array([[1.0, -2.0], [0.5, 3.0], [-1.0, 1.0]])
    out, pair = scalarized_dual(PositiveCone(6), sp, np.eye(2), [1.0, 1.0], x)
    assert out.status == "ok"
    assert out.risk.value == pytest.approx(-x[:, 0].min() - x[:, 1].min(), abs=1e-9)
    assert pair is not None
    assert np.all(pair.weights >= -1e-12)
    assert pair.measures.sum(axis=0) == pytest.approx(np.ones(2), abs=1e-9)
    # canonical density matrix reproduces the weights
    assert (sp.p[:, None] * pair.density_matrix).sum(axis=0) == pytest.approx(
        pair.weights, abs=1e-9)

    # zero holdings cost nothing
    out0, _ = scalarized_dual(PositiveCone(6), sp, np.eye(2), [1.0, 1.0],
                              np.zeros((3, 2)))
    assert out0.risk.value == pytest.approx(0.0, abs=1e-9)

    # compatible set: restricting the dual domain leaves the value unchanged
    ba = BidAskMatrix(np.array([[1.0, 1.3], [1.2, 1.0]]))
    cones = [SolvencyCone(ba)] * 3
    compat = kt_augment(PositiveCone(6), sp, cones)
    unres, _ = scalarized_dual(compat, sp, np.eye(2), [1.0, 1.0], x)
    res, pair_res = scalarized_dual(compat, sp, np.eye(2), [1.0, 1.0], x,
                                    kt_cones=cones)
    assert unres.risk.value == pytest.approx(res.risk.value, abs=1e-6)
    primal = scalarize(compat, sp, np.eye(2), [1.0, 1.0], x)
    assert primal.value == pytest.approx(res.risk.value, abs=1e-6)
    # the restricted maximizer is feasible for the unrestricted domain
    rows = kt_dual_rows(sp, cones)
    raw = (pair_res.weights[None, :] * pair_res.measures).ravel(order="F")
    assert np.all(rows @ raw >= -1e-8)
