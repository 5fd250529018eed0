import hashlib

import numpy as np
import pytest
from scipy.optimize import linprog

from riskmeter.solver import (LinearProgram, Polytope, SolverError,
                              bisect_feasibility, cutting_plane_max, lp_solve,
                              minimize_1d)


def test_examples():
    out = lp_solve(LinearProgram(c=[1.0], a_ub=[[-1.0]], b_ub=[-3.0],
                                 bounds=[(None, None)]))
    assert out.status == "optimal"
    assert out.value == pytest.approx(3.0, abs=1e-10)

    out = lp_solve(LinearProgram(c=[1.0], a_ub=[[1.0]], b_ub=[3.0],
                                 bounds=[(None, None)]))
    assert out.status == "unbounded"
    assert out.ray is not None and out.ray[0] < 0

    out = lp_solve(LinearProgram(c=[1.0], a_ub=[[-1.0], [1.0]], b_ub=[-1.0, 0.0],
                                 bounds=[(None, None)]))
    assert out.status == "infeasible"
    assert out.farkas_margin > 1e-9


def _random_lp(rng):
    n = int(rng.integers(1, 9))
    m_ub = int(rng.integers(0, 7))
    m_eq = int(rng.integers(0, min(n, 3) + 1))
    c = rng.normal(size=n).round(3)
    a_ub = rng.normal(size=(m_ub, n)).round(3) if m_ub else None
    b_ub = rng.normal(size=m_ub).round(3) if m_ub else None
    a_eq = rng.normal(size=(m_eq, n)).round(3) if m_eq else None
    b_eq = rng.normal(size=m_eq).round(3) if m_eq else None
    bounds = []
    for _ in range(n):
        kind = rng.integers(0, 4)
        if kind == 0:
            bounds.append((0.0, None))
        elif kind == 1:
            bounds.append((None, None))
        elif kind == 2:
            bounds.append((-float(rng.uniform(0, 3)), float(rng.uniform(0, 3))))
        else:
            bounds.append((None, float(rng.uniform(0, 3))))
    return LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq,
                         bounds=bounds)


def test_against_scipy_reference():
    rng = np.random.default_rng(42)
    for _ in range(150):
        lp = _random_lp(rng)
        mine = lp_solve(lp)
        ref = linprog(lp.c, A_ub=lp.a_ub, b_ub=lp.b_ub, A_eq=lp.a_eq,
                      b_eq=lp.b_eq, bounds=lp.bounds, method="highs")
        ref_status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(ref.status)
        assert mine.status == ref_status
        if mine.status == "optimal":
            assert mine.value == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)


def test_optimal_certificates():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 40:
        lp = _random_lp(rng)
        out = lp_solve(lp)
        if out.status != "optimal":
            continue
        checked += 1
        # feasibility within 1e-8
        if lp.a_ub is not None:
            resid = lp.a_ub @ out.x - lp.b_ub
            assert resid.max(initial=0.0) <= 1e-8
            # complementary slackness residual <= 1e-7
            assert np.abs(out.dual_ub * resid).max(initial=0.0) <= 1e-7
        if lp.a_eq is not None:
            assert np.abs(lp.a_eq @ out.x - lp.b_eq).max(initial=0.0) <= 1e-8
        # strong duality
        assert out.value == pytest.approx(out.dual_value, abs=1e-7, rel=1e-7)
        # dual sign convention for <= rows
        if out.dual_ub is not None and out.dual_ub.size:
            assert out.dual_ub.max(initial=0.0) <= 1e-9


def test_unbounded_ray_certificate():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 20:
        lp = _random_lp(rng)
        out = lp_solve(lp)
        if out.status != "unbounded":
            continue
        checked += 1
        r = out.ray
        assert float(np.dot(lp.c, r)) < -1e-12
        if lp.a_ub is not None:
            assert (lp.a_ub @ r).max(initial=0.0) <= 1e-8
        if lp.a_eq is not None:
            assert np.abs(lp.a_eq @ r).max(initial=0.0) <= 1e-8


def test_farkas_certificates():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 20:
        lp = _random_lp(rng)
        out = lp_solve(lp)
        if out.status != "infeasible":
            continue
        checked += 1
        assert out.farkas_margin > 0


def test_determinism():
    rng = np.random.default_rng(11)
    lp = _random_lp(rng)
    digests = set()
    for _ in range(3):
        out = lp_solve(lp)
        blob = out.status.encode()
        for arr in (out.x, out.ray, out.farkas_ub, out.farkas_eq):
            if arr is not None:
                blob += arr.tobytes()
        digests.add(hashlib.sha256(blob).hexdigest())
    assert len(digests) == 1


def test_minimize_1d():
    x, v = minimize_1d(lambda t: (t - 2.0) ** 2, 0.0, 10.0)
    assert x == pytest.approx(2.0, abs=1e-6)
    assert v <= 1e-10

    x, v = minimize_1d(lambda t: t + 1.0 / t, 0.5, 4.0)
    assert x == pytest.approx(1.0, abs=1e-6)
    assert v == pytest.approx(2.0, abs=1e-10)

    # expansion: start far from the minimizer
    x, v = minimize_1d(lambda t: (t - 40.0) ** 2, 0.0, 1.0)
    assert x == pytest.approx(40.0, abs=1e-5)


def test_minimize_1d_matches_dense_grid_on_shortfall_inner_objective():
    # inner objective of the loss-budget support function (convex in eta)
    p = np.array([0.3, 0.7])
    dens = np.array([0.5, 1.5])
    alpha = 0.25

    def lstar(y):
        safe = np.maximum(y, 1e-300)
        return np.where(y > 0, y * np.log(safe) - y + 1.0, 1.0)

    def g(eta):
        lam = 1.0 / eta
        return eta * (alpha + float(p @ lstar(lam * dens)))

    _, v = minimize_1d(g, 1e-4, 1e4, tol=1e-12)
    # dense grid oracle, one million points
    grid = np.exp(np.linspace(np.log(1e-4), np.log(1e4), 1_000_000))
    vals = grid * (alpha + lstar(np.outer(1.0 / grid, dens)) @ p)
    v_grid = float(vals.min())
    assert v <= v_grid + 1e-12
    assert v == pytest.approx(v_grid, abs=1e-6)


def test_bisect_feasibility():
    assert bisect_feasibility(lambda m: m >= 5.0, 0.0, 1.0) == pytest.approx(5.0, abs=1e-7)
    assert bisect_feasibility(lambda m: True, 0.0, 1.0) == -np.inf
    assert bisect_feasibility(lambda m: False, 0.0, 1.0) == np.inf


def test_cutting_plane_linear_on_simplex():
    c = np.array([0.3, -0.2, 0.9])
    domain = Polytope(dim=3, a_eq=np.ones((1, 3)), b_eq=np.array([1.0]),
                      bounds=[(0.0, None)] * 3)
    w, v = cutting_plane_max(lambda w: (float(c @ w), c), domain, tol=1e-9)
    assert v == pytest.approx(0.9, abs=1e-8)  # best vertex


def test_cutting_plane_quadratic():
    center = np.array([0.2, 0.5, 0.3])
    domain = Polytope(dim=3, a_eq=np.ones((1, 3)), b_eq=np.array([1.0]),
                      bounds=[(0.0, None)] * 3)

    def f(w):
        diff = w - center
        return -float(diff @ diff), -2.0 * diff

    w, v = cutting_plane_max(f, domain, tol=1e-8)
    assert v == pytest.approx(0.0, abs=1e-6)
    assert np.allclose(w, center, atol=1e-3)


def test_cutting_plane_empty_domain():
    domain = Polytope(dim=2, a_ub=np.array([[1.0, 0.0], [-1.0, 0.0]]),
                      b_ub=np.array([-1.0, -1.0]))
    with pytest.raises(SolverError):
        cutting_plane_max(lambda w: (0.0, np.zeros(2)), domain)
