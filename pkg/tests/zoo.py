"""Randomized regime generators shared across the test suite.

Markets are priced by a hidden strictly positive state-price vector, so
they are arbitrage-free by construction and the extension polytope always
contains that vector.  "Anchored" acceptance sets additionally place the
state-price vector inside the barrier cone, which makes the dual
representation nondegenerate; unanchored variants are used to manufacture
degeneracy.
"""

from __future__ import annotations

import numpy as np

from riskmeter.core import ScenarioSpace
from riskmeter.acceptance import (HalfSpace, Polyhedral, PositiveCone,
                                  ShortfallSet, TVaRSet, VaRSet)
from riskmeter.losses import ExponentialLoss, PowerLoss
from riskmeter.market import EligibleSpace
from riskmeter.riskmeasure import RiskRegime

CONVEX_VARIANTS = ("positive_cone", "halfspace", "polyhedral", "tvar", "shortfall")
ALL_VARIANTS = CONVEX_VARIANTS + ("var",)


def random_space(rng: np.random.Generator, n: int) -> ScenarioSpace:
    p = rng.uniform(0.2, 1.0, n)
    return ScenarioSpace(p / p.sum())


def random_market(rng: np.random.Generator, space: ScenarioSpace, k: int
                  ) -> tuple[EligibleSpace, np.ndarray]:
    """k-asset span containing a strictly positive payoff, priced by a
    hidden strictly positive vector (returned for anchoring)."""
    n = space.n
    k = min(k, n)
    rows = [rng.uniform(0.5, 1.5, n)]
    while len(rows) < k:
        z = rng.normal(size=n)
        cand = np.vstack(rows + [z])
        if np.linalg.matrix_rank(cand) == len(rows) + 1:
            rows.append(z)
    basis = np.vstack(rows)
    wstar = space.p * (1.0 + 0.3 * rng.uniform(size=n))
    prices = basis @ wstar
    return EligibleSpace(space, basis, prices), wstar


def random_acceptance(rng: np.random.Generator, space: ScenarioSpace,
                      variant: str, anchor: np.ndarray | None = None):
    n = space.n
    if variant == "positive_cone":
        return PositiveCone(n)
    if variant == "halfspace":
        w = anchor if anchor is not None else rng.uniform(0.0, 1.0, n)
        if not np.any(w > 0):
            w = np.ones(n)
        return HalfSpace(w, -float(rng.uniform(0.0, 1.0)))
    if variant == "polyhedral":
        m = max(2, n // 2)
        g = rng.uniform(0.0, 1.0, size=(m, n))
        if anchor is not None:
            g = np.vstack([g, anchor])
        h = -rng.uniform(0.0, 1.0, size=g.shape[0])
        return Polyhedral(g, h)
    if variant == "tvar":
        return TVaRSet(space, float(rng.uniform(0.15, 0.7)))
    if variant == "shortfall":
        if rng.uniform() < 0.5:
            loss = ExponentialLoss()
        else:
            loss = PowerLoss(gamma=float(rng.uniform(1.5, 3.0)), slope=0.0)
        return ShortfallSet(space, loss, float(rng.uniform(0.05, 0.5)))
    if variant == "var":
        return VaRSet(space, float(rng.uniform(0.15, 0.6)))
    raise ValueError(variant)


def random_regime(rng: np.random.Generator, variant: str,
                  n_range=(2, 50), k_range=(1, 4), anchored: bool = True
                  ) -> tuple[RiskRegime, np.ndarray]:
    """(regime, sample position).  VaR regimes are kept small: the primal
    enumerates scenario subsets, which its contract caps at 20 scenarios."""
    if variant == "var":
        n = int(rng.integers(3, 8))
        k = int(rng.integers(1, 3))
    else:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        k = int(rng.integers(k_range[0], min(k_range[1], n) + 1))
    space = random_space(rng, n)
    market, wstar = random_market(rng, space, k)
    acc = random_acceptance(rng, space, variant, anchor=wstar if anchored else None)
    x = rng.normal(scale=2.0, size=n)
    return RiskRegime(acc, market), x


def degenerate_regime(rng: np.random.Generator) -> RiskRegime:
    """Halfspace acceptance whose barrier ray misses the (nonempty)
    extension polytope: every position then carries an infinite value."""
    n = int(rng.integers(2, 6))
    space = random_space(rng, n)
    w = space.p.copy()
    # Z with w-weighted value 1 but priced at 2 by a positive extension
    while True:
        z = rng.normal(size=n)
        if abs(z @ w) > 0.2:
            break
    z = z / (z @ w)  # normalized: halfspace functional prices z at 1
    basis = np.vstack([np.ones(n), z])
    if np.linalg.matrix_rank(basis) < 2:
        return degenerate_regime(rng)
    prices = np.array([1.0, 2.0])
    market = EligibleSpace(space, basis, prices)
    from riskmeter.market import extension_polytope
    if extension_polytope(market).is_empty():
        return degenerate_regime(rng)
    return RiskRegime(HalfSpace(w, 0.0), market)
