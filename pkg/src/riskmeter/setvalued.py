"""Conical market models: bid-ask matrices, solvency cones, scalarized
set-valued risk measures, and terminal-cone compatibility.

A multivariate position holds units of d assets per scenario (an n x d
matrix).  Eligible actions are deterministic portfolios, embedded as
constant-over-scenarios payoffs and priced by a consistent pricing system
out of the dual of the date-0 solvency cone.  Scalarized set-valued
measures then reduce to single-valued measures on the flattened product
space, and the whole primal/reduced/dual machinery applies verbatim.

Convention: the generator form of the solvency cone is derived from the
bid-ask transfer system (spend pi_ij units of asset i to obtain one unit
of asset j) and must pass an LP agreement test before use; the test suite
enforces that on every fixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .core import EPS_FEAS, RiskValue, ScenarioSpace, as_vector
from .acceptance import (AcceptanceSet, ConeShifted, Preimage)
from .market import EligibleSpace
from .riskmeasure import DualOutcome, RiskRegime, risk_dual, risk_primal
from .solver import LinearProgram, lp_solve


class SolvencyError(ValueError):
    pass


@dataclass(frozen=True)
class BidAskMatrix:
    """pi[i, j] = units of asset i required to purchase one unit of asset j."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.atleast_2d(np.asarray(self.pi, dtype=float)).copy()
        d = pi.shape[0]
        if pi.shape != (d, d):
            raise SolvencyError("bid-ask matrix must be square")
        if np.any(pi <= 0):
            raise SolvencyError("bid-ask entries must be strictly positive")
        if np.abs(np.diag(pi) - 1.0).max() > 1e-12:
            raise SolvencyError("bid-ask diagonal must be one")
        if np.any(pi * pi.T < 1.0 - 1e-12):
            raise SolvencyError("two-leg round trips must not create wealth "
                                "(pi_ij * pi_ji >= 1)")
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)

    @property
    def d(self) -> int:
        return self.pi.shape[0]


@dataclass(frozen=True)
class SolvencyCone:
    """Deterministic portfolios convertible to nonnegative holdings."""

    bid_ask: BidAskMatrix

    @property
    def d(self) -> int:
        return self.bid_ask.d

    def member(self, u, tol: float = EPS_FEAS) -> bool:
        """LP feasibility of the transfer system: exists alpha >= 0 with
        u_i + sum_j alpha_ji - sum_j alpha_ij * pi_ij >= 0 for all i."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        d = self.d
        if u.shape != (d,):
            raise SolvencyError(f"expected a portfolio of dimension {d}")
        pairs = [(i, j) for i in range(d) for j in range(d) if i != j]
        if not pairs:
            return bool(u[0] >= -tol)
        a = np.zeros((d, len(pairs)))
        for col, (i, j) in enumerate(pairs):
            a[i, col] -= self.bid_ask.pi[i, j]   # spend pi_ij units of i
            a[j, col] += 1.0                     # receive one unit of j
        out = lp_solve(LinearProgram(
            c=np.zeros(len(pairs)), a_ub=-a, b_ub=u + tol,
            bounds=[(0.0, None)] * len(pairs)))
        return out.status == "optimal"

    @cached_property
    def generators(self) -> np.ndarray:
        """Finite generating set: unit vectors plus the exchange portfolios
        pi_ij e_i - e_j.  Must agree with the transfer-system LP; the test
        suite checks that on random points before anything relies on it."""
        d = self.d
        if d > 6:
            raise SolvencyError("generator enumeration supported for d <= 6")
        rows = [np.eye(d)[i] for i in range(d)]
        for i in range(d):
            for j in range(d):
                if i == j:
                    continue
                g = np.zeros(d)
                g[i] = self.bid_ask.pi[i, j]
                g[j] = -1.0
                rows.append(g)
        return np.asarray(rows)

    def member_via_generators(self, u, tol: float = EPS_FEAS) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        gens = self.generators
        out = lp_solve(LinearProgram(
            c=np.zeros(gens.shape[0]),
            a_eq=gens.T, b_eq=u,
            bounds=[(0.0, None)] * gens.shape[0]))
        if out.status == "optimal":
            return True
        # tolerance slack: allow tiny residual via an auxiliary band
        out = lp_solve(LinearProgram(
            c=np.zeros(gens.shape[0]),
            a_ub=np.vstack([gens.T, -gens.T]),
            b_ub=np.concatenate([u + tol, -(u - tol)]),
            bounds=[(0.0, None)] * gens.shape[0]))
        return out.status == "optimal"

    def dual_cone_rows(self) -> np.ndarray:
        """H-representation of the consistent pricing systems:
        K0+ = {xi : xi @ g >= 0 for every generator g}."""
        return self.generators

    def sample_extreme_rays(self, count: int = 32, seed: int = 0) -> list[np.ndarray]:
        """Vertices of K0+ sliced at sum(xi) = 1, sampled by deterministic
        random objectives.  Nonzero rays of the dual cone are recovered up
        to scale."""
        rng = np.random.default_rng(seed)
        d = self.d
        rows = self.dual_cone_rows()
        rays = []
        for _ in range(count):
            c = rng.normal(size=d)
            out = lp_solve(LinearProgram(
                c=c, a_ub=-rows, b_ub=np.zeros(rows.shape[0]),
                a_eq=np.ones((1, d)), b_eq=np.array([1.0]),
                bounds=[(0.0, None)] * d))
            if out.status == "optimal":
                rays.append(out.x)
        return rays


def solvency_member(cone: SolvencyCone, u, tol: float = EPS_FEAS) -> bool:
    return cone.member(u, tol)


def solvency_generators(cone: SolvencyCone) -> np.ndarray:
    return cone.generators


def consistent_pricing_systems(cone: SolvencyCone) -> np.ndarray:
    return cone.dual_cone_rows()


def flatten_positions(x: np.ndarray) -> np.ndarray:
    """n x d holdings matrix -> length n*d vector, asset-major blocks."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x.ravel(order="F")


def unflatten(v: np.ndarray, n: int, d: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((n, d), order="F")


def product_space(space: ScenarioSpace, d: int) -> ScenarioSpace:
    """Scenario space of the flattened product (weights tiled and renormalized)."""
    return ScenarioSpace(np.tile(space.p, d) / d)


def embed_portfolio(u: np.ndarray, n: int) -> np.ndarray:
    """Deterministic portfolio u -> constant-over-scenarios flat payoff."""
    return np.repeat(np.asarray(u, dtype=float), n)


def portfolio_market(space: ScenarioSpace, m_basis: np.ndarray,
                     xi: np.ndarray) -> EligibleSpace:
    """Eligible space of deterministic portfolios in a subspace M, priced
    by a consistent pricing system xi."""
    m_basis = np.atleast_2d(np.asarray(m_basis, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n = space.n
    basis = np.vstack([embed_portfolio(u, n) for u in m_basis])
    prices = m_basis @ xi
    return EligibleSpace(product_space(space, m_basis.shape[1]), basis, prices)


def scalarize_regime(acceptance: AcceptanceSet, space: ScenarioSpace,
                     m_basis: np.ndarray, xi: np.ndarray) -> RiskRegime:
    return RiskRegime(acceptance, portfolio_market(space, m_basis, xi))


def scalarize(acceptance: AcceptanceSet, space: ScenarioSpace, m_basis,
              xi, x) -> RiskValue:
    """Cheapest eligible deterministic portfolio (priced by xi) making the
    holdings acceptable; delegates to the single-valued primal."""
    regime = scalarize_regime(acceptance, space, np.atleast_2d(m_basis),
                              np.asarray(xi, dtype=float))
    return risk_primal(regime, flatten_positions(x))


@dataclass
class DualPair:
    """(Q, w): per-asset scenario measures and nonnegative asset weights,
    with canonical density matrix W[omega, i] >= 0, w_i = sum p * W[:, i]."""

    weights: np.ndarray        # w, length d
    measures: np.ndarray       # n x d, column i is Q_i (sums to one)
    density_matrix: np.ndarray  # n x d

    @staticmethod
    def from_raw(space: ScenarioSpace, raw: np.ndarray, d: int) -> "DualPair":
        n = space.n
        mat = unflatten(raw, n, d)
        w = mat.sum(axis=0)
        measures = np.zeros((n, d))
        for i in range(d):
            measures[:, i] = mat[:, i] / w[i] if w[i] > 1e-14 else space.p
        dens = mat / space.p[:, None]
        return DualPair(w, measures, dens)


def kt_dual_rows(space: ScenarioSpace, kt_cones: Sequence[SolvencyCone]) -> np.ndarray:
    """Rows restricting raw extension weights to the terminal dual cones:
    for every scenario, the per-asset weight vector must price the
    scenario's solvency generators nonnegatively."""
    n = space.n
    d = kt_cones[0].d
    rows = []
    for omega, cone in enumerate(kt_cones):
        for g in cone.generators:
            flat = np.zeros(n * d)
            flat[omega + n * np.arange(d)] = g
            rows.append(flat)
    return np.asarray(rows)


def scalarized_dual(acceptance: AcceptanceSet, space: ScenarioSpace, m_basis,
                    xi, x, kt_cones: Optional[Sequence[SolvencyCone]] = None
                    ) -> tuple[DualOutcome, Optional[DualPair]]:
    """Dual value over pricing-extension pairs (Q, w).

    With ``kt_cones`` the optimization domain is restricted to the pairs
    whose weighted density vectors lie scenario-wise in the terminal dual
    cone; for compatible acceptance sets this leaves the value unchanged.
    """
    m_basis = np.atleast_2d(np.asarray(m_basis, dtype=float))
    d = m_basis.shape[1]
    regime = scalarize_regime(acceptance, space, m_basis, np.asarray(xi, dtype=float))
    extra = kt_dual_rows(space, kt_cones) if kt_cones is not None else None
    out = risk_dual(regime, flatten_positions(x), extra_w_rows=extra)
    pair = None
    if out.status == "ok" and out.maximizer is not None:
        pair = DualPair.from_raw(space, out.maximizer, d)
    return out, pair


def kt_augment(acceptance: AcceptanceSet, space: ScenarioSpace,
               kt_cones: Sequence[SolvencyCone]) -> AcceptanceSet:
    """acceptance + {flat X : X(omega) in K_T(omega) for all omega}.

    The terminal trading cone enters as scenario-wise embedded generators;
    membership stays a joint LP.
    """
    n = space.n
    if len(kt_cones) != n:
        raise SolvencyError("one terminal cone per scenario required")
    d = kt_cones[0].d
    gens = []
    for omega, cone in enumerate(kt_cones):
        for g in cone.generators:
            flat = np.zeros(n * d)
            flat[omega + n * np.arange(d)] = g
            gens.append(flat)
    return ConeShifted(acceptance, np.asarray(gens))


@dataclass
class MultiAssetEmbedding:
    """Set-valued representation of a single-valued regime with a cash slot."""

    acceptance: AcceptanceSet      # on (d+1)-asset flat holdings
    m_basis: np.ndarray            # basis of {u in R^(d+1): u_{d+1} = 0}
    k0_rows: np.ndarray            # H-rep of the date-0 cone
    xi: np.ndarray                 # consistent pricing system

    def scalarized(self, space: ScenarioSpace, x_flat) -> RiskValue:
        return scalarize(self.acceptance, space, self.m_basis, self.xi, x_flat)


def embed_multi_as_setvalued(regime: RiskRegime) -> MultiAssetEmbedding:
    """Express a single-valued regime as a scalarized set-valued measure on
    d+1 assets: holdings of the eligible payoffs plus one cash slot, the
    acceptance set pulled back through the payoff map, and prices
    xi = (price_1, ..., price_d, 1)."""
    mk = regime.market
    d = mk.k
    if d > 6:
        raise SolvencyError("embedding supported for at most 6 eligible payoffs")
    n = mk.space.n
    # T maps flat (d+1)-asset holdings to the scalar position sum_i X_i Z_i + X_{d+1}
    t = np.zeros((n, n * (d + 1)))
    for i in range(d):
        t[:, i * n:(i + 1) * n] = np.diag(mk.basis[i])
    t[:, d * n:] = np.eye(n)
    pulled = Preimage(regime.acceptance, t)
    m_basis = np.hstack([np.eye(d), np.zeros((d, 1))])
    xi = np.concatenate([mk.prices, [1.0]])
    k0_rows = xi.reshape(1, -1)
    return MultiAssetEmbedding(pulled, m_basis, k0_rows, xi)


def embedding_agrees(regime: RiskRegime, embedding: MultiAssetEmbedding,
                     x, tol: float = 1e-7) -> bool:
    """Checker for the displayed equality: the original risk equals the
    scalarization at holdings (0, ..., 0, x)."""
    x = regime.space.check_length(as_vector(x))
    n, d = regime.space.n, regime.market.k
    holdings = np.zeros((n, d + 1))
    holdings[:, d] = x
    lhs = risk_primal(regime, x)
    rhs = embedding.scalarized(regime.space, holdings)
    if lhs.status != rhs.status:
        return False
    if lhs.status != "finite":
        return True
    return abs(lhs.value - rhs.value) <= tol
