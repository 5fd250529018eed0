"""Eligible spaces, pricing functionals, positive extensions, market diagnostics.

An eligible space is a span of finitely many payoffs with linear prices.
Derived objects: the zero-cost subspace, a designated nonnegative unit
payoff with price one, and the polytope of positive pricing extensions
{w >= 0 : w @ Z_j = price_j} over which dual representations optimize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .core import EPS_FEAS, ScenarioSpace, as_vector
from .acceptance import (AcceptanceSet, MembershipLift, MinkowskiCone,
                         MinkowskiSum, NonConvexSetError, ShortfallSet)
from .solver import LinearProgram, lp_solve, bisect_feasibility


class MarketError(ValueError):
    pass


@dataclass(frozen=True)
class EligibleSpace:
    """span(basis rows) with prices, on a common scenario space."""

    space: ScenarioSpace
    basis: np.ndarray      # k x n payoff rows
    prices: np.ndarray     # k

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float)).copy()
        prices = np.atleast_1d(np.asarray(self.prices, dtype=float)).copy()
        if basis.shape[1] != self.space.n:
            raise MarketError("basis payoffs do not match the scenario space")
        if basis.shape[0] != prices.shape[0]:
            raise MarketError("one price per basis payoff required")
        if np.linalg.matrix_rank(basis) < basis.shape[0]:
            raise MarketError("basis payoffs must be linearly independent")
        basis.flags.writeable = False
        prices.flags.writeable = False
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "prices", prices)

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def n(self) -> int:
        return self.space.n

    def payoff(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.basis

    def price_of_coeffs(self, coeffs) -> float:
        return float(np.asarray(coeffs, dtype=float) @ self.prices)

    def coefficients(self, z, tol: float = EPS_FEAS) -> np.ndarray:
        """Coordinates of a payoff in the basis; error if outside the span."""
        z = self.space.check_length(as_vector(z))
        coeffs, *_ = np.linalg.lstsq(self.basis.T, z, rcond=None)
        resid = self.basis.T @ coeffs - z
        scale = max(1.0, float(np.abs(z).max(initial=0.0)))
        if np.abs(resid).max(initial=0.0) > 1e3 * tol * scale:
            raise MarketError("payoff lies outside the eligible span")
        return coeffs

    def price(self, z) -> float:
        return self.price_of_coeffs(self.coefficients(z))

    @cached_property
    def unit_coeffs(self) -> np.ndarray:
        """Coefficients of the designated unit: the deterministic first
        nonnegative normalized payoff in the span, rescaled to price one."""
        k, n = self.k, self.n
        out = lp_solve(LinearProgram(
            c=np.zeros(k),
            a_ub=-self.basis.T, b_ub=np.zeros(n),          # payoff >= 0
            a_eq=np.sum(self.basis, axis=1).reshape(1, -1),  # coordinates sum to 1
            b_eq=np.array([1.0]),
            bounds=[(None, None)] * k))
        if out.status != "optimal":
            raise MarketError("eligible space contains no nonzero positive payoff")
        c = out.x
        pu = self.price_of_coeffs(c)
        if pu <= EPS_FEAS:
            raise MarketError("nonnegative eligible payoff with nonpositive price "
                              "(pricing functional is not strictly positive)")
        return c / pu

    @cached_property
    def unit(self) -> np.ndarray:
        return self.payoff(self.unit_coeffs)

    @cached_property
    def zero_cost_basis(self) -> np.ndarray:
        """Rows spanning {Z in S : price(Z) = 0}; dimension k-1 when some
        price is nonzero, k when all prices vanish."""
        pr = self.prices
        nz = np.flatnonzero(np.abs(pr) > EPS_FEAS)
        if nz.size == 0:
            return self.basis.copy()
        piv = int(nz[0])
        rows = []
        for j in range(self.k):
            if j == piv:
                continue
            rows.append(self.basis[j] - (pr[j] / pr[piv]) * self.basis[piv])
        return np.asarray(rows).reshape(len(rows), self.n)


def check_no_arbitrage(market: EligibleSpace) -> bool:
    """True iff no nonzero positive payoff in the span has price <= 0."""
    k, n = market.k, market.n
    out = lp_solve(LinearProgram(
        c=np.zeros(k),
        a_ub=np.vstack([-market.basis.T, market.prices.reshape(1, -1)]),
        b_ub=np.zeros(n + 1),
        a_eq=np.sum(market.basis, axis=1).reshape(1, -1),
        b_eq=np.array([1.0]),
        bounds=[(None, None)] * k))
    return out.status != "optimal"


def _coordinate_range_zero(lift: MembershipLift, vrows: np.ndarray,
                           tol: float) -> bool:
    """Is {z = V^T d : z in lifted set} equal to {0}?

    Probes the sum of coordinates first, then each coordinate; all LPs are
    over (d, aux).  Empty set counts as True (no nonzero point).
    """
    m0, n = vrows.shape
    amat_x = lift.ax @ vrows.T                      # rows over d
    a_ub = -np.hstack([amat_x, lift.aaux]) if lift.ax.shape[0] else None
    b_ub = -lift.b if lift.ax.shape[0] else None
    bounds = [(None, None)] * m0 + list(lift.aux_bounds)

    feas = lp_solve(LinearProgram(c=np.zeros(m0 + lift.naux), a_ub=a_ub,
                                  b_ub=b_ub, bounds=bounds))
    if feas.status != "optimal":
        return True
    probe_dirs = [np.ones(n)] + [np.eye(n)[i] for i in range(n)]
    for direction in probe_dirs:
        cvec = np.concatenate([vrows @ direction, np.zeros(lift.naux)])
        for sign in (1.0, -1.0):
            out = lp_solve(LinearProgram(c=sign * cvec, a_ub=a_ub, b_ub=b_ub,
                                         bounds=bounds))
            if out.status == "unbounded":
                return False
            if out.status == "optimal" and abs(out.value) > 1e-7:
                return False
    return True


def check_good_deal(acceptance: AcceptanceSet, market: EligibleSpace,
                    tol: float = EPS_FEAS) -> bool:
    """True iff the acceptance set meets the zero-cost subspace only at 0."""
    vrows = market.zero_cost_basis
    if vrows.shape[0] == 0:
        return True
    lift = acceptance.membership_lift()
    if lift is not None:
        return _coordinate_range_zero(lift, vrows, tol)
    # analytic loss-budget sets contain a neighborhood of 0, so any
    # nontrivial zero-cost subspace yields a good deal
    if acceptance.contains(np.zeros(acceptance.dim), tol=0.0):
        return False
    raise MarketError("good-deal check unsupported for this acceptance set")


@dataclass(frozen=True)
class ExtensionPolytope:
    """E = {w >= 0 : w @ Z_j = price_j for all j} as constraint data."""

    market: EligibleSpace

    @property
    def dim(self) -> int:
        return self.market.n

    def equalities(self) -> tuple[np.ndarray, np.ndarray]:
        return self.market.basis, self.market.prices

    def feasible_point(self) -> Optional[np.ndarray]:
        out = lp_solve(LinearProgram(
            c=np.zeros(self.dim),
            a_eq=self.market.basis, b_eq=self.market.prices,
            bounds=[(0.0, None)] * self.dim))
        return out.x if out.status == "optimal" else None

    def is_empty(self) -> bool:
        return self.feasible_point() is None

    def contains(self, w, tol: float = EPS_FEAS) -> bool:
        w = np.asarray(as_vector(w), dtype=float)
        if np.any(w < -tol):
            return False
        resid = self.market.basis @ w - self.market.prices
        return bool(np.abs(resid).max(initial=0.0) <= tol * max(1.0, float(np.abs(self.market.prices).max(initial=1.0))))

    def is_bounded(self) -> bool:
        out = lp_solve(LinearProgram(
            c=-np.ones(self.dim),
            a_eq=self.market.basis, b_eq=self.market.prices,
            bounds=[(0.0, None)] * self.dim))
        return out.status == "optimal"


def extension_polytope(market: EligibleSpace) -> ExtensionPolytope:
    return ExtensionPolytope(market)


@dataclass(frozen=True)
class ExtensionReport:
    exists: bool
    certificate: Optional[np.ndarray]
    bounded_below_on_augmented: bool


def check_extension_exists(acceptance: AcceptanceSet, market: EligibleSpace,
                           tol: float = EPS_FEAS) -> ExtensionReport:
    """Existence of a positive pricing extension in the barrier cone.

    Condition (a): feasibility of {w in E, sigma_A(w) finite}, one LP for
    sets with support blocks, a strict-positivity LP for loss-budget sets.
    Condition (b): the pricing functional is bounded from below on the
    intersection of the eligible span with the augmented set, checked by
    an independent LP (or bisection probe).  The two must agree; a
    mismatch raises, since their equivalence is a theorem.
    """
    if not acceptance.is_convex:
        raise NonConvexSetError("extension analysis needs a convex acceptance set")
    exists, cert = _condition_a(acceptance, market, tol)
    bounded = _condition_b(acceptance, market)
    if exists != bounded:
        raise MarketError(
            f"extension existence ({exists}) and boundedness ({bounded}) disagree; "
            "numerical failure or invalid fixture")
    return ExtensionReport(exists, cert, bounded)


def _condition_a(acceptance: AcceptanceSet, market: EligibleSpace, tol: float):
    block = acceptance.support_block()
    n = market.n
    if block is not None:
        q = block.q
        a_eq_top = np.hstack([market.basis, np.zeros((market.k, q))])
        a_eq_blk = np.hstack([block.eq_w, block.eq_mu]) if block.eq_w.shape[0] else None
        a_eq = np.vstack([a_eq_top] + ([a_eq_blk] if a_eq_blk is not None else []))
        b_eq = np.concatenate([market.prices, np.zeros(block.eq_w.shape[0])])
        a_ub = None
        b_ub = None
        if block.ge_w.shape[0]:
            a_ub = -np.hstack([block.ge_w, block.ge_mu])
            b_ub = np.zeros(block.ge_w.shape[0])
        out = lp_solve(LinearProgram(
            c=np.zeros(n + q), a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq,
            bounds=[(0.0, None)] * n + list(block.mu_bounds)))
        if out.status == "optimal":
            return True, out.x[:n]
        return False, None
    # analytic loss-budget family: barrier cone from the conjugate domain
    loss = getattr(acceptance, "loss", None)
    if loss is None:
        raise MarketError("extension check unsupported for this acceptance set")
    y_lo, _ = loss.conjugate_domain()
    if y_lo <= 0:
        w = ExtensionPolytope(market).feasible_point()
        return (w is not None), w
    # need a strictly positive extension
    out = lp_solve(LinearProgram(
        c=np.concatenate([np.zeros(n), [-1.0]]),
        a_ub=np.hstack([-np.eye(n), np.ones((n, 1))]), b_ub=np.zeros(n),
        a_eq=np.hstack([market.basis, np.zeros((market.k, 1))]),
        b_eq=market.prices,
        bounds=[(0.0, None)] * n + [(0.0, None)]))
    if out.status != "optimal" or out.x[n] <= 1e-10:
        return False, None
    return True, out.x[:n]


def _condition_b(acceptance: AcceptanceSet, market: EligibleSpace) -> bool:
    vrows = market.zero_cost_basis
    lift = acceptance.membership_lift()
    if lift is not None:
        k = market.k
        m0 = vrows.shape[0]
        # min price @ c  s.t.  basis^T c - vrows^T d  in  A-lift
        ax_c = lift.ax @ market.basis.T
        ax_d = -lift.ax @ vrows.T if m0 else np.zeros((lift.ax.shape[0], 0))
        a_ub = -np.hstack([ax_c, ax_d, lift.aaux])
        out = lp_solve(LinearProgram(
            c=np.concatenate([market.prices, np.zeros(m0 + lift.naux)]),
            a_ub=a_ub, b_ub=-lift.b,
            bounds=[(None, None)] * (k + m0) + list(lift.aux_bounds)))
        if out.status == "infeasible":
            return True  # vacuously bounded below on an empty intersection
        return out.status == "optimal"
    # analytic: probe inf{m : m*U in A + S0} with the set's own machinery
    unit = market.unit

    def oracle(m: float) -> bool:
        return _augmented_contains(acceptance, m * unit, vrows)

    val = bisect_feasibility(oracle, -1.0, 1.0, tol=1e-6)
    return val > -math.inf


def _augmented_contains(acceptance: AcceptanceSet, y: np.ndarray,
                        vrows: np.ndarray, tol: float = EPS_FEAS) -> bool:
    """Membership of y in acceptance + span(vrows)."""
    if vrows.shape[0] == 0:
        return acceptance.contains(y, tol)
    if hasattr(acceptance, "loss_min_over"):
        return acceptance.loss_min_over(y, vrows) <= acceptance.budget + max(tol, 1e-9)
    if isinstance(acceptance, ShortfallSet):
        return _shortfall_min_over(acceptance, y, vrows) <= acceptance.budget + max(tol, 1e-9)
    subspace = MinkowskiCone(np.vstack([vrows, -vrows]))
    return MinkowskiSum(acceptance, subspace).contains(y, tol)


def _shortfall_min_over(sset: ShortfallSet, y: np.ndarray, vrows: np.ndarray) -> float:
    """min over d of E[loss(-(y + vrows^T d))], smooth and convex."""
    from scipy.optimize import minimize

    space, loss = sset.space, sset.loss
    if vrows.shape[0] == 0:
        return float(space.p @ loss(-y))
    vT = vrows.T

    def fun(d):
        arg = -(y + vT @ d)
        return float(space.p @ loss(arg))

    def grad(d):
        arg = -(y + vT @ d)
        return -(vrows @ (space.p * np.asarray(loss.deriv(arg), dtype=float)))

    res = minimize(fun, np.zeros(vrows.shape[0]), jac=grad, method="L-BFGS-B",
                   options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-12})
    return float(res.fun)
