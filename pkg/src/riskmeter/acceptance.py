"""Acceptance-set taxonomy: membership oracles, support functions, barrier cones.

Every variant is a monotone set of payoff vectors.  Convex variants carry
two machine-usable descriptions on top of the membership oracle:

* a *membership lift*: finitely many linear inequalities over (x, aux)
  whose projection is the set, so joint feasibility questions become LPs;
* a *support block*: an embedded-LP description of the support function
  sigma_A(w) = inf_{a in A} w@a, so dual risk computations collapse into
  one joint LP.

Tail Value-at-Risk admits both: the epigraph lift of its tail average,
and the closed-form dual cone {w >= 0 : alpha*w_i <= p_i * sum(w)}.  The
latter is derived, not assumed; the test suite validates it against an LP
oracle before anything else relies on it.  Shortfall sets are analytic:
their support function is computed by a one-dimensional convex search
over the conjugate-loss multiplier, and they expose boundary members for
cutting-plane use instead of a lift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import EPS_FEAS, ScenarioSpace, as_vector
from .losses import LossFunction
from .solver import LinearProgram, Polytope, lp_solve, minimize_1d


class AcceptanceSetError(ValueError):
    pass


class NonConvexSetError(AcceptanceSetError):
    """Dual-side operation requested on a nonconvex variant."""


@dataclass(frozen=True)
class MembershipLift:
    """x in A  <=>  exists aux with  ax @ x + aaux @ aux >= b, aux in bounds."""

    nx: int
    ax: np.ndarray
    aaux: np.ndarray
    b: np.ndarray
    aux_bounds: tuple = ()

    @property
    def naux(self) -> int:
        return self.aaux.shape[1]


@dataclass(frozen=True)
class SupportBlock:
    """sigma_A(w) as an embedded maximization:  max obj @ mu  subject to
    eq_w @ w + eq_mu @ mu = 0,  ge_w @ w + ge_mu @ mu >= 0,  mu in bounds.

    Infeasibility of the block at a given w certifies sigma_A(w) = -inf,
    i.e. w outside the barrier cone.
    """

    n: int
    obj: np.ndarray
    eq_w: np.ndarray
    eq_mu: np.ndarray
    ge_w: np.ndarray
    ge_mu: np.ndarray
    mu_bounds: tuple = ()

    @property
    def q(self) -> int:
        return self.obj.shape[0]


def _empty_block(n: int) -> SupportBlock:
    return SupportBlock(n, np.zeros(0), np.zeros((0, n)), np.zeros((0, 0)),
                        np.zeros((0, n)), np.zeros((0, 0)), ())


def combine_blocks(a: SupportBlock, b: SupportBlock) -> SupportBlock:
    """Support data of a Minkowski sum: sigma stacks block-diagonally on mu."""
    if a.n != b.n:
        raise AcceptanceSetError("support blocks live in different dimensions")
    n = a.n
    obj = np.concatenate([a.obj, b.obj])
    eq_w = np.vstack([a.eq_w, b.eq_w])
    eq_mu = np.zeros((a.eq_mu.shape[0] + b.eq_mu.shape[0], a.q + b.q))
    eq_mu[: a.eq_mu.shape[0], : a.q] = a.eq_mu
    eq_mu[a.eq_mu.shape[0]:, a.q:] = b.eq_mu
    ge_w = np.vstack([a.ge_w, b.ge_w])
    ge_mu = np.zeros((a.ge_mu.shape[0] + b.ge_mu.shape[0], a.q + b.q))
    ge_mu[: a.ge_mu.shape[0], : a.q] = a.ge_mu
    ge_mu[a.ge_mu.shape[0]:, a.q:] = b.ge_mu
    return SupportBlock(n, obj, eq_w, eq_mu, ge_w, ge_mu,
                        tuple(a.mu_bounds) + tuple(b.mu_bounds))


class AcceptanceSet:
    """Base class; concrete variants below."""

    dim: int
    is_convex: bool = True
    is_cone: bool = False
    is_closed: bool = True

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        raise NotImplementedError

    def membership_lift(self) -> Optional[MembershipLift]:
        """Polyhedral lift, or None for analytic/nonconvex variants."""
        return None

    def support_block(self) -> Optional[SupportBlock]:
        return None

    def support_member(self, w: np.ndarray, tol: float = EPS_FEAS):
        """(sigma_A(w), member) with member in A and w @ member ~= sigma.

        member is None when sigma = -inf.  Raises NonConvexSetError for
        nonconvex variants.
        """
        raise NotImplementedError

    def support_function(self, w, tol: float = EPS_FEAS) -> float:
        if not self.is_convex:
            raise NonConvexSetError(f"{type(self).__name__} has no support machinery")
        sigma, _ = self.support_member(np.asarray(as_vector(w), dtype=float), tol)
        return sigma

    def barrier_member(self, w, tol: float = EPS_FEAS) -> bool:
        return self.support_function(w, tol) > -math.inf

    def __add__(self, other: "AcceptanceSet") -> "AcceptanceSet":
        return MinkowskiSum(self, other)


def minkowski_sum(a: AcceptanceSet, b: AcceptanceSet) -> "MinkowskiSum":
    return MinkowskiSum(a, b)


@dataclass(frozen=True)
class PositiveCone(AcceptanceSet):
    """All componentwise nonnegative payoffs (the worst-case set)."""

    dim: int
    is_cone: bool = field(default=True, init=False)

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        x = as_vector(x)
        return bool(np.all(x >= -tol))

    def membership_lift(self) -> MembershipLift:
        n = self.dim
        return MembershipLift(n, np.eye(n), np.zeros((n, 0)), np.zeros(n))

    def support_block(self) -> SupportBlock:
        # sigma(w) = 0 on w >= 0, -inf elsewhere
        n = self.dim
        return SupportBlock(n, np.zeros(0), np.zeros((0, n)), np.zeros((0, 0)),
                            np.eye(n), np.zeros((n, 0)), ())

    def support_member(self, w, tol: float = EPS_FEAS):
        w = np.asarray(w, dtype=float)
        if np.all(w >= -tol):
            return 0.0, np.zeros(self.dim)
        return -math.inf, None


@dataclass(frozen=True)
class HalfSpace(AcceptanceSet):
    """{x : w0 @ x >= level}; monotone halfspaces force w0 >= 0."""

    w0: np.ndarray
    level: float

    def __post_init__(self):
        w0 = np.atleast_1d(np.asarray(self.w0, dtype=float)).copy()
        if np.any(w0 < -EPS_FEAS):
            raise AcceptanceSetError(
                "a halfspace containing a monotone set must have a positive functional")
        if not np.any(w0 > 0):
            raise AcceptanceSetError("halfspace functional must be nonzero")
        w0[w0 < 0] = 0.0
        w0.flags.writeable = False
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "level", float(self.level))

    @property
    def dim(self) -> int:
        return self.w0.shape[0]

    @property
    def is_cone(self) -> bool:
        return self.level == 0.0

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        scale = max(1.0, abs(self.level))
        return float(self.w0 @ as_vector(x)) >= self.level - tol * scale

    def membership_lift(self) -> MembershipLift:
        return MembershipLift(self.dim, self.w0.reshape(1, -1), np.zeros((1, 0)),
                              np.array([self.level]))

    def support_block(self) -> SupportBlock:
        # sigma(w) = level * mu when w = mu * w0, mu >= 0; -inf otherwise
        n = self.dim
        return SupportBlock(n, np.array([self.level]),
                            eq_w=-np.eye(n), eq_mu=self.w0.reshape(-1, 1),
                            ge_w=np.zeros((0, n)), ge_mu=np.zeros((0, 1)),
                            mu_bounds=((0.0, None),))

    def support_member(self, w, tol: float = EPS_FEAS):
        w = np.asarray(w, dtype=float)
        denom = float(self.w0 @ self.w0)
        lam = float(self.w0 @ w) / denom
        scale = max(1.0, float(np.abs(w).max(initial=0.0)))
        if lam < -tol or np.abs(w - lam * self.w0).max(initial=0.0) > 1e3 * tol * scale:
            return -math.inf, None
        lam = max(lam, 0.0)
        # member: point on the boundary hyperplane along w0
        member = self.w0 * (self.level / denom)
        return lam * self.level, member


@dataclass(frozen=True)
class Polyhedral(AcceptanceSet):
    """{x : G @ x >= h}.  Monotone iff G >= 0 componentwise (validated)."""

    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.g, dtype=float)).copy()
        h = np.atleast_1d(np.asarray(self.h, dtype=float)).copy()
        if g.shape[0] != h.shape[0]:
            raise AcceptanceSetError("polyhedral rows and levels disagree")
        if np.any(g < -EPS_FEAS):
            raise AcceptanceSetError("monotone polyhedral sets need nonnegative rows")
        g[g < 0] = 0.0
        g.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.g.shape[1]

    @property
    def is_cone(self) -> bool:
        return bool(np.all(self.h == 0.0))

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        x = as_vector(x)
        scale = np.maximum(1.0, np.abs(self.h))
        return bool(np.all(self.g @ x >= self.h - tol * scale))

    def membership_lift(self) -> MembershipLift:
        m = self.g.shape[0]
        return MembershipLift(self.dim, self.g, np.zeros((m, 0)), self.h)

    def support_block(self) -> SupportBlock:
        # sigma(w) = max { h @ mu : G^T mu = w, mu >= 0 }
        n = self.dim
        m = self.g.shape[0]
        return SupportBlock(n, self.h.copy(),
                            eq_w=-np.eye(n), eq_mu=self.g.T,
                            ge_w=np.zeros((0, n)), ge_mu=np.zeros((0, m)),
                            mu_bounds=tuple((0.0, None) for _ in range(m)))

    def support_member(self, w, tol: float = EPS_FEAS):
        w = np.asarray(w, dtype=float)
        out = lp_solve(LinearProgram(c=w, a_ub=-self.g, b_ub=-self.h,
                                     bounds=[(None, None)] * self.dim))
        if out.status == "optimal":
            return float(out.value), out.x
        if out.status == "unbounded":
            return -math.inf, None
        raise AcceptanceSetError("polyhedral acceptance set is empty")


def value_at_risk(space: ScenarioSpace, x, beta: float) -> float:
    """inf{m : P[X + m < 0] <= beta}, computed by an exact sorted scan.

    The infimum is attained: it is the negated largest scenario value whose
    strictly-below mass does not exceed beta.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie strictly between 0 and 1")
    x = space.check_length(as_vector(x))
    vals, inv = np.unique(x, return_inverse=True)
    mass = np.bincount(inv, weights=space.p, minlength=vals.shape[0])
    below = np.concatenate([[0.0], np.cumsum(mass)[:-1]])
    j = int(np.searchsorted(below, beta, side="right")) - 1
    return float(-vals[j])


def tail_value_at_risk(space: ScenarioSpace, x, alpha: float) -> float:
    """(1/alpha) * integral of beta -> VaR_beta over (0, alpha).

    The quantile map is piecewise constant, so the integral has a closed
    form over the sorted unique scenario values.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    x = space.check_length(as_vector(x))
    vals, inv = np.unique(x, return_inverse=True)
    mass = np.bincount(inv, weights=space.p, minlength=vals.shape[0])
    total = 0.0
    c = 0.0
    for v, m in zip(vals, mass):
        seg = min(alpha, c + m) - c
        if seg > 0:
            total -= v * seg
        c += m
        if c >= alpha:
            break
    return float(total / alpha)


@dataclass(frozen=True)
class VaRSet(AcceptanceSet):
    """{x : VaR_beta(x) <= 0}.  Nonconvex: no dual machinery, primal risk
    falls back to scenario-subset enumeration."""

    space: ScenarioSpace
    beta: float
    is_convex: bool = field(default=False, init=False)
    is_cone: bool = field(default=True, init=False)

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise AcceptanceSetError("beta must lie strictly between 0 and 1")

    @property
    def dim(self) -> int:
        return self.space.n

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return value_at_risk(self.space, x, self.beta) <= tol

    def support_member(self, w, tol: float = EPS_FEAS):
        raise NonConvexSetError("Value-at-Risk acceptance sets are not convex")


def tvar_dual_cone_rows(space: ScenarioSpace, alpha: float) -> np.ndarray:
    """H-representation rows D with dual cone {w >= 0 : D @ w >= 0}.

    Derived from the tail-average representation of the risk as a maximum
    over measures q with 0 <= q_i <= p_i/alpha, sum q = 1: the cone over
    those measures is exactly {w >= 0 : alpha * w_i <= p_i * sum(w)}.
    """
    n = space.n
    return np.outer(space.p, np.ones(n)) - alpha * np.eye(n)


@dataclass(frozen=True)
class TVaRSet(AcceptanceSet):
    """{x : TVaR_alpha(x) <= 0}: a closed coherent (convex cone) set."""

    space: ScenarioSpace
    alpha: float
    is_cone: bool = field(default=True, init=False)

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise AcceptanceSetError("alpha must lie strictly between 0 and 1")

    @property
    def dim(self) -> int:
        return self.space.n

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return tail_value_at_risk(self.space, x, self.alpha) <= tol

    def membership_lift(self) -> MembershipLift:
        # epigraph lift: exists t, u >= 0 with u_i >= -x_i - t and
        # t + (1/alpha) * p @ u <= 0
        n = self.dim
        p = self.space.p
        ax = np.vstack([np.eye(n), np.zeros((1, n))])
        aaux = np.zeros((n + 1, n + 1))
        aaux[:n, 0] = 1.0            # + t
        aaux[:n, 1:] = np.eye(n)     # + u_i   (x_i + t + u_i >= 0)
        aaux[n, 0] = -1.0            # -t - p@u/alpha >= 0
        aaux[n, 1:] = -p / self.alpha
        b = np.zeros(n + 1)
        bounds = ((None, None),) + tuple((0.0, None) for _ in range(n))
        return MembershipLift(n, ax, aaux, b, bounds)

    def support_block(self) -> SupportBlock:
        n = self.dim
        rows = tvar_dual_cone_rows(self.space, self.alpha)
        ge_w = np.vstack([rows, np.eye(n)])
        return SupportBlock(n, np.zeros(0), np.zeros((0, n)), np.zeros((0, 0)),
                            ge_w, np.zeros((2 * n, 0)), ())

    def support_member(self, w, tol: float = EPS_FEAS):
        w = np.asarray(w, dtype=float)
        scale = max(1.0, float(np.abs(w).sum()))
        rows = tvar_dual_cone_rows(self.space, self.alpha)
        if np.all(w >= -tol * scale) and np.all(rows @ w >= -tol * scale):
            return 0.0, np.zeros(self.dim)
        return -math.inf, None


@dataclass(frozen=True)
class ShortfallSet(AcceptanceSet):
    """{x : E[loss(-x)] <= budget} for a convex increasing loss, budget > 0."""

    space: ScenarioSpace
    loss: LossFunction
    budget: float

    def __post_init__(self):
        if not self.budget > 0:
            raise AcceptanceSetError("loss budget must be positive")

    @property
    def dim(self) -> int:
        return self.space.n

    def expected_loss(self, x) -> float:
        x = self.space.check_length(as_vector(x))
        return float(self.space.p @ self.loss(-x))

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return self.expected_loss(x) <= self.budget + tol

    def support_member(self, w, tol: float = EPS_FEAS):
        return _shortfall_support(self.space, self.loss, self.budget, np.asarray(w, dtype=float))


def _shortfall_support(space: ScenarioSpace, loss: LossFunction, budget: float,
                       w: np.ndarray) -> tuple[float, Optional[np.ndarray]]:
    """sigma(w) = -s * inf_{lam>0} (budget + E[l*(lam q/p)]) / lam, s = sum w.

    Minimized over eta = 1/lam, where the objective is convex.  Returns a
    boundary member built from the conjugate derivative at the optimum,
    cash-shifted onto the exact loss budget so that cutting planes stay
    valid even at degenerate w.
    """
    n = space.n
    tol = EPS_FEAS
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if np.any(w < -tol * scale):
        return -math.inf, None
    w = np.maximum(w, 0.0)
    s = float(w.sum())
    if s <= 1e-14 * scale:
        return 0.0, _shortfall_boundary_point(space, loss, budget)
    q = w / s
    dens = q / space.p
    y_lo, y_hi = loss.conjugate_domain()
    dpos = dens[dens > 0]
    if y_lo > 0 and np.any(dens <= 0):
        return -math.inf, None
    lam_lo = max(1e-8, (y_lo / dpos.min()) if y_lo > 0 else 1e-8)
    lam_hi = 1e8 if math.isinf(y_hi) else y_hi / dpos.max()
    if lam_hi < lam_lo:
        return -math.inf, None

    def g_of_eta(eta: float) -> float:
        if eta <= 0:
            return math.inf
        lam = 1.0 / eta
        vals = loss.conjugate(lam * dens)
        if np.any(np.isinf(vals)):
            return math.inf
        return eta * (budget + float(space.p @ vals))

    eta_lo, eta_hi = 1.0 / lam_hi, 1.0 / lam_lo
    eta_star, gmin = minimize_1d(g_of_eta, eta_lo, eta_hi, tol=1e-12)
    lam_star = 1.0 / eta_star
    sigma = -s * gmin
    # boundary member: a_i = -(l*)'(lam* d_i), repaired onto E[l(-a)] = budget
    y = lam_star * np.maximum(dens, 1e-12)
    a = -np.asarray(loss.conjugate_deriv(np.maximum(y, y_lo + 1e-12)), dtype=float)
    a = np.where(dens > 0, a, np.abs(a).max(initial=1.0) + 10.0)
    a = _cash_repair(space, loss, budget, a)
    return sigma, a


def _shortfall_boundary_point(space: ScenarioSpace, loss: LossFunction,
                              budget: float) -> np.ndarray:
    """A constant member of the loss-budget set (for sigma at w = 0)."""
    return _cash_repair(space, loss, budget, np.zeros(space.n))


def _cash_repair(space: ScenarioSpace, loss: LossFunction, budget: float,
                 a: np.ndarray) -> np.ndarray:
    """Shift a by a constant so that E[loss(-a - c)] = budget exactly."""
    def excess(c: float) -> float:
        return float(space.p @ loss(-a - c)) - budget

    lo, hi = 0.0, 1.0
    if excess(0.0) > 0:
        while excess(hi) > 0 and hi < 1e12:
            hi *= 2.0
    else:
        lo = -1.0
        while excess(lo) < 0 and lo > -1e12:
            lo *= 2.0
        lo, hi = lo, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, abs(lo), abs(hi)):
            break
    return a + hi


@dataclass(frozen=True)
class ConeShifted(AcceptanceSet):
    """base + cone(generators): acceptable up to conversions along a cone."""

    base: AcceptanceSet
    generators: np.ndarray

    def __post_init__(self):
        gens = np.atleast_2d(np.asarray(self.generators, dtype=float)).copy()
        if gens.shape[1] != self.base.dim:
            raise AcceptanceSetError("generator dimension mismatch")
        gens.flags.writeable = False
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def is_convex(self) -> bool:
        return self.base.is_convex

    @property
    def is_cone(self) -> bool:
        return self.base.is_cone

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        x = as_vector(x)
        lift = self.membership_lift()
        if lift is not None:
            return lift_feasible(lift, x, tol)
        # analytic base: minimize the base residual over the cone coefficients
        return _contains_sum_analytic([self.base, _cone_set(self.generators)], x, tol)

    def membership_lift(self) -> Optional[MembershipLift]:
        base = self.base.membership_lift()
        if base is None:
            return None
        k = self.generators.shape[0]
        # x = y + G^T lam  =>  base rows on (x - gens^T @ lam)
        ax = base.ax
        extra = -base.ax @ self.generators.T
        aaux = np.hstack([base.aaux, extra])
        bounds = tuple(base.aux_bounds) + tuple((0.0, None) for _ in range(k))
        return MembershipLift(self.dim, ax, aaux, base.b, bounds)

    def support_block(self) -> Optional[SupportBlock]:
        inner = self.base.support_block()
        if inner is None:
            return None
        cone_rows = SupportBlock(self.dim, np.zeros(0), np.zeros((0, self.dim)),
                                 np.zeros((0, 0)), self.generators, np.zeros((self.generators.shape[0], 0)), ())
        return combine_blocks(inner, cone_rows)

    def support_member(self, w, tol: float = EPS_FEAS):
        w = np.asarray(w, dtype=float)
        scale = max(1.0, float(np.abs(w).max(initial=0.0)))
        if np.any(self.generators @ w < -1e3 * tol * scale):
            return -math.inf, None
        return self.base.support_member(w, tol)


def _cone_set(generators: np.ndarray) -> "MinkowskiCone":
    return MinkowskiCone(generators)


@dataclass(frozen=True)
class MinkowskiCone(AcceptanceSet):
    """cone(generators); internal helper for sums with analytic sets.

    Not monotone in general; used only as a summand."""

    generators: np.ndarray

    @property
    def dim(self) -> int:
        return np.atleast_2d(self.generators).shape[1]

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return lift_feasible(self.membership_lift(), as_vector(x), tol)

    def membership_lift(self) -> MembershipLift:
        gens = np.atleast_2d(np.asarray(self.generators, dtype=float))
        k, n = gens.shape
        # x = gens^T lam exactly: encode with two-sided rows
        ax = np.vstack([np.eye(n), -np.eye(n)])
        aaux = np.vstack([-gens.T, gens.T])
        b = np.zeros(2 * n)
        return MembershipLift(n, ax, aaux, b, tuple((0.0, None) for _ in range(k)))


@dataclass(frozen=True)
class MinkowskiSum(AcceptanceSet):
    """Lazy A + B with joint-feasibility membership and sigma = sigma_A + sigma_B."""

    a: AcceptanceSet
    b: AcceptanceSet

    def __post_init__(self):
        if self.a.dim != self.b.dim:
            raise AcceptanceSetError("summands live in different dimensions")

    @property
    def dim(self) -> int:
        return self.a.dim

    @property
    def is_convex(self) -> bool:
        return self.a.is_convex and self.b.is_convex

    @property
    def is_cone(self) -> bool:
        return self.a.is_cone and self.b.is_cone

    @property
    def is_closed(self) -> bool:
        # closedness of a sum is not automatic; polyhedral machinery is,
        # projections of polyhedra being closed.
        return self.membership_lift() is not None

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        x = as_vector(x)
        lift = self.membership_lift()
        if lift is not None:
            return lift_feasible(lift, x, tol)
        return _contains_sum_analytic(sum_parts(self), x, tol)

    def membership_lift(self) -> Optional[MembershipLift]:
        la, lb = self.a.membership_lift(), self.b.membership_lift()
        if la is None or lb is None:
            return None
        n = self.dim
        # x = y + z: aux = (y, auxA, auxB); A rows on y, B rows on x - y
        ra, qa = la.ax.shape[0], la.naux
        rb, qb = lb.ax.shape[0], lb.naux
        ax = np.vstack([np.zeros((ra, n)), lb.ax])
        aaux = np.zeros((ra + rb, n + qa + qb))
        aaux[:ra, :n] = la.ax
        aaux[:ra, n:n + qa] = la.aaux
        aaux[ra:, :n] = -lb.ax
        aaux[ra:, n + qa:] = lb.aaux
        b = np.concatenate([la.b, lb.b])
        bounds = tuple((None, None) for _ in range(n)) + tuple(la.aux_bounds) + tuple(lb.aux_bounds)
        return MembershipLift(n, ax, aaux, b, bounds)

    def support_block(self) -> Optional[SupportBlock]:
        ba, bb = self.a.support_block(), self.b.support_block()
        if ba is None or bb is None:
            return None
        return combine_blocks(ba, bb)

    def support_member(self, w, tol: float = EPS_FEAS):
        if not self.is_convex:
            raise NonConvexSetError("sum involves a nonconvex summand")
        sa, ma = self.a.support_member(w, tol)
        sb, mb = self.b.support_member(w, tol)
        if sa == -math.inf or sb == -math.inf:
            return -math.inf, None
        return sa + sb, (ma + mb if ma is not None and mb is not None else None)


@dataclass(frozen=True)
class Preimage(AcceptanceSet):
    """{x : T @ x in base}: acceptability of a linear image of the holdings."""

    base: AcceptanceSet
    transform: np.ndarray     # (base.dim) x dim

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.transform, dtype=float)).copy()
        if t.shape[0] != self.base.dim:
            raise AcceptanceSetError("transform rows must match the base dimension")
        t.flags.writeable = False
        object.__setattr__(self, "transform", t)

    @property
    def dim(self) -> int:
        return self.transform.shape[1]

    @property
    def is_convex(self) -> bool:
        return self.base.is_convex

    @property
    def is_cone(self) -> bool:
        return self.base.is_cone

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return self.base.contains(self.transform @ as_vector(x), tol)

    def membership_lift(self) -> Optional[MembershipLift]:
        inner = self.base.membership_lift()
        if inner is None:
            return None
        return MembershipLift(self.dim, inner.ax @ self.transform, inner.aaux,
                              inner.b, inner.aux_bounds)

    def support_member(self, w, tol: float = EPS_FEAS):
        raise AcceptanceSetError("support data of a preimage set is not provided; "
                                 "work with the base set instead")


def lift_feasible(lift: MembershipLift, x: np.ndarray, tol: float = EPS_FEAS) -> bool:
    """Joint feasibility of the lift at a fixed ambient point."""
    rhs = lift.b - lift.ax @ x
    if lift.naux == 0:
        scale = np.maximum(1.0, np.abs(lift.b))
        return bool(np.all(rhs <= tol * scale))
    out = lp_solve(LinearProgram(
        c=np.zeros(lift.naux), a_ub=-lift.aaux, b_ub=-rhs + tol,
        bounds=list(lift.aux_bounds)))
    return out.status == "optimal"


def sum_parts(a: AcceptanceSet) -> list:
    """Flatten a Minkowski-sum tree into its leaf summands."""
    if isinstance(a, MinkowskiSum):
        return sum_parts(a.a) + sum_parts(a.b)
    return [a]


def _contains_sum_analytic(parts: list, x: np.ndarray, tol: float) -> bool:
    """Membership of x in a sum with exactly one analytic (loss-budget)
    summand: minimize the expected loss of the analytic side over the
    combined polyhedral lift of the others with a smooth solver.
    """
    from scipy.optimize import minimize  # local import keeps base deps light

    analytic_parts = [p for p in parts if p.membership_lift() is None]
    if len(analytic_parts) != 1 or not isinstance(analytic_parts[0], ShortfallSet):
        raise AcceptanceSetError("sum membership supports exactly one analytic "
                                 "loss-budget summand")
    analytic: ShortfallSet = analytic_parts[0]
    poly_parts = [p for p in parts if p.membership_lift() is not None]
    if not poly_parts:
        return analytic.contains(x, tol)
    combined: AcceptanceSet = poly_parts[0]
    for p in poly_parts[1:]:
        combined = MinkowskiSum(combined, p)
    lift = combined.membership_lift()
    n = analytic.dim
    space, loss, budget = analytic.space, analytic.loss, analytic.budget
    nv = n + lift.naux  # variables: z (poly member) and its aux

    def fun(v):
        z = v[:n]
        arg = -(x - z)
        return float(space.p @ loss(arg))

    def grad(v):
        z = v[:n]
        arg = -(x - z)
        g = space.p * np.asarray(loss.deriv(arg), dtype=float)
        out = np.zeros(nv)
        out[:n] = g
        return out

    cons = []
    if lift.ax.shape[0]:
        amat = np.hstack([lift.ax, lift.aaux])
        cons.append({"type": "ineq",
                     "fun": lambda v, A=amat, bb=lift.b: A @ v - bb,
                     "jac": lambda v, A=amat: A})
    bounds = [(None, None)] * n + [
        (lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
        for (lo, hi) in lift.aux_bounds]
    # start from a feasible point of the polyhedral lift
    start = lp_solve(LinearProgram(
        c=np.zeros(nv),
        a_ub=-np.hstack([lift.ax, lift.aaux]) if lift.ax.shape[0] else None,
        b_ub=-lift.b if lift.ax.shape[0] else None,
        bounds=bounds))
    if start.status != "optimal":
        return False
    res = minimize(fun, start.x, jac=grad, method="SLSQP", constraints=cons,
                   bounds=bounds, options={"maxiter": 300, "ftol": 1e-12})
    return bool(res.fun <= budget + max(1e-7, tol))
