"""The central object: capital requirements over a set of eligible assets.

Three computation routes for the same quantity, kept deliberately
independent so they can cross-check each other:

* ``risk_primal``: minimize the price over eligible payoffs making the
  position acceptable (one LP for polyhedral-class sets, a bisection with
  inner convex feasibility for loss-budget sets, exact scenario-subset
  enumeration for the nonconvex VaR set);
* ``risk_reduced``: the single-asset reformulation over the augmented set
  A + S0, computed by monotone bisection along the designated unit;
* ``risk_dual``: the supremum of sigma_A(w) - w @ X over positive pricing
  extensions, a single joint LP when the support function embeds as an LP
  and Kelley's method otherwise.

``diagnose`` packages the no-acceptability-arbitrage, extension-existence,
good-deal and finiteness verdicts; ``properties_suite`` samples the
structural identities (domain, additivity along eligible payoffs,
monotonicity, convexity and homogeneity) on a fixed-seed population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import EPS_FEAS, RiskValue, ScenarioSpace, as_vector
from .acceptance import (AcceptanceSet, MinkowskiCone, MinkowskiSum,
                         NonConvexSetError, ShortfallSet, VaRSet)
from .market import (EligibleSpace, ExtensionPolytope, MarketError,
                     _augmented_contains, check_extension_exists,
                     check_good_deal, check_no_arbitrage, extension_polytope)
from .solver import (LinearProgram, Polytope, SolverError, bisect_feasibility,
                     cutting_plane_max, lp_solve)


class InvalidRegimeError(ValueError):
    pass


@dataclass(frozen=True)
class RiskRegime:
    """(acceptance set, eligible space, prices) on one scenario space."""

    acceptance: AcceptanceSet
    market: EligibleSpace

    def __post_init__(self):
        if self.acceptance.dim != self.market.n:
            raise InvalidRegimeError("acceptance set and market dimensions differ")

    def validate(self) -> None:
        """Regime conditions: a nonzero positive eligible payoff exists and
        is priced strictly positively; no pricing arbitrage in the span."""
        try:
            _ = self.market.unit
        except MarketError as exc:
            raise InvalidRegimeError(str(exc)) from exc
        if not check_no_arbitrage(self.market):
            raise InvalidRegimeError("pricing functional admits arbitrage on the span")

    @property
    def space(self) -> ScenarioSpace:
        return self.market.space


@dataclass
class DualOutcome:
    """Either a value with its maximizing extension, or a typed degenerate
    classification when no barrier extension exists."""

    status: str  # "ok" | "no_extensions" | "empty_barrier"
    risk: Optional[RiskValue] = None
    maximizer: Optional[np.ndarray] = None


def risk_primal(regime: RiskRegime, x, tol: float = 1e-9) -> RiskValue:
    """inf of the price over eligible payoffs whose addition makes x acceptable."""
    x = regime.space.check_length(as_vector(x))
    a = regime.acceptance
    if isinstance(a, VaRSet):
        return _primal_var(regime, x)
    lift = a.membership_lift()
    if lift is not None:
        return _primal_lp(regime, x, lift)
    return _primal_analytic(regime, x, tol)


def _primal_lp(regime: RiskRegime, x: np.ndarray, lift) -> RiskValue:
    mk = regime.market
    ax_c = lift.ax @ mk.basis.T
    a_ub = -np.hstack([ax_c, lift.aaux])
    b_ub = -(lift.b - lift.ax @ x)
    out = lp_solve(LinearProgram(
        c=np.concatenate([mk.prices, np.zeros(lift.naux)]),
        a_ub=a_ub, b_ub=b_ub,
        bounds=[(None, None)] * mk.k + list(lift.aux_bounds)))
    if out.status == "optimal":
        coeffs = out.x[: mk.k]
        return RiskValue.finite(out.value, certificate=mk.payoff(coeffs))
    if out.status == "unbounded":
        return RiskValue.minus_inf()
    return RiskValue.plus_inf()


def _primal_analytic(regime: RiskRegime, x: np.ndarray, tol: float) -> RiskValue:
    """Loss-budget sets: bisection on the amount of unit payoff, inner
    convex minimization over the zero-cost directions; the boundary root
    is polished with a bracketing root-finder.  Sums with an analytic
    summand use plain bisection on the joint membership program."""
    from scipy.optimize import brentq

    a = regime.acceptance
    mk = regime.market
    unit = mk.unit
    vrows = mk.zero_cost_basis

    if not (hasattr(a, "loss_min_over") or isinstance(a, ShortfallSet)):
        def member_oracle(m: float) -> bool:
            return _augmented_contains(a, x + m * unit, vrows)
        m_star = bisect_feasibility(member_oracle, -1.0, 1.0, tol=max(tol, 1e-9))
        if m_star == -math.inf:
            return RiskValue.minus_inf()
        if m_star == math.inf:
            return RiskValue.plus_inf()
        return RiskValue.finite(m_star, certificate=m_star * unit)

    def inner_min(m: float) -> float:
        if hasattr(a, "loss_min_over"):
            return a.loss_min_over(x + m * unit, vrows)
        from .market import _shortfall_min_over
        return _shortfall_min_over(a, x + m * unit, vrows)

    budget = a.budget

    def oracle(m: float) -> bool:
        return inner_min(m) <= budget

    rough = bisect_feasibility(oracle, -1.0, 1.0, tol=1e-4)
    if rough == -math.inf:
        return RiskValue.minus_inf()
    if rough == math.inf:
        return RiskValue.plus_inf()
    lo, hi = rough - 1e-3, rough + 1e-3
    flo, fhi = inner_min(lo) - budget, inner_min(hi) - budget
    if flo <= 0:  # already feasible at lo; widen down
        while flo <= 0 and lo > rough - 10.0:
            lo -= 0.1
            flo = inner_min(lo) - budget
    if fhi > 0:
        while fhi > 0 and hi < rough + 10.0:
            hi += 0.1
            fhi = inner_min(hi) - budget
    if flo <= 0 or fhi > 0:
        # fall back to the bisection value
        m_star = bisect_feasibility(oracle, rough - 1.0, rough + 1.0, tol=tol)
        return RiskValue.finite(m_star, certificate=m_star * unit)
    m_star = float(brentq(lambda m: inner_min(m) - budget, lo, hi, xtol=1e-12, rtol=1e-15))
    return RiskValue.finite(m_star, certificate=m_star * unit)


def _var_maximal_subsets(p: np.ndarray, beta: float) -> list[tuple[int, ...]]:
    """Inclusion-maximal scenario sets with mass <= beta (deterministic order)."""
    n = p.shape[0]
    if n > 20:
        raise InvalidRegimeError("VaR enumeration requires at most 20 scenarios")
    out: list[tuple[int, ...]] = []

    def rec(start: int, chosen: tuple[int, ...], mass: float) -> None:
        maximal = True
        for i in range(n):
            if i in chosen:
                continue
            if mass + p[i] <= beta + 1e-12:
                maximal = False
                break
        if maximal:
            out.append(chosen)
        for i in range(start, n):
            if mass + p[i] <= beta + 1e-12:
                rec(i + 1, chosen + (i,), mass + p[i])

    rec(0, (), 0.0)
    # drop dominated duplicates (subsets appended before extension)
    keep = []
    seen = set()
    for s in out:
        fs = frozenset(s)
        if fs in seen:
            continue
        seen.add(fs)
        keep.append(s)
    maximal_only = [s for s in keep
                    if not any(set(s) < set(t) for t in keep if t != s)]
    return maximal_only


def _primal_var(regime: RiskRegime, x: np.ndarray) -> RiskValue:
    a: VaRSet = regime.acceptance  # type: ignore[assignment]
    mk = regime.market
    subsets = _var_maximal_subsets(regime.space.p, a.beta)
    best = math.inf
    best_coeffs = None
    for sub in subsets:
        keep = np.setdiff1d(np.arange(regime.space.n), np.asarray(sub, dtype=int))
        if keep.size == 0:
            return RiskValue.minus_inf()
        rows = mk.basis.T[keep, :]
        out = lp_solve(LinearProgram(
            c=mk.prices, a_ub=-rows, b_ub=x[keep],
            bounds=[(None, None)] * mk.k))
        if out.status == "unbounded":
            return RiskValue.minus_inf()
        if out.status == "optimal" and out.value < best:
            best = out.value
            best_coeffs = out.x
    if best_coeffs is None:
        return RiskValue.plus_inf()
    return RiskValue.finite(best, certificate=mk.payoff(best_coeffs))


def risk_reduced(regime: RiskRegime, x, tol: float = 1e-9) -> RiskValue:
    """Single-asset route: inf{m : x + m*U in A + S0} by monotone bisection."""
    x = regime.space.check_length(as_vector(x))
    a = regime.acceptance
    mk = regime.market
    unit = mk.unit
    vrows = mk.zero_cost_basis

    oracle = _augmented_membership_oracle(a, mk, x, unit, vrows)
    m_star = bisect_feasibility(oracle, -1.0, 1.0, tol=tol)
    if m_star == -math.inf:
        return RiskValue.minus_inf()
    if m_star == math.inf:
        return RiskValue.plus_inf()
    return RiskValue.finite(m_star, certificate=m_star * unit)


def _augmented_membership_oracle(a: AcceptanceSet, mk: EligibleSpace,
                                 x: np.ndarray, unit: np.ndarray,
                                 vrows: np.ndarray):
    """m -> (x + m*unit in A + S0), with per-variant fast paths."""
    lift = a.membership_lift()
    if lift is not None:
        m0 = vrows.shape[0]
        ax_d = lift.ax @ vrows.T if m0 else np.zeros((lift.ax.shape[0], 0))
        a_ub = -np.hstack([ax_d, lift.aaux])
        b0 = lift.b - lift.ax @ x
        au = lift.ax @ unit
        nvars = m0 + lift.naux
        bounds = [(None, None)] * m0 + list(lift.aux_bounds)
        if nvars == 0:
            def oracle(m: float) -> bool:
                resid = b0 - m * au
                return bool(np.all(resid <= EPS_FEAS * np.maximum(1.0, np.abs(lift.b))))
            return oracle

        def oracle(m: float) -> bool:
            out = lp_solve(LinearProgram(
                c=np.zeros(nvars), a_ub=a_ub, b_ub=-(b0 - m * au),
                bounds=bounds))
            return out.status == "optimal"
        return oracle

    if isinstance(a, VaRSet):
        subsets = _var_maximal_subsets(mk.space.p, a.beta)
        n = mk.space.n
        m0 = vrows.shape[0]

        def oracle(m: float) -> bool:
            y = x + m * unit
            if m0 == 0:
                from .acceptance import value_at_risk
                return value_at_risk(mk.space, y, a.beta) <= EPS_FEAS
            for sub in subsets:
                keep = np.setdiff1d(np.arange(n), np.asarray(sub, dtype=int))
                if keep.size == 0:
                    return True
                out = lp_solve(LinearProgram(
                    c=np.zeros(m0), a_ub=-vrows.T[keep, :], b_ub=y[keep] + EPS_FEAS,
                    bounds=[(None, None)] * m0))
                if out.status == "optimal":
                    return True
            return False
        return oracle

    def oracle(m: float) -> bool:
        return _augmented_contains(a, x + m * unit, vrows)
    return oracle


def risk_dual(regime: RiskRegime, x, tol: float = 1e-6,
              extra_w_rows: Optional[np.ndarray] = None) -> DualOutcome:
    """sup over positive pricing extensions of sigma_A(w) - w @ x.

    ``extra_w_rows`` restricts the optimization domain with additional
    homogeneous constraints rows @ w >= 0 (e.g. terminal-cone dual rows).
    """
    x = regime.space.check_length(as_vector(x))
    a = regime.acceptance
    if not a.is_convex:
        raise NonConvexSetError("dual representation requires a convex acceptance set")
    epoly = extension_polytope(regime.market)
    if epoly.is_empty():
        return DualOutcome(status="no_extensions")
    block = a.support_block()
    if block is not None:
        return _dual_joint_lp(regime, x, block, extra_w_rows)
    return _dual_cutting_plane(regime, x, epoly, tol, extra_w_rows)


def _dual_joint_lp(regime: RiskRegime, x: np.ndarray, block,
                   extra_w_rows: Optional[np.ndarray] = None) -> DualOutcome:
    mk = regime.market
    n, q = mk.n, block.q
    a_eq_top = np.hstack([mk.basis, np.zeros((mk.k, q))])
    parts = [a_eq_top]
    b_eq = [mk.prices]
    if block.eq_w.shape[0]:
        parts.append(np.hstack([block.eq_w, block.eq_mu]))
        b_eq.append(np.zeros(block.eq_w.shape[0]))
    a_eq = np.vstack(parts)
    b_eq = np.concatenate(b_eq)
    ge_w, ge_mu = block.ge_w, block.ge_mu
    if extra_w_rows is not None and extra_w_rows.size:
        ge_w = np.vstack([ge_w, extra_w_rows])
        ge_mu = np.vstack([ge_mu, np.zeros((extra_w_rows.shape[0], q))])
    a_ub = b_ub = None
    if ge_w.shape[0]:
        a_ub = -np.hstack([ge_w, ge_mu])
        b_ub = np.zeros(ge_w.shape[0])
    # minimize w @ x - obj @ mu
    out = lp_solve(LinearProgram(
        c=np.concatenate([x, -block.obj]),
        a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq,
        bounds=[(0.0, None)] * n + list(block.mu_bounds)))
    if out.status == "optimal":
        w = out.x[:n]
        return DualOutcome(status="ok", risk=RiskValue.finite(-out.value),
                           maximizer=w)
    if out.status == "unbounded":
        return DualOutcome(status="ok", risk=RiskValue.plus_inf())
    return DualOutcome(status="empty_barrier")


def _dual_cutting_plane(regime: RiskRegime, x: np.ndarray,
                        epoly: ExtensionPolytope, tol: float,
                        extra_w_rows: Optional[np.ndarray] = None) -> DualOutcome:
    a = regime.acceptance
    mk = regime.market
    n = mk.n
    if not epoly.is_bounded():
        raise MarketError("cutting-plane dual needs a bounded extension polytope")
    w_ref = epoly.feasible_point()
    sigma_ref, _ = a.support_member(w_ref)
    if sigma_ref == -math.inf:
        # try an interior reference (strictly positive extension)
        out = lp_solve(LinearProgram(
            c=np.concatenate([np.zeros(n), [-1.0]]),
            a_ub=np.hstack([-np.eye(n), np.ones((n, 1))]), b_ub=np.zeros(n),
            a_eq=np.hstack([mk.basis, np.zeros((mk.k, 1))]), b_eq=mk.prices,
            bounds=[(0.0, None)] * n + [(0.0, None)]))
        if out.status != "optimal" or out.x[n] <= 1e-12:
            return DualOutcome(status="empty_barrier")
        w_ref = out.x[:n]

    def f_and_grad(w: np.ndarray):
        sigma, member = a.support_member(w)
        if sigma == -math.inf:
            w2 = 0.999 * w + 0.001 * w_ref
            sigma, member = a.support_member(w2)
            if sigma == -math.inf:
                raise SolverError("support function unbounded near the domain")
            return sigma - float(w2 @ x), member - x
        return sigma - float(w @ x), member - x

    a_ub = b_ub = None
    if extra_w_rows is not None and extra_w_rows.size:
        a_ub = -extra_w_rows
        b_ub = np.zeros(extra_w_rows.shape[0])
    domain = Polytope(dim=n, a_ub=a_ub, b_ub=b_ub, a_eq=mk.basis, b_eq=mk.prices,
                      bounds=[(0.0, None)] * n)
    w_star, val = cutting_plane_max(f_and_grad, domain, tol=tol)
    return DualOutcome(status="ok", risk=RiskValue.finite(val), maximizer=w_star)


@dataclass(frozen=True)
class Diagnosis:
    arbitrage_free: bool
    extension_exists: bool
    good_deal_free: bool
    finiteness: str           # "finite_everywhere" | "degenerate_plus_minus" | "unknown"
    lsc_sufficient: bool


def contains_strictly_positive(market: EligibleSpace) -> bool:
    """Does the span contain a payoff with all coordinates > 0?"""
    k, n = market.k, market.n
    out = lp_solve(LinearProgram(
        c=np.concatenate([np.zeros(k), [-1.0]]),
        a_ub=np.hstack([-market.basis.T, np.ones((n, 1))]), b_ub=np.zeros(n),
        bounds=[(-1.0, 1.0)] * k + [(0.0, None)]))
    return out.status == "optimal" and out.x[k] > 1e-9


def diagnose(regime: RiskRegime) -> Diagnosis:
    a = regime.acceptance
    mk = regime.market
    rho0 = risk_primal(regime, np.zeros(regime.space.n))
    arbitrage_free = rho0.status != "minus_inf"
    if a.is_convex:
        try:
            report = check_extension_exists(a, mk)
            extension_exists = report.exists
        except MarketError:
            extension_exists = False
        good_deal_free = check_good_deal(a, mk)
    else:
        extension_exists = False
        good_deal_free = _var_good_deal_free(regime)
    intersects = rho0.status != "plus_inf"  # A and S meet iff rho(0) < inf
    if arbitrage_free and intersects and contains_strictly_positive(mk):
        finiteness = "finite_everywhere"
    elif not extension_exists and a.is_convex:
        finiteness = "degenerate_plus_minus"
    else:
        finiteness = "unknown"
    lsc = _lsc_sufficient(a, good_deal_free)
    return Diagnosis(arbitrage_free, extension_exists, good_deal_free,
                     finiteness, lsc)


def _lsc_sufficient(a: AcceptanceSet, good_deal_free: bool) -> bool:
    if a.membership_lift() is not None:
        # polyhedral-class: the augmented set is a projected polyhedron,
        # hence closed, hence the risk measure is lower semicontinuous
        return True
    zero_in = a.is_convex and a.contains(np.zeros(a.dim))
    return a.is_closed and good_deal_free and (a.is_cone or zero_in)


def _var_good_deal_free(regime: RiskRegime) -> bool:
    """The VaR set is a union of orthant-like pieces, one per maximal
    scenario subset; good deals are absent iff every piece meets the
    zero-cost subspace only at zero."""
    from .acceptance import MembershipLift
    from .market import _coordinate_range_zero

    a: VaRSet = regime.acceptance  # type: ignore[assignment]
    mk = regime.market
    vrows = mk.zero_cost_basis
    if vrows.shape[0] == 0:
        return True
    subsets = _var_maximal_subsets(regime.space.p, a.beta)
    n = regime.space.n
    for sub in subsets:
        keep = np.setdiff1d(np.arange(n), np.asarray(sub, dtype=int))
        if keep.size == 0:
            return False
        lift = MembershipLift(n, np.eye(n)[keep], np.zeros((keep.size, 0)),
                              np.zeros(keep.size))
        if not _coordinate_range_zero(lift, vrows, EPS_FEAS):
            return False
    return True


@dataclass
class PropertyCheck:
    name: str
    samples: int
    violations: int
    worst: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class PropertiesReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def properties_suite(regime: RiskRegime, seed: int = 0, samples: int = 60,
                     tol: float = 1e-7) -> PropertiesReport:
    """Sampled structural identities for a finite-valued fixture regime."""
    rng = np.random.default_rng(seed)
    n = regime.space.n
    mk = regime.market
    a = regime.acceptance
    checks: list[PropertyCheck] = []

    def rho(v) -> float:
        return risk_primal(regime, v).value

    base_x = [rng.normal(scale=1.0, size=n) for _ in range(samples)]

    # eligible-payoff additivity: rho(x + z) = rho(x) - price(z)
    viol, worst = 0, 0.0
    for x in base_x[: samples // 2]:
        coeff = rng.normal(size=mk.k)
        z = mk.payoff(coeff)
        lhs = rho(x + z)
        rhs = rho(x) - mk.price_of_coeffs(coeff)
        if math.isfinite(lhs) and math.isfinite(rhs):
            gap = abs(lhs - rhs)
            worst = max(worst, gap)
            viol += gap > tol
    checks.append(PropertyCheck("eligible_additivity", samples // 2, viol, worst))

    # monotonicity: x <= y implies rho(x) >= rho(y)
    viol, worst = 0, 0.0
    for x in base_x[: samples // 2]:
        y = x + np.abs(rng.normal(size=n))
        rx, ry = rho(x), rho(y)
        gap = ry - rx
        if math.isfinite(gap):
            worst = max(worst, gap)
            viol += gap > tol
    checks.append(PropertyCheck("monotonicity", samples // 2, viol, worst))

    if a.is_convex:
        viol, worst = 0, 0.0
        for x in base_x[: samples // 3]:
            y = rng.normal(scale=1.0, size=n)
            lam = rng.uniform(0.2, 0.8)
            mix = rho(lam * x + (1 - lam) * y)
            bound = lam * rho(x) + (1 - lam) * rho(y)
            if math.isfinite(mix) and math.isfinite(bound):
                gap = mix - bound
                worst = max(worst, gap)
                viol += gap > tol
        checks.append(PropertyCheck("convexity", samples // 3, viol, worst))

    if a.is_cone:
        viol, worst = 0, 0.0
        for x in base_x[: samples // 3]:
            lam = rng.uniform(0.5, 3.0)
            lhs, rhs = rho(lam * x), lam * rho(x)
            if math.isfinite(lhs) and math.isfinite(rhs):
                gap = abs(lhs - rhs)
                worst = max(worst, gap)
                viol += gap > max(tol, tol * abs(rhs))
        checks.append(PropertyCheck("positive_homogeneity", samples // 3, viol, worst))

    # domain: rho(x) < inf iff x in A + S (cross-membership probes)
    viol, worst = 0, 0.0
    half = samples // 2
    for i, x in enumerate(base_x[:half]):
        if i % 2 == 0:
            # manufacture a domain point: acceptable payoff plus eligible payoff
            member = _any_member(a, rng)
            if member is None:
                continue
            probe = member + mk.payoff(rng.normal(size=mk.k))
            viol += rho(probe) == math.inf
        else:
            in_dom = _augmented_contains(a, x, mk.basis, tol=1e-7)
            viol += (rho(x) < math.inf) != in_dom
    checks.append(PropertyCheck("domain_is_A_plus_S", half, viol, worst))

    # feasible price interval is unbounded to the right
    viol = 0
    for x in base_x[: samples // 4]:
        val = rho(x)
        if not math.isfinite(val):
            continue
        z = risk_primal(regime, x).certificate
        if z is None:
            continue
        for tshift in (0.5, 2.0):
            zz = z + tshift * mk.unit
            if not a.contains(x + zz, tol=1e-6):
                viol += 1
    checks.append(PropertyCheck("right_unbounded_interval", samples // 4, viol, 0.0))
    return PropertiesReport(checks)


def _any_member(a: AcceptanceSet, rng) -> Optional[np.ndarray]:
    lift = a.membership_lift()
    if lift is not None:
        n = a.dim
        out = lp_solve(LinearProgram(
            c=np.concatenate([rng.normal(size=n), np.zeros(lift.naux)]),
            a_ub=-np.hstack([lift.ax, lift.aaux]), b_ub=-lift.b,
            bounds=[(-50.0, 50.0)] * n + list(lift.aux_bounds)))
        if out.status == "optimal":
            return out.x[: a.dim]
        return None
    if a.contains(np.zeros(a.dim)):
        return np.zeros(a.dim)
    return None
