"""Optimal risk sharing across business lines via infimal convolution.

Two lines with single-asset requirements split a position; the least
total capital equals the multi-asset requirement of the summed acceptance
set over the span of the two units.  Three routes are provided (direct
split program, sum-set reduction, dual over shared extensions) plus the
pairwise fold for more than two lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import EPS_FEAS, RiskValue, ScenarioSpace, as_vector
from .acceptance import AcceptanceSet, MinkowskiSum, ShortfallSet
from .market import EligibleSpace, MarketError
from .riskmeasure import (DualOutcome, RiskRegime, contains_strictly_positive,
                          risk_dual, risk_primal)
from .solver import LinearProgram, lp_solve


class SharingError(ValueError):
    pass


@dataclass(frozen=True)
class BusinessLine:
    """Single-asset requirement: acceptance set plus a priced unit payoff."""

    acceptance: AcceptanceSet
    unit: np.ndarray
    unit_price: float

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.unit, dtype=float)).copy()
        if np.any(u < 0) or not np.any(u > 0):
            raise SharingError("unit payoff must be nonzero and nonnegative")
        if self.unit_price <= 0:
            raise SharingError("unit price must be positive (no arbitrage)")
        u.flags.writeable = False
        object.__setattr__(self, "unit", u)


@dataclass(frozen=True)
class SharingProblem:
    space: ScenarioSpace
    line_a: BusinessLine
    line_b: BusinessLine

    def __post_init__(self):
        for line in (self.line_a, self.line_b):
            if line.acceptance.dim != self.space.n or line.unit.shape[0] != self.space.n:
                raise SharingError("lines must live on the shared scenario space")

    def single_regime(self, line: BusinessLine) -> RiskRegime:
        mk = EligibleSpace(self.space, line.unit.reshape(1, -1),
                           np.array([line.unit_price]))
        return RiskRegime(line.acceptance, mk)

    def span_market(self) -> EligibleSpace:
        return span_market(self.space,
                           [self.line_a.unit, self.line_b.unit],
                           [self.line_a.unit_price, self.line_b.unit_price])

    def sum_regime(self) -> RiskRegime:
        return RiskRegime(MinkowskiSum(self.line_a.acceptance, self.line_b.acceptance),
                          self.span_market())


def span_market(space: ScenarioSpace, payoffs: Sequence[np.ndarray],
                prices: Sequence[float]) -> EligibleSpace:
    """Eligible space spanned by possibly dependent payoffs; dependent rows
    must carry consistent implied prices."""
    rows: list[np.ndarray] = []
    kept_prices: list[float] = []
    for z, price in zip(payoffs, prices):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if not rows:
            rows.append(z)
            kept_prices.append(float(price))
            continue
        basis = np.asarray(rows)
        coeffs, res, rank, _ = np.linalg.lstsq(basis.T, z, rcond=None)
        resid = basis.T @ coeffs - z
        if np.abs(resid).max() <= 1e-9 * max(1.0, np.abs(z).max()):
            implied = float(coeffs @ kept_prices)
            if abs(implied - price) > 1e-9 * max(1.0, abs(price)):
                raise SharingError("linearly dependent payoffs with inconsistent prices")
            continue
        rows.append(z)
        kept_prices.append(float(price))
    return EligibleSpace(space, np.asarray(rows), np.asarray(kept_prices))


def infconv_direct(problem: SharingProblem, x, tol: float = EPS_FEAS) -> RiskValue:
    """min over splits (y, x - y) of the summed single-asset requirements,
    as one joint program over the allocation and the two unit amounts."""
    x = problem.space.check_length(as_vector(x))
    a, b = problem.line_a, problem.line_b
    la = a.acceptance.membership_lift()
    lb = b.acceptance.membership_lift()
    if la is not None and lb is not None:
        return _direct_lp(problem, x, la, lb)
    return _direct_convex(problem, x)


def _direct_lp(problem: SharingProblem, x: np.ndarray, la, lb) -> RiskValue:
    n = problem.space.n
    a, b = problem.line_a, problem.line_b
    ra, rb = la.ax.shape[0], lb.ax.shape[0]
    qa, qb = la.naux, lb.naux
    # variables: y (n, free), s (amount of unit a), t (amount of unit b), auxA, auxB
    nv = n + 2 + qa + qb
    a_ub = np.zeros((ra + rb, nv))
    a_ub[:ra, :n] = -la.ax
    a_ub[:ra, n] = -(la.ax @ a.unit)
    a_ub[:ra, n + 2:n + 2 + qa] = -la.aaux
    b_ub = np.concatenate([-la.b, -(lb.b - lb.ax @ x)])
    a_ub[ra:, :n] = lb.ax
    a_ub[ra:, n + 1] = -(lb.ax @ b.unit)
    a_ub[ra:, n + 2 + qa:] = -lb.aaux
    c = np.zeros(nv)
    c[n] = a.unit_price
    c[n + 1] = b.unit_price
    bounds = [(None, None)] * (n + 2) + list(la.aux_bounds) + list(lb.aux_bounds)
    out = lp_solve(LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, bounds=bounds))
    if out.status == "optimal":
        s, t = out.x[n], out.x[n + 1]
        return RiskValue.finite(out.value, certificate=s * a.unit + t * b.unit)
    if out.status == "unbounded":
        return RiskValue.minus_inf()
    return RiskValue.plus_inf()


def _direct_convex(problem: SharingProblem, x: np.ndarray) -> RiskValue:
    """Mixed split with one loss-budget line: smooth program over the
    allocation, the unit amounts, and the polyhedral line's certificate."""
    from scipy.optimize import minimize

    a, b = problem.line_a, problem.line_b
    if isinstance(b.acceptance, ShortfallSet) and not isinstance(a.acceptance, ShortfallSet):
        a, b = b, a
        flip = True
    else:
        flip = False
    if not isinstance(a.acceptance, ShortfallSet):
        raise SharingError("direct split supports at most one analytic line")
    lift = b.acceptance.membership_lift()
    if lift is None:
        raise SharingError("direct split of two analytic lines is not supported")
    sset: ShortfallSet = a.acceptance
    space = problem.space
    n = space.n
    qb = lift.naux
    # variables: y (allocation to the analytic line), s, t, auxB
    nv = n + 2 + qb

    def fun(v):
        return a.unit_price * v[n] + b.unit_price * v[n + 1]

    def jac(v):
        g = np.zeros(nv)
        g[n] = a.unit_price
        g[n + 1] = b.unit_price
        return g

    def loss_con(v):
        y, s = v[:n], v[n]
        return sset.budget - float(space.p @ sset.loss(-(y + s * a.unit)))

    def loss_jac(v):
        y, s = v[:n], v[n]
        d = space.p * np.asarray(sset.loss.deriv(-(y + s * a.unit)), dtype=float)
        g = np.zeros(nv)
        g[:n] = d
        g[n] = float(d @ a.unit)
        return g

    cons = [{"type": "ineq", "fun": loss_con, "jac": loss_jac}]
    if lift.ax.shape[0]:
        rows = np.zeros((lift.ax.shape[0], nv))
        rows[:, :n] = -lift.ax
        rows[:, n + 1] = lift.ax @ b.unit
        rows[:, n + 2:] = lift.aaux
        rhs = lift.b - lift.ax @ x
        cons.append({"type": "ineq",
                     "fun": lambda v, R=rows, r=rhs: R @ v - r,
                     "jac": lambda v, R=rows: R})
    bounds = [(None, None)] * (n + 2) + [
        (lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
        for (lo, hi) in lift.aux_bounds]
    v0 = np.zeros(nv)
    v0[n] = 1.0
    v0[n + 1] = 1.0
    res = minimize(fun, v0, jac=jac, method="SLSQP", constraints=cons, bounds=bounds,
                   options={"maxiter": 500, "ftol": 1e-12})
    if not res.success:
        raise SharingError(f"direct split solver failed: {res.message}")
    s, t = res.x[n], res.x[n + 1]
    cert = s * a.unit + t * b.unit if not flip else t * b.unit + s * a.unit
    return RiskValue.finite(float(res.fun), certificate=cert)


def infconv_via_sum(problem: SharingProblem, x) -> RiskValue:
    """The sum-set identity: the convolution equals the multi-asset risk of
    A + B over the span of the two units."""
    return risk_primal(problem.sum_regime(), as_vector(x))


def infconv_dual(problem: SharingProblem, x, tol: float = 1e-6) -> DualOutcome:
    """max over shared extensions of sigma_A + sigma_B - w @ x, after
    checking the representation's hypotheses."""
    reg = problem.sum_regime()
    if not (problem.line_a.acceptance.is_convex and problem.line_b.acceptance.is_convex):
        raise SharingError("dual sharing requires convex acceptance sets")
    if _no_member(problem.line_a.acceptance):
        raise SharingError("first line's acceptance set appears empty (interior test)")
    if not contains_strictly_positive(reg.market):
        raise SharingError("span of the units contains no strictly positive payoff")
    at_zero = risk_primal(reg, np.zeros(problem.space.n))
    if at_zero.status == "minus_inf":
        raise SharingError("aggregate requirement unbounded at zero; dual unavailable")
    return risk_dual(reg, as_vector(x), tol=tol)


def _no_member(a: AcceptanceSet) -> bool:
    # monotone nonempty sets on a finite space always have interior points;
    # emptiness is the only obstruction
    if a.contains(np.zeros(a.dim)):
        return False
    lift = a.membership_lift()
    if lift is None:
        return False
    out = lp_solve(LinearProgram(
        c=np.zeros(a.dim + lift.naux),
        a_ub=-np.hstack([lift.ax, lift.aaux]), b_ub=-lift.b,
        bounds=[(None, None)] * a.dim + list(lift.aux_bounds)))
    return out.status != "optimal"


def infconv_fold(space: ScenarioSpace, lines: Sequence[BusinessLine], x) -> RiskValue:
    """More than two lines: fold pairwise sums (associativity sampled in
    the test suite)."""
    if len(lines) < 2:
        raise SharingError("need at least two lines to share")
    aset: AcceptanceSet = lines[0].acceptance
    payoffs = [lines[0].unit]
    prices = [lines[0].unit_price]
    for line in lines[1:]:
        aset = MinkowskiSum(aset, line.acceptance)
        payoffs.append(line.unit)
        prices.append(line.unit_price)
    mk = span_market(space, payoffs, prices)
    return risk_primal(RiskRegime(aset, mk), as_vector(x))
