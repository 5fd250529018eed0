"""Superhedging with shortfall risk over a one-period market.

The cost of a position is the least cash amount m such that, after adding
m and the gains of some admissible strategy, the expected loss stays
within the budget.  Structurally this is a cash-additive requirement with
respect to the acceptance set (loss-budget set) - (attainable gains), and
both the primal bisection and the sharpened dual over scenario densities
are provided.  Strategy sets are boxes (cone cases are boxes with a
nonnegative corner), so all inner suprema are finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import EPS_FEAS, RiskValue, ScenarioSpace, as_vector
from .acceptance import AcceptanceSet, ShortfallSet, _shortfall_support
from .losses import LossFunction
from .market import EligibleSpace
from .riskmeasure import RiskRegime, risk_dual, risk_primal
from .solver import minimize_1d


class ShortfallError(ValueError):
    pass


@dataclass(frozen=True)
class OnePeriodMarket:
    """d assets: initial prices, terminal prices per scenario, and a box of
    admissible holdings."""

    s0: np.ndarray            # d
    st: np.ndarray            # n x d
    theta_lo: np.ndarray      # d
    theta_hi: np.ndarray      # d

    def __post_init__(self):
        s0 = np.atleast_1d(np.asarray(self.s0, dtype=float))
        st = np.atleast_2d(np.asarray(self.st, dtype=float))
        lo = np.atleast_1d(np.asarray(self.theta_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.theta_hi, dtype=float))
        d = s0.shape[0]
        if st.shape[1] != d or lo.shape != (d,) or hi.shape != (d,):
            raise ShortfallError("inconsistent market dimensions")
        if np.any(hi < lo):
            raise ShortfallError("empty strategy box")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ShortfallError("strategy box must be bounded")
        for name, arr in (("s0", s0), ("st", st), ("theta_lo", lo), ("theta_hi", hi)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.s0.shape[0]

    @property
    def n(self) -> int:
        return self.st.shape[0]

    @property
    def delta(self) -> np.ndarray:
        """Per-scenario gains of one unit of each asset."""
        return self.st - self.s0[None, :]

    def gains(self, theta) -> np.ndarray:
        return self.delta @ np.asarray(theta, dtype=float)

    @staticmethod
    def zero(n: int) -> "OnePeriodMarket":
        """Degenerate market with no tradable assets (pure cash hedging)."""
        return OnePeriodMarket(np.zeros(1), np.zeros((n, 1)), np.zeros(1), np.zeros(1))


def conjugate(loss: LossFunction, y):
    """Fenchel conjugate of the loss at y >= 0 (closed form per variant)."""
    return loss.conjugate(y)


@dataclass(frozen=True)
class HedgedShortfallSet(AcceptanceSet):
    """(loss-budget set) - (attainable gains): x is acceptable when some
    admissible strategy brings the expected loss within budget."""

    space: ScenarioSpace
    loss: LossFunction
    budget: float
    market: OnePeriodMarket
    coord_tol: float = 1e-11

    def __post_init__(self):
        if self.budget <= 0:
            raise ShortfallError("loss budget must be positive")
        if self.market.n != self.space.n:
            raise ShortfallError("market scenarios do not match the space")
        if self.market.d > 5:
            raise ShortfallError("coordinate-descent inner solver supports d <= 5")

    @property
    def dim(self) -> int:
        return self.space.n

    def expected_loss(self, y, theta) -> float:
        arg = -(np.asarray(y, dtype=float) + self.market.gains(theta))
        return float(self.space.p @ self.loss(arg))

    def inner_min(self, y, vrows: Optional[np.ndarray] = None) -> float:
        """min over admissible theta (and free zero-cost coordinates) of the
        expected loss, by cyclic coordinate-wise golden-section."""
        y = np.asarray(y, dtype=float)
        d = self.market.d
        m0 = 0 if vrows is None else vrows.shape[0]
        lo = self.market.theta_lo
        hi = self.market.theta_hi
        theta = 0.5 * (lo + hi)
        dcoef = np.zeros(m0)

        def value() -> float:
            shift = vrows.T @ dcoef if m0 else 0.0
            arg = -(y + shift + self.market.gains(theta))
            return float(self.space.p @ self.loss(arg))

        best = value()
        for _ in range(200):
            prev = best
            for i in range(d):
                if hi[i] - lo[i] <= 0:
                    continue
                def f(t: float, i=i) -> float:
                    old = theta[i]
                    theta[i] = t
                    v = value()
                    theta[i] = old
                    return v
                t_star, v_star = minimize_1d(f, lo[i], hi[i], tol=1e-13, max_expand=0)
                t_star = min(max(t_star, lo[i]), hi[i])
                theta[i] = t_star
                best = min(best, v_star)
            for j in range(m0):
                def g(t: float, j=j) -> float:
                    old = dcoef[j]
                    dcoef[j] = t
                    v = value()
                    dcoef[j] = old
                    return v
                t_star, v_star = minimize_1d(g, dcoef[j] - 1.0, dcoef[j] + 1.0, tol=1e-13)
                dcoef[j] = t_star
                best = min(best, v_star)
            best = value()
            if prev - best <= self.coord_tol * max(1.0, abs(best)):
                break
        return best

    def loss_min_over(self, y, vrows: np.ndarray) -> float:
        return self.inner_min(y, vrows if vrows.shape[0] else None)

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        return self.inner_min(as_vector(x)) <= self.budget + tol

    def best_gain_against(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        """sup over admissible theta of w @ gains(theta): linear over a box."""
        t = self.market.delta.T @ w
        theta = np.where(t > 0, self.market.theta_hi, self.market.theta_lo)
        return float(t @ theta), theta

    def support_member(self, w, tol: float = EPS_FEAS):
        w = np.asarray(w, dtype=float)
        sigma_a, member_a = _shortfall_support(self.space, self.loss, self.budget, w)
        if sigma_a == -math.inf:
            return -math.inf, None
        best, theta = self.best_gain_against(w)
        member = member_a - self.market.gains(theta)
        return sigma_a - best, member


def shortfall_acceptance(space: ScenarioSpace, loss: LossFunction, budget: float,
                         market: Optional[OnePeriodMarket] = None) -> AcceptanceSet:
    """The acceptance set behind the hedged shortfall requirement; a plain
    loss-budget set when there is nothing to trade."""
    if market is None or (np.all(market.theta_lo == 0) and np.all(market.theta_hi == 0)):
        return ShortfallSet(space, loss, budget)
    return HedgedShortfallSet(space, loss, budget, market)


def _cash_regime(space: ScenarioSpace, aset: AcceptanceSet) -> RiskRegime:
    ones = np.ones((1, space.n))
    return RiskRegime(aset, EligibleSpace(space, ones, np.array([1.0])))


def shortfall_primal(space: ScenarioSpace, loss: LossFunction, budget: float,
                     market: Optional[OnePeriodMarket], x,
                     tol: float = 1e-8) -> RiskValue:
    """least m with inf_theta E[loss(-x - m - gains(theta))] <= budget."""
    aset = shortfall_acceptance(space, loss, budget, market)
    return risk_primal(_cash_regime(space, aset), as_vector(x), tol=tol)


@dataclass
class ShortfallDual:
    risk: RiskValue
    density: Optional[np.ndarray]    # maximizing dQ/dP over scenarios
    measure: Optional[np.ndarray]    # maximizing Q as scenario masses


def shortfall_dual(space: ScenarioSpace, loss: LossFunction, budget: float,
                   market: Optional[OnePeriodMarket], x,
                   tol: float = 1e-6) -> ShortfallDual:
    """max over densities of E_Q[-x] - sup_theta E_Q[gains] - inf_lam (budget
    + E[l*(lam dQ/dP)]) / lam; requires the primal to be bounded at zero."""
    aset = shortfall_acceptance(space, loss, budget, market)
    regime = _cash_regime(space, aset)
    at_zero = risk_primal(regime, np.zeros(space.n))
    if at_zero.status == "minus_inf":
        raise ShortfallError("dual representation requires a bounded cost at zero")
    out = risk_dual(regime, as_vector(x), tol=tol)
    if out.status != "ok":
        raise ShortfallError(f"dual computation degenerate: {out.status}")
    dens = meas = None
    if out.maximizer is not None:
        meas = out.maximizer
        dens = meas / space.p
    return ShortfallDual(out.risk, dens, meas)
