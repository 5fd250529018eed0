"""Loss functions for shortfall-type acceptance, with closed-form conjugates.

Every variant is nonconstant, increasing, convex, and vanishes at zero.
Conjugates are defined for y >= 0 and return +inf outside their finite
domain; the domain endpoints are exposed so optimizers can restrict the
dual variable up front instead of probing infinities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class LossDomainError(ValueError):
    """Conjugate queried at a negative argument."""


@dataclass(frozen=True)
class LossFunction:
    """Base interface; see the concrete variants below."""

    name: str = "abstract"

    def __call__(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def conjugate(self, y):
        raise NotImplementedError

    def conjugate_deriv(self, y):
        raise NotImplementedError

    def conjugate_domain(self) -> tuple[float, float]:
        """Interval of y >= 0 on which the conjugate is finite."""
        raise NotImplementedError

    def _check_nonneg(self, y):
        if np.any(np.asarray(y) < 0):
            raise LossDomainError("conjugate is only defined for y >= 0")


@dataclass(frozen=True)
class ExponentialLoss(LossFunction):
    """l(x) = exp(x) - 1;  l*(y) = y log y - y + 1 with l*(0) = 1."""

    name: str = "exponential"

    def __call__(self, x):
        with np.errstate(over="ignore"):
            return np.exp(x) - 1.0

    def deriv(self, x):
        with np.errstate(over="ignore"):
            return np.exp(x)

    def conjugate(self, y):
        self._check_nonneg(y)
        y = np.asarray(y, dtype=float)
        safe = np.maximum(y, 1e-300)
        out = np.where(y > 0, y * np.log(safe) - y + 1.0, 1.0)
        return out if out.ndim else float(out)

    def conjugate_deriv(self, y):
        self._check_nonneg(y)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(y > 0, np.log(np.maximum(y, 1e-300)), -np.inf)
        return out if out.ndim else float(out)

    def conjugate_domain(self):
        return (0.0, math.inf)


@dataclass(frozen=True)
class PowerLoss(LossFunction):
    """l(x) = max(x, 0)**gamma / gamma + slope * x, gamma > 1, slope in [0, 1).

    Conjugate: l*(y) = (y - slope)**g' / g' for y >= slope (+inf below),
    where g' = gamma / (gamma - 1).
    """

    gamma: float = 2.0
    slope: float = 0.0
    name: str = "power"

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not (0 <= self.slope < 1):
            raise ValueError("slope must lie in [0, 1)")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.maximum(x, 0.0) ** self.gamma / self.gamma + self.slope * x
        return out if out.ndim else float(out)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.maximum(x, 0.0) ** (self.gamma - 1.0) + self.slope
        return out if out.ndim else float(out)

    def conjugate(self, y):
        self._check_nonneg(y)
        y = np.asarray(y, dtype=float)
        gp = self.gamma / (self.gamma - 1.0)
        z = y - self.slope
        out = np.where(z >= 0, np.maximum(z, 0.0) ** gp / gp, np.inf)
        return out if out.ndim else float(out)

    def conjugate_deriv(self, y):
        self._check_nonneg(y)
        y = np.asarray(y, dtype=float)
        z = y - self.slope
        out = np.where(z >= 0, np.maximum(z, 0.0) ** (1.0 / (self.gamma - 1.0)), -np.inf)
        return out if out.ndim else float(out)

    def conjugate_domain(self):
        return (float(self.slope), math.inf)


@dataclass(frozen=True)
class LinearCappedLoss(LossFunction):
    """l(x) = x for x >= 0, slope * x below; conjugate is 0 on [slope, 1].

    Piecewise linear, so only used as a fixture for primal and conjugate
    checks (its conjugate derivative carries no curvature information).
    """

    slope: float = 0.5
    name: str = "linear_capped"

    def __post_init__(self):
        if not (0 <= self.slope < 1):
            raise ValueError("slope must lie in [0, 1)")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, x, self.slope * x)
        return out if out.ndim else float(out)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, 1.0, self.slope)
        return out if out.ndim else float(out)

    def conjugate(self, y):
        self._check_nonneg(y)
        y = np.asarray(y, dtype=float)
        out = np.where((y >= self.slope) & (y <= 1.0), 0.0, np.inf)
        return out if out.ndim else float(out)

    def conjugate_deriv(self, y):
        self._check_nonneg(y)
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        return out if out.ndim else float(out)

    def conjugate_domain(self):
        return (float(self.slope), 1.0)
