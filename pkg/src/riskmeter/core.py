"""Finite scenario spaces, positions, linear functionals, extended-real risk values.

Positions and functionals are plain weight vectors over the scenarios;
probability-measure views (normalized weights, densities against p) are
derived on demand rather than stored.  All types are immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

EPS_FEAS = 1e-9


class DimensionError(ValueError):
    """Vector length does not match the scenario space."""


@dataclass(frozen=True)
class ScenarioSpace:
    """Finite probability space: n states with strictly positive weights."""

    p: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probability vector must be a nonempty 1-d array")
        if np.any(p <= 0):
            raise ValueError("all scenario weights must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-12 * p.size:
            raise ValueError("scenario weights must sum to one")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def check_length(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.n,):
            raise DimensionError(f"expected length {self.n}, got shape {x.shape}")
        return x

    @staticmethod
    def uniform(n: int) -> "ScenarioSpace":
        return ScenarioSpace(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class Position:
    """Payoff vector at the terminal date, one entry per scenario."""

    x: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        x.flags.writeable = False
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class LinearFunctional:
    """Raw weight vector w with pairing psi(X) = sum_i w_i x_i.

    Positivity (w >= 0 componentwise) is a queryable predicate, not an
    invariant.
    """

    w: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float)).copy()
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    def is_positive(self, tol: float = EPS_FEAS) -> bool:
        return bool(np.all(self.w >= -tol))

    def as_measure(self) -> np.ndarray:
        """Normalized view q = w / sum(w); requires positive total mass."""
        s = float(self.w.sum())
        if s <= 0:
            raise ValueError("functional has nonpositive total mass")
        return self.w / s


VectorLike = Union[np.ndarray, list, tuple, Position, LinearFunctional]


def as_vector(v: VectorLike) -> np.ndarray:
    if isinstance(v, Position):
        return v.x
    if isinstance(v, LinearFunctional):
        return v.w
    return np.atleast_1d(np.asarray(v, dtype=float))


def pair(psi: VectorLike, x: VectorLike) -> float:
    """Duality pairing sum_i w_i x_i."""
    w, v = as_vector(psi), as_vector(x)
    if w.shape != v.shape:
        raise DimensionError(f"pairing shapes differ: {w.shape} vs {v.shape}")
    return float(np.dot(w, v))


def is_strictly_positive_element(x: VectorLike) -> bool:
    """True iff every coordinate is > 0 (finite-dimensional characterization)."""
    return bool(np.all(as_vector(x) > 0))


def is_order_unit(x: VectorLike) -> bool:
    """On a finite scenario space the order units are exactly the strictly
    positive vectors (interior of the positive orthant)."""
    return is_strictly_positive_element(x)


@dataclass(frozen=True)
class RiskValue:
    """Extended-real risk value with an optional optimizer certificate.

    ``status`` is "finite", "plus_inf" or "minus_inf"; a certificate (an
    eligible payoff attaining or approaching the value) may only accompany
    a finite value.
    """

    status: str
    _value: float = 0.0
    certificate: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.status not in ("finite", "plus_inf", "minus_inf"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status != "finite" and self.certificate is not None:
            raise ValueError("certificate only allowed for finite values")
        if self.status == "finite" and not math.isfinite(self._value):
            raise ValueError("finite status with non-finite value")

    @staticmethod
    def finite(v: float, certificate: Optional[np.ndarray] = None) -> "RiskValue":
        return RiskValue("finite", float(v), certificate)

    @staticmethod
    def plus_inf() -> "RiskValue":
        return RiskValue("plus_inf")

    @staticmethod
    def minus_inf() -> "RiskValue":
        return RiskValue("minus_inf")

    @property
    def value(self) -> float:
        if self.status == "plus_inf":
            return math.inf
        if self.status == "minus_inf":
            return -math.inf
        return self._value

    @property
    def is_finite(self) -> bool:
        return self.status == "finite"

    def __repr__(self):
        if self.status == "finite":
            return f"RiskValue({self._value:.12g})"
        return f"RiskValue({'+inf' if self.status == 'plus_inf' else '-inf'})"
