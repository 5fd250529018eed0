"""Self-contained numerical engines.

A dense two-phase simplex solver with Bland's anti-cycling rule (so that
identical inputs always produce bit-identical outputs), a golden-section
minimizer for one-dimensional convex functions, a monotone feasibility
bisection with +-inf sentinels, and a Kelley cutting-plane maximizer for
concave objectives over bounded polytopes.

Intended scale is small/medium dense problems (hundreds of variables and
rows).  Unbounded and infeasible outcomes are first-class results, not
exceptions: callers map them to extended-real risk values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-10
_RC_TOL = 1e-10

Bound = tuple[Optional[float], Optional[float]]


class SolverError(Exception):
    """Malformed problem data or iteration failure."""


@dataclass(frozen=True)
class LinearProgram:
    """min c @ x  s.t.  a_ub @ x <= b_ub,  a_eq @ x = b_eq,  lo <= x <= hi.

    ``bounds`` is one pair per variable; ``None`` means unbounded on that
    side.  Omitted bounds default to ``(0, None)``.
    """

    c: np.ndarray
    a_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    a_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    bounds: Optional[Sequence[Bound]] = None


@dataclass
class LPOutcome:
    """Result of ``lp_solve``.

    status: "optimal" | "unbounded" | "infeasible".
    On "optimal": value, x, row duals (dual_ub <= 0, dual_eq free) and the
    dual objective value for strong-duality checks.  On "unbounded": a ray
    r with c@r < 0 feasible for the homogeneous constraints.  On
    "infeasible": a Farkas certificate (y_ub <= 0, y_eq) whose positive
    ``farkas_margin`` witnesses that no feasible point exists.
    """

    status: str
    value: Optional[float] = None
    x: Optional[np.ndarray] = None
    dual_ub: Optional[np.ndarray] = None
    dual_eq: Optional[np.ndarray] = None
    dual_value: Optional[float] = None
    ray: Optional[np.ndarray] = None
    farkas_ub: Optional[np.ndarray] = None
    farkas_eq: Optional[np.ndarray] = None
    farkas_margin: Optional[float] = None


def _as_matrix(a, ncols: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, ncols))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[1] != ncols:
        raise SolverError(f"{name} has {a.shape[1]} columns, expected {ncols}")
    if not np.all(np.isfinite(a)):
        raise SolverError(f"{name} contains non-finite coefficients")
    return a


def _as_vector(b, nrows: int, name: str) -> np.ndarray:
    if b is None:
        return np.zeros(0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (nrows,):
        raise SolverError(f"{name} has shape {b.shape}, expected ({nrows},)")
    if not np.all(np.isfinite(b)):
        raise SolverError(f"{name} contains non-finite entries")
    return b


@dataclass
class _Standardized:
    """Bookkeeping for the standard-form transformation x = T(t), t >= 0."""

    a: np.ndarray            # all-equality constraint matrix over t (slacks included)
    b: np.ndarray
    c: np.ndarray
    c_offset: float
    n_struct: int            # structural columns (before slacks)
    col_var: list            # per structural column: (orig index, sign, shift)
    row_kind: list           # per row: ("ub", i) | ("eq", i) | ("box", j)
    row_sign: np.ndarray     # +-1 applied to make b >= 0
    slack_col: np.ndarray    # slack column index per row, -1 if none


def _standardize(lp: LinearProgram) -> _Standardized:
    c = np.atleast_1d(np.asarray(lp.c, dtype=float))
    n = c.shape[0]
    if not np.all(np.isfinite(c)):
        raise SolverError("objective contains non-finite coefficients")
    a_ub = _as_matrix(lp.a_ub, n, "a_ub")
    b_ub = _as_vector(lp.b_ub, a_ub.shape[0], "b_ub")
    a_eq = _as_matrix(lp.a_eq, n, "a_eq")
    b_eq = _as_vector(lp.b_eq, a_eq.shape[0], "b_eq")
    bounds = list(lp.bounds) if lp.bounds is not None else [(0.0, None)] * n
    if len(bounds) != n:
        raise SolverError("bounds length does not match objective")

    cols: list[np.ndarray] = []
    ccols: list[float] = []
    col_var: list = []
    offset = 0.0
    box_rows: list[tuple[int, float]] = []  # (structural col, width) for two-sided vars
    a_full = np.vstack([a_ub, a_eq]) if (a_ub.size or a_eq.size) else np.zeros((0, n))

    for j, (lo, hi) in enumerate(bounds):
        col = a_full[:, j] if a_full.size else np.zeros(0)
        if lo is not None and math.isinf(lo):
            lo = None
        if hi is not None and math.isinf(hi):
            hi = None
        if lo is not None:
            # x = lo + t
            cols.append(col)
            ccols.append(c[j])
            col_var.append((j, 1.0, float(lo)))
            offset += c[j] * lo
            if hi is not None:
                if hi < lo - FEAS_TOL:
                    raise SolverError(f"variable {j} has empty bound interval")
                box_rows.append((len(cols) - 1, float(hi - lo)))
        elif hi is not None:
            # x = hi - t
            cols.append(-col)
            ccols.append(-c[j])
            col_var.append((j, -1.0, float(hi)))
            offset += c[j] * hi
        else:
            # free: x = t+ - t-
            cols.append(col)
            ccols.append(c[j])
            col_var.append((j, 1.0, 0.0))
            cols.append(-col)
            ccols.append(-c[j])
            col_var.append((j, -1.0, 0.0))

    n_struct = len(cols)
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq + len(box_rows)
    a_std = np.zeros((m, n_struct))
    if m_ub + m_eq:
        a_std[: m_ub + m_eq, :] = np.column_stack(cols) if n_struct else np.zeros((m_ub + m_eq, 0))
    b_std = np.zeros(m)
    row_kind: list = []
    # constant shift of each row from the bound substitutions
    shift = np.zeros(m_ub + m_eq)
    for j, (lo, hi) in enumerate(bounds):
        lo = None if (lo is not None and math.isinf(lo)) else lo
        hi = None if (hi is not None and math.isinf(hi)) else hi
        base = lo if lo is not None else (hi if hi is not None else 0.0)
        if base and (m_ub + m_eq):
            shift += a_full[:, j] * base

    for i in range(m_ub):
        b_std[i] = b_ub[i] - shift[i]
        row_kind.append(("ub", i))
    for i in range(m_eq):
        b_std[m_ub + i] = b_eq[i] - shift[m_ub + i]
        row_kind.append(("eq", i))
    for r, (jcol, width) in enumerate(box_rows):
        i = m_ub + m_eq + r
        a_std[i, jcol] = 1.0
        b_std[i] = width
        row_kind.append(("box", jcol))

    # slacks for inequality-type rows (ub and box)
    slack_col = np.full(m, -1, dtype=int)
    n_slack = sum(1 for k in row_kind if k[0] != "eq")
    a_slk = np.zeros((m, n_slack))
    s = 0
    for i, kind in enumerate(row_kind):
        if kind[0] != "eq":
            a_slk[i, s] = 1.0
            slack_col[i] = n_struct + s
            s += 1
    a_all = np.hstack([a_std, a_slk])
    c_all = np.concatenate([np.asarray(ccols, dtype=float), np.zeros(n_slack)])

    row_sign = np.ones(m)
    neg = b_std < 0
    row_sign[neg] = -1.0
    a_all[neg] *= -1.0
    b_std = b_std * row_sign
    return _Standardized(a_all, b_std, c_all, offset, n_struct, col_var, row_kind, row_sign, slack_col)


def _bland_iterate(tab: np.ndarray, basis: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
    """Run simplex pivots on an augmented tableau (objective row last).

    Entering: smallest allowed column index with reduced cost < -tol.
    Leaving: minimum-ratio row, ties broken by smallest basis index.
    Returns "optimal" or "unbounded" (entering column recorded in tab meta).
    """
    m = tab.shape[0] - 1
    for _ in range(max_iter):
        rc = tab[-1, :-1]
        cand = np.flatnonzero((rc < -_RC_TOL) & allowed)
        if cand.size == 0:
            return "optimal"
        q = int(cand[0])
        col = tab[:m, q]
        pos = col > _PIVOT_TOL
        if not np.any(pos):
            tab[-1, -1] = q  # stash entering column for ray extraction
            return "unbounded"
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / col[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12)
        r = int(ties[np.argmin(basis[ties])])
        piv = tab[r, q]
        tab[r, :] /= piv
        colq = tab[:, q].copy()
        colq[r] = 0.0
        tab -= np.outer(colq, tab[r, :])
        tab[:, q] = 0.0
        tab[r, q] = 1.0
        basis[r] = q
    raise SolverError("simplex iteration limit exceeded")


def lp_solve(lp: LinearProgram, max_iter: Optional[int] = None) -> LPOutcome:
    """Deterministic dense two-phase simplex with Bland's rule."""
    std = _standardize(lp)
    a, b, c = std.a, std.b, std.c
    m, nt = a.shape
    if max_iter is None:
        max_iter = 200 * (m + nt + 10)

    # Phase 1: artificials; reuse slack columns as initial basis where the
    # row was not sign-flipped (slack coefficient +1, rhs >= 0).
    basis = np.full(m, -1, dtype=int)
    need_art = []
    for i in range(m):
        sc = std.slack_col[i]
        if sc >= 0 and std.row_sign[i] > 0:
            basis[i] = sc
        else:
            need_art.append(i)
    n_art = len(need_art)
    a1 = np.hstack([a, np.zeros((m, n_art))])
    for k, i in enumerate(need_art):
        a1[i, nt + k] = 1.0
        basis[i] = nt + k
    c1 = np.concatenate([np.zeros(nt), np.ones(n_art)])

    tab = np.zeros((m + 1, nt + n_art + 1))
    tab[:m, :-1] = a1
    tab[:m, -1] = b
    tab[-1, :-1] = c1
    for i in range(m):
        if basis[i] >= nt:  # reduce objective row by the artificial basis
            tab[-1, :] -= tab[i, :]
    allowed = np.ones(nt + n_art, dtype=bool)
    status = _bland_iterate(tab, basis, allowed, max_iter)
    phase1_val = -tab[-1, -1]
    if status == "unbounded":  # cannot happen: phase-1 objective bounded below by 0
        raise SolverError("phase-1 reported unbounded")
    if phase1_val > 2e-9 * max(1.0, np.abs(b).max(initial=1.0)):
        # Farkas certificate from the phase-1 duals.
        y = _row_duals(a1, c1, basis, m)
        y_orig = y * std.row_sign
        f_ub = np.zeros(len([k for k in std.row_kind if k[0] == "ub"]))
        f_eq = np.zeros(len([k for k in std.row_kind if k[0] == "eq"]))
        for i, kind in enumerate(std.row_kind):
            if kind[0] == "ub":
                f_ub[kind[1]] = y_orig[i]
            elif kind[0] == "eq":
                f_eq[kind[1]] = y_orig[i]
        margin = float(y @ b - np.maximum(y @ a, 0.0).sum())
        return LPOutcome(status="infeasible", farkas_ub=f_ub, farkas_eq=f_eq,
                         farkas_margin=margin)

    # Pivot remaining artificials out of the basis where possible.
    for i in range(m):
        if basis[i] >= nt:
            row = tab[i, :nt]
            js = np.flatnonzero(np.abs(row) > 1e-9)
            if js.size:
                q = int(js[0])
                piv = tab[i, q]
                tab[i, :] /= piv
                colq = tab[:, q].copy()
                colq[i] = 0.0
                tab -= np.outer(colq, tab[i, :])
                tab[:, q] = 0.0
                tab[i, q] = 1.0
                basis[i] = q
            # else: redundant row; artificial stays basic at zero.

    # Phase 2.
    tab[-1, :] = 0.0
    tab[-1, :nt] = c
    for i in range(m):
        if basis[i] < nt:
            tab[-1, :] -= c[basis[i]] * tab[i, :]
    allowed = np.zeros(nt + n_art, dtype=bool)
    allowed[:nt] = True
    status = _bland_iterate(tab, basis, allowed, max_iter)

    n_orig = np.atleast_1d(np.asarray(lp.c)).shape[0]
    if status == "unbounded":
        q = int(tab[-1, -1])
        ray_t = np.zeros(nt + n_art)
        ray_t[q] = 1.0
        for i in range(m):
            ray_t[basis[i]] = -tab[i, q]
        ray = np.zeros(n_orig)
        for jcol, (j, sign, _base) in enumerate(std.col_var):
            ray[j] += sign * ray_t[jcol]
        return LPOutcome(status="unbounded", ray=ray)

    # Optimal: recover x and duals from the final basis with a fresh solve
    # (avoids accumulated tableau round-off in the reported certificate).
    a_basis = np.hstack([a, np.zeros((m, n_art))])
    for k, i in enumerate(need_art):
        a_basis[i, nt + k] = 1.0
    B = a_basis[:, basis]
    try:
        xb = np.linalg.solve(B, b)
        c_full = np.concatenate([c, np.full(n_art, 0.0)])
        y = np.linalg.solve(B.T, c_full[basis])
    except np.linalg.LinAlgError:
        xb = tab[:m, -1].copy()
        y = _row_duals(a_basis, np.concatenate([c, np.zeros(n_art)]), basis, m)
    t = np.zeros(nt + n_art)
    t[basis] = xb
    # x_j = base_j + sum of signed structural contributions
    x = np.zeros(n_orig)
    for jcol, (j, sign, base) in enumerate(std.col_var):
        x[j] += sign * t[jcol]
        if base != 0.0:
            x[j] += base

    value = float(np.dot(np.atleast_1d(np.asarray(lp.c, dtype=float)), x))
    y_orig = y * std.row_sign
    n_ub = sum(1 for k in std.row_kind if k[0] == "ub")
    n_eq = sum(1 for k in std.row_kind if k[0] == "eq")
    dual_ub = np.zeros(n_ub)
    dual_eq = np.zeros(n_eq)
    dual_val = float(y @ b) + std.c_offset
    for i, kind in enumerate(std.row_kind):
        if kind[0] == "ub":
            dual_ub[kind[1]] = y_orig[i]
        elif kind[0] == "eq":
            dual_eq[kind[1]] = y_orig[i]
    return LPOutcome(status="optimal", value=value, x=x, dual_ub=dual_ub,
                     dual_eq=dual_eq, dual_value=dual_val)


def _row_duals(a: np.ndarray, c: np.ndarray, basis: np.ndarray, m: int) -> np.ndarray:
    B = a[:, basis]
    try:
        return np.linalg.solve(B.T, c[basis])
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(B.T, c[basis], rcond=None)[0]


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, a: float, b: float, tol: float) -> tuple[float, float]:
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(400):
        if b - a <= tol * max(1.0, abs(a), abs(b)) * 1e-2 + 1e-16:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def minimize_1d(f: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-10, max_expand: int = 60) -> tuple[float, float]:
    """Golden-section minimum of a convex (hence unimodal) function.

    If the constrained minimizer lands on a bracket end, the bracket is
    expanded geometrically on that side (stopping at non-finite values)
    and the search repeats.  Returns (argmin, value) with the value within
    ~tol of the true minimum.
    """
    if not (hi > lo):
        raise SolverError("empty bracket")
    if not (math.isfinite(f(lo)) and math.isfinite(f(hi))):
        raise SolverError("non-finite objective on bracket endpoints")
    for _ in range(max_expand):
        xm, fm = _golden_section(f, lo, hi, tol)
        span = hi - lo
        edge = 1e-6 * span
        if xm <= lo + edge:
            lo_new = lo - span
            if not math.isfinite(f(lo_new)):
                # shrink toward feasibility: bisect between lo_new and lo
                step = span
                while step > 1e-12 * max(1.0, abs(lo)) and not math.isfinite(f(lo - step)):
                    step *= 0.5
                lo_new = lo - step
                if not math.isfinite(f(lo_new)):
                    return xm, fm
            lo = lo_new
        elif xm >= hi - edge:
            hi_new = hi + span
            if not math.isfinite(f(hi_new)):
                step = span
                while step > 1e-12 * max(1.0, abs(hi)) and not math.isfinite(f(hi + step)):
                    step *= 0.5
                hi_new = hi + step
                if not math.isfinite(f(hi_new)):
                    return xm, fm
            hi = hi_new
        else:
            return xm, fm
    return _golden_section(f, lo, hi, tol)


_BRACKET_CAP = 2.0 ** 60


def bisect_feasibility(oracle: Callable[[float], bool], lo: float, hi: float,
                       tol: float = 1e-8) -> float:
    """Threshold of a monotone oracle (False below, True above).

    Expands the initial bracket geometrically, capped at 2**60; returns
    -inf when the oracle holds everywhere down to the cap and +inf when it
    fails everywhere up to the cap.
    """
    if hi < lo:
        lo, hi = hi, lo
    step = max(1.0, hi - lo)
    if oracle(lo):
        while oracle(lo):
            hi = lo
            lo -= step
            step *= 2.0
            if abs(lo) > _BRACKET_CAP:
                return -math.inf
    else:
        while not oracle(hi):
            lo = hi
            hi += step
            step *= 2.0
            if abs(hi) > _BRACKET_CAP:
                return math.inf
    # invariant: oracle(lo) is False, oracle(hi) is True
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if oracle(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Polytope:
    """H-representation a_ub x <= b_ub, a_eq x = b_eq, lo <= x <= hi."""

    dim: int
    a_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    a_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    bounds: Optional[Sequence[Bound]] = None

    def feasible_point(self) -> Optional[np.ndarray]:
        out = lp_solve(LinearProgram(
            c=np.zeros(self.dim), a_ub=self.a_ub, b_ub=self.b_ub,
            a_eq=self.a_eq, b_eq=self.b_eq,
            bounds=self.bounds if self.bounds is not None else [(None, None)] * self.dim))
        return out.x if out.status == "optimal" else None


def cutting_plane_max(f_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
                      domain: Polytope, tol: float = 1e-6,
                      max_iter: int = 400) -> tuple[np.ndarray, float]:
    """Kelley's method: maximize a concave f over a bounded polytope.

    ``f_and_grad(w)`` returns (f(w), g) where g is a supergradient, so
    f(v) <= f(w) + g @ (v - w) for all v.  The LP master accumulates these
    cuts; iteration stops once the master bound is within tol of the best
    evaluated point.
    """
    w0 = domain.feasible_point()
    if w0 is None:
        raise SolverError("cutting-plane domain is empty")
    d = domain.dim
    cuts_a: list[np.ndarray] = []
    cuts_b: list[float] = []
    best_w, best_f = w0, -math.inf
    w = w0
    bounds = list(domain.bounds) if domain.bounds is not None else [(None, None)] * d
    for _ in range(max_iter):
        fw, g = f_and_grad(w)
        if fw > best_f:
            best_f, best_w = fw, w.copy()
        # cut: t <= fw + g @ (v - w)  ->  t - g @ v <= fw - g @ w
        cuts_a.append(np.concatenate([[1.0], -g]))
        cuts_b.append(fw - float(g @ w))
        a_ub = np.vstack(cuts_a)
        if domain.a_ub is not None and domain.a_ub.size:
            a_dom = np.hstack([np.zeros((domain.a_ub.shape[0], 1)), domain.a_ub])
            a_ub = np.vstack([a_ub, a_dom])
            b_ub = np.concatenate([cuts_b, domain.b_ub])
        else:
            b_ub = np.asarray(cuts_b)
        a_eq = None
        b_eq = None
        if domain.a_eq is not None and domain.a_eq.size:
            a_eq = np.hstack([np.zeros((domain.a_eq.shape[0], 1)), domain.a_eq])
            b_eq = domain.b_eq
        master = lp_solve(LinearProgram(
            c=np.concatenate([[-1.0], np.zeros(d)]),
            a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq,
            bounds=[(None, None)] + bounds))
        if master.status != "optimal":
            raise SolverError(f"cutting-plane master LP is {master.status}")
        bound = -master.value
        w = master.x[1:]
        if bound - best_f <= tol:
            return best_w, best_f
    return best_w, best_f
