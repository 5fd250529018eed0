"""Batch front door: load regime/position files, run computations, emit reports.

Commands
--------
eval        primal / reduced / dual table per position, plus diagnostics
diagnose    diagnostics only, as JSON
share       two-line risk sharing: direct, via-sum and dual values
superhedge  shortfall superhedging: primal and dual per position
solvency    solvency-cone membership, generators and pricing-system rays

Reports are deterministic: stable ordering, floats printed to 12
significant digits, canonical JSON (sorted keys).  Exit codes: 0 success,
1 a gap exceeded the tolerance, 2 parse error, 3 numerical failure.
Thread count comes from --threads or the RISKMETER_THREADS variable;
solvers are seed-free, --seed only affects sampled property checks.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional

import numpy as np

from .core import RiskValue, ScenarioSpace
from .acceptance import (AcceptanceSet, ConeShifted, HalfSpace, MinkowskiSum,
                         Polyhedral, PositiveCone, ShortfallSet, TVaRSet, VaRSet)
from .losses import ExponentialLoss, LinearCappedLoss, LossFunction, PowerLoss
from .market import EligibleSpace
from .riskmeasure import (RiskRegime, diagnose, risk_dual, risk_primal,
                          risk_reduced)
from .setvalued import BidAskMatrix, SolvencyCone
from .sharing import (BusinessLine, SharingProblem, infconv_direct,
                      infconv_dual, infconv_via_sum)
from .shortfall import OnePeriodMarket, shortfall_dual, shortfall_primal


class ParseError(ValueError):
    pass


def fmt(v: float) -> str:
    if v == math.inf:
        return "+inf"
    if v == -math.inf:
        return "-inf"
    if v == 0.0:
        v = 0.0  # normalize -0.0
    return f"{v:.12g}"


def fmt_risk(rv: RiskValue) -> str:
    return fmt(rv.value)


def gap(a: float, b: float) -> float:
    if math.isinf(a) and math.isinf(b) and a == b:
        return 0.0
    return abs(a - b)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- parsing

def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ParseError(f"{where}: missing field {key!r}")
    return d[key]


def parse_loss(d: dict) -> LossFunction:
    variant = _need(d, "variant", "loss")
    if variant == "exponential":
        return ExponentialLoss()
    if variant == "power":
        return PowerLoss(gamma=float(d.get("gamma", 2.0)),
                         slope=float(d.get("slope", 0.0)))
    if variant == "linear_capped":
        return LinearCappedLoss(slope=float(d.get("slope", 0.5)))
    raise ParseError(f"loss: unknown variant {variant!r}")


def parse_acceptance(d: dict, space: ScenarioSpace, dim: Optional[int] = None) -> AcceptanceSet:
    dim = dim if dim is not None else space.n
    variant = _need(d, "variant", "acceptance")
    if variant == "positive_cone":
        return PositiveCone(dim)
    if variant == "halfspace":
        return HalfSpace(np.asarray(_need(d, "w", "halfspace"), dtype=float),
                         float(d.get("level", 0.0)))
    if variant == "polyhedral":
        return Polyhedral(np.asarray(_need(d, "g", "polyhedral"), dtype=float),
                          np.asarray(_need(d, "h", "polyhedral"), dtype=float))
    if variant == "var":
        return VaRSet(space, float(_need(d, "beta", "var")))
    if variant == "tvar":
        return TVaRSet(space, float(_need(d, "alpha", "tvar")))
    if variant == "shortfall":
        return ShortfallSet(space, parse_loss(_need(d, "loss", "shortfall")),
                            float(_need(d, "alpha", "shortfall")))
    if variant == "minkowski_sum":
        return MinkowskiSum(parse_acceptance(_need(d, "a", "sum"), space, dim),
                            parse_acceptance(_need(d, "b", "sum"), space, dim))
    if variant == "cone_shifted":
        return ConeShifted(parse_acceptance(_need(d, "a", "cone_shifted"), space, dim),
                           np.asarray(_need(d, "generators", "cone_shifted"), dtype=float))
    raise ParseError(f"acceptance: unknown variant {variant!r}")


def serialize_acceptance(a: AcceptanceSet) -> dict:
    if isinstance(a, PositiveCone):
        return {"variant": "positive_cone"}
    if isinstance(a, HalfSpace):
        return {"variant": "halfspace", "w": a.w0.tolist(), "level": a.level}
    if isinstance(a, Polyhedral):
        return {"variant": "polyhedral", "g": a.g.tolist(), "h": a.h.tolist()}
    if isinstance(a, VaRSet):
        return {"variant": "var", "beta": a.beta}
    if isinstance(a, TVaRSet):
        return {"variant": "tvar", "alpha": a.alpha}
    if isinstance(a, ShortfallSet):
        loss: dict[str, Any] = {"variant": a.loss.name}
        if isinstance(a.loss, PowerLoss):
            loss.update(gamma=a.loss.gamma, slope=a.loss.slope)
        if isinstance(a.loss, LinearCappedLoss):
            loss.update(slope=a.loss.slope)
        return {"variant": "shortfall", "loss": loss, "alpha": a.budget}
    if isinstance(a, MinkowskiSum):
        return {"variant": "minkowski_sum", "a": serialize_acceptance(a.a),
                "b": serialize_acceptance(a.b)}
    if isinstance(a, ConeShifted):
        return {"variant": "cone_shifted", "a": serialize_acceptance(a.base),
                "generators": a.generators.tolist()}
    raise ParseError(f"cannot serialize acceptance set {type(a).__name__}")


def parse_regime(d: dict) -> RiskRegime:
    space = ScenarioSpace(np.asarray(_need(_need(d, "scenario", "regime"), "p", "scenario"),
                                     dtype=float))
    elig = _need(d, "eligible", "regime")
    market = EligibleSpace(space,
                           np.asarray(_need(elig, "basis", "eligible"), dtype=float),
                           np.asarray(_need(elig, "prices", "eligible"), dtype=float))
    acc = parse_acceptance(_need(d, "acceptance", "regime"), space)
    return RiskRegime(acc, market)


def serialize_regime(regime: RiskRegime) -> dict:
    return {
        "scenario": {"p": regime.space.p.tolist()},
        "acceptance": serialize_acceptance(regime.acceptance),
        "eligible": {"basis": regime.market.basis.tolist(),
                     "prices": regime.market.prices.tolist()},
    }


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_positions(path: str, n: int) -> np.ndarray:
    if path.endswith(".csv"):
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                rows = [[float(cell) for cell in row] for row in csv.reader(fh) if row]
        except (OSError, ValueError) as exc:
            raise ParseError(f"{path}: {exc}") from exc
    else:
        data = load_json(path)
        rows = _need(data, "positions", path)
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, n))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != n:
        raise ParseError(f"{path}: positions have length {arr.shape[1]}, expected {n}")
    return arr


def _thread_count(args) -> int:
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("RISKMETER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ParseError(f"RISKMETER_THREADS: {env!r} is not an integer") from exc
    return 1


def _emit(payload: dict, args) -> None:
    out = args.out
    text = _render(payload, getattr(args, "format", "json"))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(payload: dict, style: str) -> str:
    if style == "json":
        return canonical_json(payload)
    rows = payload.get("rows", [])
    if style == "csv":
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=sorted(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        return buf.getvalue()
    # fixed-width table
    lines = []
    for key, val in sorted(payload.items()):
        if key == "rows":
            continue
        lines.append(f"# {key}: {json.dumps(val, sort_keys=True)}")
    if rows:
        cols = sorted(rows[0].keys())
        lines.append(" | ".join(f"{c:>18}" for c in cols))
        for row in rows:
            lines.append(" | ".join(f"{str(row[c]):>18}" for c in cols))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands

def cmd_eval(args) -> int:
    regime = parse_regime(load_json(args.regime))
    positions = load_positions(args.positions, regime.space.n)
    diag = diagnose(regime)
    convex = regime.acceptance.is_convex
    degenerate = diag.finiteness == "degenerate_plus_minus"

    def one(idx_pos):
        idx, pos = idx_pos
        primal = risk_primal(regime, pos)
        reduced = risk_reduced(regime, pos)
        row = {
            "index": idx,
            "primal": fmt_risk(primal),
            "reduced": fmt_risk(reduced),
            "gap_primal_reduced": fmt(gap(primal.value, reduced.value)),
        }
        if degenerate:
            row["dual"] = "DEGENERATE"
            row["classification"] = "DEGENERATE +-inf"
            row["gap_primal_dual"] = fmt(0.0)
            return row, gap(primal.value, reduced.value)
        if convex:
            dual = risk_dual(regime, pos)
            if dual.status == "ok":
                row["dual"] = fmt_risk(dual.risk)
                row["gap_primal_dual"] = fmt(gap(primal.value, dual.risk.value))
                if dual.maximizer is not None:
                    row["maximizer"] = [fmt(v) for v in dual.maximizer]
                worst = max(gap(primal.value, reduced.value),
                            gap(primal.value, dual.risk.value))
            else:
                row["dual"] = dual.status.upper()
                row["gap_primal_dual"] = fmt(0.0)
                worst = gap(primal.value, reduced.value)
        else:
            row["dual"] = "NONCONVEX"
            row["gap_primal_dual"] = fmt(0.0)
            worst = gap(primal.value, reduced.value)
        return row, worst

    threads = _thread_count(args)
    items = list(enumerate(positions))
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    rows = [r for r, _ in results]
    worst_gap = max((g for _, g in results), default=0.0)
    payload = {
        "diagnosis": {
            "arbitrage_free": diag.arbitrage_free,
            "extension_exists": diag.extension_exists,
            "good_deal_free": diag.good_deal_free,
            "finiteness": diag.finiteness,
            "lsc_sufficient": diag.lsc_sufficient,
        },
        "regime": serialize_regime(regime),
        "rows": rows,
        "worst_gap": fmt(worst_gap),
    }
    _emit(payload, args)
    return 1 if (not degenerate and worst_gap > args.tol_gap) else 0


def cmd_diagnose(args) -> int:
    regime = parse_regime(load_json(args.regime))
    d = diagnose(regime)
    payload = {
        "arbitrage_free": d.arbitrage_free,
        "extension_exists": d.extension_exists,
        "good_deal_free": d.good_deal_free,
        "finiteness": d.finiteness,
        "lsc_sufficient": d.lsc_sufficient,
    }
    _emit(payload, args)
    return 0


def cmd_share(args) -> int:
    data = load_json(args.problem)
    space = ScenarioSpace(np.asarray(_need(_need(data, "scenario", "share"), "p", "scenario"),
                                     dtype=float))

    def line(key: str) -> BusinessLine:
        d = _need(data, key, "share")
        return BusinessLine(parse_acceptance(_need(d, "acceptance", key), space),
                            np.asarray(_need(d, "unit", key), dtype=float),
                            float(_need(d, "price", key)))

    problem = SharingProblem(space, line("line_a"), line("line_b"))
    positions = np.asarray(_need(data, "positions", "share"), dtype=float)
    if positions.ndim == 1:
        positions = positions.reshape(1, -1)
    rows = []
    worst = 0.0
    for idx, pos in enumerate(positions):
        direct = infconv_direct(problem, pos)
        via = infconv_via_sum(problem, pos)
        row = {"index": idx, "direct": fmt_risk(direct), "via_sum": fmt_risk(via),
               "gap_direct_via": fmt(gap(direct.value, via.value))}
        worst = max(worst, gap(direct.value, via.value))
        try:
            dual = infconv_dual(problem, pos)
            if dual.status == "ok":
                row["dual"] = fmt_risk(dual.risk)
                row["gap_direct_dual"] = fmt(gap(direct.value, dual.risk.value))
                worst = max(worst, gap(direct.value, dual.risk.value))
            else:
                row["dual"] = dual.status.upper()
        except Exception as exc:  # hypothesis violations are typed conditions
            row["dual"] = f"UNAVAILABLE ({exc})"
        rows.append(row)
    _emit({"rows": rows, "worst_gap": fmt(worst)}, args)
    return 1 if worst > args.tol_gap else 0


def cmd_superhedge(args) -> int:
    data = load_json(args.problem)
    space = ScenarioSpace(np.asarray(_need(_need(data, "scenario", "superhedge"), "p",
                                           "scenario"), dtype=float))
    loss = parse_loss(_need(data, "loss", "superhedge"))
    alpha = float(_need(data, "alpha", "superhedge"))
    market = None
    if "market" in data:
        m = data["market"]
        market = OnePeriodMarket(np.asarray(_need(m, "s0", "market"), dtype=float),
                                 np.asarray(_need(m, "st", "market"), dtype=float),
                                 np.asarray(_need(m, "theta_lo", "market"), dtype=float),
                                 np.asarray(_need(m, "theta_hi", "market"), dtype=float))
    positions = np.asarray(_need(data, "positions", "superhedge"), dtype=float)
    if positions.ndim == 1:
        positions = positions.reshape(1, -1)
    rows = []
    worst = 0.0
    for idx, pos in enumerate(positions):
        primal = shortfall_primal(space, loss, alpha, market, pos)
        row = {"index": idx, "primal": fmt_risk(primal)}
        if primal.is_finite:
            dual = shortfall_dual(space, loss, alpha, market, pos)
            row["dual"] = fmt_risk(dual.risk)
            row["gap"] = fmt(gap(primal.value, dual.risk.value))
            if dual.density is not None:
                row["density"] = [fmt(v) for v in dual.density]
            worst = max(worst, gap(primal.value, dual.risk.value))
        rows.append(row)
    _emit({"rows": rows, "worst_gap": fmt(worst)}, args)
    return 1 if worst > args.tol_gap else 0


def cmd_solvency(args) -> int:
    data = load_json(args.problem)
    cone = SolvencyCone(BidAskMatrix(np.asarray(_need(data, "bid_ask", "solvency"),
                                                dtype=float)))
    points = np.asarray(data.get("points", []), dtype=float)
    if points.ndim == 1 and points.size:
        points = points.reshape(1, -1)
    rows = []
    for idx, u in enumerate(points):
        member = cone.member(u)
        via_gens = cone.member_via_generators(u)
        rows.append({"index": idx, "point": [fmt(v) for v in u],
                     "solvent": member, "solvent_via_generators": via_gens})
    rays = cone.sample_extreme_rays(seed=args.seed)
    payload = {
        "generators": [[fmt(v) for v in g] for g in cone.generators],
        "pricing_system_rays": [[fmt(v) for v in r] for r in rays],
        "rows": rows,
    }
    _emit(payload, args)
    disagreements = [r for r in rows if r["solvent"] != r["solvent_via_generators"]]
    return 1 if disagreements else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskmeter",
        description="Capital requirements with multiple eligible assets")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=["json", "csv", "table"], default="json")
        p.add_argument("--tol-gap", dest="tol_gap", type=float, default=1e-6)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=0,
                       help="seed for sampled property checks (solvers are seed-free)")
        p.add_argument("--out", default=None, help="write the report to a file")

    p = sub.add_parser("eval", help="primal/reduced/dual table per position")
    p.add_argument("--regime", required=True)
    p.add_argument("--positions", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", help="regime diagnostics as JSON")
    p.add_argument("--regime", required=True)
    common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("share", help="two-line risk sharing report")
    p.add_argument("--problem", required=True)
    common(p)
    p.set_defaults(func=cmd_share)

    p = sub.add_parser("superhedge", help="shortfall superhedging report")
    p.add_argument("--problem", required=True)
    common(p)
    p.set_defaults(func=cmd_superhedge)

    p = sub.add_parser("solvency", help="solvency cone analysis")
    p.add_argument("--problem", required=True)
    common(p)
    p.set_defaults(func=cmd_solvency)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return 2
    except Exception as exc:
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
