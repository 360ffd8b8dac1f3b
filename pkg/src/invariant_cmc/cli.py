"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 numerical failure (a JSON
diagnostic is written to stderr).
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import sys
from pathlib import Path

import numpy as np

from . import curveio
from .classify import classify
from .integrate import IntegrationControls, StepFailure, Termination, integrate
from .model import CurveState, GeometryParams, XAxisNorth, XAxisSouth, YAxis
from .shoot import Inconclusive, InvalidBracket, closure_check, find_sphere_height, phase_table, sweep_family
from .stability import (
    CertificateError,
    ConsistencyError,
    cylinder_slice_criteria,
    instability_certificate,
    jacobi_identity_residual,
    linearized_solution,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(ValueError):
    pass


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_number(text: str) -> float:
    """A float, optionally written with ``pi`` (e.g. ``pi/2``, ``3*pi/4``)."""

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        raise UsageError(f"not a number: {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval").body)
    except (SyntaxError, ZeroDivisionError) as exc:
        raise UsageError(f"not a number: {text!r}") from exc
    if not math.isfinite(value):
        raise UsageError(f"not finite: {text!r}")
    return value


def parse_list(text: str, count: int | None = None) -> list[float]:
    vals = [parse_number(t) for t in text.split(",")]
    if count is not None and len(vals) != count:
        raise UsageError(f"expected {count} comma-separated values, got {text!r}")
    return vals


def parse_start(text: str):
    kind, sep, rest = text.partition(":")
    if not sep:
        raise UsageError(f"start must look like KIND:VALUES, got {text!r}")
    if kind == "y-axis":
        return YAxis(parse_number(rest))
    if kind == "x-axis":
        return XAxisSouth(parse_number(rest))
    if kind == "x-axis-north":
        return XAxisNorth(parse_number(rest))
    if kind == "interior":
        x, y, sg = parse_list(rest, 3)
        return CurveState(0.0, x, y, sg)
    raise UsageError(f"unknown start kind {kind!r} (y-axis, x-axis, x-axis-north, interior)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _geometry(p):
    p.add_argument("--n", type=int, required=True, help="dimension of the Euclidean factor")
    p.add_argument("--m", type=int, required=True, help="dimension of the sphere factor")
    p.add_argument("--h", type=parse_number, default=0.0, help="mean curvature (>= 0)")


def _controls(p, length=100.0):
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--length", type=float, default=length, help="arclength budget")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="invariant-cmc", description="O(n)xO(m)-invariant CMC hypersurfaces in R^n x S^m")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("integrate", help="integrate one generating curve (CSV + events JSON)")
    _geometry(p)
    p.add_argument("--start", required=True, help="y-axis:A | x-axis:r | x-axis-north:r | interior:x,y,sigma")
    _controls(p, 40.0)
    p.add_argument("--out", type=Path, help="curve CSV path (stdout if omitted)")
    p.add_argument("--events", type=Path, help="events JSON path (default: OUT.events.json)")

    p = sub.add_parser("classify", help="classify a curve (JSON report)")
    _geometry(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--start")
    src.add_argument("--curve", type=Path, help="curve CSV written by 'integrate' (with its events JSON)")
    _controls(p, 60.0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("shoot", help="locate the sphere height A*")
    _geometry(p)
    p.add_argument("--bracket", help="A_lo,A_hi (scanned from x_h upward if omitted)")
    p.add_argument("--tol", type=float, default=1e-4)
    _controls(p, 100.0)
    p.add_argument("--out", type=Path, help="JSON report path (stdout if omitted)")
    p.add_argument("--curve-out", type=Path, help="write the sphere curve CSV here")

    p = sub.add_parser("sweep", help="integrate and classify a family of y-axis starts")
    _geometry(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--A", help="comma-separated heights")
    g.add_argument("--A-range", help="lo,hi,count (inclusive, evenly spaced)")
    p.add_argument("--workers", type=int, default=1)
    _controls(p, 60.0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("stability", help="stability reports")
    ssub = p.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    c = ssub.add_parser("criteria", help="closed-form slice/cylinder verdicts")
    _geometry(c)
    c.add_argument("--out", type=Path)
    c = ssub.add_parser("certificate", help="two-window instability certificate")
    _geometry(c)
    c.add_argument("--start", required=True)
    _controls(c, 60.0)
    c.add_argument("--no-constants", action="store_true", help="omit the unit-sphere volume factors")
    c.add_argument("--out", type=Path)

    p = sub.add_parser("linearized", help="linearization about the slice: samples and zeros")
    _geometry(p)
    p.add_argument("--x-max", type=float, default=20.0)
    p.add_argument("--num", type=int, default=2001)
    p.add_argument("--out", type=Path, help="samples CSV x,w,dw (omitted if not given)")
    p.add_argument("--json", type=Path, help="zeros JSON path (stdout if omitted)")
    return ap


def _emit(text: str, path: Path | None, stdout) -> None:
    if path is None:
        stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8", newline="")


def _controls_from(args) -> IntegrationControls:
    return IntegrationControls(rtol=args.rtol, atol=args.atol, max_arclength=args.length)


def _check_curve(curve) -> None:
    if curve.termination is Termination.STEP_FAILURE:
        raise StepFailure(curve.message)


def _classification_dict(res) -> dict:
    d = curveio.to_jsonable(res)
    d["extrema_count"] = len(res.extrema)
    return d


def _cmd_integrate(args, stdout):
    params = GeometryParams(args.n, args.m, args.h)
    curve = integrate(parse_start(args.start), params, _controls_from(args))
    _emit(curveio.curve_csv(curve), args.out, stdout)
    events_path = args.events or (args.out.with_name(args.out.name + ".events.json") if args.out else None)
    if events_path is not None:
        events_path.write_text(curveio.dumps(curveio.curve_metadata(curve)), encoding="utf-8", newline="")
    _check_curve(curve)


def _cmd_classify(args, stdout):
    params = GeometryParams(args.n, args.m, args.h)
    if args.curve is not None:
        meta_path = args.curve.with_name(args.curve.name + ".events.json")
        if not meta_path.exists():
            raise UsageError(f"missing events sidecar {meta_path}")
        curve = curveio.load_curve(args.curve.read_text(encoding="utf-8"),
                                   json.loads(meta_path.read_text(encoding="utf-8")))
        if curve.params != params:
            raise UsageError(f"curve was computed for {curve.params}, not {params}")
    else:
        curve = integrate(parse_start(args.start), params, _controls_from(args))
    _check_curve(curve)
    res = classify(curve, params)
    _emit(curveio.dumps(_classification_dict(res)), args.out, stdout)


def _cmd_shoot(args, stdout):
    params = GeometryParams(args.n, args.m, args.h)
    bracket = tuple(parse_list(args.bracket, 2)) if args.bracket else None
    res = find_sphere_height(params, bracket, args.tol, _controls_from(args))
    cls = classify(res.curve, params)
    contact = res.contact
    report = {
        "A_star": res.A_star,
        "bracket": list(res.bracket),
        "certified": res.certified,
        "iterations": res.iterations,
        "monotone": res.monotone,
        "topology": cls.topology.value,
        "contact": None if contact is None else {
            "kind": contact.kind.value, "s": contact.s, "x": contact.state.x,
            "y": contact.state.y, "angle": contact.contact_angle, "orthogonal": contact.orthogonal,
        },
        "closure_error": closure_check(res, params) if res.certified else None,
        "params": {"n": params.n, "m": params.m, "h": params.h},
    }
    _emit(curveio.dumps(report), args.out, stdout)
    if args.curve_out is not None:
        args.curve_out.write_text(curveio.curve_csv(res.curve), encoding="utf-8", newline="")
        args.curve_out.with_name(args.curve_out.name + ".events.json").write_text(
            curveio.dumps(curveio.curve_metadata(res.curve)), encoding="utf-8", newline="")


def _cmd_sweep(args, stdout):
    params = GeometryParams(args.n, args.m, args.h)
    if args.A is not None:
        values = parse_list(args.A)
    else:
        lo, hi, count = parse_list(args.A_range, 3)
        if count < 1 or count != int(count):
            raise UsageError("count must be a positive integer")
        values = [float(v) for v in np.linspace(lo, hi, int(count))]
    items = sweep_family(params, values, _controls_from(args), workers=args.workers)
    rows = phase_table(items)
    for row, it in zip(rows, sorted(items, key=lambda t: t.A)):
        if it.classification is not None:
            row["extrema"] = len(it.classification.extrema)
            row["horizon"] = it.classification.evidence_horizon
    _emit(curveio.dumps({"params": {"n": params.n, "m": params.m, "h": params.h}, "rows": rows}),
          args.out, stdout)


def _cmd_stability(args, stdout):
    params = GeometryParams(args.n, args.m, args.h)
    if args.mode == "criteria":
        _emit(curveio.dumps(cylinder_slice_criteria(params).to_dict()), args.out, stdout)
        return
    curve = integrate(parse_start(args.start), params, _controls_from(args))
    _check_curve(curve)
    rep = instability_certificate(curve, params, include_constants=not args.no_constants)
    d = rep.to_dict()
    d["verdict"] = "unstable" if rep.Q < 0 else "inconclusive"
    d["identity_residual"] = float(jacobi_identity_residual(curve, params).max())
    _emit(curveio.dumps(d), args.out, stdout)


def _cmd_linearized(args, stdout):
    params = GeometryParams(args.n, args.m, args.h)
    if args.num < 2:
        raise UsageError("--num must be at least 2")
    sol = linearized_solution(params, args.x_max, num=args.num)
    if args.out is not None:
        lines = ["x,w,dw"] + [f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, b, c in zip(sol.x, sol.w, sol.dw)]
        args.out.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")
    d = sol.to_dict()
    d["params"] = {"n": params.n, "m": params.m, "h": params.h}
    d["x_max"] = args.x_max
    _emit(curveio.dumps(d), args.json, stdout)


_COMMANDS = {
    "integrate": _cmd_integrate,
    "classify": _cmd_classify,
    "shoot": _cmd_shoot,
    "sweep": _cmd_sweep,
    "stability": _cmd_stability,
    "linearized": _cmd_linearized,
}


def _diagnose(stderr, code: int, exc: BaseException) -> int:
    stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
                            sort_keys=True) + "\n")
    return code


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _diagnose(stderr, EXIT_USAGE, exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        _COMMANDS[args.command](args, stdout)
    except (StepFailure, Inconclusive, CertificateError, ConsistencyError) as exc:
        return _diagnose(stderr, EXIT_NUMERIC, exc)
    except (UsageError, InvalidBracket, ValueError, OSError) as exc:
        return _diagnose(stderr, EXIT_USAGE, exc)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
