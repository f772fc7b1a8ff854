"""Command-line front end: ``conelab <subcommand> ...``.

Exit codes: 0 success, 1 a mathematical check failed, 2 bad input,
3 a resource cap was hit. Reports are deterministic for a fixed
configuration, so they carry no timing information.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from typing import Any, Sequence

from . import __version__
from .cayley import DEFAULT_CAP, ball, classify_growth, make_group
from .diagnostics import ScaleSchedule, group_minkowski, minkowski_estimate, properness_diagnostic
from .errors import InputError, ResourceError
from .germ import format_comparison, parse_germ
from .metric import FiniteMetric, as_rational, format_rational, rescale, validate_metric
from .packing import DEFAULT_EXACT_CAP, PackingQuery, packing_number
from .realize import (
    build_realization,
    check_metric_axioms,
    cone_recovery_check,
    off_slice_bound_check,
    slice_isometry_check,
)
from .trees import classify_group, classify_space


class CheckFailed(Exception):
    """A mathematical check failed; the report is still emitted."""

    def __init__(self, payload):
        super().__init__("check failed")
        self.payload = payload


# ----------------------------------------------------------------------
# argument parsing


def _rational_list(text: str) -> list:
    try:
        return [as_rational(t.strip()) for t in text.split(",") if t.strip()]
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _rational(text: str):
    try:
        return as_rational(text)
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    # sub-commands suppress defaults so flags given before the sub-command survive
    def d(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(42))
    g.add_argument("--out", default=d(None), help="output path (csv/json here select the format)")
    g.add_argument("--format", choices=("json", "csv"), default=d(None))
    g.add_argument("--cap", type=int, default=d(DEFAULT_CAP), help="Cayley ball element cap")
    g.add_argument("--quiet", action="store_true", default=d(False))
    g.add_argument("--threads", type=int, default=d(1))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = argparse.ArgumentParser(
        prog="conelab", description=__doc__.splitlines()[0], parents=[_global_options(suppress=False)]
    )
    parser.add_argument("--version", action="version", version=f"conelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ball", parents=[common], help="Cayley ball sizes")
    p.add_argument("--group", required=True)
    p.add_argument("--radius", type=int, default=10)

    p = sub.add_parser("growth", parents=[common], help="growth table and classification")
    p.add_argument("--group", required=True)
    p.add_argument("--rmax", type=int, required=True)

    p = sub.add_parser("packing", parents=[common], help="the packing function F(p, r1, r2, l)")
    p.add_argument("--space", required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--r1", type=_rational, required=True)
    p.add_argument("--r2", type=_rational, required=True)
    p.add_argument("--l", type=_rational, required=True)
    p.add_argument("--slack", type=_rational, default=0)
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)

    p = sub.add_parser("cone-profile", parents=[common], help="properness and box-counting evidence")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--group")
    src.add_argument("--space")
    p.add_argument("--p", default=None)
    p.add_argument("--scales", type=_rational_list, default=_rational_list("10,20,40,80"))
    p.add_argument("--R", type=_rational, default=1)
    p.add_argument("--eps", type=_rational, default=as_rational("1/4"))
    p.add_argument("--minkowski-radii", type=_rational_list, default=None)
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)

    p = sub.add_parser("tree-classify", parents=[common], help="point / line / tree classification")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--group")
    src.add_argument("--space")
    p.add_argument("--p", default=None)
    p.add_argument("--scale", type=_rational, action="append", default=None)
    p.add_argument("--scales", type=_rational_list, default=None)
    p.add_argument("--r", type=_rational, default=1)
    p.add_argument("--k-grid", type=_int_list, default=[2, 4, 8, 16])
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--max-points", type=int, default=800)
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)

    p = sub.add_parser("realize", parents=[common], help="build Y with cone X and check it")
    p.add_argument("--space", required=True)
    p.add_argument("--variant", choices=("unbounded", "bounded"), required=True)
    bp = p.add_mutually_exclusive_group(required=True)
    bp.add_argument("--basepoints")
    bp.add_argument("--basepoint")
    p.add_argument("--levels", type=int, default=1000)
    p.add_argument("--check-triples", type=int, default=10000)
    p.add_argument("--off-slice-samples", type=int, default=1000)
    p.add_argument("--schedule", type=_int_list, default=[5, 10, 20])

    p = sub.add_parser("germ", parents=[common], help="asymptotic germ comparison")
    p.add_argument("action", choices=("cmp",))
    p.add_argument("expr1")
    p.add_argument("expr2")
    return parser


# ----------------------------------------------------------------------
# helpers


def _load_space(path: str) -> FiniteMetric:
    m = FiniteMetric.load(path)
    report = validate_metric(m)
    if not report.ok:
        raise CheckFailed({"command": "validate", "space": path, "validation": report.to_json()})
    return m


def _config(args: argparse.Namespace) -> dict[str, Any]:
    skip = {"out", "quiet", "threads", "format", "command"}

    def enc(v):
        return format_rational(v) if isinstance(v, Fraction) else v

    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        out[key] = [enc(v) for v in value] if isinstance(value, list) else enc(value)
    return out


@contextmanager
def _executor(threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            yield ex
    else:
        yield None


def _envelope(args, body: dict[str, Any]) -> dict[str, Any]:
    return {"command": args.command, "version": __version__, "config": _config(args), **body}


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ----------------------------------------------------------------------
# subcommands; each returns (json_payload, csv_text or None)


def cmd_ball(args):
    b = ball(make_group(args.group), args.radius, args.cap)
    sizes = b.sizes()
    payload = _envelope(args, {"group": b.group.name, "radius": b.radius, "sizes": sizes})
    return payload, _csv(["r", "ball_size"], enumerate(sizes))


def cmd_growth(args):
    b = ball(make_group(args.group), args.rmax, args.cap)
    table = list(enumerate(b.sizes()))
    gc = classify_growth(table)
    payload = _envelope(args, {"table": [list(row) for row in table], "classification": gc.to_json()})
    return payload, _csv(["r", "ball_size"], table)


def cmd_packing(args):
    m = _load_space(args.space)
    q = PackingQuery(args.p, args.r1, args.r2, args.l, args.slack)
    res = packing_number(m, q, args.exact_cap)
    row = [res.lower, res.upper, str(res.exact).lower(), ";".join(res.witness)]
    return res.to_json(), _csv(["lower", "upper", "exact", "witness"], [row])


def cmd_cone_profile(args):
    schedule = ScaleSchedule(tuple(args.scales))
    with _executor(args.threads) as ex:
        if args.group:
            g = make_group(args.group)
            report = properness_diagnostic(g, schedule, None, args.R, args.eps, args.exact_cap, args.cap, ex)
        else:
            if args.p is None:
                raise InputError("--p is required with --space")
            m = _load_space(args.space)
            report = properness_diagnostic(m, schedule, args.p, args.R, args.eps, args.exact_cap, None, ex)
    body = {"properness": report.to_json()}
    if args.minkowski_radii:
        top = schedule.scales[-1]
        if args.group:
            if top != int(top):
                raise InputError("box counting on a group needs an integral top scale")
            est = group_minkowski(make_group(args.group), int(top), args.minkowski_radii, args.cap)
        else:
            est = minkowski_estimate(rescale(m, top), args.p, args.minkowski_radii)
        body["minkowski"] = est.to_json()
    rows = [
        [format_rational(r.scale), r.result.lower, r.result.upper, str(r.result.exact).lower(), r.result.annulus_size]
        for r in report.records
    ]
    return _envelope(args, body), _csv(["scale", "lower", "upper", "exact", "annulus_size"], rows)


def cmd_tree_classify(args):
    scales = list(args.scales or []) + list(args.scale or [])
    if not scales:
        scales = [as_rational(s) for s in (4, 8, 12)]
    with _executor(args.threads) as ex:
        if args.group:
            if any(s != int(s) for s in scales):
                raise InputError("group scales must be integers")
            ev = classify_group(
                make_group(args.group),
                [int(s) for s in scales],
                args.r,
                args.k_grid,
                args.samples,
                args.seed,
                args.max_points,
                args.exact_cap,
                args.cap,
                executor=ex,
            )
        else:
            if args.p is None:
                raise InputError("--p is required with --space")
            m = _load_space(args.space)
            ev = classify_space(m, args.p, scales, args.r, args.k_grid, args.samples, args.seed, None, args.exact_cap)
    rows = []
    for e in ev.evidence:
        vals = [res.lower for _, res in e.profile.values]
        rows.append(
            [
                format_rational(e.scale),
                format_rational(e.diameter),
                format_rational(e.delta.max_delta),
                format_rational(as_rational(Fraction(e.delta.max_delta) / e.scale)),
                vals[0],
                vals[-1],
            ]
        )
    header = ["scale", "diameter", "max_delta", "delta_ratio", "valency", "branch_count"]
    return _envelope(args, {"classification": ev.to_json()}), _csv(header, rows)


def cmd_realize(args):
    m = _load_space(args.space)
    if args.basepoints is not None:
        bps = [b.strip() for b in args.basepoints.split(",") if b.strip()]
    else:
        bps = args.basepoint
    y = build_realization(m, args.variant, bps, args.levels)
    axioms = check_metric_axioms(y, args.check_triples, args.seed)
    levels = list(args.schedule)
    slices = [{"n": n, "distortion": format_rational(slice_isometry_check(y, n))} for n in levels]
    body: dict[str, Any] = {
        "space": y.to_json(),
        "axioms": axioms.to_json(),
        "slices": slices,
    }
    rows = [["axioms", "", len(axioms.violations), str(axioms.ok).lower()]]
    rows += [["slice", s["n"], s["distortion"], str(s["distortion"] == "0").lower()] for s in slices]
    ok = axioms.ok and all(s["distortion"] == "0" for s in slices)
    if y.variant == "unbounded":
        off = [off_slice_bound_check(y, n, args.off_slice_samples, args.seed) for n in levels]
        body["off_slice"] = [o.to_json() for o in off]
        rows += [["off_slice", o.n, format_rational(o.min_ratio), str(o.ok).lower()] for o in off]
        ok = ok and all(o.ok for o in off)
    recovery = cone_recovery_check(y, levels, args.off_slice_samples, args.seed)
    body["cone_recovery"] = recovery.to_json()
    ok = ok and recovery.ok
    body["ok"] = ok
    payload = _envelope(args, body)
    text = _csv(["check", "n", "value", "ok"], rows)
    if not ok:
        raise CheckFailed((payload, text))
    return payload, text


def cmd_germ(args):
    line = format_comparison(parse_germ(args.expr1), parse_germ(args.expr2))
    payload = _envelope(args, {"comparison": line})
    return payload, line + "\n"


COMMANDS = {
    "ball": cmd_ball,
    "growth": cmd_growth,
    "packing": cmd_packing,
    "cone-profile": cmd_cone_profile,
    "tree-classify": cmd_tree_classify,
    "realize": cmd_realize,
    "germ": cmd_germ,
}


# ----------------------------------------------------------------------
# output


def render(payload, csv_text: str | None, fmt: str | None, command: str) -> str:
    if command == "germ" and fmt is None:
        return csv_text
    if fmt == "csv" and csv_text is not None:
        return csv_text
    return json.dumps(payload, separators=(",", ":")) + "\n"


def emit_report(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fmt = args.format
    path = args.out
    if path in ("csv", "json"):
        fmt, path = path, None
    try:
        payload, text = COMMANDS[args.command](args)
        emit_report(render(payload, text, fmt, args.command), path)
        return 0
    except CheckFailed as failed:
        if isinstance(failed.payload, tuple):
            payload, text = failed.payload
        else:
            payload, text = failed.payload, None
        try:
            emit_report(render(payload, text, fmt, args.command), path)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if not args.quiet:
            print("check failed", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except RecursionError:
        print("resource limit: recursion depth exceeded", file=sys.stderr)
        return 3
    except MemoryError:
        print("resource limit: out of memory", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
