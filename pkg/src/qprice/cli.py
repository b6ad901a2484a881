"""``qprice`` command line.

Exit codes: 0 clean, 1 violations (or a failed demo), 2 configuration
error, 3 usage error or APS/QPS mode mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

from .aps import ApsScheme, price_at
from .config import Workspace, load_workspace
from .demos import DEMOS, run_demo
from .errors import (
    ConstantBundle,
    IndexOutOfRange,
    ModeMismatch,
    NonUniformDistribution,
    QPriceError,
    UnknownDemo,
    UnsupportedSpace,
    ZeroSamples,
)
from .lab import CONDITIONS, check_all, estimate_shannon, mode_of, tradeoff_witness
from .qps import MinEntropy, Shannon, price_qps
from .query import conflict_at, label_of, partition_of

EXIT_CLEAN, EXIT_VIOLATIONS, EXIT_CONFIG, EXIT_USAGE = 0, 1, 2, 3

DEFAULT_CONFIG = "builtin:running-example"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(x: float) -> str:
    return f"{x:.12g}"


def _jnum(x: float) -> float:
    return float(f"{x:.12g}")


class Output:
    def __init__(self, as_json: bool, stream=None):
        self.as_json = as_json
        self.stream = stream or sys.stdout

    def record(self, rec: dict, human: str) -> None:
        print(json.dumps(rec, ensure_ascii=False) if self.as_json else human, file=self.stream)

    def line(self, text: str) -> None:
        print(text, file=self.stream)


def _warn_unsafe(scheme) -> None:
    if isinstance(scheme, MinEntropy):
        print("warning: min_entropy violates the bundle arbitrage condition in general", file=sys.stderr)
    elif not (scheme.info_safe and scheme.bundle_safe):
        print(f"warning: {scheme.id} is not arbitrage-free in general", file=sys.stderr)


def _db(ws: Workspace, value) -> int:
    if value is None:
        return None
    if not 0 <= value < ws.space.size:
        raise IndexOutOfRange(f"database index {value} outside 0..{ws.space.size - 1}")
    return value


def cmd_price(ws: Workspace, args, out: Output) -> int:
    scheme = ws.scheme(args.scheme)
    bundle = ws.bundle(args.bundle)
    db = _db(ws, args.db)
    _warn_unsafe(scheme)
    if isinstance(scheme, ApsScheme):
        if db is None:
            raise ModeMismatch(f"{args.scheme} is answer-dependent; pass --db to fix the answer")
        label = label_of(bundle, db, ws.space)
        price = price_at(scheme, bundle, db, ws.space)
        rec = {"scheme": args.scheme, "bundle": args.bundle, "database": db, "label": label, "price": _jnum(price)}
        out.record(rec, f"{args.scheme}  {args.bundle}  D[{db}]  answer={label}  price={_num(price)}")
    else:
        if db is not None:
            raise ModeMismatch(f"{args.scheme} is instance-independent; it takes no --db")
        price = price_qps(scheme, bundle, ws.space)
        rec = {"scheme": args.scheme, "bundle": args.bundle, "price": _jnum(price)}
        out.record(rec, f"{args.scheme}  {args.bundle}  price={_num(price)}")
    return EXIT_CLEAN


def cmd_partition(ws: Workspace, args, out: Output) -> int:
    p = partition_of(ws.bundle(args.bundle), ws.space, ws.max_space)
    rec = {"bundle": args.bundle, "blocks": p.to_list(), "partition": str(p), "num_blocks": p.num_blocks}
    out.record(rec, f"{args.bundle}: {p}  ({p.num_blocks} blocks)")
    return EXIT_CLEAN


def cmd_conflict(ws: Workspace, args, out: Output) -> int:
    if args.db is None:
        raise UsageError("conflict needs --db")
    db = _db(ws, args.db)
    bundle = ws.bundle(args.bundle)
    c = conflict_at(bundle, db, ws.space).to_list()
    label = label_of(bundle, db, ws.space)
    rec = {"bundle": args.bundle, "database": db, "label": label, "conflict": c}
    out.record(rec, f"{args.bundle} at D[{db}] (answer {label}): conflict {c}")
    return EXIT_CLEAN


def cmd_check(ws: Workspace, args, out: Output) -> int:
    scheme = ws.scheme(args.scheme)
    family = ws.family(args.family)
    mode = mode_of(scheme)
    if args.conditions:
        conditions = [c.strip() for c in args.conditions.split(",") if c.strip()]
        bad = [c for c in conditions if c not in CONDITIONS]
        if bad:
            raise UsageError(f"unknown conditions {bad}; choose from {list(CONDITIONS)}")
    else:
        conditions = ["info", "bundle"]
    if "serendipitous" in conditions and mode != "qps":
        raise ModeMismatch("the serendipitous check applies to QPS schemes only")
    if args.mode and args.mode != mode:
        raise ModeMismatch(f"{args.scheme} is {mode.upper()}, not {args.mode.upper()}")
    _warn_unsafe(scheme)
    rep = check_all(scheme, family, ws.space, conditions, ws.epsilon, args.first, ws.budget)
    if out.as_json:
        for line in rep.to_lines():
            out.line(line)
    else:
        for v in rep.violations:
            db = "—" if v.database is None else v.database
            prices = ", ".join(_num(p) for p in v.prices)
            extra = f" union={v.union}" if v.union else ""
            mult = f" (x{v.multiplicity})" if v.multiplicity > 1 else ""
            out.line(f"VIOLATION {v.condition}: q1={v.q1} q2={v.q2}{extra} database={db} prices=[{prices}] margin={_num(v.margin)}{mult}")
        counts = ", ".join(f"{k}={n}" for k, n in rep.counts.items()) or "none"
        state = "clean" if rep.clean else f"{len(rep.violations)} violation(s)"
        out.line(f"{rep.scheme} ({rep.mode}) on {args.family}: {state}; checks {counts}; epsilon={ws.epsilon:g}")
    return EXIT_CLEAN if rep.clean else EXIT_VIOLATIONS


def cmd_estimate(ws: Workspace, args, out: Output) -> int:
    bundle = ws.bundle(args.bundle)
    est = estimate_shannon(bundle, ws.space, args.samples, ws.seed)
    exact = price_qps(Shannon(), bundle, ws.space)
    rec = {
        "bundle": args.bundle,
        "samples": est.samples,
        "seed": est.seed,
        "estimate": _jnum(est.estimate),
        "stderr": _jnum(est.stderr),
        "exact": _jnum(exact),
    }
    out.record(rec, f"{args.bundle}: estimate={_num(est.estimate)} stderr={_num(est.stderr)} (m={est.samples}, seed={est.seed}); exact={_num(exact)}")
    return EXIT_CLEAN


def cmd_tradeoff(ws: Workspace, args, out: Output) -> int:
    scheme = ws.scheme(args.scheme)
    if not isinstance(scheme, ApsScheme):
        raise ModeMismatch("tradeoff applies to answer-dependent schemes")
    w = tradeoff_witness(scheme, ws.bundle(args.bundle), ws.space)
    rec = {
        "scheme": args.scheme,
        "bundle": args.bundle,
        "database": w.database,
        "price": _jnum(w.price),
        "full_price": _jnum(w.full_price),
        "ratio": _jnum(w.ratio),
        "at_least_half": w.ratio >= 0.5 - 1e-12,
    }
    out.record(rec, f"{args.scheme} {args.bundle}: D[{w.database}] price={_num(w.price)} full={_num(w.full_price)} ratio={_num(w.ratio)}")
    return EXIT_CLEAN


def cmd_demo(args, out: Output) -> int:
    res = run_demo(args.name)
    for line in res.render(out.as_json):
        out.line(line)
    return EXIT_CLEAN if res.ok else EXIT_VIOLATIONS


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", default=S, help="workspace JSON file or builtin:<name>")
    common.add_argument("--epsilon", type=float, default=S, help="tolerance for arbitrage checks")
    common.add_argument("--seed", type=int, default=S, help="seed for sampling")
    common.add_argument("--first", action="store_true", default=S, help="stop at the first violation")
    common.add_argument("--json", action="store_true", default=S, help="line-delimited JSON output")

    parser = _Parser(prog="qprice", description="Price query bundles and check pricing schemes for arbitrage.", parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("price", parents=[common], help="price a bundle")
    p.add_argument("scheme")
    p.add_argument("bundle")
    p.add_argument("--db", type=int, help="database index fixing the answer (APS schemes)")

    p = sub.add_parser("partition", parents=[common], help="print the partition a bundle induces")
    p.add_argument("bundle")

    p = sub.add_parser("conflict", parents=[common], help="print a conflict set")
    p.add_argument("bundle")
    p.add_argument("--db", type=int)

    p = sub.add_parser("check", parents=[common], help="check a scheme over a bundle family")
    p.add_argument("scheme")
    p.add_argument("family")
    p.add_argument("--conditions", help="comma-separated subset of info,bundle,serendipitous")
    p.add_argument("--mode", choices=["aps", "qps"])

    p = sub.add_parser("estimate", parents=[common], help="sampled Shannon price")
    p.add_argument("bundle")
    p.add_argument("--samples", "-m", type=int, default=512)

    p = sub.add_parser("tradeoff", parents=[common], help="worst-case price ratio against the whole database")
    p.add_argument("scheme")
    p.add_argument("bundle")

    p = sub.add_parser("demo", parents=[common], help="run a built-in scenario")
    p.add_argument("name", help="one of: " + ", ".join(DEMOS))
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ModeMismatch, UsageError, UnknownDemo, ConstantBundle, UnsupportedSpace, ZeroSamples, NonUniformDistribution, IndexOutOfRange)):
        return EXIT_USAGE
    return EXIT_CONFIG


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"qprice: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    out = Output(getattr(args, "json", False))
    args.first = getattr(args, "first", False)
    try:
        if args.command == "demo":
            return cmd_demo(args, out)
        ws = load_workspace(getattr(args, "config", DEFAULT_CONFIG))
        if hasattr(args, "epsilon"):
            if not (args.epsilon >= 0 and math.isfinite(args.epsilon)):
                raise UsageError("--epsilon must be a non-negative number")
            ws.epsilon = args.epsilon
        if hasattr(args, "seed"):
            ws.seed = args.seed
        handler = {
            "price": cmd_price,
            "partition": cmd_partition,
            "conflict": cmd_conflict,
            "check": cmd_check,
            "estimate": cmd_estimate,
            "tradeoff": cmd_tradeoff,
        }[args.command]
        return handler(ws, args, out)
    except (UsageError, QPriceError) as exc:
        print(f"qprice: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
