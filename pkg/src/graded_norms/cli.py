"""Command-line front end.

Exit codes: 0 success, 1 a property was falsified (or a suite criterion
failed), 2 usage error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GradedNormsError, NonConvergence
from .gradedness import (
    INCREASING, check_level_set_sphere_identity, classify_gradedness, dc_level_membership,
    grade_vector, l0_from_ksupport, l0_from_topk,
)
from .norms import NormSpec, parse_norm_spec
from .properties import CHECKERS
from .suite import run_suite
from .topk import KSUPPORT_METHODS, ksupport_eval, ksupport_sequence, topk_eval, topk_sequence
from .vectors import IndexSet, as_vector, l0

EXIT_OK, EXIT_FALSIFIED, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2, 3

CHECK_NAMES = sorted([*CHECKERS, "level-set", "gradedness"])


class UsageError(Exception):
    pass


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--source", default="lp:2",
                        help='source norm, e.g. "lp:2", "lp:inf", "wlp:1:[1,2,3]", '
                             '"atomic:@atoms.json" (default lp:2)')
    common.add_argument("--x", help='inline vector as a JSON array, e.g. "[0,3,0,-1]"')
    common.add_argument("--input", help="CSV file, one vector per row")
    common.add_argument("--k", type=int)
    common.add_argument("--tol", type=_positive_float, default=1e-8)
    common.add_argument("--trials", type=_positive_int, default=1000)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--format", choices=("json", "csv", "human"), default="human")
    common.add_argument("--dim", type=_positive_int,
                        help="dimension for checks when the source has none (default 3)")
    common.add_argument("--method", choices=("auto", *KSUPPORT_METHODS), default="auto",
                        help="k-support evaluation method")
    common.add_argument("--output", help="write the report here instead of stdout")

    parser = argparse.ArgumentParser(prog="graded-norms",
                                     description="Top-k / k-support norms and l0 recovery.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="source norm of each vector")
    sub.add_parser("dual", parents=[common], help="dual norm of each vector")
    sub.add_parser("topk", parents=[common], help="generalized top-k norm (needs --k)")
    sub.add_parser("ksupport", parents=[common], help="generalized k-support norm (needs --k)")
    sub.add_parser("sequence", parents=[common], help="top-k and k-support sequences")
    sub.add_parser("l0", parents=[common], help="l0 recovered from the top-k sequence")
    chk = sub.add_parser("check", parents=[common], help="randomized property check")
    chk.add_argument("property", choices=CHECK_NAMES)
    chk.add_argument("--direction", choices=("increasing", "decreasing"), default=INCREASING)
    chk.add_argument("--non-strict", action="store_true", help="gradedness: non-strict form")
    chk.add_argument("--K", help="birkhoff: fixed index set, 1-based JSON array")
    suite = sub.add_parser("suite", parents=[common], help="run the acceptance matrix")
    suite.add_argument("--quick", action="store_true", help="reduced trial counts")
    suite.add_argument("--filter", help="group name (topk, norms, properties, gradedness) "
                                        "or comma-separated criterion ids")
    return parser


# -- input ------------------------------------------------------------------------

def _vectors(args) -> tuple[list[np.ndarray], bool]:
    """Vectors from --x or --input; the flag tells whether input was a single inline vector."""
    if args.x is not None and args.input is not None:
        raise UsageError("give either --x or --input, not both")
    if args.x is not None:
        try:
            return [as_vector(json.loads(args.x))], True
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise UsageError(f"malformed --x vector: {exc}") from exc
    if args.input is not None:
        try:
            text = Path(args.input).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.input}: {exc}") from exc
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        try:
            vecs = [as_vector([float(c) for c in r]) for r in rows]
        except ValueError as exc:
            raise UsageError(f"malformed vector file {args.input}: {exc}") from exc
        if not vecs:
            raise UsageError(f"no vectors in {args.input}")
        return vecs, False
    raise UsageError("no input vector: use --x or --input")


def _need_k(args) -> int:
    if args.k is None:
        raise UsageError("--k is required for this command")
    return args.k


# -- commands ------------------------------------------------------------------------

def _sequence_record(source: NormSpec, x: np.ndarray, args) -> dict:
    top = topk_sequence(source, x)
    ks = ksupport_sequence(source, x, args.tol, args.method)
    return {"x": x.tolist(), "source": source.to_dict(), "topk": list(top.values),
            "ksupport": list(ks.values), "stationary_from": top.stationary_from,
            "ksupport_stationary_from": ks.stationary_from, "l0": l0(x),
            "_chains": (top.chain(), ks.chain())}


def _l0_record(source: NormSpec, x: np.ndarray, args) -> dict:
    d = x.size
    verdict = grade_vector(source, x, INCREASING, True, args.tol).to_dict()
    verdict.pop("sequence")
    return {"source": source.to_dict(), "x": x.tolist(), "l0": l0(x),
            "l0_topk": l0_from_topk(source, x, args.tol),
            "l0_ksupport": l0_from_ksupport(source, x, args.tol, args.method),
            "dc": [dc_level_membership(source, x, k, args.tol) for k in range(d + 1)],
            "verdict": verdict}


def _check(args, source: NormSpec) -> tuple[list[dict], int]:
    prop = args.property
    common = dict(trials=args.trials, seed=args.seed)
    dim = args.dim
    if prop == "gradedness":
        res = classify_gradedness(source, dim, args.direction, not args.non_strict,
                                  tol=args.tol, method=args.method, **common)
        return [res.to_dict()], EXIT_FALSIFIED if res.verdict == "falsified" else EXIT_OK
    if prop == "level-set":
        report = check_level_set_sphere_identity(source, _need_k(args), dim, tol=args.tol,
                                                 method=args.method, **common)
    elif prop in ("osm", "om-rotund-osm"):
        report = CHECKERS[prop](source, dim=dim, **common)
    elif prop in ("birkhoff", "birkhoff-strict"):
        K = None
        if args.K is not None:
            d = dim or source.dim
            if d is None:
                raise UsageError("--K needs --dim for sources without a fixed dimension")
            K = IndexSet.from_one_based(json.loads(args.K), d)
        report = CHECKERS[prop](source, K=K, dim=dim, tol=args.tol, **common)
    else:
        report = CHECKERS[prop](source, dim=dim, tol=args.tol, **common)
    return [report.to_dict()], EXIT_FALSIFIED if report.falsified else EXIT_OK


# -- output ------------------------------------------------------------------------

def _public(rec: dict) -> dict:
    return {k: v for k, v in rec.items() if not k.startswith("_")}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return json.dumps(v, sort_keys=True)


def _render(command: str, records: list[dict], single: bool, fmt: str) -> str:
    if fmt == "json":
        body = [_public(r) for r in records]
        return json.dumps(body[0] if single else body, sort_keys=True) + "\n"
    if fmt == "csv":
        rows = [_public(r) for r in records]
        keys = sorted({k for r in rows for k in r})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) if k in r else "" for k in keys])
        return buf.getvalue()
    return "".join(_human(command, r) for r in records)


def _human(command: str, r: dict) -> str:
    if command in ("eval", "dual", "topk", "ksupport"):
        return f"{r['value']!r}\n"
    if command == "l0":
        return f"{r['l0_topk']}\n"
    if command == "sequence":
        top, ks = r["_chains"]
        return (f"x         = {r['x']}\n"
                f"top-k     : {top}   (stationary from k={r['stationary_from']})\n"
                f"k-support : {ks}   (stationary from k={r['ksupport_stationary_from']})\n"
                f"l0        = {r['l0']}\n")
    if command == "check":
        if "property" not in r:  # gradedness classification
            head = (f"gradedness ({r['direction']}, {'strict' if r['strict'] else 'non-strict'})"
                    f": {r['verdict']} after {r['trials']} vector(s)")
        else:
            head = f"{r['property']}: {r['verdict']} after {r['trials']} trial(s)"
            if r.get("note"):
                head += f" ({r['note']})"
        if r.get("witness") is not None:
            head += "\nwitness: " + json.dumps(r["witness"], sort_keys=True)
        return head + "\n"
    return json.dumps(_public(r), sort_keys=True) + "\n"


def _emit(text: str, args) -> None:
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit with 2, --help with 0
        return int(exc.code or 0)
    try:
        if args.command == "suite":
            return _suite(args)
        source = parse_norm_spec(args.source)
        single = True
        if args.command == "check":
            records, code = _check(args, source)
        else:
            vecs, single = _vectors(args)
            handlers = {
                "eval": lambda x: source.eval(x),
                "dual": lambda x: source.dual_eval(x),
                "topk": lambda x: topk_eval(source, _need_k(args), x),
                "ksupport": lambda x: ksupport_eval(source, _need_k(args), x, args.tol,
                                                    args.method),
            }
            if args.command in handlers:
                fn = handlers[args.command]
                records = [{"x": x.tolist(), "value": fn(x)} for x in vecs]
            elif args.command == "sequence":
                records = [_sequence_record(source, x, args) for x in vecs]
            else:
                records = [_l0_record(source, x, args) for x in vecs]
            code = EXIT_OK
        _emit(_render(args.command, records, single, args.format), args)
        return code
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (UsageError, GradedNormsError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _suite(args) -> int:
    def progress(res):
        if args.format == "human":
            print(res.line(), flush=True)

    bundle = run_suite(quick=args.quick, filter_=args.filter, seed=args.seed,
                       progress=progress if args.format == "human" else None)
    if args.format == "human":
        if args.output:
            Path(args.output).write_text(json.dumps(bundle, sort_keys=True) + "\n")
        status = "all criteria passed" if bundle["passed"] else "some criteria FAILED"
        print(status)
    elif args.format == "csv":
        rows = [{"id": c["id"], "title": c["title"], "passed": c["passed"]}
                for c in bundle["criteria"]]
        _emit(_render("suite", rows, False, "csv"), args)
    else:
        _emit(json.dumps(bundle, sort_keys=True) + "\n", args)
    return EXIT_OK if bundle["passed"] else EXIT_FALSIFIED


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
