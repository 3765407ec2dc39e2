"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 budget or resolution error,
3 malformed input.  Every command writes deterministic output for fixed
inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .action import (
    STATIONARITY_TOL,
    CellAction,
    entropy_breakdown,
    rn_distribution,
    rn_tail,
    validate,
)
from .errors import FurstatError, MalformedInputError, ValidationError
from .experiments import KINDS, ExperimentConfig, parse_measure, run, write_csv
from .geometry import DEFAULT_BUDGET, DEFAULT_TRUNCATION, MODES, OrderedPartition, containment_report, delta
from .io import action_to_dict, dumps, read_action
from .matching import prop2_construct
from .models import (
    BoundarySpec,
    boundary_action,
    convex_combine,
    finite_bijective,
    stabilize,
    trivial_action,
)
from .words import GENERATOR_NAMES, GroupWord, words_up_to_length


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(MalformedInputError.exit_code, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise MalformedInputError(f"expected comma-separated numbers, got {text!r}") from None


def _perm(text: str) -> tuple[str, list[int]]:
    name, sep, body = text.partition("=")
    if not sep or not name.strip():
        raise MalformedInputError(f"--perm expects NAME=i,j,k; got {text!r}")
    try:
        return name.strip(), [int(x) for x in body.split(",")]
    except ValueError:
        raise MalformedInputError(f"bad permutation {text!r}") from None


def _words(text: str, rank: int) -> list[GroupWord]:
    return [GroupWord.parse(w, rank) for w in text.split(",") if w.strip()]


def _fmt12(x: float) -> str:
    # 12 significant digits, trailing zeros kept; an exact zero prints as 0
    return "0" if x == 0 else format(x, "#.12g")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path: str) -> CellAction:
    action = read_action(path)
    report = validate(action)
    if not report.ok:
        raise ValidationError(f"{path} does not validate:\n{report.summary()}", report)
    return action


# --------------------------------------------------------------------------
# build


def _build_action(args) -> CellAction:
    if args.model == "boundary":
        m = parse_measure(args.measure, args.rank)
        action = boundary_action(BoundarySpec(args.rank, args.depth, m))
        extra = [w for w in words_up_to_length(args.rank, args.store_length) if not w.is_identity]
        return action.with_transports(extra)
    if args.model == "trivial":
        m = parse_measure(args.measure, args.rank)
        return trivial_action(_floats(args.weights), m)
    if args.model == "bijective":
        m = parse_measure(args.measure, args.rank)
        perms = dict(_perm(p) for p in args.perm or [])
        for name in perms:
            if name not in GENERATOR_NAMES[:args.rank]:
                raise MalformedInputError(f"unknown generator {name!r} for rank {args.rank}")
        return finite_bijective(perms, _floats(args.weights), m)
    if args.model == "combine":
        a, b = (_load(f) for f in args.files)
        return convex_combine(a, b, args.t)
    if args.model == "stabilize":
        return stabilize(_load(args.file), _floats(args.weights))
    raise MalformedInputError(f"unknown model {args.model!r}")


def cmd_build(args) -> int:
    action = _build_action(args)
    report = validate(action)
    if not report.ok:
        sys.stderr.write("construction does not validate:\n" + report.summary() + "\n")
        return ValidationError.exit_code
    text = dumps(action_to_dict(action)) + "\n"
    _emit(text, args.output)
    summary = f"cells={action.n_cells} kind={action.kind} entropy={_fmt12(math.fsum(entropy_breakdown(action).values()))}\n"
    (sys.stdout if args.output else sys.stderr).write(summary)
    return 0


# --------------------------------------------------------------------------
# inspection


def cmd_validate(args) -> int:
    action = read_action(args.file)
    report = validate(action, args.tolerance)
    print(report.summary())
    for cid, r in report.stationarity_residuals.items():
        print(f"  {cid}\t{r:.3e}")
    return 0 if report.ok else ValidationError.exit_code


def cmd_entropy(args) -> int:
    action = read_action(args.file)
    parts = entropy_breakdown(action)
    print(_fmt12(math.fsum(parts.values())))
    if args.per_generator:
        for w, h in parts.items():
            print(f"  {w}\t{_fmt12(h)}")
    return 0


def cmd_rn_tail(args) -> int:
    action = _load(args.file)
    w = GroupWord.parse(args.word, action.rank)
    for c in args.threshold:
        print(f"{format(c, 'g')}\t{_fmt12(rn_tail(action, w, c))}")
    if args.distribution:
        for mass_, value in rn_distribution(action, w):
            print(f"  value {_fmt12(value)}\tmass {_fmt12(mass_)}")
    return 0


def _report_output(rep, args) -> int:
    if args.csv:
        buf = io.StringIO()
        buf.write(f"# furstat {__version__} seed={args.seed} M={rep.M} N={rep.N} "
                  f"tail_bound={format(rep.tail_bound, '.17g')}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(rep.CSV_FIELDS)
        w.writerow(rep.csv_row())
        w.writerow(["m", "n", "distance"])
        for (m, n), d in sorted(rep.terms.items()):
            w.writerow([m, n, format(d, ".17g")])
        Path(args.csv).write_text(buf.getvalue(), encoding="utf-8")
    print(rep.summary())
    return 2 if rep.errors else 0


def _mode(args):
    if args.mode_b is not None:
        return args.mode, args.mode_b
    return args.mode


def cmd_delta(args) -> int:
    a, b = _load(args.a), _load(args.b)
    rep = delta(a, b, args.max_m, args.max_n, _mode(args), args.budget, args.seed, args.jobs)
    return _report_output(rep, args)


def cmd_defect(args) -> int:
    a, b = _load(args.a), _load(args.b)
    rep = containment_report(a, b, args.max_m, args.max_n, _mode(args), args.budget, args.seed, args.jobs)
    return _report_output(rep, args)


def cmd_prop2(args) -> int:
    a, b = _load(args.a), _load(args.b)
    F = _words(args.F, a.rank)
    if args.partition:
        try:
            labels = [int(x) for x in args.partition.split(",")]
        except ValueError:
            raise MalformedInputError(f"--partition expects comma-separated labels, got {args.partition!r}") from None
        part = OrderedPartition.from_labels(a, labels, one_based=True)
    else:
        half = (a.n_cells + 1) // 2
        part = OrderedPartition.from_labels(a, [0] * half + [1] * (a.n_cells - half), 2 if a.n_cells > 1 else 1)
    res = prop2_construct(a, b, F, part, args.epsilon, args.budget, args.seed)
    cert = res.certificate
    print(f"words: {', '.join(cert['words'])}")
    print(f"partition of A: {' '.join(str(x + 1) for x in part.labels(a))}")
    print(f"partition of B: {' '.join(str(x + 1) for x in res.partition.labels(b))}")
    print(f"one-sided delta: {_fmt12(res.delta)}")
    print(f"two-sided discrepancy: {_fmt12(res.two_sided)}")
    print(f"bound 7*delta: {_fmt12(cert['bound'])} ({'holds' if cert['bound_holds'] else 'VIOLATED'})")
    print(f"epsilon: {format(args.epsilon, 'g')}")
    print("certified" if res.certified else "not certified")
    return 0


def cmd_experiment(args) -> int:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise MalformedInputError("config must be a JSON object")
    data["kind"] = args.kind
    overrides = {
        "rank": args.rank, "depth": args.depth, "measure": args.measure, "M": args.max_m, "N": args.max_n,
        "mode": args.mode, "budget": args.budget, "seed": args.seed, "t_ref": args.t_ref,
        "rn_word": args.rn_word, "trials": args.trials, "cells": args.cells, "epsilon": args.epsilon,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    for key in ("t_grid", "thresholds", "targets", "mixing"):
        value = getattr(args, key)
        if value is not None:
            data[key] = tuple(_floats(value))
    for key in ("ranks", "depths"):
        value = getattr(args, key)
        if value is not None:
            data[key] = tuple(int(x) for x in _floats(value))
    if args.trivial_weights is not None:
        data["trivial_weights"] = tuple(_floats(args.trivial_weights))
    cfg = ExperimentConfig.from_dict(data)
    result = run(cfg)
    _emit(write_csv(result), args.output or cfg.output)
    failed = [k for k, ok in result.checks.items() if not ok]
    for k, ok in result.checks.items():
        sys.stderr.write(f"check {k}: {'pass' if ok else 'FAIL'}\n")
    return ValidationError.exit_code if failed else 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="furstat", description="Stationary actions of free groups on finite cell models.")
    p.add_argument("--version", action="version", version=f"furstat {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct an action file")
    bsub = b.add_subparsers(dest="model", required=True, parser_class=_Parser)

    def common(q):
        q.add_argument("--rank", type=int, default=2)
        q.add_argument("--measure", default=None, help='step distribution "a:0.25,a^-1:0.25,..." (default uniform)')
        q.add_argument("-o", "--output", default=None)

    q = bsub.add_parser("boundary")
    common(q)
    q.add_argument("--depth", type=int, default=2)
    q.add_argument("--store-length", type=int, default=2, help="store transports of all words up to this length")
    q = bsub.add_parser("trivial")
    common(q)
    q.add_argument("--weights", default="1")
    q = bsub.add_parser("bijective")
    common(q)
    q.add_argument("--perm", action="append", help="generator permutation, e.g. a=1,2,0 (repeatable)")
    q.add_argument("--weights", required=True)
    q = bsub.add_parser("combine")
    q.add_argument("--t", type=float, required=True)
    q.add_argument("files", nargs=2)
    q.add_argument("-o", "--output", default=None)
    q = bsub.add_parser("stabilize")
    q.add_argument("file")
    q.add_argument("--weights", default="0.5,0.5")
    q.add_argument("-o", "--output", default=None)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("validate", help="check invariants and stationarity")
    q.add_argument("file")
    q.add_argument("--tolerance", type=float, default=STATIONARITY_TOL)
    q.set_defaults(func=cmd_validate)

    q = sub.add_parser("entropy", help="Furstenberg entropy in nats")
    q.add_argument("file")
    q.add_argument("--per-generator", action="store_true")
    q.set_defaults(func=cmd_entropy)

    q = sub.add_parser("rn-tail", help="measure of {derivative > c}")
    q.add_argument("file")
    q.add_argument("--word", required=True)
    q.add_argument("--threshold", type=float, action="append", required=True)
    q.add_argument("--distribution", action="store_true", help="also print the derivative distribution")
    q.set_defaults(func=cmd_rn_tail)

    for name, func, text in (("delta", cmd_delta, "truncated delta metric"),
                             ("defect", cmd_defect, "directed containment defect of A in B")):
        q = sub.add_parser(name, help=text)
        q.add_argument("a")
        q.add_argument("b")
        q.add_argument("--max-m", type=int, default=DEFAULT_TRUNCATION)
        q.add_argument("--max-n", type=int, default=DEFAULT_TRUNCATION)
        q.add_argument("--mode", choices=MODES, default="exact")
        q.add_argument("--mode-b", choices=MODES, default=None, help="mode for the second action (default --mode)")
        q.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--jobs", type=int, default=1)
        q.add_argument("--csv", default=None, help="write the report as CSV to this path")
        q.set_defaults(func=func)

    q = sub.add_parser("prop2", help="two-sided matching construction")
    q.add_argument("a")
    q.add_argument("b")
    q.add_argument("--F", default="e,a", help="comma-separated words, must include e")
    q.add_argument("--epsilon", type=float, default=1.0)
    q.add_argument("--budget", type=int, default=10**6)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--partition", default=None, help="1-based labels of A's cells (default: two halves)")
    q.set_defaults(func=cmd_prop2)

    q = sub.add_parser("experiment", help="run an experiment and write CSV")
    q.add_argument("kind", choices=KINDS)
    q.add_argument("--config", default=None, help="JSON object of ExperimentConfig fields")
    q.add_argument("--output", "-o", default=None)
    for flag, typ in (("--rank", int), ("--depth", int), ("--max-m", int), ("--max-n", int),
                      ("--budget", int), ("--seed", int), ("--trials", int), ("--cells", int),
                      ("--t-ref", float), ("--epsilon", float)):
        q.add_argument(flag, type=typ, default=None)
    q.add_argument("--mode", choices=MODES, default=None)
    for flag in ("--measure", "--rn-word", "--t-grid", "--thresholds", "--targets", "--mixing",
                 "--ranks", "--depths", "--trivial-weights"):
        q.add_argument(flag, default=None)
    q.set_defaults(func=cmd_experiment)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FurstatError as exc:
        sys.stderr.write(f"furstat: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
