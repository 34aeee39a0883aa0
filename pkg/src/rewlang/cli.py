"""Command-line surface.

    rewlang check <file>
    rewlang desugar <file>
    rewlang run <file> --query <term> [--trace <file>] [--max-steps N]
            [--max-depth N] [--occurs-check] [--strict-single-assignment]
            [--random-innermost SEED]

Exit codes: 0 success, 1 check/parse errors, 2 runtime error, 3 limit
exceeded.  stdout carries only the result term; diagnostics go to stderr.
The environment variable REWLANG_SEED fixes the label counter origin.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from . import checks, desugar, printer
from .engine import EvalError, EvalState, RunResult, Session, TraceEvent, run_query
from .parser import ParseError, parse_program, parse_query
from .store import OccursViolation, strip
from .terms import App, ERROR

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_RUNTIME = 2
EXIT_LIMIT = 3

_LIMIT_OUTCOMES = {"step-limit", "depth-limit"}


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read(), path)


def _report(diags, source_name: str) -> None:
    for d in diags:
        print(d.render(source_name), file=sys.stderr)


def cmd_check(args) -> int:
    try:
        prog = _load(args.file)
    except ParseError as e:
        print(f"error parse {e}", file=sys.stderr)
        return EXIT_CHECK
    mode = checks.SINGLE_ASSIGNMENT if args.strict_single_assignment else checks.MULTI_ASSIGNMENT
    diags = checks.run_checks(prog, mode)
    _report(diags, args.file)
    return EXIT_CHECK if checks.has_errors(diags) else EXIT_OK


def cmd_desugar(args) -> int:
    try:
        prog = _load(args.file)
    except ParseError as e:
        print(f"error parse {e}", file=sys.stderr)
        return EXIT_CHECK
    mode = checks.SINGLE_ASSIGNMENT if args.strict_single_assignment else checks.MULTI_ASSIGNMENT
    diags = checks.run_checks(prog, mode)
    _report(diags, args.file)
    if checks.has_errors(diags):
        return EXIT_CHECK
    lowered = desugar.lower_loops(prog)
    system = desugar.flatten_program(prog)
    print("# loop-free form (re-runnable):")
    print(printer.program(lowered.program))
    print("# assignment-free rewrite system:")
    for rule in system.rules:
        print(f"#   {printer.plain(rule.lhs)} -> {printer.plain(rule.rhs)}")
    return EXIT_OK


def _trace_record(event: TraceEvent) -> str:
    return json.dumps(
        {
            "step": event.step,
            "kind": event.kind,
            "rule": event.rule,
            "label": event.label,
            "before": printer.plain(event.before),
            "after": printer.plain(event.after),
        },
        sort_keys=True,
    )


def cmd_run(args) -> int:
    try:
        prog = _load(args.file)
    except ParseError as e:
        print(f"error parse {e}", file=sys.stderr)
        return EXIT_CHECK
    mode = checks.SINGLE_ASSIGNMENT if args.strict_single_assignment else checks.MULTI_ASSIGNMENT
    diags = checks.run_checks(prog, mode)
    _report(diags, args.file)
    if checks.has_errors(diags):
        return EXIT_CHECK
    try:
        query = parse_query(args.query, prog)
    except ParseError as e:
        print(f"error parse {e}", file=sys.stderr)
        return EXIT_CHECK

    state = EvalState(
        max_steps=args.max_steps,
        max_depth=args.max_depth,
        occurs_check=args.occurs_check,
        collect_trace=args.trace is not None,
    )

    if args.random_innermost is not None:
        result = _run_random(prog, query, state, mode, args.random_innermost)
    else:
        result = run_query(prog, query, state=state, mode=mode)

    if args.trace is not None:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for event in result.trace:
                fh.write(_trace_record(event) + "\n")

    if result.term is not None:
        print(printer.plain(result.term))
    if result.outcome == "ok":
        return EXIT_OK
    print(f"error {result.outcome} {result.message}", file=sys.stderr)
    return EXIT_LIMIT if result.outcome in _LIMIT_OUTCOMES else EXIT_RUNTIME


def _run_random(prog, query, state: EvalState, mode: str, seed: int) -> RunResult:
    session = Session(prog, mode, state)
    try:
        root = session.load_query(query)
        rng = random.Random(seed)
        result = session.evaluator.normalize_random(root, rng)
        term = strip(result, session.snap)
        if isinstance(term, App) and term.symbol == ERROR:
            return RunResult("error-constant", term, state.trace, state.step_count,
                             "evaluation produced the error constant")
        return RunResult("ok", term, state.trace, state.step_count)
    except EvalError as e:
        return RunResult(e.kind, None, state.trace, state.step_count, str(e))
    except OccursViolation as e:
        return RunResult("occurs-violation", None, state.trace, state.step_count, str(e))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rewlang", description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="program file (.trs)")
        p.add_argument(
            "--strict-single-assignment",
            action="store_true",
            help="forbid reassignment of bound variables",
        )

    p_check = sub.add_parser("check", help="parse and statically verify a program")
    common(p_check)
    p_check.set_defaults(fn=cmd_check)

    p_desugar = sub.add_parser(
        "desugar", help="print the loop-free form and the rewrite system"
    )
    common(p_desugar)
    p_desugar.set_defaults(fn=cmd_desugar)

    p_run = sub.add_parser("run", help="evaluate a query to normal form")
    common(p_run)
    p_run.add_argument("--query", required=True, help="ground term to evaluate")
    p_run.add_argument("--trace", help="write one JSON record per reduction step")
    p_run.add_argument("--max-steps", type=int, default=10**6)
    p_run.add_argument("--max-depth", type=int, default=10**4)
    p_run.add_argument(
        "--occurs-check",
        action="store_true",
        help="reject destructive updates that would create cycles",
    )
    p_run.add_argument(
        "--random-innermost",
        type=int,
        metavar="SEED",
        help="testing strategy: reduce a random innermost redex each step"
        " (pure programs only)",
    )
    p_run.set_defaults(fn=cmd_run)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
