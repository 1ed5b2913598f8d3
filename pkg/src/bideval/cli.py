"""Command-line front end: run, update, repl, examples, bench."""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

from .bundled import EXAMPLES, example_source
from .interp import EvalError, Session, UpdateConfig
from .program import run_source, update_source
from .syntax import ParseError, parse, parse_value, print_value
from .prelude import prelude_env
from .interp import evaluate

EXIT_OK = 0
EXIT_EVAL = 1
EXIT_PARSE = 2
EXIT_NO_SOLUTION = 3

SOLUTION_MARKER = "-" * 8 + " solution {n} " + "-" * 8


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bideval",
        description="Run and repair programs by example output.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate a program's main")
    p_run.add_argument("program")
    p_run.add_argument("--step-budget", type=int, default=None)

    p_upd = sub.add_parser("update",
                           help="synthesize repairs for a changed output")
    p_upd.add_argument("program")
    p_upd.add_argument("expected",
                       help="path to a .leov value file, or an inline literal")
    p_upd.add_argument("--merge", choices=["two-way", "three-way"],
                       default="three-way")
    p_upd.add_argument("--max-solutions", type=int, default=10)
    p_upd.add_argument("--solution", type=int, default=None, metavar="K",
                       help="write solution K (1-based) back to the program")
    p_upd.add_argument("--format", choices=["pretty", "value", "summary"],
                       default="pretty")
    p_upd.add_argument("--step-budget", type=int, default=None)

    p_repl = sub.add_parser("repl", help="interactive expression evaluation")
    p_repl.add_argument("--step-budget", type=int, default=None)

    p_ex = sub.add_parser("examples", help="list or print bundled examples")
    p_ex.add_argument("id", nargs="?")

    p_bench = sub.add_parser("bench", help="timing table over the examples")
    p_bench.add_argument("--out", default=None, help="write CSV here")
    p_bench.add_argument("--trials", type=int, default=10)
    p_bench.add_argument("--synthetic-size", type=int, default=10000)

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "update":
        return cmd_update(args)
    if args.command == "repl":
        return cmd_repl(args)
    if args.command == "examples":
        return cmd_examples(args)
    if args.command == "bench":
        return cmd_bench(args)
    return EXIT_OK


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def cmd_run(args) -> int:
    try:
        src = _read(args.program)
        value = run_source(src, step_budget=args.step_budget)
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except EvalError as err:
        print(f"evaluation error: {err}", file=sys.stderr)
        return EXIT_EVAL
    print(print_value(value))
    return EXIT_OK


def cmd_update(args) -> int:
    try:
        src = _read(args.program)
    except OSError as err:
        print(f"cannot read program: {err}", file=sys.stderr)
        return EXIT_PARSE
    try:
        if os.path.exists(args.expected) or args.expected.endswith(".leov"):
            expected_text = _read(args.expected)
        else:
            expected_text = args.expected
        wanted = parse_value(expected_text)
    except (OSError, ParseError) as err:
        print(f"cannot read expected value: {err}", file=sys.stderr)
        return EXIT_PARSE

    cfg = UpdateConfig(merge_mode=args.merge,
                       max_solutions=args.max_solutions,
                       step_budget=args.step_budget)
    try:
        current = run_source(src, step_budget=args.step_budget)
        from .core import val_equal
        if val_equal(current, wanted):
            print(SOLUTION_MARKER.format(n=1))
            sys.stdout.write(src)
            print("-- in sync: output already matches")
            return EXIT_OK
        solutions = list(update_source(src, wanted, cfg))
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except EvalError as err:
        print(f"evaluation error: {err}", file=sys.stderr)
        return EXIT_EVAL

    if not solutions:
        print("no solutions", file=sys.stderr)
        return EXIT_NO_SOLUTION

    for i, sol in enumerate(solutions, start=1):
        print(SOLUTION_MARKER.format(n=i))
        if args.format in ("pretty", "value"):
            sys.stdout.write(sol.code)
            if not sol.code.endswith("\n"):
                print()
        if args.format == "value":
            print("-- output: " + print_value(sol.output()))
        print(f"-- summary: {sol.summary}" if sol.summary
              else "-- summary: (unchanged)")

    if args.solution is not None:
        k = args.solution
        if not 1 <= k <= len(solutions):
            print(f"solution {k} does not exist", file=sys.stderr)
            return EXIT_NO_SOLUTION
        _atomic_write(args.program, solutions[k - 1].code)
        print(f"-- wrote solution {k} to {args.program}")
    return EXIT_OK


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".bideval-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_repl(args) -> int:
    env = prelude_env()
    print("bideval repl; enter expressions, :q to quit")
    while True:
        try:
            line = input("> ")
        except EOFError:
            print()
            return EXIT_OK
        if line.strip() in (":q", ":quit"):
            return EXIT_OK
        if not line.strip():
            continue
        try:
            e = parse(line)
            s = Session(UpdateConfig(step_budget=args.step_budget))
            print(print_value(evaluate(env, e, s)))
        except (ParseError, EvalError) as err:
            print(f"error: {err}")


def cmd_examples(args) -> int:
    if args.id is None:
        for ex in EXAMPLES:
            print(f"{ex.id}\t{ex.title}")
        return EXIT_OK
    src = example_source(args.id)
    if src is None:
        print(f"unknown example {args.id!r}", file=sys.stderr)
        return EXIT_PARSE
    sys.stdout.write(src)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench, render_csv
    rows = run_bench(trials=args.trials, synthetic_size=args.synthetic_size)
    csv_text = render_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(csv_text)
    sys.stdout.write(csv_text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
