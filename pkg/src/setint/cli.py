"""Command-line front end: ``setint solve|prove|check``.

Exit codes: 0 all expectations met, 1 verdict mismatch, 2 usage or parse
error, 3 resource limit.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import oracle, stdlib
from .ast import Formula, formula_vars
from .engine import Answer, ResourceLimit, answers, format_answer, model_of
from .oracle import ExplosionGuard
from .parser import (
    ArityMismatch, ParseError, RecursiveDefinition, SourceProgram, UnknownPredicate, expand,
    file_loader, parse,
)
from .unify import Options, Stats

OK, MISMATCH, USAGE, LIMIT = 0, 1, 2, 3



class UsageError(Exception):
    """The input is well-formed but does not fit the chosen mode."""


_INPUT_ERRORS = (ParseError, RecursiveDefinition, UnknownPredicate, ArityMismatch, FileNotFoundError,
                 UsageError)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="setint", description="Solver for set, interval and cardinality constraints.")
    sub = p.add_subparsers(dest="mode", required=True)
    for mode, text in (("solve", "print the answers of a query"),
                       ("prove", "prove conjectures given as their negations"),
                       ("check", "run a batch file of EXPECT entries and print a TSV report")):
        s = sub.add_parser(mode, help=text)
        s.add_argument("input", help="a query, a .slog file, or - for standard input")
        s.add_argument("--timeout", type=_positive_int, default=60000, metavar="MS",
                       help="time budget per query in milliseconds (default 60000)")
        s.add_argument("--max-answers", type=_positive_int, default=10, metavar="N",
                       help="stop after N answers (solve mode, default 10)")
        s.add_argument("--trace-rules", action="store_true", help="print every rule application to stderr")
        s.add_argument("--oracle-check", action="store_true",
                       help="cross-check each verdict with the brute-force evaluator when the formula is small enough")
        s.add_argument("--no-prelude", action="store_true", help="do not load the derived operators")
        s.add_argument("--stats", action="store_true", help="print search statistics to stderr")
        s.add_argument("--concrete", action="store_true",
                       help="print a concrete model instead of symbolic answers")
        s.add_argument("--load", action="append", default=[], metavar="FILE",
                       help="extra definitions: a .slog path or a shipped name (elevator, ...)")
    return p


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


# ---------------------------------------------------------------- loading

def _read_input(arg: str) -> tuple[str, Path | None]:
    if arg == "-":
        return sys.stdin.read(), None
    p = Path(arg)
    if p.suffix == ".slog" or p.is_file():
        return p.read_text(encoding="utf-8"), p.parent
    return arg, None


def _load_extra(spec: str) -> SourceProgram:
    p = Path(spec)
    if p.is_file():
        return parse(p.read_text(encoding="utf-8"), file_loader(p.parent))
    return stdlib.load(spec)


def load_program(args) -> SourceProgram:
    text, base = _read_input(args.input)
    prog = parse(text, file_loader(base))
    for spec in reversed(args.load):
        prog = _load_extra(spec).merged(prog)
    if not args.no_prelude:
        prog = stdlib.prelude().merged(prog)
    return prog


# ---------------------------------------------------------------- running

class _Run:
    def __init__(self, args, out, err):
        self.args, self.out, self.err = args, out, err
        self.stats = Stats()

    def options(self) -> Options:
        return Options(timeout=self.args.timeout / 1000.0)

    def trace(self):
        if not self.args.trace_rules:
            return None
        return lambda line: print(line, file=self.err)

    def collect(self, f: Formula, limit: int | None) -> list[Answer]:
        out = []
        for a in answers(f, self.options(), trace=self.trace(), stats=self.stats):
            out.append(a)
            if limit is not None and len(out) >= limit:
                break
        return out

    def show(self, f: Formula, a: Answer) -> str:
        if not self.args.concrete:
            return format_answer(a)
        names = sorted(v for v in formula_vars(f) if not v.startswith("_"))
        model = model_of(a.witness, names)
        return " & ".join(f"{n} = {oracle.show_value(model[n])}" for n in names) or "true"

    def oracle_note(self, f: Formula, sat: bool, found: list[Answer]) -> bool:
        """Report the brute-force verdict; False on a certain disagreement."""
        try:
            osat = oracle.satisfiable(f, oracle.DomainSpec(cap=2 * 10 ** 6))
        except ExplosionGuard:
            print("oracle: skipped (formula too large)", file=self.err)
            return True
        except (KeyError, TypeError):
            print("oracle: skipped", file=self.err)
            return True
        from .engine import check_answer
        bad = (osat and not sat) or any(not check_answer(f, a) for a in found)
        print(f"oracle: {'sat' if osat else 'unsat'} within the bounded domain"
              f"{' DISAGREES' if bad else ''}", file=self.err)
        return not bad

    def finish(self, code: int) -> int:
        if self.args.stats:
            for k, v in self.stats.as_dict().items():
                print(f"{k}: {v}", file=self.err)
        return code


def _solve(run: _Run, prog: SourceProgram) -> int:
    if prog.query is None:
        raise UsageError("no query given")
    f = expand(prog)
    try:
        found = run.collect(f, run.args.max_answers)
    except ResourceLimit as exc:
        print(f"UNKNOWN ({exc})", file=run.out)
        return run.finish(LIMIT)
    for a in found:
        print(run.show(f, a), file=run.out)
    print("SAT" if found else "UNSAT", file=run.out)
    code = OK
    if run.args.oracle_check and not run.oracle_note(f, bool(found), found):
        code = MISMATCH
    return run.finish(code)


def _prove_one(run: _Run, f: Formula) -> tuple[str, str]:
    try:
        found = run.collect(f, 1)
    except ResourceLimit as exc:
        return "UNKNOWN", str(exc)
    if not found:
        if run.args.oracle_check and not run.oracle_note(f, False, []):
            return "MISMATCH", "oracle found a model"
        return "THEOREM", ""
    return "COUNTEREXAMPLE", run.show(f, found[0])


def _prove(run: _Run, prog: SourceProgram) -> int:
    items = [(c.name, c.query) for c in prog.checks]
    if prog.query is not None:
        items.insert(0, (None, prog.query))
    if not items:
        raise UsageError("nothing to prove")
    results = []
    for name, q in items:
        verdict, detail = _prove_one(run, expand(prog, q))
        results.append(verdict)
        head = f"{name}: {verdict}" if name else verdict
        print(head, file=run.out)
        if detail:
            print(detail, file=run.out)
    if len(items) > 1:
        n = sum(r == "THEOREM" for r in results)
        print(f"{n}/{len(items)} THEOREM", file=run.out)
    if "UNKNOWN" in results:
        return run.finish(LIMIT)
    return run.finish(OK if all(r == "THEOREM" for r in results) else MISMATCH)


def _check(run: _Run, prog: SourceProgram) -> int:
    if not prog.checks:
        raise UsageError("the batch file has no EXPECT entries")
    mismatch = limit = False
    for c in prog.checks:
        f = expand(prog, c.query)
        t0 = time.perf_counter()
        try:
            found = run.collect(f, 1)
            got = ("counterexample" if found else "theorem") if c.expect == "theorem" else \
                ("sat" if found else "unsat")
        except ResourceLimit:
            got, found = "unknown", []
            limit = True
        ms = int((time.perf_counter() - t0) * 1000)
        if got != "unknown" and run.args.oracle_check and not run.oracle_note(f, bool(found), found):
            got = "oracle-mismatch"
        if got != c.expect and got != "unknown":
            mismatch = True
        print(f"{c.name}\t{c.expect}\t{got}\t{ms}", file=run.out)
    if limit:
        return run.finish(LIMIT)
    return run.finish(MISMATCH if mismatch else OK)


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    run = _Run(args, out, err)
    try:
        prog = load_program(args)
        mode = {"solve": _solve, "prove": _prove, "check": _check}[args.mode]
        return mode(run, prog)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
