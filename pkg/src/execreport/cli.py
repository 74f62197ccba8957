"""Command-line interface: verify, report, oracle-check, show."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import automaton as aa_mod
from . import feasibility
from . import report as report_mod
from .cfa import load_cfa, source_hash
from .errors import (AutomatonFormatError, MiniCError, OracleResourceError, ParameterMismatchError,
                     SourceMismatchError)
from .oracle import DEFAULT_BOUND, DEFAULT_MAX_LENGTH, DEFAULT_MAX_STEPS, check_report, oracle_sets
from .verifier import BUG, DEFAULT_BUDGET, SAFE, verify

EXIT_OK = 0
EXIT_BUG = 1
EXIT_PARSE = 2
EXIT_IO = 3
EXIT_MISMATCH = 4
EXIT_ORACLE_FAIL = 5
EXIT_BLOWUP = 6
EXIT_UNKNOWN = 10

# rough pops per second of the pure-Python engine, for --wall-limit
POPS_PER_SECOND = 2000


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: str, text: str):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _sibling(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(p.name[: -len(p.suffix)] + suffix if p.suffix else p.name + suffix))


def _load(path: str, entry: str, capacity: int, inline_depth: int):
    try:
        return load_cfa(_read(path), entry=entry, max_inline_depth=inline_depth, array_capacity=capacity)
    except MiniCError as exc:
        raise _Exit(EXIT_PARSE, f"{path}:{exc}") from None


def _load_automaton(path: str):
    try:
        return aa_mod.parse(_read(path))
    except AutomatonFormatError as exc:
        raise _Exit(EXIT_PARSE, f"{path}: {exc}") from None


def _print_trace(cfa, edges, indent="  "):
    for eid in edges:
        e = cfa.edges[eid]
        print(f"{indent}line {e.line}: {e.text}")


def cmd_verify(args) -> int:
    cfa = _load(args.file, args.entry, args.array_capacity, args.max_inline_depth)
    budget = args.budget
    if args.wall_limit is not None:
        budget = min(budget, max(1, int(args.wall_limit * POPS_PER_SECOND)))
    result = verify(cfa, loop_bound=args.loop_bound, budget=budget,
                    opaque_multiplication=args.opaque_multiplication, waitlist=args.waitlist,
                    domain_bound=args.nondet_bound, max_symbols=args.max_nondets)
    print(result.verdict)
    if result.verdict == BUG:
        print(f"counterexample with inputs {list(result.witness)}:")
        _print_trace(cfa, result.counterexample)
        return EXIT_BUG
    if result.verdict == SAFE:
        return EXIT_OK
    result.automaton.config.update(entry=args.entry, max_inline_depth=args.max_inline_depth)
    out = args.emit_automaton or _sibling(args.file, ".aa.json")
    _write(out, aa_mod.serialize(result.automaton))
    print(f"automaton written to {out} ({len(result.automaton.normal_states())} states, "
          f"{result.pops} pops, {len(result.art.giveup)} given up)")
    return EXIT_UNKNOWN


def cmd_report(args) -> int:
    aa = _load_automaton(args.automaton)
    manifest, config = aa.manifest, aa.config
    entry = args.entry or manifest.get("entry_function", "main")
    capacity = args.array_capacity or manifest.get("array_capacity", 8)
    depth = args.max_inline_depth or config.get("max_inline_depth", 16)
    if not args.allow_source_mismatch and source_hash(_read(args.file)) != aa.source_hash:
        raise _Exit(EXIT_MISMATCH, f"{args.automaton}: automaton was built from a different source file")
    cfa = _load(args.file, entry, capacity, depth)
    try:
        aa_mod.check_against(aa, cfa, allow_mismatch=args.allow_source_mismatch)
    except SourceMismatchError as exc:
        raise _Exit(EXIT_MISMATCH, f"{args.automaton}: {exc}") from None
    opaque = args.opaque_multiplication or bool(config.get("opaque_multiplication", False))
    rep = report_mod.generate(cfa, aa, args.component, args.budget, opaque, args.waitlist,
                              domain_bound=args.nondet_bound, max_symbols=args.max_nondets)
    out = args.out or _sibling(args.file, ".er.json")
    _write(out, report_mod.emit(rep))
    for comp in report_mod.COMPONENTS:
        print(f"{comp}: {len(rep.traces(comp))} traces ({rep.status[comp]}, "
              f"{rep.skipped_unknown[comp]} skipped as unknown)")
    print(f"report written to {out}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    aa = _load_automaton(args.automaton)
    try:
        rep = report_mod.parse_report(_read(args.report))
    except report_mod.ReportFormatError as exc:
        raise _Exit(EXIT_PARSE, f"{args.report}: {exc}") from None
    entry = args.entry or aa.manifest.get("entry_function", "main")
    capacity = args.array_capacity or aa.manifest.get("array_capacity", 8)
    if source_hash(_read(args.file)) != aa.source_hash:
        raise _Exit(EXIT_MISMATCH, f"{args.automaton}: automaton was built from a different source file")
    cfa = _load(args.file, entry, capacity, aa.config.get("max_inline_depth", 16))
    try:
        aa_mod.check_against(aa, cfa)
    except SourceMismatchError as exc:
        raise _Exit(EXIT_MISMATCH, f"{args.automaton}: {exc}") from None
    try:
        sets = oracle_sets(cfa, aa, L=args.max_length, B=args.nondet_bound, max_steps=args.max_steps)
    except OracleResourceError as exc:
        raise _Exit(EXIT_BLOWUP, str(exc)) from None
    try:
        verdict = check_report(rep, sets, cfa, aa)
    except ParameterMismatchError as exc:
        raise _Exit(EXIT_MISMATCH, str(exc)) from None
    for w in verdict.warnings:
        print(f"warning: {w}")
    for v in sets.property_violations:
        print(f"property violation {v[0]} on {list(v[1])}")
    for comp, edges, why in verdict.membership_violations:
        print(f"membership violation in {comp} ({why}):")
        _print_trace(cfa, edges, "    ")
    for comp, loc in verdict.completeness_violations:
        print(f"completeness violation in {comp}: end location {loc} missing")
    ok = verdict.passed and not sets.property_violations
    print(f"oracle: {len(sets.safe_cone)} safe-cone and {len(sets.frontier)} frontier traces "
          f"(L={sets.L}, B={sets.B}); {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ORACLE_FAIL


def render(rep: report_mod.ExecutionReport, source: Optional[str] = None) -> str:
    """Human-readable listing grouped by end location."""
    src_lines = source.splitlines() if source is not None else None
    out = [f"S: {len(rep.S)} traces, F: {len(rep.F)} traces"]
    for comp, boundary in (("S", "TRUE"), ("F", "FALSE")):
        traces = rep.traces(comp)
        if not traces:
            continue
        out.append(f"{comp} ({rep.status.get(comp, '?')}):")
        groups: dict = {}
        for t in sorted(traces, key=report_mod.ReportedTrace.sort_key):
            groups.setdefault(t.end_location, []).append(t)
        for loc in sorted(groups):
            out.append(f"  end location {loc}:")
            for t in groups[loc]:
                lines = []
                for ln in t.lines:
                    if not lines or lines[-1] != ln:
                        lines.append(ln)
                out.append(f"    lines {', '.join(map(str, lines))} -> {boundary}; inputs {list(t.witness)}")
                for ln, text in zip(t.lines, t.statements):
                    extra = ""
                    if src_lines is not None and 0 < ln <= len(src_lines):
                        extra = f"    | {src_lines[ln - 1].strip()}"
                    out.append(f"      {ln:>4}: {text}{extra}")
    return "\n".join(out)


def cmd_show(args) -> int:
    try:
        rep = report_mod.parse_report(_read(args.report))
    except report_mod.ReportFormatError as exc:
        raise _Exit(EXIT_PARSE, f"{args.report}: {exc}") from None
    source = _read(args.source) if args.source else None
    print(render(rep, source))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="execreport", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, entry_default: Optional[str]):
        sp.add_argument("file", help="MiniC source file")
        sp.add_argument("--entry", default=entry_default, help="entry function")
        sp.add_argument("--array-capacity", type=int, default=8 if entry_default else None,
                        help="cells allocated for variable-length arrays")
        sp.add_argument("--nondet-bound", type=int, default=feasibility.DEFAULT_DOMAIN_BOUND,
                        help="inputs are searched in [-B, B]")
        sp.add_argument("--max-nondets", type=int, default=feasibility.DEFAULT_MAX_SYMBOLS)
        sp.add_argument("--waitlist", choices=("bfs", "dfs", "rpo"), default="bfs")
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="waitlist pops")
        sp.add_argument("--opaque-multiplication", action="store_true",
                        help="treat products of two non-literal operands as unknown")

    v = sub.add_parser("verify", help="phase one: check the assertions")
    common(v, "main")
    v.add_argument("--loop-bound", type=int, default=None, help="unroll each loop at most K times")
    v.add_argument("--emit-automaton", default=None, help="automaton path (default FILE.aa.json)")
    v.add_argument("--max-inline-depth", type=int, default=16)
    v.add_argument("--wall-limit", type=float, default=None, help="seconds, mapped to a pop budget")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="phase two: execution report from an automaton")
    common(r, None)
    r.add_argument("--automaton", required=True)
    r.add_argument("--component", choices=("S", "F", "both"), default="both")
    r.add_argument("--out", default=None, help="report path (default FILE.er.json)")
    r.add_argument("--max-inline-depth", type=int, default=None)
    r.add_argument("--allow-source-mismatch", action="store_true")
    r.set_defaults(func=cmd_report)

    o = sub.add_parser("oracle-check", help="compare a report with brute-force enumeration")
    o.add_argument("file")
    o.add_argument("--automaton", required=True)
    o.add_argument("--report", required=True)
    o.add_argument("--entry", default=None)
    o.add_argument("--array-capacity", type=int, default=None)
    o.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH)
    o.add_argument("--nondet-bound", type=int, default=DEFAULT_BOUND)
    o.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    o.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("show", help="print a report with source lines")
    s.add_argument("report")
    s.add_argument("--source", default=None, help="MiniC file to quote lines from")
    s.set_defaults(func=cmd_show)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        if exc.message:
            print(f"error: {exc.message}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
