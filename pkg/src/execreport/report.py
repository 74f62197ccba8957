"""Phase two: enumerate feasible boundary traces of an assumption automaton."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import feasibility
from .analyses import AA_FALSE, AA_TRUE, AutomatonAnalysis, LocationAnalysis, ValueAnalysis, compose
from .automaton import AssumptionAutomaton, aa_analyzed, aa_safe_cone
from .cfa import CFA
from .cpa import ART, art_path, run
from .errors import ExecReportError
from .verifier import make_waitlist

FULLY_ENUMERATED = "fully-enumerated"
BUDGET_TRUNCATED = "budget-truncated"
FULLY_VERIFIED = "fully-verified"
NOT_REQUESTED = "not-requested"

COMPONENTS = ("S", "F")
FLAG = {"S": AA_TRUE, "F": AA_FALSE}
FORMAT_VERSION = 1


class ReportFormatError(ExecReportError):
    pass


@dataclass(frozen=True)
class ReportedTrace:
    edges: tuple
    witness: tuple
    lines: tuple = ()
    statements: tuple = ()
    end_location: int = -1

    def sort_key(self):
        return (len(self.edges), self.edges)


def describe(cfa: CFA, edges: Sequence[str], witness: Sequence[int]) -> ReportedTrace:
    es = [cfa.edges[e] for e in edges]
    end = es[-1].target if es else cfa.entry
    return ReportedTrace(tuple(edges), tuple(witness), tuple(e.line for e in es), tuple(e.text for e in es), end)


@dataclass
class ExecutionReport:
    S: list = field(default_factory=list)
    F: list = field(default_factory=list)
    status: dict = field(default_factory=lambda: {"S": NOT_REQUESTED, "F": NOT_REQUESTED})
    skipped_unknown: dict = field(default_factory=lambda: {"S": 0, "F": 0})
    pops: dict = field(default_factory=lambda: {"S": 0, "F": 0})
    config: dict = field(default_factory=dict)
    source_hash: str = ""

    def traces(self, component: str) -> list:
        return self.S if component == "S" else self.F

    def end_locations(self, component: str) -> set:
        return {t.end_location for t in self.traces(component)}


def in_safe_cone_set(aa: AssumptionAutomaton, edges: Sequence[str]) -> bool:
    """The automaton-level conjuncts of minimal safe-cone membership."""
    return bool(edges) and aa_safe_cone(aa, edges) and not aa_safe_cone(aa, edges[:-1])


def in_frontier_set(aa: AssumptionAutomaton, edges: Sequence[str]) -> bool:
    return bool(edges) and aa_analyzed(aa, edges[:-1]) and not aa_analyzed(aa, edges)


def _enumerate(cfa: CFA, aa: AssumptionAutomaton, component: str, pop_budget: Optional[int],
               opaque: bool, waitlist: str, fopts: dict):
    flag = FLAG[component]
    cpa = compose(cfa, [LocationAnalysis(cfa), ValueAnalysis(cfa, opaque, path_sensitive=True),
                        AutomatonAnalysis(aa, strict=True)])
    art = ART(cpa.initial_state(), make_waitlist(cfa, waitlist), cpa.partition)

    def absorbing(state) -> bool:
        return state[-1] in (AA_TRUE, AA_FALSE)

    found: dict = {}
    skipped = 0
    pops = 0
    while True:
        remaining = None if pop_budget is None else max(pop_budget - pops, 0)
        outcome = run(cpa, art, lambda s: s[-1] == flag, remaining, absorbing)
        pops += outcome.pops
        if outcome.target is None:
            break
        edges = art_path(art, outcome.target)
        if edges in found:
            continue
        verdict = feasibility.check(cfa, edges, opaque_multiplication=opaque, **fopts)
        if isinstance(verdict, feasibility.Feasible):
            found[edges] = describe(cfa, edges, verdict.witness)
        else:
            skipped += 1
    status = FULLY_ENUMERATED if outcome.exhausted else BUDGET_TRUNCATED
    return sorted(found.values(), key=ReportedTrace.sort_key), status, skipped, pops


def generate(cfa: CFA, aa: AssumptionAutomaton, component: str = "both", pop_budget: Optional[int] = 100_000,
             opaque_multiplication: bool = False, waitlist: str = "bfs",
             domain_bound: int = feasibility.DEFAULT_DOMAIN_BOUND,
             max_symbols: int = feasibility.DEFAULT_MAX_SYMBOLS,
             node_budget: int = feasibility.DEFAULT_NODE_BUDGET) -> ExecutionReport:
    """Build the execution report for ``component`` in {"S", "F", "both"}.

    Each component is an independent run; a run stops at the first entry
    into the flagged absorbing state, so every hit has the boundary shape.
    """
    if component not in ("S", "F", "both"):
        raise ValueError(f"unknown component {component!r}")
    fopts = dict(domain_bound=domain_bound, max_symbols=max_symbols, node_budget=node_budget)
    report = ExecutionReport(
        config=dict(component=component, pop_budget=pop_budget, opaque_multiplication=opaque_multiplication,
                    waitlist=waitlist, **fopts),
        source_hash=cfa.source_hash,
    )
    wanted = COMPONENTS if component == "both" else (component,)
    for comp in wanted:
        if aa.initial == AA_TRUE:
            # no trace has a non-safe-cone prefix, and FALSE is unreachable
            report.status[comp] = FULLY_VERIFIED if comp == "S" else FULLY_ENUMERATED
            continue
        if aa.initial == AA_FALSE:
            report.status[comp] = FULLY_ENUMERATED
            continue
        traces, status, skipped, pops = _enumerate(cfa, aa, comp, pop_budget, opaque_multiplication, waitlist, fopts)
        setattr(report, comp, traces)
        report.status[comp] = status
        report.skipped_unknown[comp] = skipped
        report.pops[comp] = pops
    return report


def end_location_coverage(report: ExecutionReport, truth: Optional[dict] = None) -> dict:
    """Per component: reported end locations and, given ground truth
    ``{"S": set, "F": set}``, the covered/uncovered verdict per location."""
    table = {}
    for comp in COMPONENTS:
        have = report.end_locations(comp)
        entry = {"end_locations": sorted(have)}
        if truth is not None:
            entry["verdict"] = {str(loc): ("covered" if loc in have else "uncovered")
                                for loc in sorted(truth.get(comp, ()))}
        table[comp] = entry
    return table


def _trace_doc(t: ReportedTrace) -> dict:
    return {"edges": list(t.edges), "lines": list(t.lines), "statements": list(t.statements),
            "end_location": t.end_location, "witness": list(t.witness)}


def to_dict(report: ExecutionReport) -> dict:
    return {
        "format": FORMAT_VERSION,
        "status": dict(report.status),
        "config": dict(report.config),
        "source_hash": report.source_hash,
        "S": [_trace_doc(t) for t in sorted(report.S, key=ReportedTrace.sort_key)],
        "F": [_trace_doc(t) for t in sorted(report.F, key=ReportedTrace.sort_key)],
        "coverage": end_location_coverage(report),
        "skipped_unknown": dict(report.skipped_unknown),
        "pops": dict(report.pops),
    }


def emit(report: ExecutionReport) -> str:
    return json.dumps(to_dict(report), sort_keys=True, indent=1) + "\n"


def _trace_from(doc) -> ReportedTrace:
    try:
        return ReportedTrace(tuple(doc["edges"]), tuple(int(v) for v in doc["witness"]),
                             tuple(doc.get("lines", ())), tuple(doc.get("statements", ())),
                             int(doc.get("end_location", -1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"malformed trace entry: {exc}") from None


def parse_report(text: str) -> ExecutionReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportFormatError(f"malformed report document: {exc}") from None
    if not isinstance(doc, dict):
        raise ReportFormatError("report document must be an object")
    for key in ("status", "S", "F"):
        if key not in doc:
            raise ReportFormatError(f"missing key {key!r}")
    if not isinstance(doc["S"], list) or not isinstance(doc["F"], list):
        raise ReportFormatError("'S' and 'F' must be lists")
    return ExecutionReport(
        S=[_trace_from(t) for t in doc["S"]],
        F=[_trace_from(t) for t in doc["F"]],
        status=dict(doc["status"]),
        skipped_unknown=dict(doc.get("skipped_unknown", {"S": 0, "F": 0})),
        pops=dict(doc.get("pops", {"S": 0, "F": 0})),
        config=dict(doc.get("config", {})),
        source_hash=doc.get("source_hash", ""),
    )
