"""Brute-force reference for the boundary trace sets, for testing only.

Every concrete execution with inputs in ``[-B, B]`` is enumerated up to
``L`` steps while the automaton is stepped alongside. A feasible trace is a
prefix of some execution, so the first entry of each execution into TRUE
(resp. FALSE) yields exactly the feasible minimal safe cones (resp.
frontier traces) of length at most ``L``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .analyses import AA_FALSE, AA_TRUE
from .automaton import DEAD, AssumptionAutomaton, aa_analyzed, aa_safe_cone
from .cfa import CFA, HAVOC
from .errors import OracleResourceError, ParameterMismatchError
from .interp import EvalFault, apply_edge, choose_edge, initial_state, replay
from .report import (COMPONENTS, FULLY_ENUMERATED, FULLY_VERIFIED, ExecutionReport, in_frontier_set,
                     in_safe_cone_set)

DEFAULT_MAX_LENGTH = 40
DEFAULT_BOUND = 4
DEFAULT_MAX_STEPS = 5_000_000


@dataclass
class OracleSets:
    safe_cone: dict  # trace -> (witness, smallest max-abs input among witnesses)
    frontier: dict
    L: int
    B: int
    executions: int = 0
    property_violations: list = field(default_factory=list)

    def component(self, comp: str) -> dict:
        return self.safe_cone if comp == "S" else self.frontier

    def end_locations(self, cfa: CFA, comp: str, bound: Optional[int] = None) -> set:
        locs = set()
        for t, (_, norm) in self.component(comp).items():
            if bound is None or norm <= bound:
                locs.add(cfa.edges[t[-1]].target)
        return locs


def _values(b: int):
    yield 0
    for m in range(1, b + 1):
        yield m
        yield -m


def _check_properties(cfa: CFA, aa: AssumptionAutomaton, trace: tuple, out: list):
    """Monotonicity and closure of the automaton predicates at ``trace`` and its one-step extensions."""
    analyzed = aa_analyzed(aa, trace)
    cone = aa_safe_cone(aa, trace)
    if cone and not analyzed:
        out.append(("safe-cone-implies-analyzed", trace))
    end = cfa.edges[trace[-1]].target if trace else cfa.entry
    for e in cfa.outgoing(end):
        ext = trace + (e.id,)
        if not analyzed and aa_analyzed(aa, ext):
            out.append(("not-analyzed-monotone", ext))
        if cone and not aa_safe_cone(aa, ext):
            out.append(("safe-cone-closure", ext))


def oracle_sets(cfa: CFA, aa: AssumptionAutomaton, L: int = DEFAULT_MAX_LENGTH, B: int = DEFAULT_BOUND,
                max_steps: int = DEFAULT_MAX_STEPS, check_properties: bool = True) -> OracleSets:
    if L < 0 or B < 0:
        raise ValueError("L and B must be non-negative")
    sets = OracleSets({}, {}, L, B)
    steps = [0]

    def record(comp: dict, trace: tuple, inputs: tuple):
        norm = max((abs(v) for v in inputs), default=0)
        if not replay(cfa, trace, list(inputs)):
            raise AssertionError(f"oracle witness {inputs} does not replay {trace}")
        old = comp.get(trace)
        if old is None:
            comp[trace] = (inputs, norm)
            if check_properties:
                _check_properties(cfa, aa, trace, sets.property_violations)
        elif norm < old[1]:
            comp[trace] = (inputs, norm)

    def step(edge, state, trace: tuple, q: str, inputs: tuple):
        """Successor (state, trace, q), or None when this execution is done."""
        try:
            nxt = apply_edge(edge, state, inputs)
        except EvalFault:
            sets.executions += 1
            return None
        trace = trace + (edge.id,)
        q2 = aa.step(q, edge.id)
        if q2 in (AA_TRUE, AA_FALSE):
            record(sets.safe_cone if q2 == AA_TRUE else sets.frontier, trace, inputs)
        if q2 in (AA_TRUE, AA_FALSE, DEAD):
            sets.executions += 1
            return None
        return nxt, trace, q2

    def explore(state, trace: tuple, q: str, inputs: tuple):
        while True:
            if len(trace) >= L or state.loc == cfa.error:
                sets.executions += 1
                return
            steps[0] += 1
            if steps[0] > max_steps:
                raise OracleResourceError(f"oracle exceeded {max_steps} steps (L={L}, B={B})")
            try:
                edge = choose_edge(cfa, state)
            except EvalFault:
                edge = None
            if edge is None:
                sets.executions += 1
                return
            if edge.stmt.kind == HAVOC:
                for v in _values(B):
                    nxt = step(edge, state, trace, q, inputs + (v,))
                    if nxt is not None:
                        explore(*nxt, inputs + (v,))
                return
            nxt = step(edge, state, trace, q, inputs)
            if nxt is None:
                return
            state, trace, q = nxt

    if aa.initial in (AA_TRUE, AA_FALSE):
        return sets
    nparams = len(cfa.inputs)

    def params(prefix: tuple):
        if len(prefix) == nparams:
            explore(initial_state(cfa, list(prefix)), (), aa.initial, prefix)
            return
        for v in _values(B):
            params(prefix + (v,))

    params(())
    return sets


@dataclass
class OracleCheck:
    membership_violations: list = field(default_factory=list)  # (component, trace, reason)
    completeness_violations: list = field(default_factory=list)  # (component, end location)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.membership_violations and not self.completeness_violations


def check_report(report: ExecutionReport, oracle: OracleSets, cfa: CFA,
                 aa: Optional[AssumptionAutomaton] = None) -> OracleCheck:
    """Soundness of every reported trace; end-location completeness of fully
    enumerated components.

    Traces inside the enumerated range (length <= L, inputs within [-B, B])
    must appear in the oracle's exact sets. Longer traces, or traces whose
    witness needs larger inputs, are checked against the literal membership
    conjuncts instead (automaton boundary shape plus replay of the witness).
    Completeness is judged on the oracle traces whose inputs fit both bounds.
    """
    if report.source_hash and report.source_hash != cfa.source_hash:
        raise ParameterMismatchError("report was generated from a different source file")
    if aa is not None and aa.source_hash and aa.source_hash != cfa.source_hash:
        raise ParameterMismatchError("automaton was built from a different source file")
    rb = report.config.get("domain_bound", oracle.B)
    result = OracleCheck()
    if not oracle.safe_cone and not oracle.frontier:
        result.warnings.append(f"no boundary trace within length {oracle.L}; check is vacuous")
    for comp in COMPONENTS:
        exact = oracle.component(comp)
        shape = in_safe_cone_set if comp == "S" else in_frontier_set
        for t in report.traces(comp):
            edges = t.edges
            if any(e not in cfa.edges for e in edges):
                result.membership_violations.append((comp, edges, "unknown edge id"))
                continue
            if not replay(cfa, edges, list(t.witness)):
                result.membership_violations.append((comp, edges, "witness does not replay"))
                continue
            norm = max((abs(v) for v in t.witness), default=0)
            if len(edges) <= oracle.L and norm <= oracle.B:
                if edges not in exact:
                    result.membership_violations.append((comp, edges, "not in the exact set"))
            elif aa is not None and not shape(aa, edges):
                result.membership_violations.append((comp, edges, "not a boundary trace of the automaton"))
        if report.status.get(comp) in (FULLY_ENUMERATED, FULLY_VERIFIED):
            missing = oracle.end_locations(cfa, comp, min(rb, oracle.B)) - report.end_locations(comp)
            result.completeness_violations.extend((comp, loc) for loc in sorted(missing))
    return result
