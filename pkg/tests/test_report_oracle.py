import functools

import pytest

from conftest import fixture_cfa, fixture_verify, path_by_texts
from execreport import report as R
from execreport.analyses import AA_FALSE, AA_TRUE
from execreport.automaton import AssumptionAutomaton
from execreport.cfa import load_cfa
from execreport.errors import OracleResourceError, ParameterMismatchError
from execreport.oracle import check_report, oracle_sets
from execreport.verifier import verify


@functools.lru_cache(maxsize=None)
def fixture_report(name):
    r = fixture_verify(name)
    opaque = r.config["opaque_multiplication"]
    return R.generate(fixture_cfa(name), r.automaton, "both", opaque_multiplication=opaque)


@functools.lru_cache(maxsize=None)
def fixture_oracle(name):
    return oracle_sets(fixture_cfa(name), fixture_verify(name).automaton)


def _texts(cfa, trace):
    return [cfa.edges[e].text for e in trace.edges]


def test_fully_verified_automaton():
    rep = fixture_report("trivial")
    assert rep.S == [] and rep.F == []
    assert rep.status == {"S": R.FULLY_VERIFIED, "F": R.FULLY_ENUMERATED}


def test_fig1_report(fig1):
    rep = fixture_report("fig1")
    aa = fixture_verify("fig1").automaton
    assert rep.status == {"S": R.FULLY_ENUMERATED, "F": R.FULLY_ENUMERATED}
    else_cone = path_by_texts(fig1, ["int n;", "assume(!large);"])
    assert else_cone in [t.edges for t in rep.S]
    head = [e for e in fig1.edges.values() if e.text == "assume(i < n_1);"][0]
    fifth = [t for t in rep.F if t.edges[-1] == head.id and t.edges.count(head.id) == 5]
    assert fifth
    for comp, member in (("S", R.in_safe_cone_set), ("F", R.in_frontier_set)):
        for t in rep.traces(comp):
            assert member(aa, t.edges)


def test_fig1_end_location_after_else_branch(fig1):
    rep = fixture_report("fig1")
    else_end = fig1.edges[path_by_texts(fig1, ["int n;", "assume(!large);"])[-1]].target
    assert else_end in rep.end_locations("S")
    table = R.end_location_coverage(rep, {"S": {else_end}, "F": set()})
    assert table["S"]["verdict"] == {str(else_end): "covered"}


def test_fig2_report(fig2):
    rep = fixture_report("fig2")
    assert [_texts(fig2, t) for t in rep.S] == [["int p = nondet();", "assume(p);"]]
    assert [_texts(fig2, t)[-1] for t in rep.F] == ["int r = x * y;"]


def test_component_selection(fig1):
    rep = R.generate(fig1, fixture_verify("fig1").automaton, "F")
    assert rep.S == [] and rep.status["S"] == R.NOT_REQUESTED and rep.F


def test_budget_truncation(fig1):
    rep = R.generate(fig1, fixture_verify("fig1").automaton, "S", pop_budget=3)
    assert rep.status["S"] == R.BUDGET_TRUNCATED


def test_emit_is_deterministic_and_round_trips():
    rep = fixture_report("fig1")
    text = R.emit(rep)
    assert R.emit(rep) == text
    back = R.parse_report(text)
    assert [(t.edges, t.witness) for t in back.S] == [(t.edges, t.witness) for t in rep.S]
    assert [(t.edges, t.witness) for t in back.F] == [(t.edges, t.witness) for t in rep.F]
    empty = R.parse_report(R.emit(R.ExecutionReport()))
    assert empty.S == [] and empty.F == [] and set(empty.status) == {"S", "F"}
    with pytest.raises(R.ReportFormatError):
        R.parse_report("[]")


def test_oracle_fig1_contains_else_cone(fig1):
    o = fixture_oracle("fig1")
    assert path_by_texts(fig1, ["int n;", "assume(!large);"]) in o.safe_cone
    assert not o.property_violations


def test_oracle_agrees_with_reports():
    for name in ("fig1", "fig2", "trivial"):
        verdict = check_report(fixture_report(name), fixture_oracle(name), fixture_cfa(name),
                               fixture_verify(name).automaton)
        assert verdict.passed, (name, verdict)


def test_oracle_excludes_contradiction():
    c = load_cfa("int main() { int x = nondet(); if (x > 0) { if (x < 0) { x = 1; } } return 0; }")
    inner = path_by_texts(c, ["int x = nondet();", "assume(x > 0);", "assume(x < 0);"])
    q = {"q0": {}, "q1": {}, "q2": {}}
    q["q0"][inner[0]] = "q1"
    q["q1"][inner[1]] = "q2"
    q["q2"][inner[2]] = AA_FALSE
    for e in c.outgoing(c.edges[inner[1]].source):
        q["q1"].setdefault(e.id, AA_TRUE)
    for e in c.outgoing(c.edges[inner[2]].source):
        q["q2"].setdefault(e.id, AA_TRUE)
    kinds = {k: "normal" for k in q} | {AA_TRUE: AA_TRUE, AA_FALSE: AA_FALSE}
    aa = AssumptionAutomaton("q0", kinds, q, c.manifest())
    o = oracle_sets(c, aa)
    assert inner not in o.frontier and o.frontier == {}
    assert o.safe_cone


def test_fully_verified_oracle_is_empty():
    o = fixture_oracle("trivial")
    assert o.frontier == {} and o.safe_cone == {}


def test_fabricated_trace_is_rejected(fig1):
    rep = fixture_report("fig1")
    fake = R.ReportedTrace(path_by_texts(fig1, ["int n;", "assume(large);"]), (1,))
    bad = R.ExecutionReport(S=list(rep.S) + [fake], F=list(rep.F), status=dict(rep.status),
                            config=dict(rep.config), source_hash=rep.source_hash)
    verdict = check_report(bad, fixture_oracle("fig1"), fig1, fixture_verify("fig1").automaton)
    assert not verdict.passed
    assert [v[1] for v in verdict.membership_violations] == [fake.edges]


def test_empty_report_vs_empty_oracle():
    c = fixture_cfa("trivial")
    verdict = check_report(R.ExecutionReport(source_hash=c.source_hash), fixture_oracle("trivial"), c)
    assert verdict.passed and verdict.warnings


def test_check_report_source_mismatch(fig1):
    with pytest.raises(ParameterMismatchError):
        check_report(fixture_report("fig2"), fixture_oracle("fig1"), fig1)


def test_oracle_resource_limit(fig1):
    with pytest.raises(OracleResourceError):
        oracle_sets(fig1, fixture_verify("fig1").automaton, max_steps=100)


def test_completeness_violation_is_flagged(fig1):
    rep = fixture_report("fig1")
    dropped = R.ExecutionReport(S=list(rep.S), F=[], status=dict(rep.status), config=dict(rep.config),
                                source_hash=rep.source_hash)
    verdict = check_report(dropped, fixture_oracle("fig1"), fig1)
    assert {c for c, _ in verdict.completeness_violations} == {"F"}


def test_bug_program_has_no_automaton():
    r = verify(load_cfa("int main() { int x = nondet(); assert(x < 2); return 0; }"))
    assert r.automaton is None and r.counterexample
