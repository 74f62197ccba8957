import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURE_RUNS, fixture_cfa, path_by_texts
from execreport import feasibility as F
from execreport.cfa import load_cfa
from execreport.interp import (ASSERTION_FAILURE, INPUT_EXHAUSTED, STEP_LIMIT, TERMINATED_SAFE, c_div, c_mod,
                               execute, replay)


def test_fig1_else_branch_executes_n_equals_1(fig1):
    r = execute(fig1, [0, 5])
    assert r.verdict == TERMINATED_SAFE
    assert "n = 1;" in [fig1.edges[e].text for e in r.trace]


def test_straight_line_program():
    c = load_cfa("int main() { int x = 1; int y = x + 2; return 0; }")
    r = execute(c, [])
    assert r.verdict == TERMINATED_SAFE
    assert [c.edges[e].text for e in r.trace] == ["int x = 1;", "int y = x + 2;", "return 0;"]


def test_fig2_then_branch_loops_1000_times(fig2):
    r = execute(fig2, [1])
    assert r.verdict == TERMINATED_SAFE
    assert sum(fig2.edges[e].text == "i = i + 1;" for e in r.trace) == 1000


def test_assertion_failure_and_exhaustion():
    c = load_cfa("int main() { int x = nondet(); assert(x != 3); return 0; }")
    assert execute(c, [3]).verdict == ASSERTION_FAILURE
    assert execute(c, [2]).verdict == TERMINATED_SAFE
    assert execute(c, []).verdict == INPUT_EXHAUSTED
    assert execute(fixture_cfa("fig2"), [1], step_limit=10).verdict == STEP_LIMIT


def test_division_by_zero_is_an_assertion_failure():
    c = load_cfa("int main() { int d = nondet(); int q = 7 / d; return q; }")
    r = execute(c, [0])
    assert r.verdict == ASSERTION_FAILURE
    assert c.edges[r.trace[-1]].target == c.error


def test_truncating_division():
    assert (c_div(-7, 2), c_mod(-7, 2)) == (-3, -1)
    assert (c_div(7, -2), c_mod(7, -2)) == (-3, 1)


def test_replay_examples(fig1):
    assert replay(fig1, (), [])
    safe = path_by_texts(fig1, ["int n;", "assume(!large);", "n = 1;"])
    assert replay(fig1, safe, [0])
    then = path_by_texts(fig1, ["int n;", "assume(large);"])
    assert not replay(fig1, then, [0])


def test_path_condition_examples(fig1):
    c = load_cfa("int main() { int x = 5; if (x > 0) { x = 1; } return 0; }")
    t = path_by_texts(c, ["int x = 5;", "assume(x > 0);"])
    assert F.path_condition(c, t).constraints == []
    pc = F.path_condition(fig1, path_by_texts(fig1, ["int n;", "assume(!large);"]))
    assert pc.symbols == ["large"]
    assert len(pc.constraints) == 1
    assert [F.holds(pc.constraints[0], [v]) for v in (0, 1, -1)] == [True, False, False]


def test_check_examples(fig1):
    c = load_cfa("int main() { int x = 1; return 0; }")
    assert F.check(c, execute(c, []).trace) == F.Feasible(())
    safe = path_by_texts(fig1, ["int n;", "assume(!large);", "n = 1;"])
    v = F.check(fig1, safe, domain_bound=8)
    assert isinstance(v, F.Feasible) and v.witness[0] == 0
    c = load_cfa("int main() { int x = nondet(); if (x > 0) { if (x < 0) { return 1; } } return 0; }")
    t = path_by_texts(c, ["int x = nondet();", "assume(x > 0);", "assume(x < 0);"])
    assert F.check(c, t) == F.Unknown(F.DOMAIN_EXHAUSTED)


def test_opaque_product_blocks_only_constrained_paths(fig2):
    err = [e for e in fig2.edges.values() if e.target == fig2.error and "r >= x" in e.text][0]
    t = path_by_texts(fig2, ["int p = nondet();", "assume(!p);", "int x = 5;", "int y = 6;", "int r = x * y;"])
    assert F.check(fig2, t + (err.id,), opaque_multiplication=True) == F.Unknown(F.NONLINEAR_OPAQUE)
    assert isinstance(F.check(fig2, t, opaque_multiplication=True), F.Feasible)
    # without the switch the failing branch is decided concretely
    assert F.check(fig2, t + (err.id,)) == F.Unknown(F.DOMAIN_EXHAUSTED)


def test_symbol_limit_and_node_budget():
    src = "int main() { int a = nondet(); int b = nondet(); int c = nondet(); " \
          "if (a * b * c == 1000) { return 1; } return 0; }"
    c = load_cfa(src)
    t = path_by_texts(c, ["int a = nondet();", "int b = nondet();", "int c = nondet();", "assume(a * b * c == 1000);"])
    assert F.check(c, t, max_symbols=2) == F.Unknown(F.BUDGET)
    assert F.check(c, t, node_budget=50) == F.Unknown(F.BUDGET)
    v = F.check(c, t, domain_bound=10)
    assert isinstance(v, F.Feasible) and v.witness[0] * v.witness[1] * v.witness[2] == 1000


def test_symbolic_array_index():
    src = "int main() { int a[4]; int i = nondet(); a[i] = 7; int j = nondet(); " \
          "if (a[j] == 7) { if (i != j) { return 1; } } return 0; }"
    c = load_cfa(src)
    for r in (execute(c, [1, 1]), execute(c, [2, 0])):
        v = F.check(c, r.trace)
        assert isinstance(v, F.Feasible) and replay(c, r.trace, list(v.witness))


@settings(max_examples=200, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4), st.sampled_from(["<", "<=", ">", ">=", "==", "!="]))
def test_narrowing_agrees_with_brute_force(k, m, op):
    # coef * x + rest  op 0  with coef in {k}, rest in {m}
    if k == 0:
        return
    c = ("cmp", op, F.Lin(((0, k),), m))
    lo, hi = F._narrow(c, 0, [0], -10, 10, excluded := set())
    brute = {x for x in range(-10, 11) if F.holds(c, [x])}
    narrowed = {x for x in range(lo, hi + 1) if x not in excluded}
    assert brute == narrowed


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3))
def test_witness_monotone_in_bound(b, extra):
    c = load_cfa("int main() { int x = nondet(); int y = nondet(); if (x + y == 3) { if (x - y > 1) "
                 "{ return 1; } } return 0; }")
    t = path_by_texts(c, ["int x = nondet();", "int y = nondet();", "assume(x + y == 3);", "assume(x - y > 1);"])
    v1 = F.check(c, t, domain_bound=b)
    v2 = F.check(c, t, domain_bound=b + extra)
    if isinstance(v1, F.Feasible):
        assert v2 == v1


def _random_trace(cfa, rng, max_len):
    loc, trace = cfa.entry, []
    for _ in range(rng.randint(0, max_len)):
        out = cfa.outgoing(loc)
        if not out:
            break
        e = rng.choice(out)
        trace.append(e.id)
        loc = e.target
    return tuple(trace)


def test_feasibility_fuzz_small():
    rng = random.Random(7)
    for name in FIXTURE_RUNS:
        cfa = fixture_cfa(name)
        for _ in range(200):
            t = _random_trace(cfa, rng, 40)
            v = F.check(cfa, t, node_budget=20_000)
            if isinstance(v, F.Feasible):
                assert replay(cfa, t, list(v.witness))


def test_not_a_path(fig1):
    with pytest.raises(ValueError):
        F.path_condition(fig1, ("nope",))
