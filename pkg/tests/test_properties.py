import functools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from checks import agreement_disagreements, property_violations, random_trace
from conftest import FIXTURE_RUNS, fixture_cfa, fixture_verify
from execreport.automaton import aa_analyzed, aa_safe_cone
from execreport.cfa import load_cfa
from execreport.cpa import art_analyzed, art_safe_cone
from execreport.verifier import UNKNOWN, verify
from progen import generate

NAMES = sorted(FIXTURE_RUNS)


def _trace_strategy(name):
    cfa = fixture_cfa(name)
    return st.tuples(st.integers(0, 2**32), st.sampled_from([0.0, 0.0, 0.1, 0.5])).map(
        lambda sn: random_trace(cfa, random.Random(sn[0]), 60, sn[1]))


@pytest.mark.parametrize("name", NAMES)
def test_automaton_properties_on_random_traces(name):
    aa = fixture_verify(name).automaton

    @settings(max_examples=1000, deadline=None, database=None)
    @given(_trace_strategy(name))
    def check(trace):
        assert property_violations(lambda t: aa_analyzed(aa, t), lambda t: aa_safe_cone(aa, t), trace) == []

    check()


@pytest.mark.parametrize("name", NAMES)
def test_art_properties_on_random_traces(name):
    art = fixture_verify(name).art

    @settings(max_examples=300, deadline=None, database=None)
    @given(_trace_strategy(name))
    def check(trace):
        assert property_violations(lambda t: art_analyzed(art, t), lambda t: art_safe_cone(art, t), trace) == []

    check()


@pytest.mark.parametrize("name", NAMES)
def test_art_and_automaton_agree_up_to_25(name):
    r = fixture_verify(name)
    bad, seen = agreement_disagreements(fixture_cfa(name), r.art, r.automaton, 25, prune=False)
    assert bad == [] and seen > 0


@pytest.mark.parametrize("name", NAMES)
def test_coverage_invariant_checked_on_every_update(name):
    src, entry, opts = FIXTURE_RUNS[name]
    r = verify(fixture_cfa(name), check_invariants=True, **opts)
    assert r.verdict == fixture_verify(name).verdict


@functools.lru_cache(maxsize=None)
def _generated(seed):
    return load_cfa(generate(seed))


@settings(max_examples=40, deadline=None, database=None)
@given(st.integers(0, 10_000), st.sampled_from([3, 10, 40]))
def test_generated_programs(seed, budget):
    cfa = _generated(seed)
    r = verify(cfa, budget=budget, check_invariants=True)
    if r.verdict != UNKNOWN:
        return
    aa, rng = r.automaton, random.Random(seed)
    assert agreement_disagreements(cfa, r.art, aa, 12)[0] == []
    for _ in range(50):
        t = random_trace(cfa, rng, 30, 0.1)
        assert property_violations(lambda x: aa_analyzed(aa, x), lambda x: aa_safe_cone(aa, x), t) == []
