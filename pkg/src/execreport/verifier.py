"""Phase one: reachability of the error location under a budget."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import feasibility
from .analyses import LocationAnalysis, LoopBoundAnalysis, ValueAnalysis, compose
from .automaton import AssumptionAutomaton, build_automaton
from .cfa import CFA
from .cpa import ART, GIVEUP_UNCONFIRMED, Waitlist, art_path, run

SAFE = "SAFE"
BUG = "BUG"
UNKNOWN = "UNKNOWN"

DEFAULT_BUDGET = 100_000


def reverse_postorder(cfa: CFA) -> dict:
    order, seen = [], {cfa.entry}
    stack = [(cfa.entry, iter(cfa.outgoing(cfa.entry)))]
    while stack:
        loc, it = stack[-1]
        for e in it:
            if e.target not in seen:
                seen.add(e.target)
                stack.append((e.target, iter(cfa.outgoing(e.target))))
                break
        else:
            stack.pop()
            order.append(loc)
    return {loc: i for i, loc in enumerate(reversed(order))}


def make_waitlist(cfa: CFA, order: str) -> Waitlist:
    if order == "rpo":
        return Waitlist("rpo", reverse_postorder(cfa), lambda s: s[0])
    return Waitlist(order)


@dataclass
class VerifyResult:
    verdict: str
    art: ART
    automaton: Optional[AssumptionAutomaton]
    pops: int
    counterexample: Optional[tuple] = None  # edge ids
    witness: Optional[tuple] = None
    unconfirmed: list = field(default_factory=list)  # traces whose feasibility was Unknown
    config: dict = field(default_factory=dict)


def verify(cfa: CFA, loop_bound: Optional[int] = None, budget: Optional[int] = DEFAULT_BUDGET,
           opaque_multiplication: bool = False, waitlist: str = "bfs",
           domain_bound: int = feasibility.DEFAULT_DOMAIN_BOUND,
           max_symbols: int = feasibility.DEFAULT_MAX_SYMBOLS,
           node_budget: int = feasibility.DEFAULT_NODE_BUDGET,
           check_invariants: bool = False) -> VerifyResult:
    """Run location x value (x loop-bound) until a confirmed bug, a fixpoint or the budget.

    A counterexample whose feasibility cannot be confirmed is not reported;
    instead the node before the error edge is moved to the give-up set and
    exploration continues elsewhere.
    """
    if loop_bound is not None and loop_bound < 0:
        raise ValueError("loop bound must be non-negative")
    parts = [LocationAnalysis(cfa), ValueAnalysis(cfa, opaque_multiplication)]
    if loop_bound is not None:
        parts.append(LoopBoundAnalysis(cfa, loop_bound))
    cpa = compose(cfa, parts)
    art = ART(cpa.initial_state(), make_waitlist(cfa, waitlist), cpa.partition, check_invariants)
    config = {
        "loop_bound": loop_bound,
        "opaque_multiplication": opaque_multiplication,
        "budget": budget,
        "waitlist": waitlist,
    }
    pops = 0
    unconfirmed = []
    while True:
        remaining = None if budget is None else max(budget - pops, 0)
        outcome = run(cpa, art, lambda s: s[0] == cfa.error, remaining)
        pops += outcome.pops
        if outcome.target is None:
            break
        trace = art_path(art, outcome.target)
        verdict = feasibility.check(cfa, trace, domain_bound, max_symbols, node_budget, opaque_multiplication)
        if isinstance(verdict, feasibility.Feasible):
            return VerifyResult(BUG, art, None, pops, trace, verdict.witness, unconfirmed, config)
        unconfirmed.append(trace)
        parent = outcome.target.parent
        art.prune_children(parent)
        art.give_up(parent, GIVEUP_UNCONFIRMED)
    finished = outcome.exhausted and not art.giveup
    verdict = SAFE if finished else UNKNOWN
    return VerifyResult(verdict, art, build_automaton(art, cfa, config), pops, None, None, unconfirmed, config)
