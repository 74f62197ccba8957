"""Checks shared by the property and acceptance suites."""
import random

from execreport.analyses import AA_FALSE, AA_TRUE
from execreport.automaton import DEAD, aa_analyzed, aa_safe_cone
from execreport.cpa import art_analyzed, art_safe_cone, delta_prime


def random_trace(cfa, rng: random.Random, max_len: int, noise: float = 0.0) -> tuple:
    """Walk the CFA; with probability ``noise`` a step picks any edge at all."""
    loc, trace = cfa.entry, []
    all_edges = sorted(cfa.edges)
    for _ in range(rng.randint(0, max_len)):
        out = cfa.outgoing(loc)
        if not out and not noise:
            break
        if rng.random() < noise or not out:
            eid = rng.choice(all_edges)
        else:
            eid = rng.choice(out).id
        trace.append(eid)
        loc = cfa.edges[eid].target
    return tuple(trace)


def property_violations(analyzed, cone, trace) -> list:
    """Monotonicity, closure and cone-implies-analyzed between each prefix of ``trace`` and ``trace``."""
    out = []
    a_full, c_full = analyzed(trace), cone(trace)
    if c_full and not a_full:
        out.append(("cone-implies-analyzed", trace))
    for i in range(len(trace)):
        pre = trace[:i]
        if not analyzed(pre) and a_full:
            out.append(("not-analyzed-monotone", pre, trace))
        if cone(pre) and not c_full:
            out.append(("cone-closure", pre, trace))
    return out


def _aa_settled(q) -> bool:
    return q in (AA_TRUE, AA_FALSE, DEAD)


def _art_settled(art, bad, q) -> bool:
    return q is None or art.is_pending(q) or q.id not in bad


def agreement_disagreements(cfa, art, aa, depth: int, prune: bool = True):
    """Compare ART and automaton predicates on every CFA path up to ``depth``.

    A branch is cut once both sides are absorbed, since neither predicate can
    change along any extension after that (``prune=False`` disables the cut).
    Returns (disagreements, paths seen).
    """
    bad = art.reaches_pending()
    out, seen = [], 0
    stack = [((), cfa.entry, art.root, aa.initial)]
    while stack:
        trace, loc, node, q = stack.pop()
        seen += 1
        if art_analyzed(art, trace) != aa_analyzed(aa, trace) or \
                art_safe_cone(art, trace) != aa_safe_cone(aa, trace):
            out.append(trace)
        if len(trace) == depth or (prune and _aa_settled(q) and _art_settled(art, bad, node)):
            continue
        for e in cfa.outgoing(loc):
            nq = q if _aa_settled(q) else aa.step(q, e.id)
            nn = node if _art_settled(art, bad, node) else delta_prime(art, node, e.id)
            stack.append((trace + (e.id,), e.target, nn, nq))
    return out, seen
