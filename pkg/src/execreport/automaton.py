"""Assumption automata: construction from an ART, trace predicates, JSON I/O."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .analyses import AA_FALSE, AA_TRUE
from .cfa import CFA
from .cpa import ART
from .errors import AutomatonFormatError, SourceMismatchError

DEAD = "DEAD"  # implicit sink for unlisted edges at normal states
NORMAL = "normal"
KINDS = (NORMAL, AA_TRUE, AA_FALSE)
FORMAT_VERSION = 1


@dataclass
class AssumptionAutomaton:
    initial: str
    kinds: dict  # state id -> kind
    transitions: dict  # state id -> {edge id: state id}
    manifest: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def states(self) -> list:
        return sorted(self.kinds)

    @property
    def source_hash(self) -> str:
        return self.manifest.get("source_hash", "")

    def step(self, q: str, eid: str) -> str:
        if q in (AA_TRUE, AA_FALSE, DEAD):
            return q
        return self.transitions.get(q, {}).get(eid, DEAD)

    def run(self, trace: Sequence[str]) -> str:
        q = self.initial
        for eid in trace:
            q = self.step(q, eid)
        return q

    def normal_states(self) -> list:
        return [q for q, k in sorted(self.kinds.items()) if k == NORMAL]


def build_automaton(art: ART, cfa: CFA, config: Optional[dict] = None) -> AssumptionAutomaton:
    """Collapse the ART: pending nodes to FALSE, finished subtrees to TRUE,
    covered nodes into their coverers."""
    art.check_coverage()
    reaching = art.reaches_pending()

    def classify(node):
        node = art.resolve(node)
        if art.is_pending(node):
            return AA_FALSE
        if node.id not in reaching:
            return AA_TRUE
        return None

    names: dict[int, str] = {}
    kinds = {AA_TRUE: AA_TRUE, AA_FALSE: AA_FALSE}
    transitions: dict = {}
    root = art.resolve(art.root)
    initial = classify(root)
    if initial is None:
        names[root.id] = initial = "q0"
        queue = deque([root])
        while queue:
            node = queue.popleft()
            q = names[node.id]
            kinds[q] = NORMAL
            trans = {}
            for eid in sorted(node.children):
                child = art.resolve(node.children[eid])
                target = classify(child)
                if target is None:
                    if child.id not in names:
                        names[child.id] = f"q{len(names)}"
                        queue.append(child)
                    target = names[child.id]
                trans[eid] = target
            transitions[q] = trans
    return AssumptionAutomaton(initial, kinds, transitions, cfa.manifest(), dict(config or {}))


def aa_analyzed(aa: AssumptionAutomaton, trace: Sequence[str]) -> bool:
    """No prefix of ``trace`` drives the automaton into FALSE."""
    q = aa.initial
    if q == AA_FALSE:
        return False
    for eid in trace:
        q = aa.step(q, eid)
        if q == AA_FALSE:
            return False
        if q in (AA_TRUE, DEAD):
            return True
    return True


def aa_safe_cone(aa: AssumptionAutomaton, trace: Sequence[str]) -> bool:
    """Some prefix of ``trace`` reaches TRUE."""
    q = aa.initial
    if q == AA_TRUE:
        return True
    for eid in trace:
        q = aa.step(q, eid)
        if q == AA_TRUE:
            return True
        if q in (AA_FALSE, DEAD):
            return False
    return False


def to_dict(aa: AssumptionAutomaton) -> dict:
    states = {}
    for q, kind in aa.kinds.items():
        trans = [{"edge": e, "to": t} for e, t in sorted(aa.transitions.get(q, {}).items())]
        states[q] = {"kind": kind, "trans": trans}
    return {
        "format": FORMAT_VERSION,
        "initial": aa.initial,
        "states": states,
        "cfa": aa.manifest,
        "config": aa.config,
    }


def serialize(aa: AssumptionAutomaton) -> str:
    return json.dumps(to_dict(aa), sort_keys=True, indent=1) + "\n"


def _fail(msg: str):
    raise AutomatonFormatError(msg)


def from_dict(doc) -> AssumptionAutomaton:
    if not isinstance(doc, dict):
        _fail("automaton document must be an object")
    for key in ("initial", "states", "cfa"):
        if key not in doc:
            _fail(f"missing key {key!r}")
    states, manifest = doc["states"], doc["cfa"]
    if not isinstance(states, dict) or not isinstance(manifest, dict):
        _fail("'states' and 'cfa' must be objects")
    known_edges = manifest.get("edges")
    if not isinstance(known_edges, dict):
        _fail("CFA manifest lacks an edge table")
    kinds, transitions = {}, {}
    for q, body in states.items():
        if not isinstance(body, dict) or body.get("kind") not in KINDS:
            _fail(f"state {q!r}: bad or missing kind")
        kind = body["kind"]
        if kind != NORMAL and q != kind:
            _fail(f"state {q!r} has reserved kind {kind}")
        kinds[q] = kind
        trans = {}
        entries = body.get("trans", [])
        if not isinstance(entries, list):
            _fail(f"state {q!r}: 'trans' must be a list")
        for t in entries:
            if not isinstance(t, dict) or not isinstance(t.get("edge"), str) or not isinstance(t.get("to"), str):
                _fail(f"state {q!r}: malformed transition {t!r}")
            eid, to = t["edge"], t["to"]
            if eid not in known_edges:
                _fail(f"state {q!r}: unknown edge id {eid!r}")
            if eid in trans and trans[eid] != to:
                _fail(f"state {q!r}: nondeterministic transitions on edge {eid!r}")
            trans[eid] = to
        if kind == NORMAL:
            transitions[q] = trans
        elif any(to != q for to in trans.values()):
            _fail(f"absorbing state {q!r} has a non-self-loop transition")
    for q in (AA_TRUE, AA_FALSE):
        kinds.setdefault(q, q)
    for q, trans in transitions.items():
        for to in trans.values():
            if to not in kinds:
                _fail(f"state {q!r}: transition to undeclared state {to!r}")
    initial = doc["initial"]
    if initial not in kinds:
        _fail(f"initial state {initial!r} is not declared")
    seen, stack = {initial}, [initial]
    while stack:
        for to in transitions.get(stack.pop(), {}).values():
            if to not in seen:
                seen.add(to)
                stack.append(to)
    orphans = [q for q in transitions if q not in seen]
    if orphans:
        _fail(f"unreachable states {sorted(orphans)}")
    config = doc.get("config", {})
    if not isinstance(config, dict):
        _fail("'config' must be an object")
    return AssumptionAutomaton(initial, kinds, transitions, manifest, config)


def parse(text: str) -> AssumptionAutomaton:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AutomatonFormatError(f"malformed automaton document: {exc}") from None
    return from_dict(doc)


def check_against(aa: AssumptionAutomaton, cfa: CFA, allow_mismatch: bool = False):
    """Refuse an automaton built for a different source or CFA."""
    if aa.source_hash != cfa.source_hash and not allow_mismatch:
        raise SourceMismatchError("automaton was built from a different source file")
    for q, trans in aa.transitions.items():
        for eid in trans:
            if eid not in cfa.edges:
                raise SourceMismatchError(f"automaton edge {eid!r} does not exist in this CFA")
