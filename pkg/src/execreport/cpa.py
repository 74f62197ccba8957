"""Configurable program analysis engine.

Holds the abstract reachability tree (ART), the worklist algorithm with an
early return on target states, and the trace semantics over a partially
built ART (``delta_prime``/``delta_hat``, ``art_analyzed``,
``art_safe_cone``).
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .errors import DetachedNodeError, PropertyViolation

GIVEUP_BOUND = "bound-exceeded"
GIVEUP_UNCONFIRMED = "unconfirmed-counterexample"


# ---------------------------------------------------------------------------
# CPA contract
# ---------------------------------------------------------------------------

class ConfigurableProgramAnalysis:
    """Abstract domain + transfer relation + merge + stop.

    Subclasses provide ``initial_state``, ``successors`` and
    ``less_equal``. The defaults for ``merge``/``stop`` are the
    separating operators.
    """

    merges_separately = True

    def initial_state(self):
        raise NotImplementedError

    def successors(self, state) -> Iterable[tuple]:
        """Yield ``(edge, successor_state)`` pairs."""
        raise NotImplementedError

    def less_equal(self, a, b) -> bool:
        raise NotImplementedError

    def partition(self, state):
        """Key grouping states that merge/stop may compare; None = one bucket."""
        return None

    def frozen(self, state) -> bool:
        """States that must enter the ART but never be expanded."""
        return False

    def merge(self, new, existing):
        return merge_sep(new, existing)

    def stop(self, state, nodes: Sequence["Node"]) -> Optional["Node"]:
        """Return the covering node when the state is subsumed, else None."""
        for n in nodes:
            if self.less_equal(state, n.state):
                return n
        return None


def merge_sep(new, existing):
    return existing


def stop_sep(less_equal: Callable, state, reached: Iterable) -> bool:
    return any(less_equal(state, other) for other in reached)


# ---------------------------------------------------------------------------
# ART
# ---------------------------------------------------------------------------

class Node:
    __slots__ = ("id", "state", "parent", "edge", "children", "covered_by", "pending", "removed", "depth")

    def __init__(self, nid: int, state, parent: Optional["Node"], edge):
        self.id = nid
        self.state = state
        self.parent = parent
        self.edge = edge
        self.children: dict = {}  # edge id -> Node, insertion ordered
        self.covered_by: Optional[Node] = None
        self.pending: Optional[deque] = None
        self.removed = False
        self.depth = 0 if parent is None else parent.depth + 1

    def child(self, edge_id: str) -> Optional["Node"]:
        return self.children.get(edge_id)

    def __repr__(self):
        return f"Node({self.id})"


class Waitlist:
    """Ordered set of ART nodes: ``bfs`` (FIFO), ``dfs`` (LIFO) or ``rpo``."""

    def __init__(self, order: str = "bfs", rpo: Optional[dict] = None, location: Callable = None):
        if order not in ("bfs", "dfs", "rpo"):
            raise ValueError(f"unknown waitlist order {order!r}")
        if order == "rpo" and (rpo is None or location is None):
            raise ValueError("rpo order needs a reverse-postorder map")
        self.order = order
        self._rpo = rpo
        self._location = location
        self._items = deque() if order == "bfs" else ([] if order == "dfs" else [])
        self._resume: list = []
        self._members: dict[int, Node] = {}
        self._seq = itertools.count()

    def push(self, node: Node):
        if node.id in self._members:
            return
        self._members[node.id] = node
        if self.order == "rpo":
            heapq.heappush(self._items, (self._rpo.get(self._location(node.state), 0), next(self._seq), node))
        else:
            self._items.append(node)

    def push_front(self, node: Node):
        """Re-queue a partially expanded node so it is popped next."""
        self._members[node.id] = node
        self._resume.append(node)

    def remove(self, node: Node):
        self._members.pop(node.id, None)

    def pop(self) -> Node:
        while True:
            if self._resume:
                node = self._resume.pop()
            elif self.order == "bfs":
                node = self._items.popleft()
            elif self.order == "dfs":
                node = self._items.pop()
            else:
                node = heapq.heappop(self._items)[2]
            if self._members.pop(node.id, None) is node:
                return node

    def __contains__(self, node: Node) -> bool:
        return self._members.get(node.id) is node

    def __len__(self) -> int:
        return len(self._members)

    def __bool__(self) -> bool:
        return bool(self._members)

    def __iter__(self):
        return iter(sorted(self._members.values(), key=lambda n: n.id))


class ART:
    """Abstract reachability tree with waitlist, give-up set and coverage."""

    def __init__(self, root_state, waitlist: Optional[Waitlist] = None, partition: Callable = None,
                 check_invariants: bool = False):
        self.nodes: list[Node] = []
        self.partition = partition or (lambda s: None)
        self.reached: dict = {}
        self.waitlist = waitlist or Waitlist()
        self.giveup: dict[int, str] = {}
        self.check_invariants = check_invariants
        self.invariant_checks = 0
        self.version = 0
        self._reach_cache = (-1, frozenset())
        self.root = self._new_node(root_state, None, None)
        self._add_reached(self.root)
        self.waitlist.push(self.root)

    # -- construction
    def _new_node(self, state, parent, edge) -> Node:
        node = Node(len(self.nodes), state, parent, edge)
        self.nodes.append(node)
        self.version += 1
        return node

    def _add_reached(self, node: Node):
        self.reached.setdefault(self.partition(node.state), []).append(node)

    def candidates(self, state) -> list:
        return self.reached.get(self.partition(state), [])

    def reached_nodes(self) -> list:
        return [n for bucket in self.reached.values() for n in bucket]

    def add_child(self, parent: Node, edge, state) -> Node:
        child = self._new_node(state, parent, edge)
        parent.children[edge.id] = child
        return child

    def cover(self, node: Node, by: Node):
        node.covered_by = by
        self.version += 1
        self._after_update()

    def give_up(self, node: Node, reason: str):
        self.giveup[node.id] = reason
        self.waitlist.remove(node)
        self.version += 1
        self._after_update()

    def prune_children(self, node: Node) -> list:
        """Detach the whole subtree below ``node``.

        Nodes covered by a detached node lose their coverage and are
        re-queued; the re-queued nodes are returned.
        """
        doomed = []
        stack = list(node.children.values())
        while stack:
            n = stack.pop()
            doomed.append(n)
            stack.extend(n.children.values())
        node.children = {}
        node.pending = None
        doomed_ids = {n.id for n in doomed}
        for n in doomed:
            n.removed = True
            self.waitlist.remove(n)
            self.giveup.pop(n.id, None)
        for key, bucket in list(self.reached.items()):
            self.reached[key] = [n for n in bucket if n.id not in doomed_ids]
        revived = []
        for n in self.nodes:
            if not n.removed and n.covered_by is not None and n.covered_by.id in doomed_ids:
                n.covered_by = None
                self._add_reached(n)
                self.waitlist.push(n)
                revived.append(n)
        self.version += 1
        self._after_update()
        return revived

    # -- queries
    def live_nodes(self) -> list:
        return [n for n in self.nodes if not n.removed]

    def is_pending(self, node: Node) -> bool:
        return node in self.waitlist or node.id in self.giveup

    def pending_nodes(self) -> list:
        return [n for n in self.live_nodes() if self.is_pending(n)]

    def resolve(self, node: Node) -> Node:
        return node.covered_by if node.covered_by is not None else node

    def reaches_pending(self) -> frozenset:
        """Ids of nodes from which some extension reaches W or the give-up set.

        Coverage edges are followed, so cycles through coverage are handled
        by plain graph reachability.
        """
        if self._reach_cache[0] == self.version:
            return self._reach_cache[1]
        preds: dict[int, list] = {}
        for n in self.live_nodes():
            for c in n.children.values():
                preds.setdefault(self.resolve(c).id, []).append(n.id)
            if n.covered_by is not None:
                preds.setdefault(n.covered_by.id, []).append(n.id)
        seen = {n.id for n in self.pending_nodes()}
        stack = list(seen)
        while stack:
            x = stack.pop()
            for p in preds.get(x, ()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        result = frozenset(seen)
        self._reach_cache = (self.version, result)
        return result

    def check_coverage(self):
        """No node is covered by another covered node; covered nodes are leaves."""
        for n in self.live_nodes():
            c = n.covered_by
            if c is None:
                continue
            if c.covered_by is not None:
                raise PropertyViolation(f"{n} covered by covered node {c}")
            if c.removed:
                raise PropertyViolation(f"{n} covered by detached node {c}")
            if n.children:
                raise PropertyViolation(f"covered node {n} has children")

    def _after_update(self):
        if self.check_invariants:
            self.invariant_checks += 1
            self.check_coverage()


# ---------------------------------------------------------------------------
# Algorithm
# ---------------------------------------------------------------------------

@dataclass
class RunOutcome:
    target: Optional[Node]
    pops: int
    exhausted: bool  # waitlist emptied (as opposed to budget or target)

    @property
    def budget_exhausted(self) -> bool:
        return self.target is None and not self.exhausted


def run(cpa: ConfigurableProgramAnalysis, art: ART, is_target: Callable = lambda s: False,
        pop_budget: Optional[int] = None, is_terminal: Optional[Callable] = None) -> RunOutcome:
    """Worklist algorithm with an early return when a target state is added.

    ``art`` carries reached and waitlist between calls, so a run can be
    resumed after a target hit. A node whose successors were only partly
    processed when the run returned is re-queued at the front. Successors
    satisfying ``is_terminal`` enter the ART but are never queued.
    """
    pops = 0
    waitlist = art.waitlist
    while waitlist:
        if pop_budget is not None and pops >= pop_budget:
            return RunOutcome(None, pops, False)
        e = waitlist.pop()
        if e.pending is None:
            # resuming a partly processed node is not counted as a new pop
            pops += 1
            e.pending = deque(cpa.successors(e.state))
        while e.pending:
            edge, succ = e.pending.popleft()
            if not cpa.merges_separately:
                for other in list(art.candidates(succ)):
                    merged = cpa.merge(succ, other.state)
                    if merged != other.state:
                        other.state = merged
                        art.version += 1
                        waitlist.push(other)
            child = art.add_child(e, edge, succ)
            cover = cpa.stop(succ, art.candidates(succ))
            if cover is not None:
                art.cover(child, cover)
                continue
            art._add_reached(child)
            if cpa.frozen(succ):
                art.give_up(child, GIVEUP_BOUND)
                continue
            if is_terminal is not None and is_terminal(succ):
                # never expanded, so never queued
                child.pending = deque()
            else:
                waitlist.push(child)
            if is_target(succ):
                if e.pending:
                    waitlist.push_front(e)
                return RunOutcome(child, pops, False)
    return RunOutcome(None, pops, True)


# ---------------------------------------------------------------------------
# Trace semantics over an ART
# ---------------------------------------------------------------------------

def _eid(s) -> str:
    return s if isinstance(s, str) else s.id


def art_path(art: ART, node: Node) -> tuple:
    """Edge ids from the root to ``node``."""
    if node.removed or node.id >= len(art.nodes) or art.nodes[node.id] is not node:
        raise DetachedNodeError(f"{node} is not part of this ART")
    path = []
    while node.parent is not None:
        path.append(node.edge.id)
        node = node.parent
    return tuple(reversed(path))


def delta_prime(art: ART, q: Optional[Node], s) -> Optional[Node]:
    if q is None:
        return None
    child = q.child(_eid(s))
    if child is None:
        return None
    return child.covered_by if child.covered_by is not None else child


def delta_hat(art: ART, q: Optional[Node], trace: Sequence) -> Optional[Node]:
    for s in trace:
        q = delta_prime(art, q, s)
    return q


def art_analyzed(art: ART, trace: Sequence) -> bool:
    """No prefix of ``trace`` leads to a node in W or the give-up set."""
    q = art.root
    if art.is_pending(q):
        return False
    for s in trace:
        q = delta_prime(art, q, s)
        if q is None:
            return True
        if art.is_pending(q):
            return False
    return True


def art_safe_cone(art: ART, trace: Sequence) -> bool:
    """Some prefix of ``trace`` leads to a node none of whose extensions reach W or give-up."""
    bad = art.reaches_pending()
    q = art.root
    if q.id not in bad:
        return True
    for s in trace:
        q = delta_prime(art, q, s)
        if q is None:
            return False
        if q.id not in bad:
            return True
    return False
