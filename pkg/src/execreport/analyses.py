"""Abstract domains plugged into the CPA engine.

* location analysis: the CFA location itself;
* explicit-value analysis: variables map to integers, to linear terms over
  nondet inputs, or to TOP;
* loop-bound analysis: per-loop iteration counters, emulating BMC unrolling;
* automaton analysis: the flat lattice over assumption-automaton states;
* composition of the above with separating merge and stop.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import syntax as S
from .cfa import ARRAY_STORE, ASSIGN, ASSUME, CFA, HAVOC, Edge
from .cpa import ConfigurableProgramAnalysis
from .errors import ExecReportError, InternalConsistencyError
from .interp import c_div, c_mod


class _Top:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "TOP"

    def __reduce__(self):
        return (_Top, ())


TOP = _Top()


# ---------------------------------------------------------------------------
# Linear terms over input symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lin:
    """``sum(coef * input[sym]) + const`` with at least one non-zero coefficient."""

    terms: tuple  # sorted ((sym, coef), ...)
    const: int = 0

    def __repr__(self):
        parts = [f"{c}*s{k}" for k, c in self.terms]
        if self.const:
            parts.append(str(self.const))
        return " + ".join(parts)


def symbol(k: int) -> Lin:
    return Lin(((k, 1),), 0)


def _lin(terms: dict, const: int):
    items = tuple(sorted((k, c) for k, c in terms.items() if c))
    return Lin(items, const) if items else const


def _as_terms(v):
    if isinstance(v, int):
        return {}, v
    return dict(v.terms), v.const


def lin_add(a, b, sign: int = 1):
    ta, ca = _as_terms(a)
    tb, cb = _as_terms(b)
    for k, c in tb.items():
        ta[k] = ta.get(k, 0) + sign * c
    return _lin(ta, ca + sign * cb)


def lin_scale(a, factor: int):
    ta, ca = _as_terms(a)
    return _lin({k: c * factor for k, c in ta.items()}, ca * factor)


_CMP = {
    "<": lambda d: d < 0, "<=": lambda d: d <= 0, ">": lambda d: d > 0,
    ">=": lambda d: d >= 0, "==": lambda d: d == 0, "!=": lambda d: d != 0,
}


def truth(v):
    """True/False when decided, TOP otherwise."""
    if isinstance(v, int):
        return v != 0
    return TOP


def eval_abstract(e, env: dict, arrays: dict, opaque: bool = False):
    if isinstance(e, S.Num):
        return e.value
    if isinstance(e, S.Name):
        return env.get(e.id, TOP)
    if isinstance(e, S.Index):
        i = eval_abstract(e.index, env, arrays, opaque)
        cells = arrays.get(e.array)
        if isinstance(i, int) and cells is not None and 0 <= i < len(cells):
            return cells[i]
        return TOP
    if isinstance(e, S.Unary):
        v = eval_abstract(e.operand, env, arrays, opaque)
        if e.op == "-":
            return TOP if v is TOP else lin_scale(v, -1)
        t = truth(v)
        return TOP if t is TOP else int(not t)
    if isinstance(e, S.BinOp):
        op = e.op
        if op in ("&&", "||"):
            lt = truth(eval_abstract(e.left, env, arrays, opaque))
            rt = truth(eval_abstract(e.right, env, arrays, opaque))
            short = op == "||"  # value that decides the result
            if lt is short or rt is short:
                return int(short)
            if lt is TOP or rt is TOP:
                return TOP
            return int(not short)
        a = eval_abstract(e.left, env, arrays, opaque)
        b = eval_abstract(e.right, env, arrays, opaque)
        if a is TOP or b is TOP:
            return TOP
        if op == "+":
            return lin_add(a, b)
        if op == "-":
            return lin_add(a, b, -1)
        if op == "*":
            if opaque and not isinstance(e.left, S.Num) and not isinstance(e.right, S.Num):
                return TOP
            if isinstance(a, int):
                return lin_scale(b, a)
            if isinstance(b, int):
                return lin_scale(a, b)
            return TOP
        if op in ("/", "%"):
            if isinstance(a, int) and isinstance(b, int) and b != 0:
                return c_div(a, b) if op == "/" else c_mod(a, b)
            return TOP
        d = lin_add(a, b, -1)
        if isinstance(d, int):
            return int(_CMP[op](d))
        return TOP
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Component states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueState:
    env: tuple  # sorted ((name, value), ...)
    arrays: tuple  # sorted ((name, (cell, ...)), ...)
    nsyms: int  # inputs consumed so far; the next havoc yields symbol nsyms
    # path-sensitive mode only: undecided branch conditions taken so far, and
    # whether some condition could not be represented
    guards: Optional[frozenset] = None
    imprecise: bool = False

    @staticmethod
    def make(env: dict, arrays: dict, nsyms: int, guards: Optional[frozenset] = None) -> "ValueState":
        return ValueState(tuple(sorted(env.items())), tuple(sorted((k, tuple(v)) for k, v in arrays.items())),
                          nsyms, guards)

    def has_top(self) -> bool:
        return any(v is TOP for _, v in self.env) or any(c is TOP for _, cells in self.arrays for c in cells)

    def env_dict(self) -> dict:
        return dict(self.env)

    def arrays_dict(self) -> dict:
        return dict(self.arrays)

    def __getitem__(self, name):
        return self.env_dict()[name]


@dataclass(frozen=True)
class LoopBoundState:
    counters: tuple  # sorted ((loop head, iterations), ...)
    exceeded: bool = False

    def count(self, head: int) -> int:
        return dict(self.counters).get(head, 0)


BOTTOM = None  # absent successor; also the automaton's bottom element


class LocationAnalysis:
    name = "location"

    def __init__(self, cfa: CFA):
        self.cfa = cfa

    def initial(self):
        return self.cfa.entry

    def transfer(self, loc: int, edge: Edge) -> list:
        return [edge.target] if edge.source == loc else []

    def less_equal(self, a, b) -> bool:
        return a == b


class ValueAnalysis:
    """Explicit values, tracking nondet inputs as symbolic linear terms.

    With ``opaque_multiplication`` a product whose operands are both
    non-literal evaluates to TOP, whatever their values.

    In ``path_sensitive`` mode the state also records the undecided branch
    conditions, and one state subsumes another only if both are identical
    and TOP-free. Two such states denote the same set of concrete states,
    so subsumption never hides a feasible path behind an infeasible one.
    """

    name = "value"

    def __init__(self, cfa: CFA, opaque_multiplication: bool = False, path_sensitive: bool = False):
        self.cfa = cfa
        self.opaque = opaque_multiplication
        self.path_sensitive = path_sensitive

    def initial(self) -> ValueState:
        env = {name: symbol(k) for k, name in enumerate(self.cfa.inputs)}
        arrays = {name: (0,) * size for name, size in self.cfa.arrays.items()}
        return ValueState.make(env, arrays, len(self.cfa.inputs), frozenset() if self.path_sensitive else None)

    def transfer(self, s: ValueState, edge: Edge) -> list:
        return value_transfer(s, edge, self.opaque)

    def less_equal(self, a: ValueState, b: ValueState) -> bool:
        if self.path_sensitive:
            return a == b and not a.imprecise and not a.has_top()
        if a.nsyms != b.nsyms or len(a.env) != len(b.env):
            return False
        for (ka, va), (kb, vb) in zip(a.env, b.env):
            if ka != kb or not (vb is TOP or va == vb):
                return False
        for (ka, ca), (kb, cb) in zip(a.arrays, b.arrays):
            if ka != kb or any(not (y is TOP or x == y) for x, y in zip(ca, cb)):
                return False
        return True


def value_transfer(s: ValueState, edge: Edge, opaque: bool = False) -> list:
    stmt = edge.stmt
    kind = stmt.kind
    if kind == ASSUME:
        env, arrays = s.env_dict(), s.arrays_dict()
        t = truth(eval_abstract(stmt.expr, env, arrays, opaque))
        if t is False:
            return []
        if t is TOP and s.guards is not None:
            g = guard_of(stmt.expr, env, arrays, opaque)
            if g is None:
                return [replace(s, imprecise=True)]
            return [replace(s, guards=s.guards | {g})]
        return [s]
    if kind == ASSIGN:
        env = s.env_dict()
        env[stmt.target] = 0 if stmt.expr is None else eval_abstract(stmt.expr, env, s.arrays_dict(), opaque)
        return [replace(s, env=tuple(sorted(env.items())))]
    if kind == HAVOC:
        fresh = symbol(s.nsyms)
        if stmt.index is None:
            env = s.env_dict()
            env[stmt.target] = fresh
            return [replace(s, env=tuple(sorted(env.items())), nsyms=s.nsyms + 1)]
        return _store(s, stmt.target, stmt.index, fresh, opaque, s.nsyms + 1)
    if kind == ARRAY_STORE:
        v = eval_abstract(stmt.expr, s.env_dict(), s.arrays_dict(), opaque)
        return _store(s, stmt.target, stmt.index, v, opaque, s.nsyms)
    return [s]


def _store(s: ValueState, array: str, index, value, opaque: bool, nsyms: int) -> list:
    arrays = s.arrays_dict()
    i = eval_abstract(index, s.env_dict(), arrays, opaque)
    cells = list(arrays[array])
    if isinstance(i, int):
        if not 0 <= i < len(cells):
            return []
        cells[i] = value
    else:
        cells = [TOP] * len(cells)
    arrays[array] = tuple(cells)
    return [replace(s, arrays=tuple(sorted(arrays.items())), nsyms=nsyms)]


_NEG = {"<": ">=", ">=": "<", "<=": ">", ">": "<=", "==": "!=", "!=": "=="}


def guard_of(cond, env: dict, arrays: dict, opaque: bool = False):
    """Canonical ``(op, linear term)`` meaning ``term op 0``, or None."""
    negated = False
    while isinstance(cond, S.Unary) and cond.op == "!":
        negated = not negated
        cond = cond.operand
    if isinstance(cond, S.BinOp) and cond.op in _NEG:
        a = eval_abstract(cond.left, env, arrays, opaque)
        b = eval_abstract(cond.right, env, arrays, opaque)
        if a is TOP or b is TOP:
            return None
        op, d = cond.op, lin_add(a, b, -1)
    else:
        v = eval_abstract(cond, env, arrays, opaque)
        if v is TOP:
            return None
        op, d = "!=", v
    if not isinstance(d, Lin):
        return None
    return (_NEG[op] if negated else op, d)


class LoopBoundAnalysis:
    """Counts back edges per loop head; taking a loop-head edge beyond ``k``
    unrollings yields a state flagged ``exceeded``."""

    name = "loop-bound"

    def __init__(self, cfa: CFA, k: int):
        self.cfa = cfa
        self.k = k

    def initial(self) -> LoopBoundState:
        return LoopBoundState(())

    def transfer(self, s: LoopBoundState, edge: Edge) -> list:
        return loopbound_transfer(s, edge, self.cfa, self.k)

    def less_equal(self, a, b) -> bool:
        return a == b


def loopbound_transfer(s: LoopBoundState, edge: Edge, cfa: CFA, k: int) -> list:
    if s.exceeded:
        return []
    if edge.source in cfa.loop_heads and s.count(edge.source) > k:
        return [LoopBoundState(s.counters, True)]
    if edge.target not in cfa.loop_heads:
        return [s]
    counters = dict(s.counters)
    counters[edge.target] = counters.get(edge.target, 0) + 1 if edge.id in cfa.back_edges else 0
    return [LoopBoundState(tuple(sorted(counters.items())))]


# automaton states are plain string ids; TRUE/FALSE are absorbing
AA_TRUE = "TRUE"
AA_FALSE = "FALSE"


class AutomatonAnalysis:
    """The flat lattice over the states of an assumption automaton.

    In ``strict`` mode a missing transition from a normal state raises
    instead of yielding bottom: it can only mean the automaton does not
    belong to the analysed program.
    """

    name = "automaton"

    def __init__(self, automaton, strict: bool = False):
        self.automaton = automaton
        self.strict = strict

    def initial(self):
        return self.automaton.initial

    def transfer(self, q, edge: Edge) -> list:
        nxt = automaton_cpa_transfer(self.automaton, q, edge)
        if nxt is BOTTOM:
            if self.strict:
                raise InternalConsistencyError(
                    f"automaton state {q!r} has no transition for edge {edge.id} ({edge.text})")
            return []
        return [nxt]

    def less_equal(self, a, b) -> bool:
        return a == b


def automaton_cpa_transfer(automaton, q, edge) -> Optional[str]:
    if q is BOTTOM:
        return BOTTOM
    if q in (AA_TRUE, AA_FALSE):
        return q
    eid = edge if isinstance(edge, str) else edge.id
    return automaton.transitions.get(q, {}).get(eid, BOTTOM)


class CompositeAnalysis(ConfigurableProgramAnalysis):
    """Product of component analyses; the first component is the location.

    Transfer is the conjunction of component transfers, so an empty
    component successor set (bottom) kills the product successor.
    """

    def __init__(self, cfa: CFA, parts: Sequence):
        if not parts or not isinstance(parts[0], LocationAnalysis):
            raise ValueError("the first component must be the location analysis")
        self.cfa = cfa
        self.parts = list(parts)
        self.names = [p.name for p in self.parts]

    def component(self, state, name: str):
        try:
            return state[self.names.index(name)]
        except ValueError:
            raise ExecReportError(f"composite has no {name} component") from None

    def has(self, name: str) -> bool:
        return name in self.names

    def initial_state(self):
        return tuple(p.initial() for p in self.parts)

    def successors(self, state):
        for edge in self.cfa.outgoing(state[0]):
            options = []
            for p, s in zip(self.parts, state):
                succ = p.transfer(s, edge)
                if not succ:
                    break
                options.append(succ)
            else:
                for combo in itertools.product(*options):
                    yield edge, tuple(combo)

    def less_equal(self, a, b) -> bool:
        return all(p.less_equal(x, y) for p, x, y in zip(self.parts, a, b))

    def partition(self, state):
        return state[0]

    def frozen(self, state) -> bool:
        if self.has("loop-bound"):
            return self.component(state, "loop-bound").exceeded
        return False


def compose(cfa: CFA, parts: Sequence) -> CompositeAnalysis:
    return CompositeAnalysis(cfa, parts)


def is_target(cpa: CompositeAnalysis, state, flag: str) -> bool:
    """Whether the automaton component of ``state`` is the flagged TRUE/FALSE state."""
    if flag not in (AA_TRUE, AA_FALSE):
        raise ValueError("flag must be TRUE or FALSE")
    return cpa.component(state, "automaton") == flag
