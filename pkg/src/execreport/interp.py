"""Reference concrete semantics of MiniC over a CFA."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from . import syntax as S
from .cfa import ARRAY_STORE, ASSIGN, ASSUME, CFA, HAVOC, Edge

TERMINATED_SAFE = "terminated-safe"
ASSERTION_FAILURE = "assertion-failure"
INPUT_EXHAUSTED = "input-exhausted"
STEP_LIMIT = "step-limit"


class EvalFault(Exception):
    """Division by zero or out-of-bounds access not caught by a check edge."""


def c_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def c_mod(a: int, b: int) -> int:
    return a - b * c_div(a, b)


def apply_binop(op: str, a: int, b: int) -> int:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op in ("/", "%"):
        if b == 0:
            raise EvalFault("division by zero")
        return c_div(a, b) if op == "/" else c_mod(a, b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "&&":
        return int(bool(a) and bool(b))
    if op == "||":
        return int(bool(a) or bool(b))
    raise ValueError(op)


def evaluate(e, env: dict, arrays: dict) -> int:
    if isinstance(e, S.Num):
        return e.value
    if isinstance(e, S.Name):
        return env.get(e.id, 0)
    if isinstance(e, S.Index):
        i = evaluate(e.index, env, arrays)
        cells = arrays[e.array]
        if not 0 <= i < len(cells):
            raise EvalFault(f"index {i} out of bounds for {e.array}")
        return cells[i]
    if isinstance(e, S.Unary):
        v = evaluate(e.operand, env, arrays)
        return -v if e.op == "-" else int(not v)
    if isinstance(e, S.BinOp):
        return apply_binop(e.op, evaluate(e.left, env, arrays), evaluate(e.right, env, arrays))
    raise TypeError(e)


@dataclass
class ConcreteState:
    loc: int
    env: dict
    arrays: dict
    pos: int  # next unread input

    def copy(self) -> "ConcreteState":
        return ConcreteState(self.loc, dict(self.env), {k: list(v) for k, v in self.arrays.items()}, self.pos)


def initial_state(cfa: CFA, inputs: Sequence[int]) -> Optional[ConcreteState]:
    """State at the entry location, entry parameters bound to the first inputs."""
    if len(inputs) < len(cfa.inputs):
        return None
    env = {name: inputs[i] for i, name in enumerate(cfa.inputs)}
    arrays = {name: [0] * size for name, size in cfa.arrays.items()}
    return ConcreteState(cfa.entry, env, arrays, len(cfa.inputs))


def assume_holds(edge: Edge, state: ConcreteState) -> bool:
    return bool(evaluate(edge.stmt.expr, state.env, state.arrays))


def choose_edge(cfa: CFA, state: ConcreteState) -> Optional[Edge]:
    """The unique enabled outgoing edge, or None at a sink."""
    out = cfa.outgoing(state.loc)
    if not out:
        return None
    if out[0].stmt.kind != ASSUME:
        return out[0]
    for e in out:
        if assume_holds(e, state):
            return e
    return None


def apply_edge(edge: Edge, state: ConcreteState, inputs: Sequence[int]) -> Optional[ConcreteState]:
    """Execute ``edge`` in place on a copy; None when an input is missing."""
    st = state.copy()
    stmt = edge.stmt
    if stmt.kind == ASSIGN:
        st.env[stmt.target] = 0 if stmt.expr is None else evaluate(stmt.expr, st.env, st.arrays)
    elif stmt.kind == ARRAY_STORE:
        i = evaluate(stmt.index, st.env, st.arrays)
        v = evaluate(stmt.expr, st.env, st.arrays)
        if not 0 <= i < len(st.arrays[stmt.target]):
            raise EvalFault(f"index {i} out of bounds for {stmt.target}")
        st.arrays[stmt.target][i] = v
    elif stmt.kind == HAVOC:
        if st.pos >= len(inputs):
            return None
        v = inputs[st.pos]
        st.pos += 1
        if stmt.index is None:
            st.env[stmt.target] = v
        else:
            i = evaluate(stmt.index, st.env, st.arrays)
            if not 0 <= i < len(st.arrays[stmt.target]):
                raise EvalFault(f"index {i} out of bounds for {stmt.target}")
            st.arrays[stmt.target][i] = v
    st.loc = edge.target
    return st


@dataclass(frozen=True)
class ExecutionResult:
    trace: tuple  # edge ids
    verdict: str


def execute(cfa: CFA, inputs: Sequence[int], step_limit: int = 100_000,
            nondet_bound: Optional[int] = None) -> ExecutionResult:
    """Run the program on concrete inputs (entry parameters first, then each havoc)."""
    if step_limit <= 0:
        raise ValueError("step_limit must be positive")
    if nondet_bound is not None and any(abs(v) > nondet_bound for v in inputs):
        raise ValueError(f"input outside [-{nondet_bound}, {nondet_bound}]")
    state = initial_state(cfa, inputs)
    if state is None:
        return ExecutionResult((), INPUT_EXHAUSTED)
    trace = []
    while True:
        if state.loc == cfa.error:
            return ExecutionResult(tuple(trace), ASSERTION_FAILURE)
        if len(trace) >= step_limit:
            return ExecutionResult(tuple(trace), STEP_LIMIT)
        try:
            edge = choose_edge(cfa, state)
            if edge is None:
                return ExecutionResult(tuple(trace), TERMINATED_SAFE)
            nxt = apply_edge(edge, state, inputs)
        except EvalFault:
            return ExecutionResult(tuple(trace), ASSERTION_FAILURE)
        if nxt is None:
            return ExecutionResult(tuple(trace), INPUT_EXHAUSTED)
        trace.append(edge.id)
        state = nxt


def replay(cfa: CFA, trace: Sequence[str], inputs: Sequence[int]) -> bool:
    """True iff executing on ``inputs`` produces a trace with ``trace`` as a prefix."""
    trace = tuple(trace)
    result = execute(cfa, inputs, step_limit=max(len(trace), 1))
    return result.trace[: len(trace)] == trace
