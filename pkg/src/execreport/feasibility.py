"""Bounded feasibility checking of CFA traces.

A trace is executed symbolically: entry parameters and havocs become input
symbols, deterministic assignments are folded, and every assume edge adds a
constraint. A backtracking search over ``[-B, B]`` then looks for an input
vector; any candidate is confirmed by concrete replay before it is returned.
Infeasibility is never claimed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import syntax as S
from .analyses import Lin, lin_add, lin_scale, symbol
from .cfa import ARRAY_STORE, ASSIGN, ASSUME, CFA, HAVOC
from .interp import EvalFault, apply_binop, c_div, c_mod, replay

DEFAULT_DOMAIN_BOUND = 8
DEFAULT_MAX_SYMBOLS = 32
DEFAULT_NODE_BUDGET = 10**6

BUDGET = "budget"
NONLINEAR_OPAQUE = "nonlinear-opaque"
DOMAIN_EXHAUSTED = "domain-exhausted"

# Terms are ints, Lin (linear over symbols), or tuples tagged by their head:
#   ("cmp", op, lin)       lin op 0
#   ("op", op, a, b)       non-linear binary operation
#   ("neg", a) / ("not", a)
#   ("ite", cond, a, b)
#   ("opq",)               product hidden by opaque multiplication
OPAQUE = ("opq",)

_FLIP = {"<": ">=", ">=": "<", "<=": ">", ">": "<=", "==": "!=", "!=": "=="}
_REVERSE = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}
_CMP = {
    "<": lambda d: d < 0, "<=": lambda d: d <= 0, ">": lambda d: d > 0,
    ">=": lambda d: d >= 0, "==": lambda d: d == 0, "!=": lambda d: d != 0,
}


@dataclass(frozen=True)
class Feasible:
    witness: tuple

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Unknown:
    reason: str

    def __bool__(self):
        return False


@dataclass
class PathCondition:
    symbols: list = field(default_factory=list)  # human-readable label per input
    constraints: list = field(default_factory=list)
    unsat: bool = False

    @property
    def opaque(self) -> bool:
        return any(has_opaque(c) for c in self.constraints)


def _linear(t) -> bool:
    return isinstance(t, (int, Lin))


def as_constraint(t):
    """Boolean view of an integer term: int/bool or a constraint term."""
    if isinstance(t, int):
        return t != 0
    if isinstance(t, Lin):
        return ("cmp", "!=", t)
    return t


def negate(t):
    if isinstance(t, bool):
        return not t
    if isinstance(t, int):
        return int(t == 0)
    if isinstance(t, Lin):
        return ("cmp", "==", t)
    if t[0] == "cmp":
        return ("cmp", _FLIP[t[1]], t[2])
    if t[0] == "not":
        return as_constraint(t[1])
    return ("not", t)


def _compare(op: str, a, b):
    if _linear(a) and _linear(b):
        d = lin_add(a, b, -1)
        if isinstance(d, int):
            return int(_CMP[op](d))
        return ("cmp", op, d)
    return ("op", op, a, b)


def _eq_const(t, k: int):
    return _compare("==", t, k)


class _SymExec:
    def __init__(self, cfa: CFA, opaque: bool):
        self.cfa = cfa
        self.opaque = opaque
        self.pc = PathCondition()
        self.env = {}
        self.arrays = {name: [0] * size for name, size in cfa.arrays.items()}
        for name in cfa.inputs:
            self.env[name] = self.fresh(name)

    def fresh(self, label: str):
        k = len(self.pc.symbols)
        self.pc.symbols.append(label)
        return symbol(k)

    def require(self, c):
        c = as_constraint(c)
        if c is True:
            return
        if c is False:
            self.pc.unsat = True
            return
        self.pc.constraints.append(c)

    def index(self, array: str, i):
        n = len(self.arrays[array])
        if isinstance(i, int):
            if not 0 <= i < n:
                self.pc.unsat = True
            return i
        self.require(_compare(">=", i, 0))
        self.require(_compare("<", i, n))
        return i

    def eval(self, e):
        if isinstance(e, S.Num):
            return e.value
        if isinstance(e, S.Name):
            return self.env.get(e.id, 0)
        if isinstance(e, S.Index):
            i = self.index(e.array, self.eval(e.index))
            cells = self.arrays[e.array]
            if isinstance(i, int):
                return cells[i] if 0 <= i < len(cells) else 0
            out = cells[-1]
            for k in range(len(cells) - 2, -1, -1):
                out = ("ite", as_constraint(_eq_const(i, k)), cells[k], out)
            return out
        if isinstance(e, S.Unary):
            v = self.eval(e.operand)
            if e.op == "!":
                n = negate(as_constraint(v))
                return int(n) if isinstance(n, bool) else n
            if _linear(v):
                return lin_scale(v, -1)
            return ("neg", v)
        if isinstance(e, S.BinOp):
            return self.binop(e)
        raise TypeError(e)

    def binop(self, e: S.BinOp):
        op = e.op
        a = self.eval(e.left)
        b = self.eval(e.right)
        if op in ("+", "-"):
            if _linear(a) and _linear(b):
                return lin_add(a, b, 1 if op == "+" else -1)
            return ("op", op, a, b)
        if op == "*":
            if self.opaque and not isinstance(e.left, S.Num) and not isinstance(e.right, S.Num):
                return OPAQUE
            if isinstance(a, int) and _linear(b):
                return lin_scale(b, a)
            if isinstance(b, int) and _linear(a):
                return lin_scale(a, b)
            return ("op", op, a, b)
        if op in ("/", "%"):
            if isinstance(b, int):
                if b == 0:
                    self.pc.unsat = True
                    return 0
                if isinstance(a, int):
                    return c_div(a, b) if op == "/" else c_mod(a, b)
            else:
                self.require(_compare("!=", b, 0))
            return ("op", op, a, b)
        if op in ("&&", "||"):
            ca, cb = as_constraint(a), as_constraint(b)
            if isinstance(ca, bool) and isinstance(cb, bool):
                return int(ca and cb) if op == "&&" else int(ca or cb)
            return ("op", op, a, b)
        return _compare(op, a, b)

    def store(self, array: str, index_expr, value):
        i = self.index(array, self.eval(index_expr))
        cells = self.arrays[array]
        if isinstance(i, int):
            if 0 <= i < len(cells):
                cells[i] = value
            return
        for k in range(len(cells)):
            cells[k] = ("ite", as_constraint(_eq_const(i, k)), value, cells[k])

    def step(self, edge):
        stmt = edge.stmt
        if stmt.kind == ASSUME:
            self.require(self.eval(stmt.expr))
        elif stmt.kind == ASSIGN:
            self.env[stmt.target] = 0 if stmt.expr is None else self.eval(stmt.expr)
        elif stmt.kind == ARRAY_STORE:
            self.store(stmt.target, stmt.index, self.eval(stmt.expr))
        elif stmt.kind == HAVOC:
            label = stmt.target if stmt.index is None else f"{stmt.target}[]"
            v = self.fresh(f"{label}@{edge.id}")
            if stmt.index is None:
                self.env[stmt.target] = v
            else:
                self.store(stmt.target, stmt.index, v)


def path_condition(cfa: CFA, trace: Sequence[str], opaque_multiplication: bool = False) -> PathCondition:
    """Symbolically execute ``trace``; raises ValueError if it is not a path from the entry."""
    ex = _SymExec(cfa, opaque_multiplication)
    loc = cfa.entry
    for eid in trace:
        edge = cfa.edges.get(eid)
        if edge is None or edge.source != loc:
            raise ValueError(f"trace is not a syntactic path at edge {eid!r}")
        ex.step(edge)
        loc = edge.target
    return ex.pc


# ---------------------------------------------------------------------------
# Term utilities
# ---------------------------------------------------------------------------

def has_opaque(t) -> bool:
    if isinstance(t, tuple):
        return t == OPAQUE or any(has_opaque(x) for x in t[1:])
    return False


def symbols_of(t, out: Optional[set] = None) -> set:
    out = set() if out is None else out
    if isinstance(t, Lin):
        out.update(k for k, _ in t.terms)
    elif isinstance(t, tuple):
        for x in t[1:]:
            symbols_of(x, out)
    return out


def eval_term(t, env: Sequence[int]) -> int:
    if isinstance(t, bool):
        return int(t)
    if isinstance(t, int):
        return t
    if isinstance(t, Lin):
        return t.const + sum(c * env[k] for k, c in t.terms)
    head = t[0]
    if head == "cmp":
        return int(_CMP[t[1]](eval_term(t[2], env)))
    if head == "op":
        return apply_binop(t[1], eval_term(t[2], env), eval_term(t[3], env))
    if head == "neg":
        return -eval_term(t[1], env)
    if head == "not":
        return int(not eval_term(t[1], env))
    if head == "ite":
        return eval_term(t[2], env) if eval_term(t[1], env) else eval_term(t[3], env)
    raise EvalFault("opaque term cannot be evaluated")


def holds(c, env: Sequence[int]) -> bool:
    try:
        return bool(eval_term(c, env))
    except EvalFault:
        return False


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------

class _BudgetHit(Exception):
    pass


def _ordered(lo: int, hi: int):
    """Integers in [lo, hi] ordered 0, 1, -1, 2, -2, ..."""
    if lo > hi:
        return
    r = max(abs(lo), abs(hi))
    if lo <= 0 <= hi:
        yield 0
    for m in range(1, r + 1):
        if lo <= m <= hi:
            yield m
        if lo <= -m <= hi:
            yield -m


def _narrow(c, x: int, env, lo: int, hi: int, excluded: set):
    """Tighten [lo, hi] for symbol ``x`` from a linear comparison."""
    _, op, d = c
    coef = 0
    rest = d.const
    for k, a in d.terms:
        if k == x:
            coef = a
        else:
            rest += a * env[k]
    # coef * x + rest  op  0
    if op in ("==", "!="):
        if rest % coef:
            return (lo, hi) if op == "!=" else (1, 0)
        v = -rest // coef
        if op == "==":
            return (max(lo, v), min(hi, v))
        excluded.add(v)
        return lo, hi
    if coef < 0:
        coef, rest, op = -coef, -rest, _REVERSE[op]
    # coef > 0: x op -rest/coef
    q = -rest
    if op == "<":
        return lo, min(hi, -((-q) // coef) - 1)
    if op == "<=":
        return lo, min(hi, q // coef)
    if op == ">":
        return max(lo, q // coef + 1), hi
    return max(lo, -((-q) // coef)), hi  # >=


def _solve(nsyms: int, constraints: list, bound: int, budget: list):
    """First assignment in [-bound, bound]^n (lexicographic, 0-first order)."""
    free = [True] * nsyms
    at: list = [[] for _ in range(nsyms)]  # constraints decided once symbol k is set
    for c in constraints:
        syms = symbols_of(c)
        for k in syms:
            free[k] = False
        at[max(syms)].append(c)
    env = [0] * nsyms

    def rec(x: int) -> bool:
        if x == nsyms:
            return True
        if free[x]:
            env[x] = 0
            return rec(x + 1)
        lo, hi, excluded = -bound, bound, set()
        nonlinear = []
        for c in at[x]:
            if isinstance(c, tuple) and c[0] == "cmp":
                lo, hi = _narrow(c, x, env, lo, hi, excluded)
            else:
                nonlinear.append(c)
        for v in _ordered(lo, hi):
            if v in excluded:
                continue
            budget[0] -= 1
            if budget[0] < 0:
                raise _BudgetHit
            env[x] = v
            if all(holds(c, env) for c in nonlinear) and rec(x + 1):
                return True
        return False

    return tuple(env) if rec(0) else None


def check(cfa: CFA, trace: Sequence[str], domain_bound: int = DEFAULT_DOMAIN_BOUND,
          max_symbols: int = DEFAULT_MAX_SYMBOLS, node_budget: int = DEFAULT_NODE_BUDGET,
          opaque_multiplication: bool = False):
    """Feasible(witness) or Unknown(reason); Feasible witnesses always replay."""
    if domain_bound < 0 or max_symbols < 0:
        raise ValueError("domain_bound and max_symbols must be non-negative")
    pc = path_condition(cfa, trace, opaque_multiplication)
    if pc.opaque:
        return Unknown(NONLINEAR_OPAQUE)
    if len(pc.symbols) > max_symbols:
        return Unknown(BUDGET)
    if pc.unsat:
        return Unknown(DOMAIN_EXHAUSTED)
    budget = [node_budget]
    tried = set()
    try:
        # iterative deepening keeps the witness independent of the outer bound
        for b in range(domain_bound + 1):
            w = _solve(len(pc.symbols), pc.constraints, b, budget)
            if w is None or w in tried:
                continue
            tried.add(w)
            if replay(cfa, trace, list(w)):
                return Feasible(w)
    except _BudgetHit:
        return Unknown(BUDGET)
    return Unknown(DOMAIN_EXHAUSTED)
