"""Control flow automata: lowering MiniC programs into statement-labelled graphs.

Calls are inlined with fresh variable names, conditions are split into
paired ``assume`` edges (short-circuit operators become nested branches),
``assert(e)`` becomes ``assume(!e)`` into the error sink, and every array
access or division gets implicit check edges into the same sink.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import syntax as S
from .errors import CFABuildError, MiniCSyntaxError, UnknownLocationError

ASSIGN = "assign"
ARRAY_STORE = "array-store"
ASSUME = "assume"
ASSERT_FAIL = "assert-fail"
NOP = "nop"
HAVOC = "havoc"
KINDS = (ASSIGN, ARRAY_STORE, ASSUME, ASSERT_FAIL, NOP, HAVOC)


@dataclass(frozen=True)
class Statement:
    """One letter of the statement alphabet.

    ``target``/``index`` name the written variable or array cell, ``expr``
    is the right-hand side (or the condition of an assume, or the size of
    an array declaration).
    """

    kind: str
    text: str
    target: Optional[str] = None
    index: Optional[S.Expr] = None
    expr: Optional[S.Expr] = None
    decl: bool = False

    def __str__(self) -> str:
        return self.text


def _lhs(target, index):
    return target if index is None else f"{target}[{S.format_expr(index)}]"


def assign(target: str, expr: Optional[S.Expr], decl: bool = False) -> Statement:
    if expr is None:
        return Statement(ASSIGN, f"int {target};", target, None, None, True)
    prefix = "int " if decl else ""
    return Statement(ASSIGN, f"{prefix}{target} = {S.format_expr(expr)};", target, None, expr, decl)


def store(array: str, index: S.Expr, expr: S.Expr) -> Statement:
    return Statement(ARRAY_STORE, f"{_lhs(array, index)} = {S.format_expr(expr)};", array, index, expr)


def havoc(target: str, index: Optional[S.Expr] = None, decl: bool = False) -> Statement:
    prefix = "int " if decl else ""
    return Statement(HAVOC, f"{prefix}{_lhs(target, index)} = nondet();", target, index, None, decl)


def assume(cond: S.Expr) -> Statement:
    return Statement(ASSUME, f"assume({S.format_expr(cond)});", None, None, cond)


def nop(text: str, target: Optional[str] = None, expr: Optional[S.Expr] = None) -> Statement:
    return Statement(NOP, text, target, None, expr)


def assert_fail() -> Statement:
    return Statement(ASSERT_FAIL, "fail;")


def parse_statement(text: str) -> Statement:
    """Inverse of the statement printers: ``parse_statement(s.text) == s``."""
    t = text.strip()
    if t == "fail;":
        return assert_fail()
    if t == "skip;":
        return nop("skip;")
    p = S._Parser(t)
    if p.at("return"):
        p.i += 1
        expr = None if p.at(";") else p.expr()
        p.expect(";")
        _eof(p)
        return nop("return;" if expr is None else f"return {S.format_expr(expr)};", None, expr)
    if p.tok.kind == "id" and p.tok.text == "assume" and p.peek().text == "(":
        p.i += 1
        p.expect("(")
        cond = p.expr()
        p.expect(")")
        p.expect(";")
        _eof(p)
        return assume(cond)
    stmt = p.simple()
    p.expect(";")
    _eof(p)
    if isinstance(stmt, S.ArrayDecl):
        return nop(f"int {stmt.name}[{S.format_expr(stmt.size)}];", stmt.name, stmt.size)
    if isinstance(stmt, S.Decl):
        if _is_nondet(stmt.init):
            return havoc(stmt.name, None, decl=True)
        return assign(stmt.name, stmt.init, decl=True)
    if isinstance(stmt, S.Assign):
        if _is_nondet(stmt.expr):
            return havoc(stmt.name)
        return assign(stmt.name, stmt.expr)
    if isinstance(stmt, S.Store):
        if _is_nondet(stmt.expr):
            return havoc(stmt.name, stmt.index)
        return store(stmt.name, stmt.index, stmt.expr)
    raise MiniCSyntaxError(f"not a statement label: {text!r}")


def _eof(p):
    if p.tok.kind != "eof":
        p.error("trailing input after statement")


def _is_nondet(e) -> bool:
    return isinstance(e, S.Call) and e.func == S.NONDET


@dataclass(frozen=True)
class Edge:
    id: str
    source: int
    target: int
    stmt: Statement
    line: int

    @property
    def label(self) -> Statement:
        return self.stmt

    @property
    def text(self) -> str:
        return self.stmt.text


def edge_id(source: int, text: str, target: int) -> str:
    digest = hashlib.sha1(text.encode("utf-8")).hexdigest()[:8]
    return f"{source}-{target}-{digest}"


@dataclass
class CFA:
    locations: list
    entry: int
    error: int
    exit: Optional[int]
    edges: dict  # id -> Edge
    inputs: list  # entry parameters, consumed as the first nondet values
    arrays: dict  # array name -> allocated cells
    loop_heads: frozenset
    back_edges: frozenset
    source_hash: str = ""
    entry_function: str = "main"
    array_capacity: int = 8
    _out: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        out = {loc: [] for loc in self.locations}
        for e in self.edges.values():
            out[e.source].append(e)
        self._out = {loc: sorted(es, key=lambda e: e.id) for loc, es in out.items()}

    def outgoing(self, loc: int) -> list:
        try:
            return self._out[loc]
        except KeyError:
            raise UnknownLocationError(loc) from None

    def edge(self, eid: str) -> Edge:
        return self.edges[eid]

    def line_of(self, loc: int) -> int:
        out = self._out.get(loc)
        return out[0].line if out else 0

    def manifest(self) -> dict:
        return {
            "source_hash": self.source_hash,
            "entry_function": self.entry_function,
            "array_capacity": self.array_capacity,
            "edges": {
                eid: {"source": e.source, "target": e.target, "text": e.text, "line": e.line}
                for eid, e in sorted(self.edges.items())
            },
        }


def source_hash(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------

class _Ctx:
    def __init__(self, func: S.FunctionDef, exit_loc: int, ret_var: Optional[str], depth: int):
        self.func = func
        self.exit = exit_loc
        self.ret_var = ret_var
        self.depth = depth
        self.scopes: list[dict] = [{}]

    def lookup(self, name: str) -> str:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise CFABuildError(f"unresolved identifier {name!r}")


class _Builder:
    def __init__(self, program: S.Program, max_inline_depth: int, array_capacity: int):
        self.program = program
        self.max_inline_depth = max_inline_depth
        self.capacity = array_capacity
        self.parent: dict[int, int] = {}
        self.raw_edges: list[tuple] = []
        self.names: set[str] = set()
        self.arrays: dict[str, int] = {}
        self.loops: list[tuple] = []  # (head, first edge index, last edge index)
        self.error = self.new_loc()
        self.exit = self.new_loc()

    # -- locations
    def new_loc(self) -> int:
        loc = len(self.parent)
        self.parent[loc] = loc
        return loc

    def find(self, loc: int) -> int:
        while self.parent[loc] != loc:
            self.parent[loc] = self.parent[self.parent[loc]]
            loc = self.parent[loc]
        return loc

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        assert self.error not in (ra, rb), "the error sink is never merged"
        self.parent[ra] = rb

    def edge(self, src: int, stmt: Statement, line: int, dst: Optional[int] = None) -> int:
        if dst is None:
            dst = self.new_loc()
        self.raw_edges.append((src, dst, stmt, line))
        return dst

    # -- names
    def fresh(self, name: str) -> str:
        if name not in self.names:
            self.names.add(name)
            return name
        k = 1
        while f"{name}_{k}" in self.names:
            k += 1
        self.names.add(f"{name}_{k}")
        return f"{name}_{k}"

    def declare(self, ctx: _Ctx, name: str) -> str:
        unique = self.fresh(name)
        ctx.scopes[-1][name] = unique
        return unique

    # -- expressions
    def rename(self, e, ctx: _Ctx):
        if isinstance(e, S.Num):
            return e
        if isinstance(e, S.Name):
            return S.Name(ctx.lookup(e.id))
        if isinstance(e, S.Index):
            return S.Index(ctx.lookup(e.array), self.rename(e.index, ctx))
        if isinstance(e, S.Unary):
            return S.Unary(e.op, self.rename(e.operand, ctx))
        if isinstance(e, S.BinOp):
            return S.BinOp(e.op, self.rename(e.left, ctx), self.rename(e.right, ctx))
        raise TypeError(e)

    def lower_expr(self, e, src: int, ctx: _Ctx, line: int):
        """Hoist calls and ``nondet()`` out of ``e``; returns (pure renamed expr, location)."""
        if isinstance(e, S.Call):
            if e.func == S.NONDET:
                tmp = self.declare(ctx, "nd")
                src = self.edge(src, havoc(tmp, None, decl=True), line)
                return S.Name(tmp), src
            ret, src = self.inline(e, src, ctx, line)
            return S.Name(ret), src
        if isinstance(e, (S.Num, S.Name)):
            return self.rename(e, ctx), src
        if isinstance(e, S.Index):
            idx, src = self.lower_expr(e.index, src, ctx, line)
            return S.Index(ctx.lookup(e.array), idx), src
        if isinstance(e, S.Unary):
            inner, src = self.lower_expr(e.operand, src, ctx, line)
            return S.Unary(e.op, inner), src
        if isinstance(e, S.BinOp):
            left, src = self.lower_expr(e.left, src, ctx, line)
            right, src = self.lower_expr(e.right, src, ctx, line)
            return S.BinOp(e.op, left, right), src
        raise TypeError(e)

    def checks(self, e, src: int, line: int, seen=None) -> int:
        """Emit implicit bounds / division-by-zero checks for a pure expression."""
        if seen is None:
            seen = set()
        conds = []

        def walk(x):
            if isinstance(x, S.Index):
                walk(x.index)
                size = self.arrays[x.array]
                if isinstance(x.index, S.Num) and 0 <= x.index.value < size:
                    return
                conds.append(S.BinOp(">=", x.index, S.Num(0)))
                conds.append(S.BinOp("<", x.index, S.Num(size)))
            elif isinstance(x, S.Unary):
                walk(x.operand)
            elif isinstance(x, S.BinOp):
                walk(x.left)
                walk(x.right)
                if x.op in ("/", "%") and not (isinstance(x.right, S.Num) and x.right.value != 0):
                    conds.append(S.BinOp("!=", x.right, S.Num(0)))

        walk(e)
        for c in conds:
            if c in seen:
                continue
            seen.add(c)
            self.edge(src, assume(S.negate(c)), line, self.error)
            src = self.edge(src, assume(c), line)
        return src

    def value(self, e, src: int, ctx: _Ctx, line: int, seen=None):
        pure, src = self.lower_expr(e, src, ctx, line)
        return pure, self.checks(pure, src, line, seen)

    def cond(self, e, src: int, t: int, f: int, ctx: _Ctx, line: int):
        if isinstance(e, S.Unary) and e.op == "!":
            self.cond(e.operand, src, f, t, ctx, line)
        elif isinstance(e, S.BinOp) and e.op == "&&":
            mid = self.new_loc()
            self.cond(e.left, src, mid, f, ctx, line)
            self.cond(e.right, mid, t, f, ctx, line)
        elif isinstance(e, S.BinOp) and e.op == "||":
            mid = self.new_loc()
            self.cond(e.left, src, t, mid, ctx, line)
            self.cond(e.right, mid, t, f, ctx, line)
        else:
            pure, src = self.value(e, src, ctx, line)
            self.edge(src, assume(pure), line, t)
            self.edge(src, assume(S.negate(pure)), line, f)

    # -- calls
    def inline(self, call: S.Call, src: int, ctx: _Ctx, line: int):
        fn = self.program.functions[call.func]
        if ctx.depth + 1 > self.max_inline_depth:
            raise CFABuildError(f"inline depth exceeded while inlining {call.func!r}", line)
        seen = set()
        values = []
        for arg, p in zip(call.args, fn.params):
            if p.is_array:
                values.append(ctx.lookup(arg.id))
            else:
                pure, src = self.value(arg, src, ctx, line, seen)
                values.append(pure)
        ret = self.fresh(f"{fn.name}_ret") if fn.returns_int else None
        callee = _Ctx(fn, self.new_loc(), ret, ctx.depth + 1)
        for value, p in zip(values, fn.params):
            if p.is_array:
                callee.scopes[0][p.name] = value
            else:
                unique = self.declare(callee, p.name)
                src = self.edge(src, assign(unique, value, decl=True), fn.line)
        end = self.block(fn.body.stmts, src, callee, new_scope=False)
        if end is not None:
            self.union(end, callee.exit)
        return ret, callee.exit

    # -- statements
    def block(self, stmts, src, ctx, new_scope=True):
        if new_scope:
            ctx.scopes.append({})
        cur = src
        for st in stmts:
            if cur is None:
                cur = self.new_loc()  # dead code after return; pruned later
            cur = self.stmt(st, cur, ctx)
        if new_scope:
            ctx.scopes.pop()
        return cur

    def scoped(self, st, src, ctx):
        ctx.scopes.append({})
        end = self.stmt(st, src, ctx)
        ctx.scopes.pop()
        return end

    def stmt(self, st, src: int, ctx: _Ctx) -> Optional[int]:
        if isinstance(st, S.Block):
            return self.block(st.stmts, src, ctx)
        if isinstance(st, S.Decl):
            if st.init is None:
                return self.edge(src, assign(self.declare(ctx, st.name), None), st.line)
            if _is_nondet(st.init):
                return self.edge(src, havoc(self.declare(ctx, st.name), None, decl=True), st.line)
            pure, src = self.value(st.init, src, ctx, st.line)
            return self.edge(src, assign(self.declare(ctx, st.name), pure, decl=True), st.line)
        if isinstance(st, S.ArrayDecl):
            return self.array_decl(st, src, ctx)
        if isinstance(st, S.Assign):
            target = ctx.lookup(st.name)
            if _is_nondet(st.expr):
                return self.edge(src, havoc(target), st.line)
            pure, src = self.value(st.expr, src, ctx, st.line)
            return self.edge(src, assign(target, pure), st.line)
        if isinstance(st, S.Store):
            seen = set()
            index, src = self.value(st.index, src, ctx, st.line, seen)
            array = ctx.lookup(st.name)
            src = self.checks(S.Index(array, index), src, st.line, seen)
            if _is_nondet(st.expr):
                return self.edge(src, havoc(array, index), st.line)
            pure, src = self.value(st.expr, src, ctx, st.line, seen)
            return self.edge(src, store(array, index, pure), st.line)
        if isinstance(st, S.If):
            t, f, join = self.new_loc(), self.new_loc(), self.new_loc()
            self.cond(st.cond, src, t, f, ctx, st.line)
            end = self.scoped(st.then, t, ctx)
            if end is not None:
                self.union(end, join)
            end = self.scoped(st.orelse, f, ctx) if st.orelse is not None else f
            if end is not None:
                self.union(end, join)
            return join
        if isinstance(st, S.While):
            return self.loop(src, None, st.cond, None, st.body, ctx, st.line)
        if isinstance(st, S.For):
            ctx.scopes.append({})
            head = self.stmt(st.init, src, ctx) if st.init is not None else src
            end = self.loop(head, st.init, st.cond, st.step, st.body, ctx, st.line)
            ctx.scopes.pop()
            return end
        if isinstance(st, S.Assert):
            ok = self.new_loc()
            self.cond(st.cond, src, ok, self.error, ctx, st.line)
            return ok
        if isinstance(st, S.Return):
            if ctx.ret_var is None:
                if st.expr is None:
                    self.edge(src, nop("return;"), st.line, ctx.exit)
                else:
                    pure, src = self.value(st.expr, src, ctx, st.line)
                    self.edge(src, nop(f"return {S.format_expr(pure)};", None, pure), st.line, ctx.exit)
            else:
                pure, src = self.value(st.expr, src, ctx, st.line)
                self.edge(src, assign(ctx.ret_var, pure), st.line, ctx.exit)
            return None
        if isinstance(st, S.ExprStmt):
            if st.call.func == S.NONDET:
                return self.edge(src, havoc(self.declare(ctx, "nd"), None, decl=True), st.line)
            _, end = self.inline(st.call, src, ctx, st.line)
            return end
        raise TypeError(st)

    def loop(self, head, _init, cond, step, body, ctx, line):
        start = len(self.raw_edges)
        body_entry, exit_loc = self.new_loc(), self.new_loc()
        self.cond(cond if cond is not None else S.Num(1), head, body_entry, exit_loc, ctx, line)
        end = self.scoped(body, body_entry, ctx)
        if end is not None and step is not None:
            end = self.stmt(step, end, ctx)
        if end is not None:
            self.union(end, head)
        self.loops.append((head, start, len(self.raw_edges)))
        return exit_loc

    def array_decl(self, st: S.ArrayDecl, src: int, ctx: _Ctx) -> int:
        if isinstance(st.size, S.Num):
            if st.size.value <= 0:
                raise CFABuildError(f"array {st.name!r} must have positive size", st.line)
            cells = st.size.value
            size_expr = st.size
        else:
            if not self.capacity:
                raise CFABuildError(f"array size of {st.name!r} is not constant", st.line)
            size_expr, src = self.value(st.size, src, ctx, st.line)
            fits = S.BinOp("<=", size_expr, S.Num(self.capacity))
            self.edge(src, assume(S.negate(fits)), st.line, self.exit)
            src = self.edge(src, assume(fits), st.line)
            cells = self.capacity
        unique = self.declare(ctx, st.name)
        self.arrays[unique] = cells
        return self.edge(src, nop(f"int {unique}[{S.format_expr(size_expr)}];", unique, size_expr), st.line)

    # -- finalisation
    def finish(self, entry: int, inputs: list, program: S.Program, entry_name: str) -> CFA:
        raw = []
        seen = set()
        for src, dst, stmt, line in self.raw_edges:
            key = (self.find(src), stmt.text, self.find(dst))
            if key not in seen:
                seen.add(key)
                raw.append((key[0], key[2], stmt, line))
        entry = self.find(entry)
        error = self.find(self.error)
        succ: dict[int, list] = {}
        for i, (src, dst, _, _) in enumerate(raw):
            succ.setdefault(src, []).append(i)
        # number locations in BFS order from the entry; error sink last
        order, queue, visited = [], deque([entry]), {entry}
        while queue:
            loc = queue.popleft()
            order.append(loc)
            for i in succ.get(loc, []):
                dst = raw[i][1]
                if dst not in visited and dst != error:
                    visited.add(dst)
                    queue.append(dst)
        order.append(error)
        number = {loc: n for n, loc in enumerate(order)}
        edges = {}
        for i, (src, dst, stmt, line) in enumerate(raw):
            if src in number and src != error and dst in number:
                s, d = number[src], number[dst]
                eid = edge_id(s, stmt.text, d)
                edges[eid] = Edge(eid, s, d, stmt, line)
        heads, back = set(), set()
        for head, lo, hi in self.loops:
            h = self.find(head)
            if h not in number:
                continue
            heads.add(number[h])
            for src, dst, stmt, line in self.raw_edges[lo:hi]:
                if self.find(dst) == h and self.find(src) in number:
                    back.add(edge_id(number[self.find(src)], stmt.text, number[h]))
        exit_loc = number.get(self.find(self.exit))
        return CFA(
            locations=list(range(len(order))),
            entry=number[entry],
            error=number[error],
            exit=exit_loc,
            edges=edges,
            inputs=inputs,
            arrays=dict(self.arrays),
            loop_heads=frozenset(heads),
            back_edges=frozenset(back & set(edges)),
            source_hash=source_hash(program.source),
            entry_function=entry_name,
            array_capacity=self.capacity,
        )


def build_cfa(program: S.Program, entry: str = "main", max_inline_depth: int = 16,
              array_capacity: int = 8) -> CFA:
    """Lower ``program`` into a CFA rooted at function ``entry``."""
    fn = program.functions.get(entry)
    if fn is None:
        raise CFABuildError(f"entry function {entry!r} not found")
    b = _Builder(program, max_inline_depth, array_capacity)
    ctx = _Ctx(fn, b.exit, None, 0)
    inputs = []
    for p in fn.params:
        if p.is_array:
            raise CFABuildError(f"entry function parameter {p.name!r} may not be an array", fn.line)
        inputs.append(b.declare(ctx, p.name))
    entry_loc = b.new_loc()
    end = b.block(fn.body.stmts, entry_loc, ctx, new_scope=False)
    if end is not None:
        b.union(end, b.exit)
    return b.finish(entry_loc, inputs, program, entry)


def load_cfa(source: str, entry: str = "main", max_inline_depth: int = 16,
             array_capacity: int = 8) -> CFA:
    return build_cfa(S.parse(source), entry, max_inline_depth, array_capacity)
