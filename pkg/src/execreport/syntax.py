"""MiniC lexer, parser and expression printer.

The accepted language is a small C subset: ``int``/``void`` functions,
scalar ``int`` variables, fixed-size (or capacity-bounded) ``int`` arrays,
``if``/``while``/``for``, ``assert`` and the ``nondet()`` intrinsic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import MiniCSyntaxError, MiniCSemanticError


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Index:
    array: str
    index: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or '!'
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    line: int = field(default=0, compare=False)


Expr = Union[Num, Name, Index, Unary, BinOp, Call]


@dataclass
class Decl:
    name: str
    init: Optional[Expr]
    line: int


@dataclass
class ArrayDecl:
    name: str
    size: Expr
    line: int


@dataclass
class Assign:
    name: str
    expr: Expr
    line: int


@dataclass
class Store:
    name: str
    index: Expr
    expr: Expr
    line: int


@dataclass
class If:
    cond: Expr
    then: "Stmt"
    orelse: Optional["Stmt"]
    line: int


@dataclass
class While:
    cond: Expr
    body: "Stmt"
    line: int


@dataclass
class For:
    init: Optional["Stmt"]
    cond: Optional[Expr]
    step: Optional["Stmt"]
    body: "Stmt"
    line: int


@dataclass
class Assert:
    cond: Expr
    line: int


@dataclass
class Return:
    expr: Optional[Expr]
    line: int


@dataclass
class ExprStmt:
    call: Call
    line: int


@dataclass
class Block:
    stmts: list
    line: int


Stmt = Union[Decl, ArrayDecl, Assign, Store, If, While, For, Assert, Return, ExprStmt, Block]


@dataclass
class Param:
    name: str
    is_array: bool


@dataclass
class FunctionDef:
    name: str
    returns_int: bool
    params: list
    body: Block
    line: int


@dataclass
class Program:
    functions: dict  # name -> FunctionDef, in source order
    source: str = ""

    def function(self, name: str) -> FunctionDef:
        return self.functions[name]


NONDET = "nondet"

# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {"int", "void", "if", "else", "while", "for", "assert", "return"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\+\+|--|\+=|-=|\*=|&&|\|\||==|!=|<=|>=|[-+*/%<>=!(){}\[\];,])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'id', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise MiniCSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "num":
            tokens.append(Token("num", text, line, pos - line_start + 1))
        elif kind == "id":
            tokens.append(Token("kw" if text in KEYWORDS else "id", text, line, pos - line_start + 1))
        elif kind == "op":
            tokens.append(Token("op", text, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_BINARY_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
UNARY_PREC = 7


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise MiniCSyntaxError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "id":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    # -- top level
    def program(self) -> tuple[list, set]:
        functions, prototypes = [], set()
        while self.tok.kind != "eof":
            start = self.tok
            if not (self.at("int") or self.at("void")):
                self.error("expected function definition")
            returns_int = self.tok.text == "int"
            self.i += 1
            name = self.ident()
            self.expect("(")
            params = []
            if not self.at(")"):
                if self.at("void") and self.peek().text == ")":
                    self.i += 1
                else:
                    params.append(self.param())
                    while self.accept(","):
                        params.append(self.param())
            self.expect(")")
            if self.accept(";"):
                prototypes.add(name.text)
                continue
            body = self.block()
            functions.append(FunctionDef(name.text, returns_int, params, body, start.line))
        return functions, prototypes

    def param(self) -> Param:
        self.expect("int")
        name = self.ident().text
        is_array = False
        if self.accept("["):
            self.expect("]")
            is_array = True
        return Param(name, is_array)

    def block(self) -> Block:
        start = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            stmts.append(self.statement())
        self.expect("}")
        return Block(stmts, start.line)

    def statement(self):
        tok = self.tok
        if self.at("{"):
            return self.block()
        if self.at(";"):
            self.i += 1
            return Block([], tok.line)
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.statement()
            orelse = self.statement() if self.accept("else") else None
            return If(cond, then, orelse, tok.line)
        if self.accept("while"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return While(cond, self.statement(), tok.line)
        if self.accept("for"):
            self.expect("(")
            init = None if self.at(";") else self.simple()
            self.expect(";")
            cond = None if self.at(";") else self.expr()
            self.expect(";")
            step = None if self.at(")") else self.simple()
            self.expect(")")
            return For(init, cond, step, self.statement(), tok.line)
        if self.accept("assert"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect(";")
            return Assert(cond, tok.line)
        if self.accept("return"):
            expr = None if self.at(";") else self.expr()
            self.expect(";")
            return Return(expr, tok.line)
        stmt = self.simple()
        self.expect(";")
        return stmt

    def simple(self):
        """Declarations, assignments, increments and call statements."""
        tok = self.tok
        if self.accept("int"):
            name = self.ident().text
            if self.accept("["):
                size = self.expr()
                self.expect("]")
                return ArrayDecl(name, size, tok.line)
            init = self.expr() if self.accept("=") else None
            return Decl(name, init, tok.line)
        if self.at("++") or self.at("--"):
            op = self.tok.text
            self.i += 1
            name = self.ident().text
            return Assign(name, BinOp(op[0], Name(name), Num(1)), tok.line)
        name_tok = self.ident()
        name = name_tok.text
        if self.at("("):
            call = self.call_rest(name_tok)
            return ExprStmt(call, tok.line)
        if self.accept("["):
            index = self.expr()
            self.expect("]")
            self.expect("=")
            return Store(name, index, self.expr(), tok.line)
        if self.at("++") or self.at("--"):
            op = self.tok.text
            self.i += 1
            return Assign(name, BinOp(op[0], Name(name), Num(1)), tok.line)
        for compound in ("+=", "-=", "*="):
            if self.accept(compound):
                return Assign(name, BinOp(compound[0], Name(name), self.expr()), tok.line)
        self.expect("=")
        return Assign(name, self.expr(), tok.line)

    def call_rest(self, name_tok: Token) -> Call:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expr())
            while self.accept(","):
                args.append(self.expr())
        self.expect(")")
        return Call(name_tok.text, tuple(args), name_tok.line)

    # -- expressions (precedence climbing)
    def expr(self, min_prec: int = 1):
        left = self.unary()
        while self.tok.kind == "op" and _BINARY_PREC.get(self.tok.text, 0) >= min_prec:
            op = self.tok.text
            prec = _BINARY_PREC[op]
            self.i += 1
            right = self.expr(prec + 1)
            left = BinOp(op, left, right)
        return left

    def unary(self):
        if self.accept("-"):
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Unary("-", operand)
        if self.accept("!"):
            return Unary("!", self.unary())
        if self.accept("+"):
            return self.unary()
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(int(tok.text))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "id":
            self.i += 1
            if self.at("("):
                return self.call_rest(tok)
            if self.accept("["):
                index = self.expr()
                self.expect("]")
                return Index(tok.text, index)
            return Name(tok.text)
        self.error(f"unexpected token {tok.text or 'end of input'!r}")


def parse_expression(text: str):
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("trailing input after expression")
    return e


def parse(source: str) -> Program:
    """Parse and semantically check MiniC source text."""
    parser = _Parser(source)
    functions, prototypes = parser.program()
    table = {}
    for fn in functions:
        if fn.name in table or fn.name == NONDET:
            raise MiniCSemanticError(f"duplicate declaration of function {fn.name!r}", fn.line)
        table[fn.name] = fn
    for fn in functions:
        _Checker(table).check_function(fn)
    _check_recursion(table)
    return Program(table, source)


# ---------------------------------------------------------------------------
# Semantic checks
# ---------------------------------------------------------------------------

class _Checker:
    def __init__(self, functions: dict):
        self.functions = functions
        self.scopes: list[dict] = []

    def declare(self, name: str, kind: str, line: int):
        if name in self.scopes[-1]:
            raise MiniCSemanticError(f"duplicate declaration of {name!r}", line)
        self.scopes[-1][name] = kind

    def lookup(self, name: str, line: int) -> str:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise MiniCSemanticError(f"unresolved identifier {name!r}", line)

    def check_function(self, fn: FunctionDef):
        self.scopes = [{}]
        for p in fn.params:
            self.declare(p.name, "array" if p.is_array else "scalar", fn.line)
        self.fn = fn
        self.block(fn.body, new_scope=False)

    def block(self, b: Block, new_scope=True):
        if new_scope:
            self.scopes.append({})
        for s in b.stmts:
            self.stmt(s)
        if new_scope:
            self.scopes.pop()

    def stmt(self, s):
        if isinstance(s, Block):
            self.block(s)
        elif isinstance(s, Decl):
            if s.init is not None:
                self.expr(s.init, s.line)
            self.declare(s.name, "scalar", s.line)
        elif isinstance(s, ArrayDecl):
            self.expr(s.size, s.line)
            self.declare(s.name, "array", s.line)
        elif isinstance(s, Assign):
            self.scalar(s.name, s.line)
            self.expr(s.expr, s.line)
        elif isinstance(s, Store):
            self.array(s.name, s.line)
            self.expr(s.index, s.line)
            self.expr(s.expr, s.line)
        elif isinstance(s, If):
            self.expr(s.cond, s.line)
            self.scoped(s.then)
            if s.orelse is not None:
                self.scoped(s.orelse)
        elif isinstance(s, While):
            self.expr(s.cond, s.line)
            self.scoped(s.body)
        elif isinstance(s, For):
            self.scopes.append({})
            if s.init is not None:
                self.stmt(s.init)
            if s.cond is not None:
                self.expr(s.cond, s.line)
            if s.step is not None:
                self.stmt(s.step)
            self.scoped(s.body)
            self.scopes.pop()
        elif isinstance(s, Assert):
            self.expr(s.cond, s.line)
        elif isinstance(s, Return):
            if s.expr is not None:
                if not self.fn.returns_int:
                    raise MiniCSemanticError(f"void function {self.fn.name!r} returns a value", s.line)
                self.expr(s.expr, s.line)
            elif self.fn.returns_int:
                raise MiniCSemanticError(f"function {self.fn.name!r} must return a value", s.line)
        elif isinstance(s, ExprStmt):
            self.call(s.call, s.line, want_value=False)

    def scoped(self, s):
        self.scopes.append({})
        self.stmt(s)
        self.scopes.pop()

    def scalar(self, name, line):
        if self.lookup(name, line) != "scalar":
            raise MiniCSemanticError(f"{name!r} is an array, not a scalar", line)

    def array(self, name, line):
        if self.lookup(name, line) != "array":
            raise MiniCSemanticError(f"{name!r} is not an array", line)

    def call(self, c: Call, line: int, want_value: bool):
        if c.func == NONDET:
            if c.args:
                raise MiniCSemanticError("nondet() takes no arguments", line)
            return
        fn = self.functions.get(c.func)
        if fn is None:
            raise MiniCSemanticError(f"unresolved identifier {c.func!r}", line)
        if want_value and not fn.returns_int:
            raise MiniCSemanticError(f"void function {c.func!r} used as a value", line)
        if len(c.args) != len(fn.params):
            raise MiniCSemanticError(f"{c.func!r} expects {len(fn.params)} arguments", line)
        for arg, p in zip(c.args, fn.params):
            if p.is_array:
                if not isinstance(arg, Name):
                    raise MiniCSemanticError(f"array argument expected for {p.name!r}", line)
                self.array(arg.id, line)
            else:
                self.expr(arg, line)

    def expr(self, e, line):
        if isinstance(e, Num):
            return
        if isinstance(e, Name):
            self.scalar(e.id, line)
        elif isinstance(e, Index):
            self.array(e.array, line)
            self.expr(e.index, line)
        elif isinstance(e, Unary):
            self.expr(e.operand, line)
        elif isinstance(e, BinOp):
            self.expr(e.left, line)
            self.expr(e.right, line)
        elif isinstance(e, Call):
            self.call(e, line, want_value=True)


def calls_in(node) -> set:
    """Names of all functions called (transitively through the AST) from ``node``."""
    found = set()

    def walk(n):
        if isinstance(n, Call):
            if n.func != NONDET:
                found.add(n.func)
            for a in n.args:
                walk(a)
        elif isinstance(n, (list, tuple)):
            for x in n:
                walk(x)
        elif hasattr(n, "__dataclass_fields__"):
            for name in n.__dataclass_fields__:
                walk(getattr(n, name))

    walk(node)
    return found


def _check_recursion(functions: dict):
    graph = {name: calls_in(fn.body) for name, fn in functions.items()}
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(graph, WHITE)

    def visit(u, stack):
        color[u] = GREY
        for v in sorted(graph[u]):
            if color[v] == GREY:
                cycle = stack[stack.index(v):] + [v] if v in stack else [u, v]
                raise MiniCSemanticError(
                    "recursion detected: " + " -> ".join(cycle), functions[u].line)
            if color[v] == WHITE:
                visit(v, stack + [v])
        color[u] = BLACK

    for name in graph:
        if color[name] == WHITE:
            visit(name, [name])


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def expr_prec(e) -> int:
    if isinstance(e, BinOp):
        return _BINARY_PREC[e.op]
    if isinstance(e, Unary):
        return UNARY_PREC
    return 8


def format_expr(e) -> str:
    """Render an expression with the minimal parentheses needed to re-parse it."""
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Index):
        return f"{e.array}[{format_expr(e.index)}]"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Unary):
        inner = format_expr(e.operand)
        if isinstance(e.operand, (BinOp, Unary)) or (isinstance(e.operand, Num) and e.operand.value < 0):
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, BinOp):
        p = _BINARY_PREC[e.op]
        left, right = format_expr(e.left), format_expr(e.right)
        if expr_prec(e.left) < p:
            left = f"({left})"
        if expr_prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def negate(e):
    """Logical negation, printed as ``!(...)``; double negation is not simplified."""
    return Unary("!", e)
