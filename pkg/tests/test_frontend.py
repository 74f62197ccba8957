import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_by_texts, source
from execreport import syntax as S
from execreport.cfa import ASSUME, NOP, load_cfa, parse_statement
from execreport.errors import CFABuildError, MiniCSemanticError, MiniCSyntaxError


def test_parse_fig1_functions():
    prog = S.parse(source("fig1"))
    assert set(prog.functions) == {"min", "init_vector", "test_min"}


@pytest.mark.parametrize("text, err", [
    ("int main() { int x = ; }", MiniCSyntaxError),
    ("int main() { y = 1; return 0; }", MiniCSemanticError),
    ("int main() { int x; int x; return 0; }", MiniCSemanticError),
    ("int f(int n) { return f(n); } int main() { return f(1); }", MiniCSemanticError),
    ("void g() { } int main() { int x = g(); return 0; }", MiniCSemanticError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        S.parse(text)


def test_error_positions_are_reported():
    with pytest.raises(MiniCSyntaxError) as info:
        S.parse("int main() {\n  int x = ;\n}")
    assert info.value.line == 2


def test_fig1_cfa_shape(fig1):
    assert fig1.inputs == ["large"]
    assert fig1.arrays == {"a": 8}
    assert len(fig1.loop_heads) == 2 and len(fig1.back_edges) == 2
    assert not fig1.outgoing(fig1.error)
    # every branching location has complementary assume edges
    for loc in fig1.locations:
        out = fig1.outgoing(loc)
        if len(out) > 1:
            assert all(e.stmt.kind == ASSUME for e in out)


def test_fig1_else_branch_path(fig1):
    path = path_by_texts(fig1, ["int n;", "assume(!large);", "n = 1;"])
    assert [fig1.edges[e].line for e in path] == [18, 19, 22]


def test_implicit_checks_lead_to_error(fig1):
    into_error = {e.text for e in fig1.edges.values() if e.target == fig1.error}
    assert "assume(!(min_elem <= a[0]));" in into_error
    assert "assume(!(i < 8));" in into_error


def test_unknown_entry():
    with pytest.raises(CFABuildError):
        load_cfa("int main() { return 0; }", entry="nope")


def test_inline_depth_limit():
    src = "int f(int x) { return x + 1; } int g(int x) { return f(x); } int main() { return g(1); }"
    load_cfa(src, max_inline_depth=2)
    with pytest.raises(CFABuildError):
        load_cfa(src, max_inline_depth=1)


def test_edge_ids_stable_across_builds():
    a = load_cfa(source("fig1"), entry="test_min")
    b = load_cfa(source("fig1"), entry="test_min")
    assert a.manifest() == b.manifest()


def test_statement_text_round_trip(fig1):
    for e in fig1.edges.values():
        if e.stmt.kind == NOP:
            continue
        assert parse_statement(e.text) == e.stmt


_atoms = st.one_of(st.integers(-5, 5).map(S.Num), st.sampled_from("xyz").map(S.Name))


def _exprs():
    return st.recursive(
        _atoms,
        lambda inner: st.one_of(
            st.tuples(st.sampled_from(["+", "-", "*", "/", "%", "<", "<=", "==", "!=", "&&", "||"]),
                      inner, inner).map(lambda t: S.BinOp(*t)),
            st.tuples(st.sampled_from(["!", "-"]), inner).map(lambda t: S.Unary(*t)),
        ),
        max_leaves=8,
    )


def _canon(e):
    # the parser folds -<literal> into a negative literal
    if isinstance(e, S.Unary):
        inner = _canon(e.operand)
        if e.op == "-" and isinstance(inner, S.Num):
            return S.Num(-inner.value)
        return S.Unary(e.op, inner)
    if isinstance(e, S.BinOp):
        return S.BinOp(e.op, _canon(e.left), _canon(e.right))
    return e


@settings(max_examples=300, deadline=None)
@given(_exprs())
def test_format_parse_round_trip(e):
    assert S.parse_expression(S.format_expr(e)) == _canon(e)
