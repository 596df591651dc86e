import random

import pytest

import gen
from setint import stdlib
from setint.ast import Atom, Kind, Var, formula_vars, show_formula
from setint.parser import (
    ArityMismatch, ParseError, RecursiveDefinition, RestrictionError, UnknownPredicate, expand, parse,
    parse_formula,
)


def test_rendered_formulas_parse_back():
    r = random.Random(3)
    for _ in range(300):
        f = gen.formula(r)
        text = show_formula(f)
        assert show_formula(parse_formula(text, prelude=False)) == text


def test_atom_shapes():
    f = parse_formula("X in int(1,K) & size(A,M)", prelude=False)
    assert [a.kind for a in f.items] == [Kind.IN, Kind.SIZE]
    [g] = [parse_formula("{1,2/A} = B", prelude=False)]
    assert isinstance(g, Atom) and g.kind == Kind.EQ


@pytest.mark.parametrize("text, line, col", [
    ("X in int(1,", 1, 12),
    ("X in {1,2\n & Y = 3", 2, 2),
    ("X ?? Y", 1, 3),
])
def test_syntax_errors_carry_positions(text, line, col):
    with pytest.raises(ParseError) as exc:
        parse_formula(text, prelude=False)
    assert exc.value.lineno == line and exc.value.offset == col


@pytest.mark.parametrize("text", ["X in int(1,K+1)", "size(A,M*2)", "size(A,M+1)", "X in int(K-1,3)"])
def test_compound_limits_are_rejected(text):
    with pytest.raises(RestrictionError):
        parse_formula(text, prelude=False)


def test_recursive_definitions_are_rejected():
    with pytest.raises(RecursiveDefinition):
        parse("p(X) :- q(X).\nq(X) :- X = 1 or p(X).\n?- p(1).")


def test_unknown_predicate_and_arity():
    with pytest.raises(UnknownPredicate):
        parse_formula("nosuch(X)", prelude=False)
    with pytest.raises(ArityMismatch):
        parse_formula("smin(A)")


def test_builtins_cannot_be_redefined():
    with pytest.raises(ParseError):
        parse("un(A,B,C) :- A = B.")


def test_expansion_renames_locals_apart():
    prog = parse("two(S) :- X in S & Y in S & X neq Y.\n?- two(A) & two(B).")
    f = expand(prog)
    names = formula_vars(f)
    assert {"A", "B"} <= names
    locals_ = sorted(n for n in names if n.startswith("_"))
    assert len(locals_) == 4 and "X" not in names and "Y" not in names


def test_underscore_is_fresh_each_time():
    f = parse_formula("X in {_,_}", prelude=False)
    elems = [n for n in formula_vars(f) if n != "X"]
    assert len(elems) == 2


def test_query_may_follow_definitions_without_marker():
    prog = parse("one(S) :- size(S,1).\none(A)")
    assert prog.query is not None
    assert expand(prog) == Atom(Kind.SIZE, (Var("A"), parse_formula("size(A,1)", prelude=False).args[1]))


def test_expect_entries():
    prog = parse("EXPECT sat a: X in {1}.\nEXPECT unsat b: X in {}.\nEXPECT theorem c: X neq X.")
    assert [(c.name, c.expect) for c in prog.checks] == [("a", "sat"), ("b", "unsat"), ("c", "theorem")]
    with pytest.raises(ParseError):
        parse("EXPECT maybe d: X = 1.")


def test_consult_uses_shipped_files():
    prog = parse(":- consult(prelude).\n?- smin({3,1},M).", stdlib.load)
    assert ("smin", 2) in prog.lookup()
    with pytest.raises(FileNotFoundError):
        parse(":- consult(nothing_here).", stdlib.load)


def test_consult_prefers_sibling_files(tmp_path):
    from setint.parser import file_loader
    (tmp_path / "mine.slog").write_text("pos(X) :- 0 < X.\n")
    prog = parse(":- consult(mine).\n?- pos(3).", file_loader(tmp_path))
    assert show_formula(expand(prog)) == "0 < 3"


def test_arithmetic_on_is():
    f = parse_formula("Y is 2*X - 3", prelude=False)
    assert f.kind == Kind.INT_EQ
