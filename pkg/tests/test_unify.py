import random

from hypothesis import given, settings, strategies as st

from setint import oracle
from setint.ast import EMPTY, And, Atom, Interval, Kind, Sort, Var, const, formula_vars, infer_sorts, lin, set_of, term_vars
from setint.engine import answer_formula, answers, check_answer
from setint.lia import EQ, LE, NE, normalize
from setint.unify import (
    Bind, Context, Goal, SortClash, Substitution, apply_term, extend, make_interval, unify_sets,
)

X, Y, A, B = Var("X"), Var("Y"), Var("A"), Var("B")


def fresh_goal():
    return Goal(), Context()


def test_constant_empty_intervals_fold():
    assert make_interval(const(3), const(1)) is EMPTY
    assert make_interval(const(1), const(1)) == Interval(const(1), const(1))
    assert make_interval(Var("K"), const(1)) == Interval(Var("K"), const(1))


def test_substitution_into_integer_terms():
    t = lin(1, {"X": 2, "Y": 1})
    assert apply_term(t, {"X": lin(-1, {"Y": 1})}) == lin(-1, {"Y": 3})
    assert apply_term(Interval(Var("K"), const(2)), {"K": const(5)}) is EMPTY
    try:
        apply_term(t, {"X": EMPTY})
    except SortClash:
        pass
    else:
        raise AssertionError("expected a sort clash")


names = st.sampled_from("PQRS")
terms = st.one_of(st.integers(-3, 3).map(const), names.map(Var),
                  st.tuples(names, names).map(lambda p: set_of([Var(p[0])], Var(p[1]))))


@settings(max_examples=100)
@given(st.lists(st.tuples(names, terms), max_size=5))
def test_substitution_stays_idempotent(pairs):
    s = Substitution()
    for name, t in pairs:
        if name in s or name in _vars(s.apply(t)):
            continue
        s = s.extend(name, t)
    for v in s.bindings.values():
        assert s.apply(v) == v


def _vars(t):
    return term_vars(t)


def test_binding_respects_sorts():
    g, ctx = Goal(), Context(base_sorts={"A": Sort.SET, "N": Sort.INT})
    assert extend(g, [Atom(Kind.SIZE, (A, Var("N")))], ctx)
    assert not g.copy().bind("N", EMPTY, ctx)
    assert g.copy().bind("A", set_of([const(1)]), ctx)


def test_occurs_check_fails_the_branch():
    g, ctx = fresh_goal()
    assert not extend(g, [Bind("A", set_of([A]))], ctx)


def test_solved_equations_become_bindings():
    g, ctx = fresh_goal()
    assert g.add_row(normalize({"X": 1}, -3, LE), ctx)
    assert g.add_row(normalize({"X": -1}, 3, LE), ctx)
    assert g.subst == {"X": const(3)} and not g.ints


def test_contradictory_bounds_fail():
    g, ctx = fresh_goal()
    assert g.add_row(normalize({"X": 1}, -2, LE), ctx)
    assert not g.add_row(normalize({"X": -1}, 3, LE), ctx)


def test_disequality_at_a_bound_tightens_it():
    g, ctx = fresh_goal()
    assert g.add_row(normalize({"X": 1}, -2, LE), ctx)      # X =< 2
    assert g.add_row(normalize({"X": 1}, -2, NE), ctx)      # X neq 2
    assert g.ints == [normalize({"X": 1}, -1, LE)]
    assert g.add_row(normalize({"X": 1}, -7, NE), ctx)      # implied by X =< 1
    assert len(g.ints) == 1


def test_unit_equation_eliminates_a_variable():
    g, ctx = fresh_goal()
    assert g.add_row(normalize({"X": 1, "Y": -1}, -1, EQ), ctx)   # X = Y + 1
    assert len(g.subst) == 1 and not g.ints


def test_sort_clash_on_set_binding_of_integer():
    g, ctx = fresh_goal()
    assert g.add_row(normalize({"X": 1}, 0, LE), ctx)
    assert not g.bind("X", EMPTY, ctx)


def test_unify_sets_branches_keep_bindings():
    g, ctx = fresh_goal()
    out = unify_sets(set_of([X], A), set_of([const(1), const(2)]), g, ctx)
    assert 1 <= len(out) <= 4
    assert all(not o.failed for o in out)


def _solutions(f, names, domain, sorts=None):
    # variables missing from f are unconstrained
    pad = [Atom(Kind.EQ, (Var(n), Var(n))) for n in names if n not in formula_vars(f)]
    return {tuple(s[n] for n in names)
            for s in oracle.iter_solutions(And((f, *pad)), domain, project=names, sorts=sorts)}


def test_set_unification_is_complete_on_small_cases():
    domain = oracle.DomainSpec(int_range=(0, 2), ur_atoms=(), max_card=3)
    cases = [
        Atom(Kind.EQ, (set_of([X, Y]), set_of([const(1), const(2)]))),
        Atom(Kind.EQ, (set_of([const(1)], A), set_of([const(1)]))),
        Atom(Kind.EQ, (set_of([X], A), set_of([Y], A))),
        Atom(Kind.EQ, (set_of([X, const(1)], A), set_of([const(2)], B))),
    ]
    for f in cases:
        names = sorted(formula_vars(f))
        got = list(answers(f))
        assert got and all(check_answer(f, a) for a in got)
        sorts = infer_sorts(f)
        covered = set()
        for a in got:
            covered |= _solutions(answer_formula(a), names, domain, sorts)
        assert covered == _solutions(f, names, domain), f


def test_set_equations_agree_with_oracle():
    domain = oracle.DomainSpec(int_range=(0, 2), ur_atoms=(), max_card=3)
    r = random.Random(5)
    pool = [X, Y, const(0), const(1), const(2)]
    for _ in range(60):
        lhs = set_of(r.sample(pool, r.randint(1, 3)), r.choice([A, EMPTY]))
        rhs = set_of(r.sample(pool, r.randint(1, 3)), r.choice([A, B, EMPTY]))
        f = Atom(Kind.EQ, (lhs, rhs))
        got = list(answers(f))
        assert bool(got) == oracle.satisfiable(f, domain)
        assert all(check_answer(f, a) for a in got)
