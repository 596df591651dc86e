"""Rewrite rules for set, interval and cardinality constraints.

Each atom kind has a handler that either returns ``None`` (the atom is in
irreducible form) or a :class:`Rule` whose ``make`` thunk produces the list of
branches.  A branch is a list of items understood by :func:`unify.extend`:
atoms, bindings, pending choices and memo entries.  ``[]`` as the branch list
means the atom is false; ``[[]]`` means it is simply true.

Scheduling differs from plain left-to-right: the first deterministic rule is
taken when one exists, otherwise the applicable rule with the fewest branches.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Iterator

from .ast import (
    EMPTY, FALSE, TRUE, And, App, Atom, Cons, IntTerm, Interval, Kind, Or, Sort, Term, Var,
    int_const, plus, set_of, split_set, sub, term_vars,
)
from .unify import (
    Bind, Choice, Context, Goal, MemoEntry, ResourceLimit, eq_set_branches, extend,
    make_interval, occurs,
)


@dataclass(slots=True)
class Rule:
    name: str
    rank: int
    make: Callable[[], list]


def _fail(name: str) -> Rule:
    return Rule(name, 0, list)


def _true(name: str) -> Rule:
    return Rule(name, 0, lambda: [[]])


def _det(name: str, *items) -> Rule:
    return Rule(name, 0, lambda: [list(items)])


def _a(kind: Kind, *args) -> Atom:
    return Atom(kind, args)


def le(a: Term, b: Term) -> Atom:
    return Atom(Kind.INT_LEQ, (a, b))


def lt(a: Term, b: Term) -> Atom:
    return Atom(Kind.INT_LT, (a, b))


def ieq(a: Term, b: Term) -> Atom:
    return Atom(Kind.INT_EQ, (a, b))


def ine(a: Term, b: Term) -> Atom:
    return Atom(Kind.INT_NEQ, (a, b))


def eq(a: Term, b: Term) -> Atom:
    return Atom(Kind.EQ, (a, b))


def width(iv: Interval) -> Term:
    return plus(sub(iv.hi, iv.lo), 1)


# ---------------------------------------------------------------- ground evaluation

class _TooBig(Exception):
    pass


def _gval(t: Term, limit: int):
    """Python value of a ground term: int, tuple for ur-terms, frozenset for sets."""
    if isinstance(t, IntTerm):
        if t.coeffs:
            raise ValueError("not ground")
        return t.const
    if isinstance(t, App):
        return (t.functor,) + tuple(_gval(a, limit) for a in t.args)
    if t is EMPTY:
        return frozenset()
    if isinstance(t, Cons):
        elems, tail = split_set(t)
        base = _gval(tail, limit)
        return base | frozenset(_gval(e, limit) for e in elems)
    if isinstance(t, Interval):
        lo, hi = _gval(t.lo, limit), _gval(t.hi, limit)
        if hi - lo + 1 > limit:
            raise _TooBig
        return frozenset(range(lo, hi + 1))
    raise ValueError("not ground")


def _ground_truth(a: Atom, limit: int) -> bool | None:
    """Decide a ground atom directly; None when an interval is too wide."""
    try:
        v = [_gval(t, limit) for t in a.args]
    except _TooBig:
        return None
    k = a.kind
    isset = [isinstance(x, frozenset) for x in v]
    if k is Kind.EQ:
        return v[0] == v[1]
    if k is Kind.NEQ:
        return v[0] != v[1]
    if k is Kind.NINTEGER:
        return not isinstance(v[0], int)
    if k in (Kind.IN, Kind.NIN):
        if not isset[1]:
            return False
        return (v[0] in v[1]) == (k is Kind.IN)
    if not all(isset[: {Kind.SIZE: 1, Kind.NSIZE: 1}.get(k, len(v))]):
        return False
    if k is Kind.UN:
        return v[0] | v[1] == v[2]
    if k is Kind.NUN:
        return v[0] | v[1] != v[2]
    if k is Kind.DISJ:
        return not (v[0] & v[1])
    if k is Kind.NDISJ:
        return bool(v[0] & v[1])
    if k is Kind.SIZE:
        return isinstance(v[1], int) and len(v[0]) == v[1]
    if k is Kind.NSIZE:
        return isinstance(v[1], int) and len(v[0]) != v[1]
    if k is Kind.SUBSET:
        return v[0] <= v[1]
    if k is Kind.INTERS:
        return v[0] & v[1] == v[2]
    if k is Kind.NINTERS:
        return v[0] & v[1] != v[2]
    if k is Kind.DIFF:
        return v[0] - v[1] == v[2]
    if k is Kind.NDIFF:
        return v[0] - v[1] != v[2]
    raise ValueError(k)


def _is_ground(a: Atom) -> bool:
    for t in a.args:
        if term_vars(t):
            return False
    return True


# ---------------------------------------------------------------- helpers on goals

class _Env:
    """Bundle of goal, context and the helpers every handler needs."""

    __slots__ = ("g", "c", "memo_local")

    def __init__(self, g: Goal, c: Context):
        self.g, self.c = g, c
        self.memo_local: dict = {}

    def sort(self, t: Term) -> Sort | None:
        return self.g.sort(t, self.c)

    def setlike(self, t: Term) -> bool:
        return self.sort(t) in (Sort.SET, None)

    def intlike(self, t: Term) -> bool:
        return isinstance(t, IntTerm) or (isinstance(t, Var) and self.sort(t) in (Sort.INT, None))

    def known_int(self, t: Term) -> bool:
        return isinstance(t, IntTerm) or (isinstance(t, Var) and self.sort(t) is Sort.INT)

    def fresh_set(self) -> Var:
        return self.c.fresh("N", Sort.SET)

    def fresh_int(self) -> Var:
        return self.c.fresh("N", Sort.INT)

    def fresh_any(self) -> Var:
        return self.c.fresh("n", None)

    def intern(self, iv: Interval) -> tuple[Term, list]:
        """Variable standing for ``iv`` plus the items defining it.

        The memo table of the goal is consulted first, so one interval
        rewritten twice on a branch maps to one variable.
        """
        key = (iv.lo, iv.hi)
        name = self.g.memo.get(key) or self.memo_local.get(key)
        if name is not None:
            return self.g.subst.get(name, Var(name)), []
        n = self.fresh_set()
        self.memo_local[key] = n.name
        return n, [MemoEntry(key, n.name), _a(Kind.SUBSET, n, iv), _a(Kind.SIZE, n, width(iv))]

    def eager(self, t: Term) -> Term | None:
        """Extensional form of a small constant interval, else None."""
        if not isinstance(t, Interval):
            return None
        lo, hi = int_const(t.lo), int_const(t.hi)
        if lo is None or hi is None or hi - lo + 1 > self.c.options.eager_width:
            return None
        return set_of([IntTerm(v, ()) for v in range(lo, hi + 1)])


def _var_or_ext(t: Term) -> bool:
    return isinstance(t, (Var, Cons))


# ---------------------------------------------------------------- = and !=

def _r_eq(a: Atom, e: _Env) -> Rule | None:
    x, t = a.args
    if x == t:
        return _true("eq:refl")
    if isinstance(t, Var) and not isinstance(x, Var):
        x, t = t, x
    if isinstance(x, Var):
        sx, st = e.sort(x), e.sort(t)
        if sx is not None and st is not None and sx is not st:
            return _fail("eq:sort")
        if isinstance(t, IntTerm) and (sx is Sort.INT or occurs(x.name, t)):
            return _det("eq:int", ieq(x, t))
        if isinstance(t, Var):
            return _det("eq:var", Bind(x.name, t))
        if occurs(x.name, t):
            if isinstance(t, Cons):
                elems, tail = split_set(t)
                if tail == x and not any(occurs(x.name, el) for el in elems):
                    n = e.fresh_set()
                    return _det("eq:tail", Bind(x.name, set_of(elems, n)))
            return _fail("eq:occurs")
        return _det("eq:bind", Bind(x.name, t))
    sx, st = e.sort(x), e.sort(t)
    if sx is not st:
        return _fail("eq:sort")
    if sx is Sort.INT:
        return _det("eq:int", ieq(x, t))
    if sx is Sort.UR:
        if x.functor != t.functor or len(x.args) != len(t.args):
            return _fail("eq:functor")
        return _det("eq:args", *[eq(p, q) for p, q in zip(x.args, t.args)])
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("eq:ground") if r else _fail("eq:ground")
    if isinstance(t, Interval) and not isinstance(x, Interval):
        x, t = t, x
    if isinstance(x, Interval):
        k, m = x.lo, x.hi
        if t is EMPTY:
            return _det("eq:e", lt(m, k))
        if isinstance(t, Interval):
            i, j = t.lo, t.hi
            return Rule("eq:int", 2, lambda: [
                [le(k, m), le(i, j), ieq(k, i), ieq(m, j)],
                [lt(m, k), lt(j, i)],
            ])
        return _det("e:ext", _a(Kind.SUBSET, t, x), _a(Kind.SIZE, t, width(x)))
    return Rule("eq:ext", 4, lambda: eq_set_branches(x, t, e.c.fresh))


def _r_neq(a: Atom, e: _Env) -> Rule | None:
    x, t = a.args
    if x == t:
        return _fail("neq:refl")
    if isinstance(t, Var) and not isinstance(x, Var):
        x, t = t, x
    sx, st = e.sort(x), e.sort(t)
    if sx is not None and st is not None and sx is not st:
        return _true("neq:sort")
    if isinstance(x, Var):
        if e.known_int(x) and e.known_int(t):
            return _det("neq:int", ine(x, t))
        if occurs(x.name, t):
            if isinstance(t, Cons):
                elems, tail = split_set(t)
                if tail == x and not any(occurs(x.name, el) for el in elems):
                    return Rule("neq:tail", len(elems), lambda: [[_a(Kind.NIN, el, x)] for el in elems])
                return _true("neq:occurs")
            if isinstance(t, App):
                return _true("neq:occurs")
            if isinstance(t, IntTerm):
                return _det("neq:int", ine(x, t))
        return None
    if sx is Sort.INT:
        return _det("neq:int", ine(x, t))
    if sx is Sort.UR:
        if x.functor != t.functor or len(x.args) != len(t.args):
            return _true("neq:functor")
        return Rule("neq:args", len(x.args), lambda: [[_a(Kind.NEQ, p, q)] for p, q in zip(x.args, t.args)])
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("neq:ground") if r else _fail("neq:ground")
    if isinstance(t, Interval) and not isinstance(x, Interval):
        x, t = t, x
    if isinstance(x, Interval):
        k, m = x.lo, x.hi
        if t is EMPTY:
            return _det("neq:e", le(k, m))
        if isinstance(t, Interval):
            i, j = t.lo, t.hi
            return Rule("neq:int", 6, lambda: [
                [le(k, m), ine(m, j)], [le(k, m), lt(j, i)], [le(k, m), ine(k, i)],
                [le(i, j), ine(m, j)], [le(i, j), lt(m, k)], [le(i, j), ine(k, i)],
            ])
        n = e.fresh_any()
        return Rule("neq:ext", 2, lambda: [
            [_a(Kind.IN, n, x), _a(Kind.NIN, n, t)],
            [_a(Kind.NIN, n, x), _a(Kind.IN, n, t)],
        ])
    if x is EMPTY or t is EMPTY:
        return _true("neq:e")
    n = e.fresh_any()
    return Rule("neq:ext", 2, lambda: [
        [_a(Kind.IN, n, x), _a(Kind.NIN, n, t)],
        [_a(Kind.IN, n, t), _a(Kind.NIN, n, x)],
    ])


# ---------------------------------------------------------------- membership

def _r_in(a: Atom, e: _Env) -> Rule | None:
    x, s = a.args
    if not e.setlike(s):
        return _fail("in:sort")
    if s is EMPTY:
        return _fail("in:e")
    if isinstance(s, Var):
        if occurs(s.name, x):
            return _fail("in:occurs")
        n = e.fresh_set()
        return _det("in:var", Bind(s.name, Cons(x, n)))
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("in:ground") if r else _fail("in:ground")
    if isinstance(s, Interval):
        if not e.intlike(x):
            return _fail("in:int")
        return _det("in", le(s.lo, x), le(x, s.hi))
    elems, tail = split_set(s)

    def make():
        out = [[eq(x, el)] for el in elems]
        if tail is not EMPTY:
            out.append([_a(Kind.IN, x, tail)])
        return out
    return Rule("in:ext", len(elems) + (tail is not EMPTY), make)


def _r_nin(a: Atom, e: _Env) -> Rule | None:
    x, s = a.args
    if not e.setlike(s):
        return _fail("nin:sort")
    if s is EMPTY:
        return _true("nin:e")
    if isinstance(s, Var):
        if occurs(s.name, x):
            return _true("nin:occurs")
        return None
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("nin:ground") if r else _fail("nin:ground")
    if isinstance(s, Interval):
        k, m = s.lo, s.hi
        if e.known_int(x):
            return Rule("nin", 2, lambda: [[lt(x, k)], [lt(m, x)]])
        if not e.intlike(x):
            return _true("nin:nonint")
        return Rule("nin", 3, lambda: [[_a(Kind.NINTEGER, x)], [lt(x, k)], [lt(m, x)]])
    elems, tail = split_set(s)
    items = [_a(Kind.NEQ, x, el) for el in elems]
    if tail is not EMPTY:
        items.append(_a(Kind.NIN, x, tail))
    return _det("nin:ext", *items)


def _r_ninteger(a: Atom, e: _Env) -> Rule | None:
    (x,) = a.args
    if isinstance(x, IntTerm):
        return _fail("ninteger")
    if isinstance(x, Var):
        s = e.sort(x)
        if s is None:
            return None
        return _fail("ninteger") if s is Sort.INT else _true("ninteger")
    return _true("ninteger")


# ---------------------------------------------------------------- union

def _r_un(a: Atom, e: _Env) -> Rule | None:
    A, B, C = a.args
    if not (e.setlike(A) and e.setlike(B) and e.setlike(C)):
        return _fail("un:sort")
    if A == B:
        return _det("un:idem", eq(A, C))
    if A is EMPTY:
        return _det("un:e1", eq(B, C))
    if B is EMPTY:
        return _det("un:e2", eq(A, C))
    if C is EMPTY:
        return _det("un:e3", eq(A, EMPTY), eq(B, EMPTY))
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("un:ground") if r else _fail("un:ground")
    ia, ib, ic = (isinstance(t, Interval) for t in (A, B, C))
    if ia or ib or ic:
        if ia and ib and ic:
            return _un123(A, B, C)
        subset_form = (ia and A == C) or (ib and B == C)
        if not subset_form:
            ea, eb, ec = e.eager(A), e.eager(B), e.eager(C)
            if ea is not None or eb is not None or ec is not None:
                return _det("un:eager", _a(Kind.UN, ea if ea is not None else A,
                                           eb if eb is not None else B,
                                           ec if ec is not None else C))
        if ia and ib:
            return _un12(A, B, C, e)
        if ia and ic:
            return _un13(A, B, C, e, first=True)
        if ib and ic:
            return _un13(B, A, C, e, first=False)
        if ic:
            return _un3(A, B, C, e)
        if ia:
            return _un1(A, B, C, e, first=True)
        return _un1(B, A, C, e, first=False)
    if isinstance(A, Cons):
        return _un_ext1(A, B, C, e, first=True)
    if isinstance(B, Cons):
        return _un_ext1(B, A, C, e, first=False)
    if isinstance(C, Cons):
        return _un_ext2(A, B, C, e)
    return None


def _minus(S: Term, x: Term, e: _Env, member: bool) -> list[tuple[list, Term]] | None:
    """Branches describing ``N = S \\ {x}``, each as ``(items, N)``.

    Each element of ``S`` is either equal to ``x`` (and dropped) or different
    (and kept).  With ``member`` the branches also force ``x in S``.  Only
    extensional sets over a variable or empty tail are handled; other forms
    return None.
    """
    elems, tail = split_set(S)
    if not (tail is EMPTY or isinstance(tail, Var)):
        return None
    partial: list[tuple[list, list, bool]] = [([], [], False)]
    xg = not term_vars(x)
    for s in elems:
        known = True if s == x else None
        if known is None and xg and not term_vars(s):
            known = _ground_truth(eq(s, x), e.c.options.eager_width)
        nxt = []
        for items, kept, hit in partial:
            if known is True:
                nxt.append((items, kept, True))
            elif known is False:
                nxt.append((items, kept + [s], hit))
            else:
                nxt.append((items + [eq(s, x)], kept, True))
                nxt.append((items + [_a(Kind.NEQ, s, x)], kept + [s], hit))
        partial = nxt
    out = []
    for items, kept, hit in partial:
        if tail is EMPTY:
            if hit or not member:
                out.append((items, set_of(kept)))
            continue
        if hit or not member:
            out.append((items + [_a(Kind.NIN, x, tail)], set_of(kept, tail)))
        t2 = e.fresh_set()
        out.append((items + [eq(tail, Cons(x, t2)), _a(Kind.NIN, x, t2)], set_of(kept, t2)))
    return out


def _remove(S: Term, x: Term, e: _Env, member: bool) -> list[tuple[list, Term]]:
    """Like :func:`_minus` but falls back to ``S = {x / N} & x nin N``."""
    if S is EMPTY:
        return [] if member else [([], EMPTY)]
    if isinstance(S, Cons):
        r = _minus(S, x, e, member)
        if r is not None:
            return r
    n = e.fresh_set()
    if not member:
        # x nin S, or S = {x / N} with x nin N
        return [([_a(Kind.NIN, x, S)], S), ([eq(S, Cons(x, n)), _a(Kind.NIN, x, n)], n)]
    return [([eq(S, Cons(x, n)), _a(Kind.NIN, x, n)], n)]


def _un_ext1(S: Cons, A: Term, B: Term, e: _Env, first: bool) -> Rule:
    """``un({x / C}, A, B)`` (or with the extensional set second).

    Reads as: ``x`` is in ``B``, and with ``C' = C \\ {x}``, ``A' = A \\ {x}``
    and ``B' = B \\ {x}`` we get ``un(C', A', B')``.
    """
    x, Cr = S.elem, S.rest

    def u(p, q, r):
        return _a(Kind.UN, p, q, r) if first else _a(Kind.UN, q, p, r)

    def make():
        out = []
        for ib, nb in _remove(B, x, e, member=True):
            for ic, nc in _remove(Cr, x, e, member=False):
                for ia, na in _remove(A, x, e, member=False):
                    out.append(ib + ic + ia + [u(nc, na, nb)])
        return out
    # rank estimate only matters for scheduling
    return Rule("un:ext1", 2, make)


def _un_ext2(A: Term, B: Term, C: Cons, e: _Env) -> Rule:
    """``un(A, B, {x / D})`` with ``A`` and ``B`` not extensional."""
    x, D = C.elem, C.rest

    def make():
        out = []
        for id_, n in _remove(D, x, e, member=False):
            n1, n2 = e.fresh_set(), e.fresh_set()
            out += [
                id_ + [eq(A, Cons(x, n1)), _a(Kind.NIN, x, n1), _a(Kind.NIN, x, B), _a(Kind.UN, n1, B, n)],
                id_ + [eq(B, Cons(x, n1)), _a(Kind.NIN, x, n1), _a(Kind.NIN, x, A), _a(Kind.UN, A, n1, n)],
                id_ + [eq(A, Cons(x, n1)), _a(Kind.NIN, x, n1), eq(B, Cons(x, n2)), _a(Kind.NIN, x, n2),
                       _a(Kind.UN, n1, n2, n)],
            ]
        return out
    return Rule("un:ext2", 3, make)


def _un3(A: Term, B: Term, C: Interval, e: _Env) -> Rule:
    k, m = C.lo, C.hi

    def make():
        n, items = e.intern(C)
        return [
            [lt(m, k), eq(A, EMPTY), eq(B, EMPTY)],
            [le(k, m), *items, _a(Kind.UN, A, B, n)],
        ]
    return Rule("un:3", 2, make)


def _un12(I1: Interval, I2: Interval, A: Term, e: _Env) -> Rule:
    k, m, i, j = I1.lo, I1.hi, I2.lo, I2.hi

    def make():
        n1, it1 = e.intern(I1)
        n2, it2 = e.intern(I2)
        return [
            [lt(m, k), lt(j, i), eq(A, EMPTY)],
            [lt(m, k), le(i, j), eq(I2, A)],
            [le(k, m), lt(j, i), eq(I1, A)],
            [le(k, m), le(i, j), *it1, *it2, _a(Kind.UN, n1, n2, A)],
        ]
    return Rule("un:12", 4, make)


def _un123(I1: Interval, I2: Interval, I3: Interval) -> Rule:
    k, m, i, j, p, q = I1.lo, I1.hi, I2.lo, I2.hi, I3.lo, I3.hi
    ne = [le(k, m), le(i, j)]
    return Rule("un:123", 6, lambda: [
        [lt(m, k), eq(I2, I3)],
        [lt(j, i), eq(I1, I3)],
        ne + [le(k, i), le(i, plus(m, 1)), le(m, j), ieq(p, k), ieq(q, j)],
        ne + [le(k, i), le(i, plus(m, 1)), lt(j, m), ieq(p, k), ieq(q, m)],
        ne + [lt(i, k), le(k, plus(j, 1)), le(m, j), ieq(p, i), ieq(q, j)],
        ne + [lt(i, k), le(k, plus(j, 1)), lt(j, m), ieq(p, i), ieq(q, m)],
    ])


def _un1(I: Interval, A: Term, B: Term, e: _Env, first: bool) -> Rule:
    k, m = I.lo, I.hi

    def make():
        n, items = e.intern(I)
        u = _a(Kind.UN, n, A, B) if first else _a(Kind.UN, A, n, B)
        return [[lt(m, k), eq(A, B)], [le(k, m), *items, u]]
    return Rule("un:1", 2, make)


def _un13(I: Interval, A: Term, J: Interval, e: _Env, first: bool) -> Rule:
    k, m, i, j = I.lo, I.hi, J.lo, J.hi

    def make():
        n1, it1 = e.intern(I)
        n2, it2 = e.intern(J)
        u = _a(Kind.UN, n1, A, n2) if first else _a(Kind.UN, A, n1, n2)
        return [
            [lt(j, i), eq(I, EMPTY), eq(A, EMPTY)],
            [le(i, j), lt(m, k), eq(A, J)],
            [le(k, m), le(i, j), *it1, *it2, u],
        ]
    return Rule("un:13", 3, make)


def _r_nun(a: Atom, e: _Env) -> Rule | None:
    A, B, C = a.args
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("nun:ground") if r else _fail("nun:ground")
    n = e.fresh_any()
    return Rule("nun", 3, lambda: [
        [_a(Kind.IN, n, C), _a(Kind.NIN, n, A), _a(Kind.NIN, n, B)],
        [_a(Kind.IN, n, A), _a(Kind.NIN, n, C)],
        [_a(Kind.IN, n, B), _a(Kind.NIN, n, C)],
    ])


def _r_subset(a: Atom, e: _Env) -> Rule | None:
    A, B = a.args
    if not (e.setlike(A) and e.setlike(B)):
        return _fail("subset:sort")
    if A is EMPTY or A == B:
        return _true("subset:e")
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("subset:ground") if r else _fail("subset:ground")
    if isinstance(B, Interval):
        if isinstance(A, Var):
            return None
        if isinstance(A, Cons):
            elems, tail = split_set(A)
            items = []
            for y in elems:
                items += [le(B.lo, y), le(y, B.hi)]
            if tail is not EMPTY:
                items.append(_a(Kind.SUBSET, tail, B))
            return _det("un:subsetext", *items)
    return _det("subset", _a(Kind.UN, A, B, B))


# ---------------------------------------------------------------- disjointness

def _r_disj(a: Atom, e: _Env) -> Rule | None:
    A, B = a.args
    if not (e.setlike(A) and e.setlike(B)):
        return _fail("disj:sort")
    if A is EMPTY or B is EMPTY:
        return _true("disj:e")
    if A == B:
        return _det("disj:self", eq(A, EMPTY))
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("disj:ground") if r else _fail("disj:ground")
    if isinstance(A, Interval) and isinstance(B, Interval):
        k, m, i, j = A.lo, A.hi, B.lo, B.hi
        return Rule("disj:int", 4, lambda: [
            [lt(m, k)], [lt(j, i)],
            [le(k, m), le(i, j), lt(m, i)], [le(k, m), le(i, j), lt(j, k)],
        ])
    if isinstance(B, Interval):
        A, B = B, A
    if isinstance(A, Interval):
        ea = e.eager(A)
        if ea is not None:
            return _det("disj:eager", _a(Kind.DISJ, ea, B))
        k, m = A.lo, A.hi

        def make():
            n, items = e.intern(A)
            return [[lt(m, k)], [le(k, m), *items, _a(Kind.DISJ, n, B)]]
        return Rule("disj:ext", 2, make)
    if isinstance(B, Cons) and not isinstance(A, Cons):
        A, B = B, A
    if isinstance(A, Cons):
        elems, tail = split_set(A)
        items = [_a(Kind.NIN, el, B) for el in elems]
        if tail is not EMPTY:
            items.append(_a(Kind.DISJ, tail, B))
        return _det("disj:ext", *items)
    return None


def _r_ndisj(a: Atom, e: _Env) -> Rule | None:
    A, B = a.args
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("ndisj:ground") if r else _fail("ndisj:ground")
    n = e.fresh_any()
    return _det("ndisj:all", _a(Kind.IN, n, A), _a(Kind.IN, n, B))


# ---------------------------------------------------------------- cardinality

def _r_size(a: Atom, e: _Env) -> Rule | None:
    A, m = a.args
    if not e.setlike(A) or not e.intlike(m):
        return _fail("size:sort")
    if A is EMPTY:
        return _det("size:e", ieq(m, IntTerm(0, ())))
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("size:ground") if r else _fail("size:ground")
    if isinstance(m, IntTerm) and m.coeffs:
        n = e.fresh_int()
        return _det("size:aux", _a(Kind.SIZE, A, n), ieq(n, m))
    if isinstance(A, Interval):
        k, hi = A.lo, A.hi
        return Rule("size:size", 2, lambda: [
            [lt(hi, k), ieq(m, IntTerm(0, ()))],
            [le(k, hi), ieq(m, width(A))],
        ])
    if isinstance(A, Cons):
        x, rest = A.elem, A.rest
        n = e.fresh_int()

        def make():
            out = [[_a(Kind.NIN, x, rest), ieq(m, plus(n, 1)), _a(Kind.SIZE, rest, n), le(IntTerm(0, ()), n)]]
            # x already in rest: count rest \ {x} plus one
            for items, N in _remove(rest, x, e, member=True):
                out.append(items + [ieq(m, plus(n, 1)), _a(Kind.SIZE, N, n), le(IntTerm(0, ()), n)])
            return out
        return Rule("size:ext", 2, make)
    c = int_const(m)
    if c is not None:
        if c < 0:
            return _fail("size:neg")
        if c == 0:
            return _det("size:zero", eq(A, EMPTY))
    return None


def _r_nsize(a: Atom, e: _Env) -> Rule | None:
    A, m = a.args
    if not e.setlike(A) or not e.intlike(m):
        return _fail("nsize:sort")
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("nsize:ground") if r else _fail("nsize:ground")
    if isinstance(A, Interval):
        k, hi = A.lo, A.hi
        return Rule("size:nsize", 2, lambda: [
            [lt(hi, k), ine(m, IntTerm(0, ()))],
            [le(k, hi), ine(m, width(A))],
        ])
    n = e.fresh_int()
    return _det("nsize", _a(Kind.SIZE, A, n), ine(n, m))


# ---------------------------------------------------------------- intersection and difference

def _r_inters(a: Atom, e: _Env) -> Rule | None:
    A, B, C = a.args
    if not all(e.setlike(t) for t in a.args):
        return _fail("inters:sort")
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("inters:ground") if r else _fail("inters:ground")
    if isinstance(A, Interval) and isinstance(B, Interval):
        k, m, i, j = A.lo, A.hi, B.lo, B.hi
        ne = [le(k, m), le(i, j)]
        return Rule("inters:12", 6, lambda: [
            [lt(m, k), eq(C, EMPTY)],
            [le(k, m), lt(j, i), eq(C, EMPTY)],
            ne + [le(k, i), le(m, j), eq(C, make_interval(i, m))],
            ne + [le(k, i), lt(j, m), eq(C, make_interval(i, j))],
            ne + [lt(i, k), le(m, j), eq(C, make_interval(k, m))],
            ne + [lt(i, k), lt(j, m), eq(C, make_interval(k, j))],
        ])
    n1, n2 = e.fresh_set(), e.fresh_set()
    return _det("inters", _a(Kind.UN, C, n1, A), _a(Kind.UN, C, n2, B), _a(Kind.DISJ, n1, n2))


def _r_ninters(a: Atom, e: _Env) -> Rule | None:
    A, B, C = a.args
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("ninters:ground") if r else _fail("ninters:ground")
    n = e.fresh_any()
    return Rule("ninters", 3, lambda: [
        [_a(Kind.IN, n, C), _a(Kind.NIN, n, A)],
        [_a(Kind.IN, n, C), _a(Kind.NIN, n, B)],
        [_a(Kind.IN, n, A), _a(Kind.IN, n, B), _a(Kind.NIN, n, C)],
    ])


def _r_diff(a: Atom, e: _Env) -> Rule | None:
    A, B, C = a.args
    if not all(e.setlike(t) for t in a.args):
        return _fail("diff:sort")
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("diff:ground") if r else _fail("diff:ground")
    if isinstance(A, Interval) and isinstance(B, Interval):
        k, m, i, j = A.lo, A.hi, B.lo, B.hi
        return Rule("diff:12", 8, lambda: [
            [lt(m, k), eq(C, EMPTY)],
            [le(k, m), lt(j, i), eq(C, A)],
            [le(k, m), le(i, j), lt(m, i), eq(C, A)],
            [le(k, m), le(i, j), lt(j, k), eq(C, A)],
            [le(i, k), le(k, m), le(m, j), eq(C, EMPTY)],
            [le(k, i), le(i, m), le(m, j), eq(C, make_interval(k, plus(i, -1)))],
            [le(i, k), le(k, j), le(j, m), eq(C, make_interval(plus(j, 1), m))],
            [le(k, i), le(i, j), le(j, m),
             _a(Kind.UN, make_interval(k, plus(i, -1)), make_interval(plus(j, 1), m), C)],
        ])
    n = e.fresh_set()
    return _det("diff", _a(Kind.UN, B, C, n), _a(Kind.UN, A, B, n), _a(Kind.DISJ, C, B))


def _r_ndiff(a: Atom, e: _Env) -> Rule | None:
    A, B, C = a.args
    if _is_ground(a):
        r = _ground_truth(a, e.c.options.eager_width)
        if r is not None:
            return _true("ndiff:ground") if r else _fail("ndiff:ground")
    n = e.fresh_any()
    return Rule("ndiff", 3, lambda: [
        [_a(Kind.IN, n, C), _a(Kind.NIN, n, A)],
        [_a(Kind.IN, n, C), _a(Kind.IN, n, B)],
        [_a(Kind.IN, n, A), _a(Kind.NIN, n, B), _a(Kind.NIN, n, C)],
    ])


HANDLERS = {
    Kind.EQ: _r_eq, Kind.NEQ: _r_neq, Kind.IN: _r_in, Kind.NIN: _r_nin,
    Kind.NINTEGER: _r_ninteger, Kind.UN: _r_un, Kind.NUN: _r_nun, Kind.SUBSET: _r_subset,
    Kind.DISJ: _r_disj, Kind.NDISJ: _r_ndisj, Kind.SIZE: _r_size, Kind.NSIZE: _r_nsize,
    Kind.INTERS: _r_inters, Kind.NINTERS: _r_ninters, Kind.DIFF: _r_diff, Kind.NDIFF: _r_ndiff,
}


# ---------------------------------------------------------------- driving the rules

def rule_for(item, goal: Goal, ctx: Context) -> Rule | None:
    """The rule that rewrites ``item`` in ``goal``, or None if irreducible."""
    if isinstance(item, Choice):
        return Rule("or", len(item.branches), lambda: [list(b) for b in item.branches])
    return HANDLERS[item.kind](item, _Env(goal, ctx))


def _select(goal: Goal, ctx: Context):
    best = None
    stable = goal.stable
    for i, item in enumerate(goal.atoms):
        if stable.get(id(item)) is item:
            continue
        r = rule_for(item, goal, ctx)
        if r is None:
            stable[id(item)] = item
            continue
        if r.rank <= 1:
            return i, r
        if best is None or r.rank < best[1].rank:
            best = (i, r)
    return best


def _check_budget(ctx: Context) -> None:
    opts = ctx.options
    if opts.max_branches is not None and ctx.stats.branches > opts.max_branches:
        raise ResourceLimit("branch budget exhausted")
    if opts.timeout is not None and ctx.deadline is not None and time.monotonic() > ctx.deadline:
        raise ResourceLimit("timeout")


def _finish(goal: Goal, ctx: Context) -> bool:
    if goal.failed:
        return False
    if not goal.ints_checked:
        if not ctx.relaxed_ok(goal.int_rows()):
            return False
        goal.ints_checked = True
    return True


def step(goal: Goal, ctx: Context) -> list[Goal] | None:
    """Apply one rewrite to ``goal``; None when every atom is irreducible.

    Deterministic rules update ``goal`` in place; branching rules return
    fresh copies.  Branches that fail, or whose integer part is infeasible
    over the rationals, are dropped.
    """
    sel = _select(goal, ctx)
    if sel is None:
        return None
    i, rule = sel
    item = goal.atoms[i]
    branches = rule.make()
    ctx.stats.steps += 1
    ctx.stats.rule_applications += 1
    if ctx.trace is not None:
        ctx.trace(f"{rule.name}\t{item!r}\t{len(branches)}")
    if not branches:
        return []
    if len(branches) == 1:
        del goal.atoms[i]
        return [goal] if extend(goal, branches[0], ctx) and _finish(goal, ctx) else []
    out = []
    for br in branches:
        g = goal.copy()
        del g.atoms[i]
        if extend(g, br, ctx) and _finish(g, ctx):
            out.append(g)
    ctx.stats.branches += max(0, len(out) - 1)
    _check_budget(ctx)
    return out


def step_loop(goal: Goal, ctx: Context) -> Iterator[Goal]:
    """Depth-first enumeration of the irreducible descendants of ``goal``."""
    stack = [goal]
    while stack:
        g = stack.pop()
        while True:
            res = step(g, ctx)
            if res is None:
                yield g
                break
            if not res:
                break
            if len(res) == 1:
                g = res[0]
                continue
            stack.extend(reversed(res[1:]))
            g = res[0]


# ---------------------------------------------------------------- inequality elimination

CARD_KINDS = (Kind.UN, Kind.DISJ, Kind.SIZE, Kind.SUBSET)


def card_vars(goal: Goal) -> set[str]:
    out: set[str] = set()
    for a in goal.atoms:
        if isinstance(a, Atom) and a.kind in CARD_KINDS:
            for t in (a.args[:1] if a.kind in (Kind.SIZE, Kind.SUBSET) else a.args):
                if isinstance(t, Var):
                    out.add(t.name)
    return out


def remove_neq(goal: Goal, ctx: Context) -> list[Goal] | None:
    """Eliminate one ``X != t`` whose ``X`` occurs in a cardinality-like atom.

    ``X != t`` becomes ``n in X & n nin t  or  n in t & n nin X`` when ``t``
    is a set, and true when ``t`` has a non-set sort.  Returns None when no
    such inequality is left.
    """
    cv = card_vars(goal)
    if not cv:
        return None
    for i, a in enumerate(goal.atoms):
        if not isinstance(a, Atom) or a.kind is not Kind.NEQ:
            continue
        x, t = a.args
        if not (isinstance(x, Var) and x.name in cv):
            x, t = t, x
            if not (isinstance(x, Var) and x.name in cv):
                continue
        st = goal.sort(t, ctx)
        if st is None:
            continue
        if ctx.trace is not None:
            ctx.trace(f"neq:elim\t{a!r}")
        ctx.stats.rule_applications += 1
        if st is not Sort.SET:
            g = goal.copy()
            del g.atoms[i]
            return [g]
        n = ctx.fresh("n", None)
        out = []
        for br in ([Atom(Kind.IN, (n, x)), Atom(Kind.NIN, (n, t))],
                   [Atom(Kind.IN, (n, t)), Atom(Kind.NIN, (n, x))]):
            g = goal.copy()
            del g.atoms[i]
            if extend(g, br, ctx) and _finish(g, ctx):
                out.append(g)
        return out
    return None


def gen_size_leq(f):
    """Conjoin ``0 =< m`` next to every ``size(A, m)`` of the formula."""
    if isinstance(f, Atom):
        if f.kind is Kind.SIZE:
            return And((f, le(IntTerm(0, ()), f.args[1])))
        return f
    if isinstance(f, And):
        return And(tuple(gen_size_leq(x) for x in f.items))
    if isinstance(f, Or):
        return Or(tuple(gen_size_leq(x) for x in f.items))
    return f


def to_items(f) -> list:
    """Branch items for a formula: atoms stay, disjunctions become choices."""
    if f is TRUE:
        return []
    if f is FALSE:
        return [FALSE]
    if isinstance(f, Atom):
        return [f]
    if isinstance(f, And):
        out = []
        for x in f.items:
            out.extend(to_items(x))
        return out
    if isinstance(f, Or):
        return [Choice(tuple(tuple(to_items(x)) for x in f.items))]
    raise TypeError(f)
