"""Brute-force evaluation and enumeration over a small finite domain.

Ground values are plain Python objects: ``int`` for integers, a tuple
``(functor, *args)`` for ur-terms and ``frozenset`` for sets.  Nothing here
depends on the rewriting engine; it is the reference the engine is tested
against.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator

from .ast import (
    EMPTY, And, App, Atom, Cons, Formula, IntTerm, Interval, Kind, Or, Sort, Term, Var,
    _Bool, formula_vars, infer_sorts,
)


class ExplosionGuard(RuntimeError):
    """The assignment space is larger than the configured cap."""


@dataclass(frozen=True)
class DomainSpec:
    int_range: tuple[int, int] = (-6, 6)
    ur_atoms: tuple[str, ...] = ("a", "b")
    max_card: int = 3
    max_depth: int = 1
    cap: int = 10 ** 7
    elem_range: tuple[int, int] | None = None   # integers allowed inside sets; int_range if None

    def ints(self) -> list[int]:
        lo, hi = self.int_range
        return list(range(lo, hi + 1))

    def elem_ints(self) -> list[int]:
        lo, hi = self.elem_range or self.int_range
        return list(range(lo, hi + 1))

    def urs(self) -> list[tuple]:
        return [(a,) for a in self.ur_atoms]

    def sets(self) -> list[frozenset]:
        base: list = self.elem_ints() + self.urs()
        level: list[frozenset] = []
        for _ in range(self.max_depth):
            universe = base + level
            level = [frozenset(c) for n in range(self.max_card + 1) for c in combinations(universe, n)]
            level = sorted(set(level), key=value_key)
        return level

    def values(self, sort: Sort | None) -> list:
        if sort is Sort.INT:
            return self.ints()
        if sort is Sort.UR:
            return self.urs()
        if sort is Sort.SET:
            return self.sets()
        return self.ints() + self.urs() + self.sets()


def value_key(v):
    """Total order on ground values: integers, then ur-terms, then sets."""
    if isinstance(v, int):
        return (0, v)
    if isinstance(v, tuple):
        return (1, v[0], tuple(value_key(a) for a in v[1:]))
    return (2, len(v), tuple(sorted(value_key(x) for x in v)))


def show_value(v) -> str:
    if isinstance(v, int):
        return str(v)
    if isinstance(v, tuple):
        return v[0] if len(v) == 1 else v[0] + "(" + ",".join(show_value(a) for a in v[1:]) + ")"
    return "{" + ",".join(show_value(x) for x in sorted(v, key=value_key)) + "}"


# ---------------------------------------------------------------- evaluation

class _Unknown(Exception):
    pass


class _IllSorted(Exception):
    pass


def term_value(t: Term, env: dict):
    """Ground value of ``t``; raises ``_Unknown`` on an unassigned variable."""
    if isinstance(t, Var):
        if t.name not in env:
            raise _Unknown
        return env[t.name]
    if isinstance(t, IntTerm):
        total = t.const
        for v, k in t.coeffs:
            if v not in env:
                raise _Unknown
            x = env[v]
            if not isinstance(x, int):
                raise _IllSorted
            total += k * x
        return total
    if t is EMPTY:
        return frozenset()
    if isinstance(t, Cons):
        rest = term_value(t.rest, env)
        if not isinstance(rest, frozenset):
            raise _IllSorted
        return rest | {term_value(t.elem, env)}
    if isinstance(t, Interval):
        lo, hi = term_value(t.lo, env), term_value(t.hi, env)
        if not isinstance(lo, int) or not isinstance(hi, int):
            raise _IllSorted
        return frozenset(range(lo, hi + 1))
    if isinstance(t, App):
        return (t.functor,) + tuple(term_value(a, env) for a in t.args)
    raise TypeError(t)


def _sets(*vs) -> bool:
    return all(isinstance(v, frozenset) for v in vs)


def atom_truth(a: Atom, env: dict) -> bool:
    vals = [term_value(t, env) for t in a.args]
    k = a.kind
    if k is Kind.EQ:
        return vals[0] == vals[1]
    if k is Kind.NEQ:
        return vals[0] != vals[1]
    if k is Kind.NINTEGER:
        return not isinstance(vals[0], int)
    if k in (Kind.IN, Kind.NIN):
        if not _sets(vals[1]):
            return False
        return (vals[0] in vals[1]) == (k is Kind.IN)
    if k in (Kind.INT_LEQ, Kind.INT_LT, Kind.INT_EQ, Kind.INT_NEQ):
        x, y = vals
        if not isinstance(x, int) or not isinstance(y, int):
            return False
        return {Kind.INT_LEQ: x <= y, Kind.INT_LT: x < y, Kind.INT_EQ: x == y, Kind.INT_NEQ: x != y}[k]
    if k in (Kind.SIZE, Kind.NSIZE):
        s, m = vals
        if not _sets(s) or not isinstance(m, int):
            return False
        return (len(s) == m) == (k is Kind.SIZE)
    if not _sets(*vals):
        return False
    if k is Kind.UN:
        return vals[0] | vals[1] == vals[2]
    if k is Kind.NUN:
        return vals[0] | vals[1] != vals[2]
    if k is Kind.DISJ:
        return not vals[0] & vals[1]
    if k is Kind.NDISJ:
        return bool(vals[0] & vals[1])
    if k is Kind.SUBSET:
        return vals[0] <= vals[1]
    if k is Kind.INTERS:
        return vals[0] & vals[1] == vals[2]
    if k is Kind.NINTERS:
        return vals[0] & vals[1] != vals[2]
    if k is Kind.DIFF:
        return vals[0] - vals[1] == vals[2]
    if k is Kind.NDIFF:
        return vals[0] - vals[1] != vals[2]
    raise ValueError(k)


def eval3(f: Formula, env: dict) -> bool | None:
    """Three-valued truth under a partial assignment (None = undetermined)."""
    if isinstance(f, _Bool):
        return f.value
    if isinstance(f, Atom):
        try:
            return atom_truth(f, env)
        except _Unknown:
            return None
        except _IllSorted:
            return False
    if isinstance(f, And):
        out = True
        for x in f.items:
            r = eval3(x, env)
            if r is False:
                return False
            if r is None:
                out = None
        return out
    if isinstance(f, Or):
        out = False
        for x in f.items:
            r = eval3(x, env)
            if r is True:
                return True
            if r is None:
                out = None
        return out
    raise TypeError(f)


def eval(f: Formula, env: dict) -> bool:  # noqa: A001 - mirrors the operation name
    """Truth value of ``f`` under a total assignment."""
    r = eval3(f, env)
    if r is None:
        missing = sorted(formula_vars(f) - set(env))
        raise KeyError(f"unassigned variables: {', '.join(missing)}")
    return r


# ---------------------------------------------------------------- enumeration

def _plan(f: Formula, domain: DomainSpec, names: list[str], sorts: dict | None,
          hidden_domain: DomainSpec | None = None, nshown: int | None = None):
    sorts = infer_sorts(f) if sorts is None else sorts
    cache: dict = {}
    plan = []
    space = 1
    for i, n in zip(range(len(names)), names):
        s = sorts.get(n)
        d = domain if hidden_domain is None or nshown is None or i < nshown else hidden_domain
        if (d, s) not in cache:
            cache[d, s] = d.values(s)
        plan.append((n, cache[d, s]))
        space *= len(cache[d, s])
    if space > domain.cap:
        raise ExplosionGuard(f"assignment space {space} exceeds cap {domain.cap}")
    return plan


def iter_solutions(f: Formula, domain: DomainSpec = DomainSpec(), *, project: Iterable[str] | None = None,
                   sorts: dict | None = None, hidden_domain: DomainSpec | None = None) -> Iterator[dict]:
    """Satisfying assignments, lexicographic over (variable name, value order).

    With ``project``, only the listed variables are reported and each
    projected assignment appears once; the remaining variables are treated
    as existentially quantified, ranging over ``hidden_domain`` when given.
    """
    allv = sorted(formula_vars(f))
    if project is None:
        shown, hidden = allv, []
    else:
        shown = sorted(set(project))
        hidden = [v for v in allv if v not in set(shown)]
    nshown = len(shown)
    plan = _plan(f, domain, shown + hidden, sorts, hidden_domain, nshown)
    env: dict = {}

    def exists(i: int) -> bool:
        if i == len(plan):
            return eval3(f, env) is True
        name, values = plan[i]
        for v in values:
            env[name] = v
            if eval3(f, env) is not False and exists(i + 1):
                del env[name]
                return True
        env.pop(name, None)
        return False

    def go(i: int):
        if i == nshown:
            if exists(i):
                yield {n: env[n] for n in shown}
            return
        name, values = plan[i]
        for v in values:
            env[name] = v
            if eval3(f, env) is not False:
                yield from go(i + 1)
        env.pop(name, None)

    yield from go(0)


def enumerate(f: Formula, domain: DomainSpec = DomainSpec(), **kw) -> list[dict]:  # noqa: A001
    return list(iter_solutions(f, domain, **kw))


def satisfiable(f: Formula, domain: DomainSpec = DomainSpec(), **kw) -> bool:
    return next(iter_solutions(f, domain, **kw), None) is not None
