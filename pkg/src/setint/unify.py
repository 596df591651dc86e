"""Substitutions, goals and set unification.

A :class:`Goal` is one node of the nondeterministic search: an ordered list
of pending set-level atoms, the integer rows collected so far, the bindings
already applied, per-branch sort refinements and the interval memo table.
Bindings are applied eagerly to every atom, so the atom list never mentions a
bound variable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .ast import (
    EMPTY, FALSE, TRUE, App, Atom, Cons, IntTerm, Interval, Kind, Sort, Term, Var,
    as_linear, const, int_const, lin, split_set, set_of, sort_of, term_vars,
)
from . import lia
from .lia import EQ, LE, NE, LinConstraint


class SortClash(Exception):
    """An integer position received a non-integer term."""


# ---------------------------------------------------------------- terms

def make_interval(lo: Term, hi: Term) -> Term:
    """Interval constructor that folds a constant empty interval to ``{}``."""
    a, b = int_const(lo), int_const(hi)
    if a is not None and b is not None and b < a:
        return EMPTY
    return Interval(lo, hi)


def occurs(name: str, t: Term) -> bool:
    return name in term_vars(t)


def _subst_int(t: IntTerm, env: dict[str, Term]) -> Term:
    c = t.const
    acc: dict[str, int] = {}
    hit = False
    for v, k in t.coeffs:
        val = env.get(v)
        if val is None:
            acc[v] = acc.get(v, 0) + k
            continue
        hit = True
        if isinstance(val, Var):
            acc[val.name] = acc.get(val.name, 0) + k
        elif isinstance(val, IntTerm):
            c += k * val.const
            for w, j in val.coeffs:
                acc[w] = acc.get(w, 0) + k * j
        else:
            raise SortClash(f"{v} bound to non-integer {val!r}")
    return lin(c, acc) if hit else t


def apply_term(t: Term, env: dict[str, Term]) -> Term:
    """Replace variables bound in ``env`` (single pass; ``env`` idempotent)."""
    if isinstance(t, Var):
        return env.get(t.name, t)
    if isinstance(t, IntTerm):
        return _subst_int(t, env) if t.coeffs else t
    if isinstance(t, Cons):
        elems, tail = split_set(t)
        new_elems = [apply_term(e, env) for e in elems]
        new_tail = apply_term(tail, env)
        if new_tail is tail and all(a is b for a, b in zip(new_elems, elems)):
            return t
        return set_of(new_elems, new_tail)
    if isinstance(t, Interval):
        lo, hi = apply_term(t.lo, env), apply_term(t.hi, env)
        if lo is t.lo and hi is t.hi:
            return t
        if not _is_int_like(lo) or not _is_int_like(hi):
            raise SortClash(f"interval limit bound to a non-integer in {t!r}")
        return make_interval(lo, hi)
    if isinstance(t, App):
        if not t.args:
            return t
        args = tuple(apply_term(a, env) for a in t.args)
        if all(a is b for a, b in zip(args, t.args)):
            return t
        return App(t.functor, args)
    return t


def _is_int_like(t: Term) -> bool:
    return isinstance(t, (Var, IntTerm))


def apply_atom(a: Atom, env: dict[str, Term]) -> Atom:
    args = tuple(apply_term(x, env) for x in a.args)
    if all(x is y for x, y in zip(args, a.args)):
        return a
    return Atom(a.kind, args)


@dataclass
class Substitution:
    """Idempotent variable-to-term map."""

    bindings: dict[str, Term] = field(default_factory=dict)

    def apply(self, t: Term) -> Term:
        return apply_term(t, self.bindings)

    def extend(self, name: str, value: Term) -> "Substitution":
        value = apply_term(value, self.bindings)
        single = {name: value}
        out = {k: apply_term(v, single) for k, v in self.bindings.items()}
        out[name] = value
        return Substitution(out)

    def __contains__(self, name: str) -> bool:
        return name in self.bindings


def apply(s: Substitution, goal: "Goal", ctx: "Context") -> "Goal":
    """Apply every binding of ``s`` to a copy of ``goal``."""
    g = goal.copy()
    for name, value in s.bindings.items():
        if name in g.subst:
            continue
        if not g.bind(name, apply_term(value, g.subst), ctx):
            g.failed = True
            return g
    return g


# ---------------------------------------------------------------- search state

@dataclass(frozen=True, slots=True)
class Choice:
    """A pending disjunction inside a goal: one list of items per branch."""

    branches: tuple

    def __repr__(self) -> str:
        return "(" + " or ".join(" & ".join(map(repr, b)) or "true" for b in self.branches) + ")"


@dataclass(frozen=True, slots=True)
class Bind:
    """Branch item binding a variable to a term."""

    name: str
    term: Term


class ResourceLimit(RuntimeError):
    """Timeout or branch budget exhausted before a verdict was reached."""


@dataclass(frozen=True, slots=True)
class MemoEntry:
    """Branch item recording that interval ``key`` is represented by ``name``."""

    key: tuple
    name: str


@dataclass
class Stats:
    steps: int = 0
    passes: int = 0
    rule_applications: int = 0
    branches: int = 0
    lia_calls: int = 0
    minsol_fallbacks: int = 0
    answers: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)


@dataclass
class Options:
    eager_width: int = 1024
    timeout: float | None = None
    max_branches: int | None = None
    lia_nodes: int = 20000
    minsol_models: int = 64
    venn_cap: int = 16


class Context:
    """Per-query state shared by every branch: fresh names, sorts, options."""

    def __init__(self, options: Options | None = None, base_sorts: dict[str, Sort] | None = None,
                 trace: Callable[[str], None] | None = None, taken: Iterable[str] = ()):
        self.options = options or Options()
        self.base_sorts: dict[str, Sort] = dict(base_sorts or {})
        self.trace = trace
        self.stats = Stats()
        self._counter = 0
        self._taken = set(taken)
        self._lia_cache: dict = {}
        self.deadline: float | None = None

    def fresh(self, prefix: str, sort: Sort | None) -> Var:
        while True:
            self._counter += 1
            name = f"_{prefix}{self._counter}"
            if name not in self._taken:
                break
        if sort is not None:
            self.base_sorts[name] = sort
        return Var(name)

    def relaxed_ok(self, rows: tuple) -> bool:
        hit = self._lia_cache.get(rows)
        if hit is None:
            self.stats.lia_calls += 1
            hit = lia.lia_relaxed(rows)
            self._lia_cache[rows] = hit
        return hit


class Goal:
    """Conjunction under construction plus its bindings."""

    __slots__ = ("atoms", "ints", "subst", "sorts", "memo", "stable", "failed", "ints_checked")

    def __init__(self):
        self.atoms: list = []
        self.ints: list[LinConstraint] = []
        self.subst: dict[str, Term] = {}
        self.sorts: dict[str, Sort] = {}
        self.memo: dict[tuple, str] = {}
        self.stable: dict[int, object] = {}
        self.failed = False
        self.ints_checked = True

    def copy(self) -> "Goal":
        g = Goal.__new__(Goal)
        g.atoms = list(self.atoms)
        g.ints = list(self.ints)
        g.subst = dict(self.subst)
        g.sorts = dict(self.sorts)
        g.memo = dict(self.memo)
        g.stable = dict(self.stable)
        g.failed = self.failed
        g.ints_checked = self.ints_checked
        return g

    # -- sorts
    def sort_of_var(self, name: str, ctx: Context) -> Sort | None:
        s = self.sorts.get(name)
        return s if s is not None else ctx.base_sorts.get(name)

    def sort(self, t: Term, ctx: Context) -> Sort | None:
        if isinstance(t, Var):
            return self.sort_of_var(t.name, ctx)
        return sort_of(t)

    def set_sort(self, name: str, s: Sort, ctx: Context) -> bool:
        old = self.sort_of_var(name, ctx)
        if old is s:
            return True
        if old is not None:
            return False
        self.sorts[name] = s
        self.stable.clear()
        return True

    # -- bindings
    def bind(self, name: str, value: Term, ctx: Context) -> bool:
        """Bind ``name`` to ``value`` everywhere; False on a sort clash."""
        s = self.sort_of_var(name, ctx)
        vs = self.sort(value, ctx)
        if s is not None and vs is not None and s is not vs:
            return False
        if s is None and vs is not None:
            self.sorts[name] = vs
        elif s is not None and vs is None and not self.set_sort(value.name, s, ctx):
            return False
        if s is Sort.INT and not _is_int_like(value):
            return False
        single = {name: value}
        try:
            for k, v in self.subst.items():
                if name in term_vars(v):
                    self.subst[k] = apply_term(v, single)
            self.subst[name] = value
            atoms = self.atoms
            changed = False
            for i, a in enumerate(atoms):
                if isinstance(a, Atom):
                    na = apply_atom(a, single)
                    if na is not a:
                        atoms[i] = na
                        changed = True
                elif isinstance(a, Choice):
                    atoms[i] = _apply_choice(a, single)
                    changed = True
            if changed and len(atoms) > 1:
                self.atoms = list(dict.fromkeys(atoms))
            if self.memo:
                memo = {}
                for (lo, hi), n in self.memo.items():
                    memo[(apply_term(lo, single), apply_term(hi, single))] = n
                self.memo = memo
        except SortClash:
            return False
        if any(v == name for r in self.ints for v, _ in r.coeffs):
            if not _is_int_like(value):
                return False
            rows = self.ints
            self.ints = [r for r in rows if not _mentions(r, name)]
            pending = [_subst_row(r, name, value) for r in rows if _mentions(r, name)]
            for r in pending:
                if not isinstance(r, bool):
                    r = self.resolve_row(r)
                if not self.add_row(r, ctx):
                    return False
            self.ints_checked = False
        return True

    def add_row(self, row, ctx: Context) -> bool:
        """Add a normalized integer row; solved equalities become bindings."""
        if row is True:
            return True
        if row is False:
            return False
        for v, _ in row.coeffs:
            if not self.set_sort(v, Sort.INT, ctx):
                return False
        if row.rel == EQ and len(row.coeffs) == 1:
            (v, k), = row.coeffs
            if k == 1:
                return self.bind(v, const(-row.const), ctx)
            return False  # gcd normalization leaves k == 1 for solvable rows
        if row.rel == EQ:
            unit = [v for v, k in row.coeffs if abs(k) == 1]
            if unit:
                # cardinalities of size atoms must stay variables
                cards = {a.args[1].name for a in self.atoms
                         if isinstance(a, Atom) and a.kind in (Kind.SIZE, Kind.NSIZE)
                         and isinstance(a.args[1], Var)}
                unit = [v for v in unit if v not in cards]
            if unit:
                # solve for one unit-coefficient variable and substitute it away
                v = max(unit, key=_elim_rank)
                k = dict(row.coeffs)[v]
                rest = {w: -j * k for w, j in row.coeffs if w != v}
                return self.bind(v, lin(-row.const * k, rest), ctx)
        if row in self.ints:
            return True
        ints = self.ints
        neg = tuple((v, -k) for v, k in row.coeffs)
        if row.rel == LE:
            for i, r in enumerate(ints):
                if r.rel == LE:
                    if r.coeffs == row.coeffs:
                        if r.const >= row.const:
                            return True
                        ints[i] = row
                        self.ints_checked = False
                        return self._prune_ne(row)
                    if r.coeffs == neg:
                        gap = row.const + r.const
                        if gap > 0:
                            return False
                        if gap == 0:
                            del ints[i]
                            return self.add_row(lia.normalize(dict(row.coeffs), row.const, EQ), ctx)
                elif r.rel == NE:
                    t = _tighten(row, r)
                    if t is not None:
                        del ints[i]
                        return self.add_row(t, ctx)
            ints.append(row)
            self.ints_checked = False
            return self._prune_ne(row)
        if row.rel == NE:
            for r in ints:
                if r.rel == LE and (r.coeffs == row.coeffs or r.coeffs == neg):
                    t = _tighten(r, row)
                    if t is not None:
                        self.ints.remove(r)
                        return self.add_row(t, ctx)
                    if _ne_implied(r, row):
                        return True
        ints.append(row)
        self.ints_checked = False
        return True

    def _prune_ne(self, le_row) -> bool:
        """Drop inequations made redundant by the bound ``le_row``."""
        self.ints = [r for r in self.ints if not (r.rel == NE and _ne_implied(le_row, r))]
        return True

    def resolve_row(self, r):
        """Apply current bindings to a row built before they were made."""
        for v, _ in r.coeffs:
            if v in self.subst:
                break
        else:
            return r
        c, m = r.const, {}
        for v, k in r.coeffs:
            val = self.subst.get(v)
            if val is None:
                m[v] = m.get(v, 0) + k
                continue
            vc, vm = as_linear(val)
            c += k * vc
            for w, j in vm.items():
                m[w] = m.get(w, 0) + k * j
        return lia.normalize(m, c, r.rel)

    def int_rows(self) -> tuple:
        return tuple(self.ints)


def _elim_rank(n: str):
    """Order for choosing which variable an equation eliminates (largest wins)."""
    digits = "".join(ch for ch in n if ch.isdigit())
    return (n.startswith("_"), int(digits) if digits else -1, n)


def _ne_implied(le: LinConstraint, ne: LinConstraint) -> bool:
    """Whether ``le`` (a.x + c <= 0) already forces ``ne`` (a.x + d != 0)."""
    if le.coeffs == ne.coeffs:
        return ne.const < le.const
    if all(k == -j for (_, k), (_, j) in zip(le.coeffs, ne.coeffs)) and len(le.coeffs) == len(ne.coeffs) \
            and all(v == w for (v, _), (w, _) in zip(le.coeffs, ne.coeffs)):
        # -a.x + c <= 0 means a.x >= c, so a.x + d >= c + d
        return le.const + ne.const > 0
    return False


def _tighten(le: LinConstraint, ne: LinConstraint) -> LinConstraint | None:
    """``le`` strengthened by one when ``ne`` excludes exactly its boundary."""
    if le.coeffs == ne.coeffs and le.const == ne.const:
        return LinConstraint(le.coeffs, le.const + 1, LE)
    if _ne_implied(le, ne) or len(le.coeffs) != len(ne.coeffs):
        return None
    if all(v == w and k == -j for (v, k), (w, j) in zip(le.coeffs, ne.coeffs)) and le.const == -ne.const:
        return LinConstraint(le.coeffs, le.const + 1, LE)
    return None


def _binding_order(v1: str, v2: str) -> tuple[str, str]:
    """Pick which of two variables to eliminate: prefer fresh names."""
    if v1.startswith("_") and not v2.startswith("_"):
        return v1, v2
    if v2.startswith("_") and not v1.startswith("_"):
        return v2, v1
    return (v2, v1) if v2 > v1 else (v1, v2)


def _mentions(r: LinConstraint, name: str) -> bool:
    return any(v == name for v, _ in r.coeffs)


def _subst_row(r: LinConstraint, name: str, value: Term):
    c, m = r.const, {}
    vc, vm = as_linear(value)
    for v, k in r.coeffs:
        if v == name:
            c += k * vc
            for w, j in vm.items():
                m[w] = m.get(w, 0) + k * j
        else:
            m[v] = m.get(v, 0) + k
    return lia.normalize(m, c, r.rel)


def _apply_choice(ch: Choice, env: dict[str, Term]) -> Choice:
    out = []
    for br in ch.branches:
        items = []
        for it in br:
            if isinstance(it, Atom):
                items.append(apply_atom(it, env))
            elif isinstance(it, Choice):
                items.append(_apply_choice(it, env))
            elif isinstance(it, MemoEntry):
                items.append(MemoEntry((apply_term(it.key[0], env), apply_term(it.key[1], env)), it.name))
            else:
                items.append(it)
        out.append(tuple(items))
    return Choice(tuple(out))


# ---------------------------------------------------------------- set unification

def eq_set_branches(lhs: Term, rhs: Term, fresh: Callable[[str, Sort | None], Var]) -> list[list]:
    """Branches for ``lhs = rhs`` when both sides are extensional or empty.

    Implements the four-way rule for ``{x / A} = {y / B}`` and, when both
    tails are the same variable, the variant that avoids regenerating the
    same equation.  Failure is the empty list; success with nothing left is
    ``[[]]``.
    """
    if lhs is EMPTY and rhs is EMPTY:
        return [[]]
    if lhs is EMPTY or rhs is EMPTY:
        return []
    assert isinstance(lhs, Cons) and isinstance(rhs, Cons)
    ls, lt = split_set(lhs)
    rs, rt = split_set(rhs)
    if isinstance(lt, Var) and isinstance(rt, Var) and lt.name == rt.name:
        return _same_tail(ls, rs, lt, fresh)
    x, a = lhs.elem, lhs.rest
    y, b = rhs.elem, rhs.rest
    n = fresh("N", Sort.SET)
    return [
        [Atom(Kind.EQ, (x, y)), Atom(Kind.EQ, (a, b))],
        [Atom(Kind.EQ, (x, y)), Atom(Kind.EQ, (lhs, b))],
        [Atom(Kind.EQ, (x, y)), Atom(Kind.EQ, (a, rhs))],
        [Atom(Kind.EQ, (a, Cons(y, n))), Atom(Kind.EQ, (Cons(x, n), b))],
    ]


def _same_tail(ls: list, rs: list, tail: Var, fresh) -> list[list]:
    """``{t0..tm / X} = {s0..sn / X}``."""
    t0, trest = ls[0], ls[1:]
    out = []
    for j, sj in enumerate(rs):
        others = rs[:j] + rs[j + 1:]
        out.append([Atom(Kind.EQ, (t0, sj)), Atom(Kind.EQ, (set_of(trest, tail), set_of(others, tail)))])
        out.append([Atom(Kind.EQ, (t0, sj)), Atom(Kind.EQ, (set_of(ls, tail), set_of(others, tail)))])
        out.append([Atom(Kind.EQ, (t0, sj)), Atom(Kind.EQ, (set_of(trest, tail), set_of(rs, tail)))])
    n = fresh("N", Sort.SET)
    out.append([Atom(Kind.EQ, (tail, Cons(t0, n))),
                Atom(Kind.EQ, (set_of(trest, n), set_of(rs, n)))])
    return out


def unify_sets(lhs: Term, rhs: Term, goal: Goal, ctx: Context) -> list[Goal]:
    """Nondeterministic branches of ``lhs = rhs`` for two non-interval set terms.

    Every returned goal already carries the bindings of its branch; the
    remaining element equations are left as atoms for the rewriting loop.
    """
    if isinstance(lhs, Interval) or isinstance(rhs, Interval):
        raise ValueError("interval equalities are handled by the rewriting rules")
    if isinstance(lhs, Var) or isinstance(rhs, Var):
        branches = [[Atom(Kind.EQ, (lhs, rhs))]]
    else:
        branches = eq_set_branches(lhs, rhs, ctx.fresh)
    out = []
    for br in branches:
        g = goal.copy()
        if extend(g, br, ctx):
            out.append(g)
    return out


# ---------------------------------------------------------------- branch application

def simple_binding(a: Atom, goal: Goal, ctx: Context):
    """If ``a`` is ``X = t`` solvable by binding, return ``(name, term)``."""
    x, t = a.args
    if isinstance(t, Var) and not isinstance(x, Var):
        x, t = t, x
    if not isinstance(x, Var):
        return None
    if isinstance(t, Var):
        if t.name == x.name:
            return None
        a_, b_ = _binding_order(x.name, t.name)
        return a_, Var(b_)
    if goal.sort_of_var(x.name, ctx) is Sort.INT and isinstance(t, IntTerm) and t.coeffs:
        return None
    if occurs(x.name, t):
        return None
    return x.name, t


def extend(goal: Goal, items: Iterable, ctx: Context) -> bool:
    """Conjoin branch items onto ``goal`` in place; False if it fails outright."""
    for it in items:
        if it is TRUE:
            continue
        if it is FALSE:
            goal.failed = True
            return False
        env = goal.subst
        if isinstance(it, MemoEntry):
            key = it.key
            if env:
                key = (apply_term(key[0], env), apply_term(key[1], env))
            goal.memo[key] = it.name
            continue
        if isinstance(it, Bind):
            term = apply_term(it.term, env) if env else it.term
            if it.name in env:
                it = Atom(Kind.EQ, (env[it.name], term))
            elif occurs(it.name, term) or not goal.bind(it.name, term, ctx):
                goal.failed = True
                return False
            else:
                continue
        if isinstance(it, Choice):
            if env:
                try:
                    it = _apply_choice(it, env)
                except SortClash:
                    goal.failed = True
                    return False
            if not it.branches:
                goal.failed = True
                return False
            if len(it.branches) == 1:
                if not extend(goal, it.branches[0], ctx):
                    return False
                continue
            if it not in goal.atoms:
                goal.atoms.append(it)
            continue
        if env:
            try:
                it = apply_atom(it, env)
            except SortClash:
                goal.failed = True
                return False
        kind = it.kind
        if kind is Kind.EQ:
            sb = simple_binding(it, goal, ctx)
            if sb is not None:
                if not goal.bind(sb[0], sb[1], ctx):
                    goal.failed = True
                    return False
                continue
        elif kind in _INT_REL:
            rows = int_rows_of(it, goal, ctx)
            if rows is None:
                goal.failed = True
                return False
            for r in rows:
                if not goal.add_row(r, ctx):
                    goal.failed = True
                    return False
            continue
        if it not in goal.atoms:
            goal.atoms.append(it)
    return True


_INT_REL = {Kind.INT_LEQ: LE, Kind.INT_LT: "<", Kind.INT_EQ: EQ, Kind.INT_NEQ: NE}


def int_rows_of(a: Atom, goal: Goal, ctx: Context):
    """Rows for an integer atom, or None if an argument is not an integer."""
    l, r = a.args
    for t in (l, r):
        if isinstance(t, Var):
            s = goal.sort_of_var(t.name, ctx)
            if s is not None and s is not Sort.INT:
                return None
        elif not isinstance(t, IntTerm):
            return None
    row = lia.constraint(l, _INT_REL[a.kind], r)
    return [row]
