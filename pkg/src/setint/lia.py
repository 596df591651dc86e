"""Exact linear integer arithmetic: bounded-variable simplex plus branch and bound.

Every number is an ``int`` or a ``fractions.Fraction``.  Constraints are kept
in the normalized shape ``sum(a_i * x_i) + c  REL  0`` with ``REL`` one of
``<=``, ``=``, ``!=``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor, gcd
from typing import Iterable

from .ast import Term, as_linear, lin

LE, EQ, NE = "<=", "=", "!="
MAX_DEPTH = 400


class LiaLimit(RuntimeError):
    """Branch and bound exceeded its node budget."""


@dataclass(frozen=True, slots=True)
class LinConstraint:
    coeffs: tuple[tuple[str, int], ...]
    const: int
    rel: str

    def holds(self, model: dict[str, int]) -> bool:
        v = self.const + sum(k * model[x] for x, k in self.coeffs)
        if self.rel == LE:
            return v <= 0
        if self.rel == EQ:
            return v == 0
        return v != 0

    def vars(self) -> Iterable[str]:
        return (x for x, _ in self.coeffs)

    def __repr__(self) -> str:
        return f"{lin(self.const, dict(self.coeffs))!r} {self.rel} 0"


def normalize(coeffs: dict[str, int], c: int, rel: str) -> LinConstraint | bool:
    """Gcd-reduce ``coeffs.x + c rel 0``; constant rows collapse to a bool."""
    items = tuple(sorted((x, k) for x, k in coeffs.items() if k))
    if not items:
        if rel == LE:
            return c <= 0
        if rel == EQ:
            return c == 0
        return c != 0
    g = 0
    for _, k in items:
        g = gcd(g, k)
    if rel == LE:
        c = -((-c) // g)  # ceil(c / g): the left side is integral
    elif c % g:
        return rel == NE
    else:
        c //= g
    items = tuple((x, k // g) for x, k in items)
    if rel != LE and items[0][1] < 0:
        items = tuple((x, -k) for x, k in items)
        c = -c
    return LinConstraint(items, c, rel)


def constraint(lhs: Term, rel: str, rhs: Term) -> LinConstraint | bool:
    """``lhs rel rhs`` for ``rel`` in ``<=, <, =, !=`` as a normalized row."""
    cl, ml = as_linear(lhs)
    cr, mr = as_linear(rhs)
    for x, k in mr.items():
        ml[x] = ml.get(x, 0) - k
    c = cl - cr
    if rel == "<":
        return normalize(ml, c + 1, LE)
    return normalize(ml, c, rel)


@dataclass
class LiaStore:
    rows: list[LinConstraint] = field(default_factory=list)
    marks: list[int] = field(default_factory=list)

    @property
    def variables(self) -> set[str]:
        out: set[str] = set()
        for r in self.rows:
            out.update(r.vars())
        return out

    def add(self, row: LinConstraint | bool) -> None:
        if row is True:
            return
        if row is False:
            row = LinConstraint((), 1, LE)  # 1 <= 0
        self.rows.append(row)

    def push(self) -> None:
        self.marks.append(len(self.rows))

    def pop(self) -> None:
        del self.rows[self.marks.pop():]

    def copy(self) -> "LiaStore":
        return LiaStore(list(self.rows), list(self.marks))


@dataclass(frozen=True)
class Sat:
    model: dict[str, int]


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Min:
    value: int
    model: dict[str, int]


@dataclass(frozen=True)
class Unbounded:
    pass


UNSAT = Unsat()
UNBOUNDED = Unbounded()


# ---------------------------------------------------------------- simplex

class _Tableau:
    """General simplex over bounded variables (Bland's rule throughout).

    Variables are numbered; the first ``n`` are problem variables and the rest
    slacks standing for row expressions.  ``rows`` maps each basic variable to
    its expression over non-basic ones.
    """

    def __init__(self, n: int):
        self.n = n
        self.lb: list = [None] * n
        self.ub: list = [None] * n
        self.val: list = [Fraction(0)] * n
        self.rows: dict[int, dict[int, Fraction]] = {}
        self.obj: dict[int, Fraction] | None = None

    def new_slack(self, expr: dict[int, Fraction]) -> int:
        s = len(self.lb)
        self.lb.append(None)
        self.ub.append(None)
        row: dict[int, Fraction] = {}
        for x, a in expr.items():
            if x in self.rows:
                for y, b in self.rows[x].items():
                    row[y] = row.get(y, 0) + a * b
            else:
                row[x] = row.get(x, 0) + a
        row = {y: b for y, b in row.items() if b}
        self.rows[s] = row
        self.val.append(sum((b * self.val[y] for y, b in row.items()), Fraction(0)))
        return s

    def value_of(self, expr: dict[int, Fraction]) -> Fraction:
        return sum((a * self.val[x] for x, a in expr.items()), Fraction(0))

    def _shift(self, xj: int, delta: Fraction) -> None:
        self.val[xj] += delta
        for xi, row in self.rows.items():
            a = row.get(xj)
            if a:
                self.val[xi] += a * delta

    def set_lower(self, x: int, v) -> bool:
        if self.ub[x] is not None and v > self.ub[x]:
            return False
        if self.lb[x] is None or v > self.lb[x]:
            self.lb[x] = v
            if x not in self.rows and self.val[x] < v:
                self._shift(x, v - self.val[x])
        return True

    def set_upper(self, x: int, v) -> bool:
        if self.lb[x] is not None and v < self.lb[x]:
            return False
        if self.ub[x] is None or v < self.ub[x]:
            self.ub[x] = v
            if x not in self.rows and self.val[x] > v:
                self._shift(x, v - self.val[x])
        return True

    def _pivot(self, xi: int, xj: int) -> None:
        row = self.rows.pop(xi)
        a = row.pop(xj)
        new = {xi: 1 / a}
        for y, b in row.items():
            new[y] = -b / a
        for xk, rk in self.rows.items():
            c = rk.pop(xj, None)
            if c:
                for y, b in new.items():
                    v = rk.get(y, 0) + c * b
                    if v:
                        rk[y] = v
                    else:
                        rk.pop(y, None)
        if self.obj is not None:
            c = self.obj.pop(xj, None)
            if c:
                for y, b in new.items():
                    v = self.obj.get(y, 0) + c * b
                    if v:
                        self.obj[y] = v
                    else:
                        self.obj.pop(y, None)
        self.rows[xj] = new

    def _pivot_update(self, xi: int, xj: int, v: Fraction) -> None:
        a = self.rows[xi][xj]
        theta = (v - self.val[xi]) / a
        self._shift(xj, theta)
        self._pivot(xi, xj)

    def check(self) -> bool:
        lb, ub, val = self.lb, self.ub, self.val
        while True:
            bad = None
            for xi in sorted(self.rows):
                v = val[xi]
                if (lb[xi] is not None and v < lb[xi]) or (ub[xi] is not None and v > ub[xi]):
                    bad = xi
                    break
            if bad is None:
                return True
            row = self.rows[bad]
            raise_it = lb[bad] is not None and val[bad] < lb[bad]
            entering = None
            for xj in sorted(row):
                a = row[xj]
                if raise_it:
                    ok = (a > 0 and (ub[xj] is None or val[xj] < ub[xj])) or (
                        a < 0 and (lb[xj] is None or val[xj] > lb[xj]))
                else:
                    ok = (a < 0 and (ub[xj] is None or val[xj] < ub[xj])) or (
                        a > 0 and (lb[xj] is None or val[xj] > lb[xj]))
                if ok:
                    entering = xj
                    break
            if entering is None:
                return False
            self._pivot_update(bad, entering, lb[bad] if raise_it else ub[bad])

    def set_objective(self, expr: dict[int, Fraction]) -> None:
        obj: dict[int, Fraction] = {}
        for x, a in expr.items():
            if x in self.rows:
                for y, b in self.rows[x].items():
                    obj[y] = obj.get(y, 0) + a * b
            else:
                obj[x] = obj.get(x, 0) + a
        self.obj = {y: b for y, b in obj.items() if b}

    def optimize(self) -> Fraction | None:
        """Minimize the objective from a feasible point; ``None`` if unbounded."""
        lb, ub, val = self.lb, self.ub, self.val
        while True:
            entering = None
            for xj in sorted(self.obj):
                d = self.obj[xj]
                if d < 0 and (ub[xj] is None or val[xj] < ub[xj]):
                    entering, direction = xj, 1
                    break
                if d > 0 and (lb[xj] is None or val[xj] > lb[xj]):
                    entering, direction = xj, -1
                    break
            if entering is None:
                return self.value_of(self.obj)
            xj = entering
            if direction > 0:
                step = None if ub[xj] is None else ub[xj] - val[xj]
            else:
                step = None if lb[xj] is None else val[xj] - lb[xj]
            blocker = None
            for xi in sorted(self.rows):
                a = self.rows[xi].get(xj)
                if not a:
                    continue
                rate = a * direction
                if rate > 0 and ub[xi] is not None:
                    t = (ub[xi] - val[xi]) / rate
                elif rate < 0 and lb[xi] is not None:
                    t = (val[xi] - lb[xi]) / -rate
                else:
                    continue
                if step is None or t < step:
                    step, blocker = t, xi
            if step is None:
                return None
            if blocker is None:
                self._shift(xj, direction * step)
            else:
                bound = ub[blocker] if self.rows[blocker][xj] * direction > 0 else lb[blocker]
                self._pivot_update(blocker, xj, bound)


class _Problem:
    """A store compiled to a tableau, with branch and bound on top."""

    def __init__(self, rows: Iterable[LinConstraint], extra_vars: Iterable[str] = (), node_limit: int = 20000):
        names: set[str] = set(extra_vars)
        rows = list(rows)
        for r in rows:
            names.update(r.vars())
        self.names = sorted(names)
        self.index = {x: i for i, x in enumerate(self.names)}
        self.tab = _Tableau(len(self.names))
        self.infeasible = False
        self.diseqs: list[tuple[int, Fraction]] = []  # slack != value
        self.node_limit = node_limit
        self.nodes = 0
        for r in rows:
            self._add(r)

    def _add(self, r: LinConstraint) -> None:
        tab = self.tab
        if not r.coeffs:
            if not {LE: r.const <= 0, EQ: r.const == 0, NE: r.const != 0}[r.rel]:
                self.infeasible = True
            return
        rhs = Fraction(-r.const)
        if len(r.coeffs) == 1 and r.rel != NE:
            x, a = r.coeffs[0]
            i = self.index[x]
            bound = rhs / a
            if r.rel == EQ:
                if bound.denominator != 1:
                    self.infeasible = True
                    return
                ok = tab.set_lower(i, bound) and tab.set_upper(i, bound)
            elif a > 0:
                ok = tab.set_upper(i, Fraction(floor(bound)))
            else:
                ok = tab.set_lower(i, Fraction(ceil(bound)))
            if not ok:
                self.infeasible = True
            return
        s = tab.new_slack({self.index[x]: Fraction(a) for x, a in r.coeffs})
        if r.rel == LE:
            ok = tab.set_upper(s, rhs)
        elif r.rel == EQ:
            ok = tab.set_lower(s, rhs) and tab.set_upper(s, rhs)
        else:
            self.diseqs.append((s, rhs))
            ok = True
        if not ok:
            self.infeasible = True

    def _snapshot(self):
        return list(self.tab.lb), list(self.tab.ub)

    def _restore(self, snap) -> None:
        self.tab.lb, self.tab.ub = list(snap[0]), list(snap[1])

    def _branch_choice(self):
        """Most fractional problem variable, else a violated disequality."""
        tab = self.tab
        best, best_dist = None, None
        for i in range(tab.n):
            v = tab.val[i]
            if v.denominator != 1:
                f = v - floor(v)
                dist = abs(f - Fraction(1, 2))
                if best is None or dist < best_dist:
                    best, best_dist = i, dist
        if best is not None:
            v = tab.val[best]
            return ("var", best, Fraction(floor(v)), Fraction(ceil(v)))
        for s, rhs in self.diseqs:
            if tab.val[s] == rhs:
                return ("ne", s, rhs - 1, rhs + 1)
        return None

    def _tick(self, depth: int) -> None:
        self.nodes += 1
        if self.nodes > self.node_limit:
            raise LiaLimit(f"branch and bound exceeded {self.node_limit} nodes")
        if depth > MAX_DEPTH:
            # an unbounded direction with no integer point keeps branching forever
            raise LiaLimit(f"branch and bound exceeded depth {MAX_DEPTH}")

    def relaxed_sat(self) -> bool:
        return not self.infeasible and self.tab.check()

    def solve(self) -> dict[str, int] | None:
        if self.infeasible:
            return None
        snap = self._snapshot()
        try:
            return self._dfs()
        finally:
            self._restore(snap)

    def _dfs(self, depth: int = 0) -> dict[str, int] | None:
        self._tick(depth)
        if not self.tab.check():
            return None
        choice = self._branch_choice()
        if choice is None:
            return self._model()
        _, x, lo, hi = choice
        snap = self._snapshot()
        if self.tab.set_upper(x, lo):
            m = self._dfs(depth + 1)
            if m is not None:
                return m
        self._restore(snap)
        if self.tab.set_lower(x, hi):
            m = self._dfs(depth + 1)
            if m is not None:
                return m
        self._restore(snap)
        return None

    def _model(self) -> dict[str, int]:
        return {x: int(self.tab.val[i]) for x, i in self.index.items()}

    def minimize(self, objective: dict[str, int], offset: int):
        if self.infeasible:
            return UNSAT
        if self.solve() is None:
            return UNSAT
        self.tab.set_objective({self.index[x]: Fraction(k) for x, k in objective.items() if k})
        if self.tab.optimize() is None:
            return UNBOUNDED
        self.best: tuple[int, dict[str, int]] | None = None
        self._dfs_min()
        if self.best is None:
            return UNSAT
        return Min(self.best[0] + offset, self.best[1])

    def _dfs_min(self, depth: int = 0) -> None:
        self._tick(depth)
        if not self.tab.check():
            return
        z = self.tab.optimize()
        if z is None:
            raise AssertionError("relaxation unbounded below a bounded root")
        if self.best is not None and ceil(z) >= self.best[0]:
            return
        choice = self._branch_choice()
        if choice is None:
            self.best = (int(z), self._model())
            return
        _, x, lo, hi = choice
        snap = self._snapshot()
        if self.tab.set_upper(x, lo):
            self._dfs_min(depth + 1)
        self._restore(snap)
        if self.tab.set_lower(x, hi):
            self._dfs_min(depth + 1)
        self._restore(snap)


def _rows(store) -> list[LinConstraint]:
    return store.rows if isinstance(store, LiaStore) else list(store)


def lia_sat(store, *, node_limit: int = 20000) -> Sat | Unsat:
    """Decide an integer store; ``Sat`` carries a model for every variable."""
    p = _Problem(_rows(store), node_limit=node_limit)
    m = p.solve()
    return UNSAT if m is None else Sat(m)


def lia_relaxed(store) -> bool:
    """Rational feasibility of the store, ignoring disequalities."""
    return _Problem(_rows(store)).relaxed_sat()


def lia_minimize(store, objective: Term, *, node_limit: int = 20000) -> Min | Unsat | Unbounded:
    c, coeffs = as_linear(objective)
    p = _Problem(_rows(store), extra_vars=coeffs, node_limit=node_limit)
    return p.minimize(coeffs, c)
