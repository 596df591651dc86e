"""Top-level solving: the main rewrite loop, the cardinality phase and answers.

``solve`` streams answers.  Each answer carries the irreducible residual
reached by the main loop (its integer part rendered back as constraints),
the bindings of the query variables, and a witness goal from which
``check_answer`` builds a concrete model.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterator

from . import lia, oracle
from .ast import (
    EMPTY, And, App, Atom, Cons, Formula, IntTerm, Interval, Kind, Sort, Term, Var,
    atom_vars, formula_vars, infer_sorts, int_const, is_ground, lin, set_of, show_atom, show_term,
    split_set, term_vars,
)
from .cardsolver import build_venn, element_constraints, materialize_minsol, minsol_candidates, MinSol
from .lia import EQ, LE, NE
from .rewrite import gen_size_leq, remove_neq, step_loop, to_items, _finish
from .unify import Bind, Context, Goal, Options, ResourceLimit, Stats, apply_term, extend

__all__ = [
    "Answer", "Verdict", "Options", "ResourceLimit", "solve", "answers", "is_sat", "prove",
    "check_answer", "canonical", "model_of",
]


@dataclass
class Witness:
    goal: Goal
    ints: dict[str, int]
    sorts: dict


@dataclass
class Answer:
    bindings: dict[str, Term]
    residual: list[Atom]
    witness: Witness | None = None

    def text(self) -> str:
        return format_answer(self)

    def __str__(self) -> str:
        return format_answer(self)


@dataclass
class Verdict:
    status: str                       # "sat", "unsat" or "unknown"
    answers: list[Answer] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status == "sat"


# ---------------------------------------------------------------- rows back to atoms

def row_atom(r: lia.LinConstraint) -> Atom:
    """Render a normalized row as a readable integer constraint."""
    coeffs = dict(r.coeffs)
    if r.rel == EQ:
        unit = [v for v, k in r.coeffs if abs(k) == 1]
        if unit:
            v = _pick_lhs(unit)
            k = coeffs.pop(v)
            # k*v + rest + c = 0  ->  v = -(rest + c)/k
            rest = {w: -j * k for w, j in coeffs.items()}
            return Atom(Kind.INT_EQ, (Var(v), lin(-r.const * k, rest)))
    pos = {v: k for v, k in r.coeffs if k > 0}
    neg = {v: -k for v, k in r.coeffs if k < 0}
    c = r.const
    left, right = lin(max(c, 0), pos), lin(max(-c, 0), neg)
    kind = {LE: Kind.INT_LEQ, EQ: Kind.INT_EQ, NE: Kind.INT_NEQ}[r.rel]
    return Atom(kind, (left, right))


def _pick_lhs(names: list[str]) -> str:
    """Prefer the most recently introduced variable on the left of ``is``."""
    return max(names, key=_fresh_rank)


def _fresh_rank(n: str):
    digits = "".join(ch for ch in n if ch.isdigit())
    return (n.startswith("_"), int(digits) if digits else -1, n)


# ---------------------------------------------------------------- search

def _classify(g: Goal):
    phi1, sub, rest = [], [], []
    for a in g.atoms:
        if isinstance(a, Atom) and a.kind in (Kind.UN, Kind.DISJ, Kind.SIZE):
            phi1.append(a)
        elif isinstance(a, Atom) and a.kind is Kind.SUBSET:
            sub.append(a)
        else:
            rest.append(a)
    return phi1, sub, rest


def _solutions(g: Goal, ctx: Context, depth: int = 0) -> Iterator[tuple[Goal, Witness]]:
    for irr in step_loop(g, ctx):
        branches = remove_neq(irr, ctx)
        if branches is not None:
            for b in branches:
                yield from _solutions(b, ctx, depth)
            continue
        ctx.stats.passes += 1
        w = _final(irr, ctx, depth)
        if w is not None:
            yield irr, w


def _final(g: Goal, ctx: Context, depth: int) -> Witness | None:
    """Decide an irreducible goal; return a witness when it is satisfiable."""
    phi1, sub, _ = _classify(g)
    rows = g.int_rows()
    nodes = ctx.options.lia_nodes
    if not phi1:
        ctx.stats.lia_calls += 1
        res = lia.lia_sat(rows, node_limit=nodes)
        if isinstance(res, lia.Sat):
            return Witness(g, res.model, _sorts_view(g, ctx))
        return None
    if not sub:
        system = build_venn(phi1, rows, ctx.options.venn_cap)
        ctx.stats.lia_calls += 1
        res = lia.lia_sat(system.rows, node_limit=nodes)
        if not isinstance(res, lia.Sat):
            return None
        counts = {r: res.model.get(system.region_var[r], 0) for r in system.regions}
        candidates = [MinSol(res.model, counts, system)]
    else:
        candidates = minsol_candidates(phi1, rows, node_limit=nodes, cap=ctx.options.venn_cap,
                                       limit=ctx.options.minsol_models)
    int_sets = {a.args[0].name for a in sub if isinstance(a.args[0], Var)}
    for idx, sol in enumerate(candidates):
        ctx.stats.lia_calls += 1
        if idx:
            ctx.stats.minsol_fallbacks += 1
        sg = _materialized_goal(g, sol, int_sets, ctx)
        if sg is None:
            continue
        for _, w in _solutions(sg, ctx, depth + 1):
            return w
    return None


def _materialized_goal(g: Goal, sol: MinSol, int_sets: set[str], ctx: Context) -> Goal | None:
    mat = materialize_minsol(sol, int_sets, lambda is_int: ctx.fresh("y", Sort.INT if is_int else None))
    sg = g.copy()
    sg.atoms = [a for a in sg.atoms if not (isinstance(a, Atom) and a.kind in (Kind.UN, Kind.DISJ, Kind.SIZE))]
    sg.stable = {}
    items: list = []
    for name, elems in mat.sets.items():
        items.append(Bind(name, set_of(elems)))
    for name, value in mat.size_values.items():
        items.append(Atom(Kind.INT_EQ, (Var(name), IntTerm(value, ()))))
    items.extend(element_constraints(mat))
    if not (extend(sg, items, ctx) and _finish(sg, ctx)):
        return None
    return sg


def _sorts_view(g: Goal, ctx: Context) -> dict:
    out = dict(ctx.base_sorts)
    out.update(g.sorts)
    return out


def _initial(formula: Formula, ctx: Context) -> Goal | None:
    g = Goal()
    if not extend(g, to_items(gen_size_leq(formula)), ctx) or not _finish(g, ctx):
        return None
    return g


def _make_context(formula: Formula, options: Options | None, trace) -> Context:
    sorts = infer_sorts(formula)
    names = formula_vars(formula)
    ctx = Context(options, sorts, trace, taken=names)
    if ctx.options.timeout is not None:
        ctx.deadline = time.monotonic() + ctx.options.timeout
    return ctx


def answers(formula: Formula, options: Options | None = None, *, trace=None,
            stats: Stats | None = None) -> Iterator[Answer]:
    """Lazily enumerate the answers of ``formula``.

    Raises :class:`ResourceLimit` when the timeout or branch cap is hit and
    ``lia.LiaLimit`` when an integer subproblem exhausts its node budget.
    """
    ctx = _make_context(formula, options, trace)
    if stats is not None:
        ctx.stats = stats
    g = _initial(formula, ctx)
    if g is None:
        return
    query_vars = sorted(v for v in formula_vars(formula) if not v.startswith("_"))
    seen: set = set()
    try:
        for irr, w in _solutions(g, ctx):
            a = _answer(irr, w, query_vars)
            key = canonical([Atom(Kind.EQ, (Var(v), t)) for v, t in a.bindings.items()] + a.residual)
            if key in seen:
                continue
            seen.add(key)
            ctx.stats.answers += 1
            yield a
    except lia.LiaLimit as exc:
        raise ResourceLimit(str(exc)) from exc


def _answer(irr: Goal, w: Witness, query_vars: list[str]) -> Answer:
    bindings = {v: irr.subst[v] for v in query_vars if v in irr.subst}
    residual = [a for a in irr.atoms if isinstance(a, Atom)]
    visible = set(query_vars)
    for t in bindings.values():
        term_vars(t, visible)
    for a in residual:
        atom_vars(a, visible)
    residual += [row_atom(r) for r in project_rows(irr.ints, visible)]
    return Answer(bindings, residual, w)


def project_rows(rows: list, visible: set[str]) -> list:
    """Drop rows whose hidden integer variable can always be chosen to satisfy them.

    A hidden variable that occurs in no equation and only with one sign in
    bounds is unbounded in a direction, so every row mentioning it holds
    for a suitable value; those rows carry no information about the rest.
    """
    rows = list(rows)
    changed = True
    while changed:
        changed = False
        names = {v for r in rows for v, _ in r.coeffs} - visible
        for v in sorted(names):
            mine = [r for r in rows if any(x == v for x, _ in r.coeffs)]
            signs = {k > 0 for r in mine if r.rel == LE for x, k in r.coeffs if x == v}
            if any(r.rel == EQ for r in mine) or len(signs) > 1:
                continue
            rows = [r for r in rows if r not in mine]
            changed = True
    return rows


solve_answers = answers


def solve(formula: Formula, options: Options | None = None, *, max_answers: int | None = 1,
          trace=None) -> Verdict:
    """Run the solver and collect up to ``max_answers`` answers."""
    stats = Stats()
    out: list[Answer] = []
    try:
        for a in answers(formula, options, trace=trace, stats=stats):
            out.append(a)
            if max_answers is not None and len(out) >= max_answers:
                break
    except ResourceLimit as exc:
        return Verdict("unknown" if not out else "sat", out, stats.as_dict(), str(exc))
    return Verdict("sat" if out else "unsat", out, stats.as_dict())


def is_sat(formula: Formula, options: Options | None = None) -> bool:
    v = solve(formula, options)
    if v.status == "unknown":
        raise ResourceLimit(v.reason)
    return v.sat


@dataclass
class ProofResult:
    theorem: bool
    counterexample: Answer | None = None
    stats: dict = field(default_factory=dict)

    def __str__(self) -> str:
        if self.theorem:
            return "THEOREM"
        return "COUNTEREXAMPLE\n" + format_answer(self.counterexample)


def prove(negated: Formula, options: Options | None = None) -> ProofResult:
    """A conjecture holds iff its (user-written) negation has no answer."""
    v = solve(negated, options)
    if v.status == "unknown":
        raise ResourceLimit(v.reason)
    if v.sat:
        return ProofResult(False, v.answers[0], v.stats)
    return ProofResult(True, None, v.stats)


# ---------------------------------------------------------------- models

def model_of(w: Witness, names) -> dict:
    """Concrete values for ``names`` read off a witness goal.

    Unbound integer variables take the LIA model value; set variables become
    the empty set except where they sit on one side of an inequality, where
    they receive a fresh singleton; untyped leftovers become distinct fresh
    ur-atoms.
    """
    g = w.goal
    sorts = w.sorts
    neq_sides = set()
    for a in g.atoms:
        if isinstance(a, Atom) and a.kind is Kind.NEQ:
            for t in a.args:
                if isinstance(t, Var):
                    neq_sides.add(t.name)
    env: dict = {}
    counter = [0]

    def fresh_atom():
        counter[0] += 1
        return (f"w{counter[0]}",)

    def base(name: str):
        if name in env:
            return env[name]
        s = sorts.get(name)
        if name in w.ints or s is Sort.INT:
            val = w.ints.get(name, 0)
        elif s is Sort.SET:
            val = frozenset({fresh_atom()}) if name in neq_sides else frozenset()
        else:
            val = fresh_atom()
        env[name] = val
        return val

    out = {}
    for n in names:
        t = g.subst.get(n, Var(n))
        for v in sorted(term_vars(t)):
            base(v)
        out[n] = oracle.term_value(t, env)
    return out


def check_answer(formula: Formula, answer: Answer) -> bool:
    """Evaluate ``formula`` under the model built from the answer's witness."""
    if answer.witness is None:
        return False
    model = model_of(answer.witness, sorted(formula_vars(formula)))
    return oracle.eval(formula, model)


# ---------------------------------------------------------------- rendering and canonical form

def format_answer(a: Answer) -> str:
    """Bindings sorted by name, then the residual in canonical order.

    Interval limits and cardinalities that are compound expressions are
    named by fresh variables defined with ``is``, so the text re-parses.
    """
    taken: set[str] = set(a.bindings)
    for t in a.bindings.values():
        term_vars(t, taken)
    for x in a.residual:
        atom_vars(x, taken)
    lifter = _Lifter(taken)
    parts = [f"{v} = {show_term(lifter.term(_tidy(t)))}" for v, t in sorted(a.bindings.items())]
    body = [lifter.atom(x) for x in a.residual]
    parts += sorted(show_atom(x) for x in body + lifter.defs)
    return " & ".join(parts) if parts else "true"


def _tidy(t: Term) -> Term:
    """Ground finite sets with their elements sorted and duplicates dropped."""
    if not isinstance(t, Cons):
        return t
    elems, rest = split_set(t)
    if rest != EMPTY or not is_ground(t):
        return t
    seen: dict[str, Term] = {}
    for e in map(_tidy, elems):
        seen.setdefault(show_term(e), e)

    def key(e):
        n = int_const(e) if isinstance(e, IntTerm) else None
        return (0, n, "") if n is not None else (1, 0, show_term(e))
    return set_of(sorted(seen.values(), key=key))


class _Lifter:
    def __init__(self, taken: set[str]):
        self.taken = taken
        self.defs: list[Atom] = []
        self.names: dict = {}
        self.n = 0

    def simple(self, t: Term) -> Term:
        if isinstance(t, Var) or (isinstance(t, IntTerm) and not t.coeffs):
            return t
        if t in self.names:
            return self.names[t]
        while True:
            self.n += 1
            name = f"_L{self.n}"
            if name not in self.taken:
                break
        self.taken.add(name)
        v = Var(name)
        self.names[t] = v
        self.defs.append(Atom(Kind.INT_EQ, (v, t)))
        return v

    def term(self, t: Term) -> Term:
        if isinstance(t, Interval):
            return Interval(self.simple(t.lo), self.simple(t.hi))
        if isinstance(t, Cons):
            return Cons(self.term(t.elem), self.term(t.rest))
        if isinstance(t, App):
            return App(t.functor, tuple(self.term(x) for x in t.args))
        return t

    def atom(self, a: Atom) -> Atom:
        args = tuple(self.term(x) for x in a.args)
        if a.kind in (Kind.SIZE, Kind.NSIZE):
            args = (args[0], self.simple(args[1]))
        return Atom(a.kind, args)


def answer_formula(a: Answer) -> Formula:
    items = [Atom(Kind.EQ, (Var(v), t)) for v, t in sorted(a.bindings.items())]
    items += list(a.residual)
    return And(tuple(items)) if items else And(())


def canonical(atoms: list[Atom], keep=lambda n: not n.startswith("_")) -> tuple[str, ...]:
    """Sorted rendering with fresh variables renumbered by first occurrence.

    Atoms are first ordered by their shape with fresh names blanked, then
    fresh variables are numbered in that order, so two residuals that differ
    only in fresh-variable names and atom order render identically.
    """
    def shape(a: Atom) -> str:
        s = show_atom(a)
        for v in sorted(atom_vars(a), key=len, reverse=True):
            if not keep(v):
                s = s.replace(v, "?")
        return s

    ordered = sorted(atoms, key=shape)
    names: dict[str, str] = {}
    for a in ordered:
        for t in a.args:
            for v in _vars_in_order(t):
                if not keep(v) and v not in names:
                    names[v] = f"_V{len(names) + 1}"
    env = {old: Var(new) for old, new in names.items()}
    return tuple(sorted(show_atom(Atom(a.kind, tuple(apply_term(t, env) for t in a.args))) for a in ordered))


def _vars_in_order(t: Term) -> list[str]:
    out: list[str] = []
    if isinstance(t, Var):
        out.append(t.name)
    elif isinstance(t, IntTerm):
        out.extend(v for v, _ in t.coeffs)
    elif isinstance(t, Cons):
        out += _vars_in_order(t.elem) + _vars_in_order(t.rest)
    elif isinstance(t, Interval):
        out += _vars_in_order(t.lo) + _vars_in_order(t.hi)
    elif isinstance(t, App):
        for x in t.args:
            out += _vars_in_order(x)
    return out
