"""Single-rule soundness and completeness against the brute-force evaluator.

An instance is one atom.  The rule chosen for it is applied once, and the
disjunction of its branches (fresh variables existentially quantified) must
have the same solutions as the atom over the test domain.
"""
from __future__ import annotations

import itertools
import random

from setint import oracle
from setint.ast import (
    EMPTY, FALSE, TRUE, And, Atom, Interval, Kind, Or, Var, const, formula_vars, infer_sorts,
    set_of,
)
from setint.rewrite import rule_for
from setint.unify import Bind, Choice, Context, Goal, MemoEntry, Options

class _AtomicAny(oracle.DomainSpec):
    """Untyped variables range over atomic values only.

    A set-valued element would force fresh sets of sets, which the hidden
    domain cannot hold; restricting the instance space keeps the comparison
    exact.
    """

    def values(self, sort):
        if sort is None:
            return self.ints() + self.urs()
        return super().values(sort)


VISIBLE = _AtomicAny(int_range=(-2, 2), ur_atoms=("a",), max_card=2, cap=10 ** 9)
# fresh sets may need every subset of the element universe, fresh integers
# may count up to its size
HIDDEN = oracle.DomainSpec(int_range=(-7, 7), elem_range=(-2, 2), ur_atoms=("a",), max_card=6,
                           cap=10 ** 9)

INTS = ("K", "M", "I")
SETS = ("A", "B", "C")


def _limit(r):
    return Var(r.choice(INTS)) if r.random() < 0.55 else const(r.randint(-2, 2))


def _elem(r):
    x = r.random()
    if x < 0.3:
        return Var(r.choice(INTS))
    if x < 0.4:
        return Var("X")
    return const(r.randint(-2, 2))


def _set(r, p_interval=0.45):
    x = r.random()
    if x < p_interval:
        return Interval(_limit(r), _limit(r))
    if x < 0.7:
        return Var(r.choice(SETS))
    if x < 0.9:
        rest = Var(r.choice(SETS)) if r.random() < 0.5 else EMPTY
        return set_of([_elem(r) for _ in range(r.randint(1, 2))], rest)
    return EMPTY


_SHAPES = {
    Kind.EQ: "ss", Kind.NEQ: "ss", Kind.IN: "es", Kind.NIN: "es", Kind.SUBSET: "ss",
    Kind.DISJ: "ss", Kind.NDISJ: "ss", Kind.UN: "sss", Kind.NUN: "sss", Kind.SIZE: "sc",
    Kind.NSIZE: "sc", Kind.DIFF: "sss", Kind.NDIFF: "sss", Kind.INTERS: "sss", Kind.NINTERS: "sss",
}


def random_atom(r: random.Random, kind: Kind | None = None) -> Atom:
    kind = kind or r.choice(list(_SHAPES))
    p = r.choice((0.1, 0.45, 0.8))
    args = []
    for c in _SHAPES[kind]:
        if c == "s":
            args.append(_set(r, p))
        elif c == "e":
            args.append(_elem(r))
        else:
            args.append(Var(r.choice(INTS)) if r.random() < 0.6 else const(r.randint(0, 4)))
    return Atom(kind, tuple(args))


def small_enough(a: Atom, limit: int = 600) -> bool:
    space = 1
    for s in infer_sorts(a).values():
        space *= len(VISIBLE.values(s))
    missing = formula_vars(a) - set(infer_sorts(a))
    space *= len(VISIBLE.values(None)) ** len(missing)
    return space <= limit


def _as_formula(items):
    out = []
    for it in items:
        if it is TRUE or isinstance(it, MemoEntry):
            continue
        if it is FALSE:
            return FALSE
        if isinstance(it, Bind):
            out.append(Atom(Kind.EQ, (Var(it.name), it.term)))
        elif isinstance(it, Choice):
            out.append(Or(tuple(_as_formula(b) for b in it.branches)))
        else:
            out.append(it)
    return And(tuple(out))


def apply_rule(a: Atom, options: Options):
    """(rule name, branch formulas, sorts) for one application to ``a``."""
    sorts = infer_sorts(a)
    ctx = Context(options, sorts, taken=formula_vars(a))
    g = Goal()
    g.atoms.append(a)
    rule = rule_for(a, g, ctx)
    if rule is None:
        return None, [], sorts
    branches = [_as_formula(b) for b in rule.make()]
    all_sorts = dict(ctx.base_sorts)
    for b in branches:
        for k, v in infer_sorts(b).items():
            all_sorts.setdefault(k, v)
    return rule.name, branches, all_sorts


def _extend(sols, present, names, sorts):
    """Lift projected solutions over ``present`` to all of ``names``."""
    missing = [n for n in names if n not in present]
    pools = [VISIBLE.values(sorts.get(n)) for n in missing]
    out = set()
    for s in sols:
        base = tuple(s[n] for n in present)
        for extra in itertools.product(*pools):
            env = dict(zip(present, base))
            env.update(zip(missing, extra))
            out.add(tuple(env[n] for n in names))
    return out


def solution_sets(a: Atom, branches, sorts):
    names = sorted(formula_vars(a))
    lhs = {tuple(s[n] for n in names)
           for s in oracle.iter_solutions(a, VISIBLE, project=names, sorts=sorts)}
    rhs = set()
    for b in branches:
        if b is FALSE:
            continue
        present = sorted(formula_vars(b) & set(names))
        sols = list(oracle.iter_solutions(b, VISIBLE, project=present, sorts=sorts, hidden_domain=HIDDEN))
        rhs |= _extend(sols, present, names, sorts)
    return names, lhs, rhs


# rules that rewrite interval atoms (plus the extensional rules they feed),
# with the atom kind that triggers each
TARGETS = {
    "eq:int": Kind.EQ, "e:ext": Kind.EQ, "neq:int": Kind.NEQ, "neq:ext": Kind.NEQ,
    "in": Kind.IN, "in:ext": Kind.IN, "nin": Kind.NIN, "nin:ext": Kind.NIN,
    "subset": Kind.SUBSET, "un:subsetext": Kind.SUBSET,
    "disj:ext": Kind.DISJ, "disj:int": Kind.DISJ, "disj:eager": Kind.DISJ, "ndisj:all": Kind.NDISJ,
    "un:1": Kind.UN, "un:3": Kind.UN, "un:12": Kind.UN, "un:13": Kind.UN, "un:123": Kind.UN,
    "un:ext1": Kind.UN, "un:ext2": Kind.UN, "un:eager": Kind.UN, "nun": Kind.NUN,
    "size:ext": Kind.SIZE, "size:size": Kind.SIZE, "size:nsize": Kind.NSIZE, "nsize": Kind.NSIZE,
    "inters:12": Kind.INTERS, "inters": Kind.INTERS, "ninters": Kind.NINTERS,
    "diff:12": Kind.DIFF, "diff": Kind.DIFF, "ndiff": Kind.NDIFF,
}


def instances(rule: str, n: int, seed: int = 0, max_tries: int = 200000):
    """Up to ``n`` distinct random atoms that ``rule`` rewrites, with its branches."""
    r = random.Random(f"{rule}/{seed}")
    kind = TARGETS[rule]
    seen = set()
    out = []
    for i in range(max_tries):
        a = random_atom(r, kind)
        if a in seen or not small_enough(a):
            continue
        seen.add(a)
        opts = Options() if i % 2 else Options(eager_width=0)
        name, branches, sorts = apply_rule(a, opts)
        if name == rule:
            out.append((a, branches, sorts))
            if len(out) == n:
                break
    return out
