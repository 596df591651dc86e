"""Deciding conjunctions of ``un``, ``disj`` and ``size`` over set variables.

The set variables of each connected component induce Venn regions, one per
non-empty subset of the component.  Every region gets an integer cardinality;
``un`` and ``disj`` atoms force some regions to be empty and ``size(A, m)``
becomes ``m = sum of the regions inside A``.  Together with the integer rows
of the formula this is a linear integer problem.

A small DPLL enumerator over region emptiness literals supplies alternative
region patterns when the cardinality-minimal solution cannot be turned into
a model of the rest of the formula.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

from . import lia
from .ast import Atom, IntTerm, Kind, Term, Var, as_linear, lin
from .lia import EQ, LE, LinConstraint


class MalformedInput(ValueError):
    """An atom outside the irreducible ``un``/``disj``/``size`` fragment."""


@dataclass
class VennSystem:
    components: list[list[str]]
    regions: list[tuple[int, int]]          # (component, bitmask) of live regions
    region_var: dict[tuple[int, int], str]
    rows: list[LinConstraint]
    size_terms: list[Term]
    set_index: dict[str, tuple[int, int]] = field(default_factory=dict)  # var -> (component, bit)

    def regions_of(self, name: str) -> list[tuple[int, int]]:
        comp, bit = self.set_index[name]
        return [r for r in self.regions if r[0] == comp and r[1] & bit]


def _set_args(a: Atom) -> list[str]:
    if a.kind is Kind.SIZE:
        t = a.args[0]
        if not isinstance(t, Var):
            raise MalformedInput(f"size over a non-variable: {a!r}")
        m = a.args[1]
        if not isinstance(m, (Var, IntTerm)) or (isinstance(m, IntTerm) and m.coeffs):
            raise MalformedInput(f"size with a compound cardinality: {a!r}")
        return [t.name]
    if a.kind in (Kind.UN, Kind.DISJ):
        names = []
        for t in a.args:
            if not isinstance(t, Var):
                raise MalformedInput(f"non-variable argument in {a!r}")
            names.append(t.name)
        return names
    raise MalformedInput(f"unexpected atom {a!r}")


def build_venn(atoms: list[Atom], int_rows=(), cap: int = 16) -> VennSystem:
    """Region encoding of ``atoms`` plus the given integer rows."""
    parent: dict[str, str] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    per_atom = []
    for a in atoms:
        names = _set_args(a)
        per_atom.append(names)
        for n in names:
            parent.setdefault(n, n)
        for n in names[1:]:
            ra, rb = find(names[0]), find(n)
            if ra != rb:
                parent[ra] = rb
    groups: dict[str, list[str]] = {}
    for n in sorted(parent):
        groups.setdefault(find(n), []).append(n)
    components = list(groups.values())
    set_index = {}
    for ci, comp in enumerate(components):
        if len(comp) > cap:
            raise lia.LiaLimit(f"{len(comp)} set variables in one component")
        for bi, n in enumerate(comp):
            set_index[n] = (ci, 1 << bi)

    dead: set[tuple[int, int]] = set()
    kill = [[] for _ in components]   # per component: predicates on masks
    for a, names in zip(atoms, per_atom):
        if a.kind is Kind.SIZE:
            continue
        ci = set_index[names[0]][0]
        bits = [set_index[n][1] for n in names]
        if a.kind is Kind.UN:
            ba, bb, bc = bits
            kill[ci].append(lambda m, ba=ba, bb=bb, bc=bc: bool(m & (ba | bb)) != bool(m & bc))
        else:
            ba, bb = bits
            kill[ci].append(lambda m, ba=ba, bb=bb: bool(m & ba) and bool(m & bb))
    regions = []
    for ci, comp in enumerate(components):
        for mask in range(1, 1 << len(comp)):
            if any(k(mask) for k in kill[ci]):
                dead.add((ci, mask))
            else:
                regions.append((ci, mask))
    region_var = {r: f"#r{r[0]}.{r[1]}" for r in regions}
    rows: list[LinConstraint] = []
    for r in regions:
        rows.append(lia.normalize({region_var[r]: -1}, 0, LE))
    sizes = []
    system = VennSystem(components, regions, region_var, rows, sizes, set_index)
    for a, names in zip(atoms, per_atom):
        if a.kind is not Kind.SIZE:
            continue
        m = a.args[1]
        c, coeffs = as_linear(m)
        for r in system.regions_of(names[0]):
            v = region_var[r]
            coeffs[v] = coeffs.get(v, 0) - 1
        row = lia.normalize(coeffs, c, EQ)
        if row is False:
            rows.append(LinConstraint((), 1, LE))
        elif row is not True:
            rows.append(row)
        sizes.append(m)
    for r in int_rows:
        if r is False:
            rows.append(LinConstraint((), 1, LE))
        elif r is not True:
            rows.append(r)
    return system


def _objective(system: VennSystem) -> Term:
    c, acc = 0, {}
    for m in system.size_terms:
        mc, mm = as_linear(m)
        c += mc
        for v, k in mm.items():
            acc[v] = acc.get(v, 0) + k
    if not acc:
        for r in system.regions:
            acc[system.region_var[r]] = 1
    return lin(c, acc)


def solve_size(atoms: list[Atom], int_rows=(), *, node_limit: int = 20000, cap: int = 16):
    """Satisfiability of the cardinality fragment: ``lia.Sat`` or ``lia.UNSAT``."""
    system = build_venn(atoms, int_rows, cap)
    return lia.lia_sat(system.rows, node_limit=node_limit)


@dataclass
class MinSol:
    model: dict[str, int]
    counts: dict[tuple[int, int], int]
    system: VennSystem


def solve_size_minsol(atoms: list[Atom], int_rows=(), *, node_limit: int = 20000, cap: int = 16,
                      extra_rows=()) -> MinSol | None:
    """Solution minimizing the sum of the cardinality terms, or None if unsat."""
    system = build_venn(atoms, int_rows, cap)
    return _minimize(system, list(extra_rows), node_limit)


def _minimize(system: VennSystem, extra: list, node_limit: int) -> MinSol | None:
    rows = system.rows + extra
    res = lia.lia_minimize(rows, _objective(system), node_limit=node_limit)
    if isinstance(res, lia.Min):
        model = res.model
    elif res is lia.UNBOUNDED:
        sat = lia.lia_sat(rows, node_limit=node_limit)
        if not isinstance(sat, lia.Sat):
            return None
        model = sat.model
    else:
        return None
    counts = {r: model.get(system.region_var[r], 0) for r in system.regions}
    return MinSol(model, counts, system)


# ---------------------------------------------------------------- propositional layer

class SatInstance:
    """CNF over variables ``0..n-1``; literals are ``+(v+1)`` / ``-(v+1)``."""

    def __init__(self, nvars: int, clauses: list[list[int]]):
        self.nvars = nvars
        self.clauses = [list(c) for c in clauses]

    def _propagate(self, assign: dict[int, bool]) -> bool:
        changed = True
        while changed:
            changed = False
            for cl in self.clauses:
                free = None
                nfree = 0
                sat = False
                for lit in cl:
                    v, want = abs(lit) - 1, lit > 0
                    val = assign.get(v)
                    if val is None:
                        nfree += 1
                        free = lit
                    elif val == want:
                        sat = True
                        break
                if sat:
                    continue
                if nfree == 0:
                    return False
                if nfree == 1:
                    assign[abs(free) - 1] = free > 0
                    changed = True
        return True

    def models(self, prefer: dict[int, bool] | None = None) -> Iterator[dict[int, bool]]:
        """All total models, depth first; ``prefer`` picks the first polarity tried."""
        prefer = prefer or {}

        def go(assign):
            if not self._propagate(assign):
                return
            for v in range(self.nvars):
                if v not in assign:
                    break
            else:
                yield dict(assign)
                return
            first = prefer.get(v, False)
            for val in (first, not first):
                a2 = dict(assign)
                a2[v] = val
                yield from go(a2)

        yield from go({})

    def solve(self) -> dict[int, bool] | None:
        return next(self.models(), None)


def region_patterns(system: VennSystem, first: dict[tuple[int, int], int] | None = None,
                    atoms: list[Atom] = ()) -> Iterator[dict[tuple[int, int], bool]]:
    """Emptiness patterns of the live regions that respect constant sizes."""
    index = {r: i for i, r in enumerate(system.regions)}
    clauses = []
    for a in atoms:
        if a.kind is Kind.SIZE and isinstance(a.args[1], IntTerm) and a.args[1].const > 0:
            rs = system.regions_of(a.args[0].name)
            clauses.append([index[r] + 1 for r in rs])
    prefer = {index[r]: bool(c) for r, c in (first or {}).items()}
    inst = SatInstance(len(system.regions), clauses)
    for m in inst.models(prefer):
        yield {r: m[index[r]] for r in system.regions}


def pattern_rows(system: VennSystem, pattern: dict[tuple[int, int], bool]) -> list:
    out = []
    for r, nonempty in pattern.items():
        v = system.region_var[r]
        out.append(lia.normalize({v: -1}, 1, LE) if nonempty else lia.normalize({v: 1}, 0, EQ))
    return out


def minsol_candidates(atoms: list[Atom], int_rows=(), *, node_limit: int = 20000, cap: int = 16,
                      limit: int = 64) -> Iterator[MinSol]:
    """The global minimal solution first, then minimal solutions per region pattern."""
    system = build_venn(atoms, int_rows, cap)
    best = _minimize(system, [], node_limit)
    if best is None:
        return
    yield best
    seen = {tuple(bool(best.counts[r]) for r in system.regions)}
    tried = 0
    for pat in region_patterns(system, best.counts, atoms):
        key = tuple(pat[r] for r in system.regions)
        if key in seen:
            continue
        seen.add(key)
        tried += 1
        if tried > limit:
            return
        sol = _minimize(system, pattern_rows(system, pat), node_limit)
        if sol is not None:
            yield sol


# ---------------------------------------------------------------- materialization

@dataclass
class Materialized:
    sets: dict[str, list[Var]]              # set variable -> element variables
    int_elements: list[list[Var]]           # per region, integer-sorted elements
    any_elements: list[list[Var]]
    size_values: dict[str, int]             # cardinality variables fixed by the model

    def elements(self) -> list[Var]:
        out = []
        for grp in self.int_elements + self.any_elements:
            out.extend(grp)
        return out


def materialize_minsol(sol: MinSol, int_sets: set[str], fresh: Callable[[bool], Var]) -> Materialized:
    """Turn region counts into extensional sets of fresh elements.

    Regions lying inside a variable of ``int_sets`` get integer elements
    (they will be bounded by an interval); the rest get untyped ones.
    ``fresh(is_int)`` supplies new element variables.
    """
    system = sol.system
    sets: dict[str, list[Var]] = {n: [] for comp in system.components for n in comp}
    ints, anys = [], []
    for r in system.regions:
        count = sol.counts[r]
        if count <= 0:
            continue
        ci, mask = r
        members = [n for n in system.components[ci] if system.set_index[n][1] & mask]
        is_int = any(n in int_sets for n in members)
        elems = [fresh(is_int) for _ in range(count)]
        (ints if is_int else anys).append(elems)
        for n in members:
            sets[n].extend(elems)
    size_values = {}
    for m in system.size_terms:
        if isinstance(m, Var):
            size_values[m.name] = sol.model.get(m.name, 0)
    return Materialized(sets, ints, anys, size_values)


def element_constraints(mat: Materialized) -> list[Atom]:
    """Distinctness of materialized elements, ordered inside integer regions."""
    out = []
    for grp in mat.int_elements:
        for a, b in zip(grp, grp[1:]):
            out.append(Atom(Kind.INT_LT, (a, b)))
    ints = mat.int_elements
    for i, g1 in enumerate(ints):
        for g2 in ints[i + 1:]:
            for a in g1:
                for b in g2:
                    out.append(Atom(Kind.INT_NEQ, (a, b)))
    everything = mat.elements()
    int_names = {v.name for g in ints for v in g}
    for i, a in enumerate(everything):
        for b in everything[i + 1:]:
            if a.name in int_names and b.name in int_names:
                continue
            out.append(Atom(Kind.NEQ, (a, b)))
    return out
