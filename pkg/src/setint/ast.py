"""Terms, constraints and formulas of the set/interval language.

Three sorts exist: sets, integers and ur-elements.  Integer-sorted terms are
either a bare ``Var`` or a normalized linear ``IntTerm``; a variable that
appears in an integer position is still a plain ``Var`` so that the same
variable can also occur as a set element.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import gcd
from typing import Iterator, Union


class Sort(Enum):
    SET = "Set"
    INT = "Int"
    UR = "Ur"


class NonLinear(ValueError):
    """Raised when an integer expression multiplies two non-constant terms."""


class SortError(ValueError):
    """A variable is used at two incompatible sorts."""


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class IntTerm:
    """Linear integer term ``const + sum(coef * var)``.

    ``coeffs`` is sorted by variable name and never holds a zero coefficient.
    A term that is exactly one variable with coefficient 1 is represented by
    ``Var`` instead (see :func:`lin`).
    """

    const: int
    coeffs: tuple[tuple[str, int], ...] = ()

    @property
    def is_const(self) -> bool:
        return not self.coeffs

    def __repr__(self) -> str:
        return show_term(self)


@dataclass(frozen=True, slots=True)
class App:
    """Ur-term ``functor(args...)``; a constant has no arguments."""

    functor: str
    args: tuple = ()

    def __repr__(self) -> str:
        return show_term(self)


class _Empty:
    __slots__ = ()
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "{}"

    def __reduce__(self):
        return (_Empty, ())


EMPTY = _Empty()


@dataclass(frozen=True, slots=True)
class Cons:
    """Extensional set ``{elem / rest}``."""

    elem: "Term"
    rest: "Term"

    def __repr__(self) -> str:
        return show_term(self)


@dataclass(frozen=True, slots=True)
class Interval:
    """Integer interval ``[lo, hi]``; empty when ``hi < lo``."""

    lo: "Term"
    hi: "Term"

    def __repr__(self) -> str:
        return show_term(self)


Term = Union[Var, IntTerm, App, _Empty, Cons, Interval]


# ---------------------------------------------------------------- integers

def const(value: int) -> IntTerm:
    return IntTerm(int(value), ())


ZERO = const(0)
ONE = const(1)


def lin(c: int, coeffs: dict[str, int]) -> Term:
    """Build a canonical integer term from a constant and a coefficient map."""
    items = tuple(sorted((v, k) for v, k in coeffs.items() if k != 0))
    if c == 0 and len(items) == 1 and items[0][1] == 1:
        return Var(items[0][0])
    return IntTerm(c, items)


def as_linear(t: Term) -> tuple[int, dict[str, int]]:
    """Split an integer term into constant and coefficient map."""
    if isinstance(t, Var):
        return 0, {t.name: 1}
    if isinstance(t, IntTerm):
        return t.const, dict(t.coeffs)
    raise TypeError(f"not an integer term: {t!r}")


def is_int_term(t: Term) -> bool:
    return isinstance(t, IntTerm)


def int_const(t: Term) -> int | None:
    if isinstance(t, IntTerm) and not t.coeffs:
        return t.const
    return None


def add(a: Term, b: Term, scale_b: int = 1) -> Term:
    ca, ma = as_linear(a)
    cb, mb = as_linear(b)
    for v, k in mb.items():
        ma[v] = ma.get(v, 0) + scale_b * k
    return lin(ca + scale_b * cb, ma)


def sub(a: Term, b: Term) -> Term:
    return add(a, b, -1)


def scale(a: Term, k: int) -> Term:
    c, m = as_linear(a)
    return lin(c * k, {v: x * k for v, x in m.items()})


def plus(a: Term, k: int) -> Term:
    return add(a, const(k))


@dataclass(frozen=True, slots=True)
class Arith:
    """Raw arithmetic expression before normalization (``+``, ``-``, ``*``)."""

    op: str
    left: object
    right: object = None


def normalize_int(expr) -> Term:
    """Collect a raw arithmetic expression into canonical linear form.

    ``expr`` may contain Python ints, ``Var``, ``IntTerm`` and ``Arith``
    nodes.  Products of two non-constant factors raise :class:`NonLinear`.
    """
    if isinstance(expr, bool):
        raise TypeError("booleans are not integer terms")
    if isinstance(expr, int):
        return const(expr)
    if isinstance(expr, (Var, IntTerm)):
        return expr
    if isinstance(expr, Arith):
        if expr.op == "neg":
            return scale(normalize_int(expr.left), -1)
        left = normalize_int(expr.left)
        right = normalize_int(expr.right)
        if expr.op == "+":
            return add(left, right)
        if expr.op == "-":
            return sub(left, right)
        if expr.op == "*":
            kl, kr = int_const(left), int_const(right)
            if kl is not None:
                return scale(right, kl)
            if kr is not None:
                return scale(left, kr)
            raise NonLinear(f"non-linear product {show_term(left)} * {show_term(right)}")
        raise ValueError(f"unknown operator {expr.op!r}")
    raise TypeError(f"not an integer expression: {expr!r}")


def coeff_gcd(coeffs) -> int:
    g = 0
    for _, k in coeffs:
        g = gcd(g, k)
    return g


# ---------------------------------------------------------------- constraints

class Kind(Enum):
    EQ = "eq"
    NEQ = "neq"
    IN = "in"
    NIN = "nin"
    UN = "un"
    NUN = "nun"
    DISJ = "disj"
    NDISJ = "ndisj"
    SIZE = "size"
    NSIZE = "nsize"
    SUBSET = "subset"
    INTERS = "inters"
    NINTERS = "ninters"
    DIFF = "diff"
    NDIFF = "ndiff"
    NINTEGER = "ninteger"
    INT_LEQ = "leq"
    INT_LT = "lt"
    INT_EQ = "ieq"
    INT_NEQ = "ineq"


_S, _I, _ANY = Sort.SET, Sort.INT, None

SIGNATURES: dict[Kind, tuple] = {
    Kind.EQ: (_ANY, _ANY),
    Kind.NEQ: (_ANY, _ANY),
    Kind.IN: (_ANY, _S),
    Kind.NIN: (_ANY, _S),
    Kind.UN: (_S, _S, _S),
    Kind.NUN: (_S, _S, _S),
    Kind.DISJ: (_S, _S),
    Kind.NDISJ: (_S, _S),
    Kind.SIZE: (_S, _I),
    Kind.NSIZE: (_S, _I),
    Kind.SUBSET: (_S, _S),
    Kind.INTERS: (_S, _S, _S),
    Kind.NINTERS: (_S, _S, _S),
    Kind.DIFF: (_S, _S, _S),
    Kind.NDIFF: (_S, _S, _S),
    Kind.NINTEGER: (_ANY,),
    Kind.INT_LEQ: (_I, _I),
    Kind.INT_LT: (_I, _I),
    Kind.INT_EQ: (_I, _I),
    Kind.INT_NEQ: (_I, _I),
}

INT_KINDS = frozenset({Kind.INT_LEQ, Kind.INT_LT, Kind.INT_EQ, Kind.INT_NEQ})


@dataclass(frozen=True, slots=True)
class Atom:
    kind: Kind
    args: tuple

    def __repr__(self) -> str:
        return show_atom(self)


@dataclass(frozen=True, slots=True)
class And:
    items: tuple

    def __repr__(self) -> str:
        return show_formula(self)


@dataclass(frozen=True, slots=True)
class Or:
    items: tuple

    def __repr__(self) -> str:
        return show_formula(self)


class _Bool:
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value

    def __repr__(self) -> str:
        return "true" if self.value else "false"

    def __reduce__(self):
        return (_bool_const, (self.value,))


TRUE = _Bool(True)
FALSE = _Bool(False)


def _bool_const(value: bool) -> _Bool:
    return TRUE if value else FALSE


Formula = Union[Atom, And, Or, _Bool]


def atom(kind: Kind, *args) -> Atom:
    return Atom(kind, tuple(args))


def conj(*items) -> Formula:
    flat = []
    for it in items:
        if it is TRUE:
            continue
        if it is FALSE:
            return FALSE
        if isinstance(it, And):
            flat.extend(it.items)
        else:
            flat.append(it)
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*items) -> Formula:
    flat = []
    for it in items:
        if it is FALSE:
            continue
        if it is TRUE:
            return TRUE
        if isinstance(it, Or):
            flat.extend(it.items)
        else:
            flat.append(it)
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


# ---------------------------------------------------------------- set helpers

def set_of(elems, rest: Term = EMPTY) -> Term:
    """``{e1, ..., en / rest}`` as right-nested ``Cons``."""
    out = rest
    for e in reversed(list(elems)):
        out = Cons(e, out)
    return out


def split_set(t: Term) -> tuple[list[Term], Term]:
    """Elements of an extensional set and its tail (``EMPTY``, var or interval)."""
    elems = []
    while isinstance(t, Cons):
        elems.append(t.elem)
        t = t.rest
    return elems, t


def is_set_term(t: Term) -> bool:
    return t is EMPTY or isinstance(t, (Cons, Interval))


# ---------------------------------------------------------------- sorts

def sort_of(t: Term, env: dict[str, Sort] | None = None) -> Sort | None:
    """Sort of a term; ``None`` for a variable whose sort is not yet known."""
    if isinstance(t, Var):
        return env.get(t.name) if env else None
    if isinstance(t, IntTerm):
        return Sort.INT
    if isinstance(t, App):
        return Sort.UR
    return Sort.SET


def wellsorted(c: Atom, env: dict[str, Sort] | None = None) -> bool:
    """True when every argument's known sort matches the predicate signature."""
    sig = SIGNATURES[c.kind]
    if len(sig) != len(c.args):
        return False
    for want, arg in zip(sig, c.args):
        if want is None:
            continue
        got = sort_of(arg, env)
        if got is not None and got is not want:
            return False
    return all(_term_wellsorted(a, env) for a in c.args)


def _term_wellsorted(t: Term, env) -> bool:
    if isinstance(t, Interval):
        return all(sort_of(x, env) in (None, Sort.INT) for x in (t.lo, t.hi)) and not any(
            isinstance(x, (Cons, Interval, App)) or x is EMPTY for x in (t.lo, t.hi)
        )
    if isinstance(t, Cons):
        return _term_wellsorted(t.elem, env) and sort_of(t.rest, env) in (None, Sort.SET) and _term_wellsorted(t.rest, env)
    if isinstance(t, App):
        return all(_term_wellsorted(a, env) for a in t.args)
    return True


def infer_sorts(f: Formula) -> dict[str, Sort]:
    """Sorts forced on variables by the positions they occur in.

    Equalities do not propagate sorts here; a clash through ``=`` is a
    satisfiability question, not a well-formedness one.
    """
    env: dict[str, Sort] = {}

    def mark(t: Term, s: Sort | None):
        if isinstance(t, Var):
            if s is None:
                return
            old = env.get(t.name)
            if old is not None and old is not s:
                raise SortError(f"variable {t.name} used as {old.value} and {s.value}")
            env[t.name] = s
        elif isinstance(t, IntTerm):
            for v, _ in t.coeffs:
                mark(Var(v), Sort.INT)
        elif isinstance(t, Cons):
            mark(t.elem, None)
            mark(t.rest, Sort.SET)
        elif isinstance(t, Interval):
            mark(t.lo, Sort.INT)
            mark(t.hi, Sort.INT)
        elif isinstance(t, App):
            for a in t.args:
                mark(a, None)

    for a in atoms_of(f):
        for want, arg in zip(SIGNATURES[a.kind], a.args):
            mark(arg, want)
    return env


# ---------------------------------------------------------------- traversal

def atoms_of(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, (And, Or)):
        for it in f.items:
            yield from atoms_of(it)


def term_vars(t: Term, out: set | None = None) -> set[str]:
    if out is None:
        out = set()
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            out.add(t.name)
        elif isinstance(t, IntTerm):
            out.update(v for v, _ in t.coeffs)
        elif isinstance(t, Cons):
            stack.append(t.elem)
            stack.append(t.rest)
        elif isinstance(t, Interval):
            stack.append(t.lo)
            stack.append(t.hi)
        elif isinstance(t, App):
            stack.extend(t.args)
    return out


def atom_vars(a: Atom, out: set | None = None) -> set[str]:
    if out is None:
        out = set()
    for t in a.args:
        term_vars(t, out)
    return out


def formula_vars(f: Formula) -> set[str]:
    out: set[str] = set()
    for a in atoms_of(f):
        atom_vars(a, out)
    return out


def is_ground(t: Term) -> bool:
    return not term_vars(t)


# ---------------------------------------------------------------- printing

def show_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, IntTerm):
        return _show_lin(t)
    if t is EMPTY:
        return "{}"
    if isinstance(t, Cons):
        elems, tail = split_set(t)
        body = ",".join(show_term(e) for e in elems)
        if tail is EMPTY:
            return "{" + body + "}"
        return "{" + body + "/" + show_term(tail) + "}"
    if isinstance(t, Interval):
        return f"int({show_term(t.lo)},{show_term(t.hi)})"
    if isinstance(t, App):
        items = _list_items(t)
        if items is not None:
            return "[" + ",".join(show_term(x) for x in items) + "]"
        if not t.args:
            return t.functor
        return t.functor + "(" + ",".join(show_term(a) for a in t.args) + ")"
    raise TypeError(f"unknown term {t!r}")


PAIR = "pair"
NIL = App("nil")


def _list_items(t: App):
    items = []
    while isinstance(t, App) and t.functor == PAIR and len(t.args) == 2:
        items.append(t.args[0])
        t = t.args[1]
    if items and t == NIL:
        return items
    return None


def _show_lin(t: IntTerm) -> str:
    parts: list[str] = []
    for v, k in t.coeffs:
        mag = abs(k)
        mono = v if mag == 1 else f"{mag}*{v}"
        if not parts:
            parts.append(mono if k > 0 else "-" + mono)
        else:
            parts.append(("+ " if k > 0 else "- ") + mono)
    if not parts:
        return str(t.const)
    if t.const:
        parts.append(("+ " if t.const > 0 else "- ") + str(abs(t.const)))
    return " ".join(parts)


_INFIX = {
    Kind.EQ: "=",
    Kind.NEQ: "neq",
    Kind.IN: "in",
    Kind.NIN: "nin",
    Kind.INT_LEQ: "=<",
    Kind.INT_LT: "<",
    Kind.INT_EQ: "=",
    Kind.INT_NEQ: "neq",
}


def show_atom(a: Atom) -> str:
    op = _INFIX.get(a.kind)
    if op is not None:
        if a.kind is Kind.INT_EQ and isinstance(a.args[0], Var):
            return f"{a.args[0].name} is {show_term(a.args[1])}"
        return f"{show_term(a.args[0])} {op} {show_term(a.args[1])}"
    return a.kind.value + "(" + ",".join(show_term(x) for x in a.args) + ")"


def show_formula(f: Formula, top: bool = True) -> str:
    if isinstance(f, Atom):
        return show_atom(f)
    if isinstance(f, _Bool):
        return repr(f)
    if isinstance(f, And):
        return " & ".join(show_formula(x, False) for x in f.items)
    if isinstance(f, Or):
        body = " or ".join(show_formula(x, False) for x in f.items)
        return body if top else "(" + body + ")"
    raise TypeError(f"unknown formula {f!r}")
