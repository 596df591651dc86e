"""Concrete syntax: tokenizer, recursive-descent parser and macro expansion.

A source file is a sequence of statements, each terminated by ``.``:

    head(X,Y) :- body.          definition (non-recursive, macro-expanded)
    ?- formula.                 the query
    EXPECT sat NAME: formula.   a named batch entry (sat, unsat or theorem)
    :- consult(name).           load definitions from another file

``%`` starts a comment running to the end of the line.  Text holding only a
formula (no ``?-``) is accepted as the query.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .ast import (
    EMPTY, FALSE, NIL, PAIR, TRUE, And, App, Arith, Atom, Formula, IntTerm, Interval, Kind,
    NonLinear, Or, Term, Var, _Bool, conj, const, disj, int_const, normalize_int, set_of, term_vars,
)


class ParseError(SyntaxError):
    """Malformed source text; carries ``lineno`` and ``offset`` (1-based column)."""

    def __init__(self, msg: str, line: int = 0, col: int = 0, text: str | None = None):
        super().__init__(f"{msg} at line {line}, column {col}", (None, line, col, text))
        self.msg_only = msg

    def __str__(self) -> str:
        return self.args[0]


class RestrictionError(ParseError):
    """An interval limit or a cardinality is a compound expression."""


class RecursiveDefinition(RecursionError):
    """A predicate definition refers to itself, directly or through others."""


class UnknownPredicate(NameError):
    pass


class ArityMismatch(TypeError):
    pass


BUILTINS: dict[tuple[str, int], Kind] = {
    ("un", 3): Kind.UN, ("nun", 3): Kind.NUN, ("disj", 2): Kind.DISJ, ("ndisj", 2): Kind.NDISJ,
    ("size", 2): Kind.SIZE, ("nsize", 2): Kind.NSIZE, ("subset", 2): Kind.SUBSET,
    ("inters", 3): Kind.INTERS, ("ninters", 3): Kind.NINTERS, ("diff", 3): Kind.DIFF,
    ("ndiff", 3): Kind.NDIFF, ("ninteger", 1): Kind.NINTEGER,
}

_INFIX = {"=", "neq", "in", "nin", "=<", "<", ">", ">=", "is"}
EXPECTATIONS = ("sat", "unsat", "theorem")


# ---------------------------------------------------------------- tokens

@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # VAR NAME INT PUNCT EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<punct>:-|\?-|=<|>=|[()\[\]{},/&|=<>+\-*.:])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind not in ("ws", "comment"):
            out.append(Token(kind.upper(), s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    out.append(Token("EOF", "", line, pos - line_start + 1))
    return out


# ---------------------------------------------------------------- program structure

@dataclass(frozen=True)
class Call:
    """Use of a user predicate inside a formula, before expansion."""

    name: str
    args: tuple
    line: int = 0
    col: int = 0

    def __repr__(self) -> str:
        from .ast import show_term
        if not self.args:
            return self.name
        return self.name + "(" + ",".join(show_term(a) for a in self.args) + ")"


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple[str, ...]
    body: object  # formula possibly containing Call nodes

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class Check:
    name: str
    expect: str
    query: object
    line: int = 0


@dataclass
class SourceProgram:
    definitions: list[Definition] = field(default_factory=list)
    query: object = None
    checks: list[Check] = field(default_factory=list)

    def lookup(self) -> dict[tuple[str, int], Definition]:
        return {(d.name, d.arity): d for d in self.definitions}

    def merged(self, other: "SourceProgram") -> "SourceProgram":
        """Definitions of ``self`` followed by everything from ``other``."""
        return SourceProgram(self.definitions + other.definitions, other.query, list(other.checks))


# ---------------------------------------------------------------- parser

class _Parser:
    def __init__(self, text: str, loader=None):
        self.toks = tokenize(text)
        self.i = 0
        self.anon = 0
        self.taken = {t.text for t in self.toks if t.kind == "VAR"}
        self.loader = loader

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None, cls=ParseError):
        t = tok or self.tok
        return cls(msg, t.line, t.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("PUNCT", "NAME") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def fresh_anon(self) -> Var:
        while True:
            self.anon += 1
            name = f"_{self.anon}"
            if name not in self.taken:
                self.taken.add(name)
                return Var(name)

    # statements
    def program(self) -> SourceProgram:
        prog = SourceProgram()
        seen: dict[tuple[str, int], Definition] = {}
        while self.tok.kind != "EOF":
            start = self.tok
            if self.at("?-"):
                self.i += 1
                if prog.query is not None:
                    raise self.error("more than one query", start)
                prog.query = self.formula()
                self.end_statement()
            elif self.at(":-"):
                self.i += 1
                self.directive(prog, seen)
            elif self.tok.kind == "VAR" and self.tok.text == "EXPECT":
                self.i += 1
                prog.checks.append(self.check(start))
            elif self._is_clause_start():
                d = self.definition()
                key = (d.name, d.arity)
                if key in seen:
                    raise self.error(f"duplicate definition of {d.name}/{d.arity}", start)
                if key in BUILTINS:
                    raise self.error(f"cannot redefine built-in {d.name}/{d.arity}", start)
                seen[key] = d
                prog.definitions.append(d)
            else:
                if prog.query is not None:
                    raise self.error("more than one query", start)
                prog.query = self.formula()
                if self.tok.kind != "EOF":
                    self.end_statement()
        _check_acyclic(prog.definitions)
        return prog

    def end_statement(self) -> None:
        if self.tok.kind == "EOF":
            return
        self.expect(".")

    def _is_clause_start(self) -> bool:
        if self.tok.kind != "NAME":
            return False
        j = self.i + 1
        if self.toks[j].text == "(":
            depth = 0
            while self.toks[j].kind != "EOF":
                t = self.toks[j].text
                if t == "(":
                    depth += 1
                elif t == ")":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            j += 1
        return self.toks[j].text == ":-"

    def definition(self) -> Definition:
        name = self.tok.text
        self.i += 1
        params: list[str] = []
        if self.at("("):
            self.i += 1
            while True:
                t = self.tok
                if t.kind != "VAR":
                    raise self.error("definition parameters must be variables")
                if t.text == "_":
                    params.append(self.fresh_anon().name)
                else:
                    if t.text in params:
                        raise self.error(f"repeated parameter {t.text}")
                    params.append(t.text)
                self.i += 1
                if self.at(","):
                    self.i += 1
                    continue
                self.expect(")")
                break
        self.expect(":-")
        body = self.formula()
        self.end_statement()
        return Definition(name, tuple(params), body)

    def directive(self, prog: SourceProgram, seen: dict) -> None:
        t = self.tok
        if not (t.kind == "NAME" and t.text == "consult"):
            raise self.error("only consult(name) directives are supported")
        self.i += 1
        self.expect("(")
        target = self.tok
        if target.kind != "NAME":
            raise self.error("consult expects a file name")
        self.i += 1
        self.expect(")")
        self.end_statement()
        if self.loader is None:
            raise self.error(f"cannot consult {target.text!r} here", target)
        for d in self.loader(target.text).definitions:
            key = (d.name, d.arity)
            if key in seen:
                continue
            seen[key] = d
            prog.definitions.append(d)

    def check(self, start: Token) -> Check:
        t = self.tok
        if t.kind != "NAME" or t.text not in EXPECTATIONS:
            raise self.error("expected one of sat, unsat, theorem")
        self.i += 1
        nt = self.tok
        if nt.kind not in ("NAME", "VAR"):
            raise self.error("expected an entry name")
        self.i += 1
        self.expect(":")
        f = self.formula()
        self.end_statement()
        return Check(nt.text, t.text, f, start.line)

    # formulas
    def formula(self):
        items = [self.conjunction()]
        while self.at("or"):
            self.i += 1
            items.append(self.conjunction())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conjunction(self):
        items = [self.unit()]
        while self.at("&"):
            self.i += 1
            items.append(self.unit())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unit(self):
        if self.at("("):
            save = self.i
            self.i += 1
            try:
                f = self.formula()
                self.expect(")")
                if not (self.tok.text in _INFIX and self.tok.kind in ("PUNCT", "NAME")) \
                        and self.tok.text not in ("+", "-", "*"):
                    return f
            except ParseError:
                pass
            self.i = save
        if self.tok.kind == "NAME" and self.tok.text in ("true", "false") \
                and not self.peek().text == "(" and self.peek().text not in _INFIX:
            self.i += 1
            return TRUE if self.toks[self.i - 1].text == "true" else FALSE
        start = self.tok
        left = self.term()
        op = self.tok
        if op.kind in ("PUNCT", "NAME") and op.text in _INFIX:
            self.i += 1
            right = self.term()
            return self.infix(op, left, right)
        if isinstance(left, App):
            return self.call(left, start)
        raise self.error("expected a constraint", start)

    def infix(self, op: Token, left, right) -> Atom:
        s = op.text
        if s == "=":
            return Atom(Kind.EQ, (left, right))
        if s == "neq":
            return Atom(Kind.NEQ, (left, right))
        if s == "in":
            return Atom(Kind.IN, (left, right))
        if s == "nin":
            return Atom(Kind.NIN, (left, right))
        if s == "is":
            return Atom(Kind.INT_EQ, (self.int_term(left, op), self.int_term(right, op)))
        left, right = self.int_term(left, op), self.int_term(right, op)
        if s == "=<":
            return Atom(Kind.INT_LEQ, (left, right))
        if s == "<":
            return Atom(Kind.INT_LT, (left, right))
        if s == ">":
            return Atom(Kind.INT_LT, (right, left))
        return Atom(Kind.INT_LEQ, (right, left))

    def int_term(self, t, tok: Token) -> Term:
        if isinstance(t, (Var, IntTerm)):
            return t
        raise self.error("expected an integer expression", tok)

    def call(self, app: App, start: Token):
        key = (app.functor, len(app.args))
        kind = BUILTINS.get(key)
        if kind is None:
            return Call(app.functor, app.args, start.line, start.col)
        if kind in (Kind.SIZE, Kind.NSIZE):
            m = app.args[1]
            if not (isinstance(m, Var) or int_const(m) is not None):
                raise self.error("the cardinality of size must be a variable or a constant", start,
                                 RestrictionError)
        return Atom(kind, app.args)

    # terms
    def term(self):
        left = self.product()
        while self.tok.kind == "PUNCT" and self.tok.text in ("+", "-"):
            op = self.tok
            self.i += 1
            right = self.product()
            left = self.arith(op, op.text, left, right)
        return left

    def product(self):
        left = self.factor()
        while self.tok.kind == "PUNCT" and self.tok.text == "*":
            op = self.tok
            self.i += 1
            right = self.factor()
            left = self.arith(op, "*", left, right)
        return left

    def arith(self, tok: Token, op: str, left, right=None) -> Term:
        for x in (left, right):
            if x is not None and not isinstance(x, (Var, IntTerm)):
                raise self.error("arithmetic on a non-integer term", tok)
        try:
            return normalize_int(Arith(op, left, right))
        except NonLinear as e:
            raise self.error(str(e), tok) from None

    def factor(self):
        t = self.tok
        if t.kind == "INT":
            self.i += 1
            return const(int(t.text))
        if t.kind == "PUNCT" and t.text == "-":
            self.i += 1
            return self.arith(t, "neg", self.factor())
        if t.kind == "VAR":
            self.i += 1
            return self.fresh_anon() if t.text == "_" else Var(t.text)
        if t.kind == "NAME":
            self.i += 1
            args: tuple = ()
            if self.at("("):
                self.i += 1
                args = tuple(self.term_list())
                self.expect(")")
            if t.text == "int" and len(args) == 2:
                for lim in args:
                    if not (isinstance(lim, Var) or int_const(lim) is not None):
                        raise self.error("interval limits must be variables or constants", t,
                                         RestrictionError)
                return Interval(args[0], args[1])
            return App(t.text, args)
        if t.kind == "PUNCT" and t.text == "(":
            self.i += 1
            x = self.term()
            self.expect(")")
            return x
        if t.kind == "PUNCT" and t.text == "{":
            self.i += 1
            if self.at("}"):
                self.i += 1
                return EMPTY
            elems = self.term_list()
            rest: Term = EMPTY
            if self.at("/"):
                self.i += 1
                rest = self.term()
            self.expect("}")
            return set_of(elems, rest)
        if t.kind == "PUNCT" and t.text == "[":
            self.i += 1
            if self.at("]"):
                self.i += 1
                return NIL
            elems = self.term_list()
            tail: Term = NIL
            if self.at("|"):
                self.i += 1
                tail = self.term()
            self.expect("]")
            for x in reversed(elems):
                tail = App(PAIR, (x, tail))
            return tail
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def term_list(self) -> list:
        out = [self.term()]
        while self.at(","):
            self.i += 1
            out.append(self.term())
        return out


def _calls(f, out: list) -> list:
    if isinstance(f, Call):
        out.append(f)
    elif isinstance(f, (And, Or)):
        for x in f.items:
            _calls(x, out)
    return out


def _check_acyclic(defs: list[Definition]) -> None:
    graph = {d.name: {c.name for c in _calls(d.body, [])} for d in defs}
    state: dict[str, int] = {}

    def visit(n: str, path: list[str]) -> None:
        s = state.get(n)
        if s == 2 or n not in graph:
            return
        if s == 1:
            cyc = path[path.index(n):] + [n]
            raise RecursiveDefinition("recursive definition: " + " -> ".join(cyc))
        state[n] = 1
        for m in sorted(graph[n]):
            visit(m, path + [n])
        state[n] = 2

    for d in defs:
        visit(d.name, [])


def parse(text: str, loader=None) -> SourceProgram:
    """Parse source text into definitions, an optional query and batch entries."""
    return _Parser(text, loader).program()


# ---------------------------------------------------------------- expansion

class _Renamer:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.n = 0

    def fresh(self, base: str) -> str:
        while True:
            self.n += 1
            name = f"_{base.lstrip('_')}_{self.n}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def _subst_term(t, env: dict):
    from .unify import apply_term
    return apply_term(t, env)


def _formula_names(f, out: set) -> set:
    if isinstance(f, Atom):
        for a in f.args:
            term_vars(a, out)
    elif isinstance(f, Call):
        for a in f.args:
            term_vars(a, out)
    elif isinstance(f, (And, Or)):
        for x in f.items:
            _formula_names(x, out)
    return out


def _expand(f, defs: dict, ren: _Renamer) -> Formula:
    if isinstance(f, _Bool):
        return f
    if isinstance(f, Atom):
        return f
    if isinstance(f, And):
        return conj(*[_expand(x, defs, ren) for x in f.items])
    if isinstance(f, Or):
        return disj(*[_expand(x, defs, ren) for x in f.items])
    if isinstance(f, Call):
        d = defs.get((f.name, len(f.args)))
        if d is None:
            arities = sorted(k[1] for k in defs if k[0] == f.name)
            where = f" at line {f.line}, column {f.col}" if f.line else ""
            if arities:
                raise ArityMismatch(f"{f.name} called with {len(f.args)} arguments, "
                                    f"defined with {', '.join(map(str, arities))}{where}")
            raise UnknownPredicate(f"unknown predicate {f.name}/{len(f.args)}{where}")
        env = dict(zip(d.params, f.args))
        for v in sorted(_formula_names(d.body, set()) - set(d.params)):
            env[v] = Var(ren.fresh(v))
        return _expand(_subst_body(d.body, env), defs, ren)
    raise TypeError(f"not a formula: {f!r}")


def _subst_body(f, env: dict):
    if isinstance(f, Atom):
        return Atom(f.kind, tuple(_subst_term(a, env) for a in f.args))
    if isinstance(f, Call):
        return Call(f.name, tuple(_subst_term(a, env) for a in f.args), f.line, f.col)
    if isinstance(f, And):
        return And(tuple(_subst_body(x, env) for x in f.items))
    if isinstance(f, Or):
        return Or(tuple(_subst_body(x, env) for x in f.items))
    return f


def expand(prog: SourceProgram, query=None) -> Formula:
    """Inline every user predicate of ``query`` (default: the program's query).

    Parameters are replaced by the call's arguments and variables local to a
    body are renamed apart at each call site.
    """
    q = prog.query if query is None else query
    if q is None:
        raise ValueError("the program has no query")
    defs = prog.lookup()
    taken = _formula_names(q, set())
    for d in prog.definitions:
        _formula_names(d.body, taken)
        taken.update(d.params)
    return _expand(q, defs, _Renamer(taken))


def file_loader(base: Path | None = None):
    """Loader for ``consult``: a sibling ``.slog`` file first, then shipped data."""
    from . import stdlib

    def load(name: str) -> SourceProgram:
        if base is not None:
            p = base / f"{name}.slog"
            if p.exists():
                return parse(p.read_text(encoding="utf-8"), file_loader(p.parent))
        return stdlib.load(name)
    return load


def parse_formula(text: str, prelude: bool = True, extra: SourceProgram | None = None) -> Formula:
    """Parse and expand a single query, optionally with the prelude in scope."""
    from . import stdlib
    prog = parse(text, file_loader(None))
    if extra is not None:
        prog = extra.merged(prog)
    if prelude:
        prog = stdlib.prelude().merged(prog)
    return expand(prog)
