"""Parser for the shape-rule language.

A program is a list of Horn clauses over three spatial builtins and scalar
comparisons::

    % rectangular object
    house(p1, p2, p3, p4) :-
        line(p1, p2, b1), b1 > 0.8,
        angle(p1, p2, p3, l1), l1 = 90,
        ...

Every identifier in an argument position is a variable. Several clauses with
the same head form a disjunction, tried in source order. Recursion is
allowed; :func:`validate_recursion` reports the cycles so the solver can
bound them.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

import networkx as nx

BUILTINS = {"line": 3, "angle": 4, "len": 3}
# argument kinds per builtin; the last argument is always the scalar output
BUILTIN_KINDS = {
    "line": ("point", "point", "scalar"),
    "angle": ("point", "point", "point", "scalar"),
    "len": ("point", "point", "scalar"),
}
COMPARISON_OPS = ("<", "<=", ">", ">=", "=")


class RuleError(ValueError):
    """Base class for rule-file errors. Carries a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class RuleSyntaxError(RuleError):
    pass


class ArityError(RuleError):
    pass


class UndefinedPredicateError(RuleError):
    pass


class RuleTypeError(RuleError):
    pass


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Var:
    name: str
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Num:
    value: float
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def __str__(self):
        return format_number(self.value)


Term = Union[Var, Num]


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Term, ...]
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    @property
    def is_builtin(self) -> bool:
        return self.name in BUILTINS

    def __str__(self):
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Comparison:
    left: Term
    op: str
    right: Term
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def __str__(self):
        return f"{self.left} {self.op} {self.right}"


Goal = Union[Call, Comparison]


@dataclass(frozen=True)
class Clause:
    name: str
    params: tuple[str, ...]
    body: tuple[Goal, ...]
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, len(self.params))

    def __str__(self):
        head = f"{self.name}({', '.join(self.params)})"
        goals = ",\n".join(f"    {g}" for g in self.body)
        return f"{head} :-\n{goals}."


@dataclass(frozen=True)
class RuleSet:
    """Validated, ordered clauses plus an index by ``(name, arity)``.

    ``param_kinds`` maps each predicate to the inferred kind (``"point"`` or
    ``"scalar"``) of each head parameter.
    """

    clauses: tuple[Clause, ...]
    index: dict = field(compare=False, repr=False)
    param_kinds: dict = field(compare=False, repr=False)

    def clauses_for(self, name: str, arity: int) -> tuple[Clause, ...]:
        return self.index.get((name, arity), ())

    def predicates(self) -> list[tuple[str, int]]:
        return list(self.index)


def format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<number>-?[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[a-z][a-z0-9]*)
  | (?P<neck>:-)
  | (?P<op><=|>=|<|>|=)
  | (?P<punct>[(),.])
""", re.VERBOSE)

_QUERY_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise RuleSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "number" and not math.isfinite(float(text)):
            raise RuleSyntaxError(f"numeric literal {text} out of range", line, col)
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, expected: str):
        t = self.tok
        got = "end of input" if t.kind == "eof" else repr(t.text)
        raise RuleSyntaxError(f"expected {expected}, got {got}", t.line, t.column)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            self.fail(repr(text) if text else kind)
        self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def program(self) -> list[Clause]:
        clauses = []
        while not self.at("eof"):
            clauses.append(self.clause())
        if not clauses:
            self.fail("a clause")
        return clauses

    def clause(self) -> Clause:
        name_tok = self.expect("ident")
        self.expect("punct", "(")
        params = [self.expect("ident")]
        while self.at("punct", ","):
            self.i += 1
            params.append(self.expect("ident"))
        self.expect("punct", ")")
        self.expect("neck")
        body = [self.goal()]
        while self.at("punct", ","):
            self.i += 1
            body.append(self.goal())
        self.expect("punct", ".")
        seen = set()
        for p in params:
            if p.text in seen:
                raise RuleSyntaxError(f"duplicate head parameter {p.text!r}", p.line, p.column)
            seen.add(p.text)
        return Clause(name_tok.text, tuple(p.text for p in params), tuple(body),
                      (name_tok.line, name_tok.column))

    def goal(self) -> Goal:
        t = self.tok
        if t.kind == "ident" and self.tokens[self.i + 1].kind == "punct" \
                and self.tokens[self.i + 1].text == "(":
            self.i += 2
            args = [self.term()]
            while self.at("punct", ","):
                self.i += 1
                args.append(self.term())
            self.expect("punct", ")")
            return Call(t.text, tuple(args), (t.line, t.column))
        left = self.term()
        op = self.expect("op")
        right = self.term()
        return Comparison(left, op.text, right, (t.line, t.column))

    def term(self) -> Term:
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            return Var(t.text, (t.line, t.column))
        if t.kind == "number":
            self.i += 1
            return Num(float(t.text), (t.line, t.column))
        self.fail("a variable or number")


def parse(source: str) -> RuleSet:
    """Parse and validate rule source text.

    Raises:
        RuleSyntaxError: lexical or grammatical error.
        ArityError: builtin called with the wrong number of arguments.
        UndefinedPredicateError: call to a predicate with no clauses.
        RuleTypeError: point/scalar misuse, or a comparison reading a
            variable that nothing earlier in the clause can bind.
    """
    clauses = _Parser(tokenize(source)).program()
    return build_ruleset(clauses)


def build_ruleset(clauses) -> RuleSet:
    clauses = tuple(clauses)
    index: dict[tuple[str, int], list[Clause]] = {}
    for c in clauses:
        if c.name in BUILTINS:
            raise RuleTypeError(f"cannot redefine builtin {c.name}/{BUILTINS[c.name]}", *c.pos)
        index.setdefault(c.key, []).append(c)
    frozen_index = {k: tuple(v) for k, v in index.items()}
    kinds = _check(clauses, frozen_index)
    return RuleSet(clauses, frozen_index, kinds)


def _check(clauses: tuple[Clause, ...], index) -> dict:
    defined_names = {}
    for name, arity in index:
        defined_names.setdefault(name, []).append(arity)

    for c in clauses:
        for g in c.body:
            if not isinstance(g, Call):
                continue
            if g.name in BUILTINS:
                if len(g.args) != BUILTINS[g.name]:
                    raise ArityError(
                        f"{g.name}/{len(g.args)} vs required {g.name}/{BUILTINS[g.name]}", *g.pos)
                if not isinstance(g.args[-1], Var):
                    raise RuleTypeError(f"output of {g.name} must be a variable", *g.args[-1].pos)
            elif (g.name, len(g.args)) not in index:
                known = defined_names.get(g.name)
                hint = f" (defined with arity {', '.join(map(str, known))})" if known else ""
                raise UndefinedPredicateError(
                    f"undefined predicate {g.name}/{len(g.args)}{hint}", *g.pos)

    # infer head parameter kinds to a fixed point
    param_kinds = {key: [None] * key[1] for key in index}
    changed = True
    while changed:
        changed = False
        for c in clauses:
            var_kinds = _clause_kinds(c, param_kinds, strict=False)
            slots = param_kinds[c.key]
            for i, p in enumerate(c.params):
                k = var_kinds.get(p)
                if k is not None and slots[i] is None:
                    slots[i] = k
                    changed = True

    for c in clauses:
        _clause_kinds(c, param_kinds, strict=True)
        body_vars = {a.name for g in c.body for a in _goal_terms(g) if isinstance(a, Var)}
        for p in c.params:
            if p not in body_vars:
                raise RuleTypeError(f"head parameter {p!r} does not occur in the body", *c.pos)
        # comparisons may only read variables introduced earlier in the clause
        known = set(c.params)
        for g in c.body:
            if isinstance(g, Comparison):
                for t in (g.left, g.right):
                    if isinstance(t, Var) and t.name not in known:
                        raise RuleTypeError(
                            f"variable {t.name!r} is compared before anything binds it", *t.pos)
            else:
                known.update(a.name for a in g.args if isinstance(a, Var))

    return {k: tuple(v if v is not None else "point" for v in kinds)
            for k, kinds in param_kinds.items()}


def _goal_terms(g: Goal):
    if isinstance(g, Call):
        return g.args
    return (g.left, g.right)


def _clause_kinds(c: Clause, param_kinds, strict: bool) -> dict:
    kinds: dict[str, str] = {}

    def assign(term: Term, kind: str | None, where: str):
        if kind is None:
            return
        if isinstance(term, Num):
            if kind == "point" and strict:
                raise RuleTypeError(f"number {term} used where a point is required ({where})", *term.pos)
            return
        prev = kinds.get(term.name)
        if prev is None:
            kinds[term.name] = kind
        elif prev != kind and strict:
            raise RuleTypeError(
                f"variable {term.name!r} used both as {prev} and as {kind} ({where})", *term.pos)

    # comparisons are processed after calls so that a point-typed operand is
    # reported against the comparison
    for g in c.body:
        if isinstance(g, Call):
            if g.name in BUILTINS:
                for a, k in zip(g.args, BUILTIN_KINDS[g.name]):
                    assign(a, k, f"{g.name}/{len(g.args)}")
            else:
                for a, k in zip(g.args, param_kinds[(g.name, len(g.args))]):
                    assign(a, k, f"{g.name}/{len(g.args)}")
    for g in c.body:
        if isinstance(g, Comparison):
            for t in (g.left, g.right):
                if isinstance(t, Var) and kinds.get(t.name) == "point" and strict:
                    raise RuleTypeError(f"comparison on point variable {t.name!r}", *t.pos)
                if isinstance(t, Var):
                    kinds.setdefault(t.name, "scalar")
    return kinds


# ---------------------------------------------------------------- queries


@dataclass(frozen=True)
class Query:
    name: str
    args: tuple[str, ...]

    def __str__(self):
        return f"{self.name}({', '.join(self.args)})"


def parse_query(text: str) -> Query:
    """Parse ``name(v1, v2, ...)``. Variable names may use any letter case."""
    m = re.fullmatch(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*\.?\s*", text, re.S)
    if m is None:
        raise RuleSyntaxError(f"malformed query {text!r}", 1, 1)
    raw_args = [a.strip() for a in m.group(2).split(",")]
    for a in raw_args:
        if not _QUERY_IDENT_RE.fullmatch(a):
            col = text.find(a) + 1 if a else 1
            raise RuleSyntaxError(f"bad query argument {a!r}", 1, max(col, 1))
    return Query(m.group(1), tuple(raw_args))


# ---------------------------------------------------------------- printing


def pretty_print(rules: RuleSet) -> str:
    """Canonical text; ``parse(pretty_print(r)) == r`` for any valid ``r``."""
    return "\n\n".join(str(c) for c in rules.clauses) + "\n"


# ---------------------------------------------------------------- recursion


@dataclass(frozen=True)
class RecursionReport:
    cycles: tuple[frozenset, ...]

    @property
    def recursive(self) -> frozenset:
        return frozenset().union(*self.cycles) if self.cycles else frozenset()

    def is_recursive(self, name: str) -> bool:
        return name in self.recursive

    def __bool__(self):
        return bool(self.cycles)


def call_graph(rules: RuleSet) -> nx.DiGraph:
    g = nx.DiGraph()
    for c in rules.clauses:
        g.add_node(c.name)
        for goal in c.body:
            if isinstance(goal, Call) and not goal.is_builtin:
                g.add_edge(c.name, goal.name)
    return g


def validate_recursion(rules: RuleSet) -> RecursionReport:
    """Find the predicate cycles (by name) in the call graph."""
    g = call_graph(rules)
    cycles = []
    for scc in nx.strongly_connected_components(g):
        if len(scc) > 1 or any(g.has_edge(n, n) for n in scc):
            cycles.append(frozenset(scc))
    cycles.sort(key=sorted)
    return RecursionReport(tuple(cycles))


def iter_calls(rules: RuleSet) -> Iterator[Call]:
    for c in rules.clauses:
        for g in c.body:
            if isinstance(g, Call):
                yield g
