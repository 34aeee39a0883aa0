"""Syntax trees for rule right-hand sides and whole programs.

Right-hand sides are "aterms": a chain of statements ending in an
expression.  Statement-position conditionals and loops keep their raw
statement lists until the lowering passes run; value-position conditionals
are ordinary three-way nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .terms import Symbol, PlainTerm

FOR = "for"
WHILE = "while"
UNTIL = "until"


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOPOS = Pos(0, 0)


class ATerm:
    __slots__ = ()


@dataclass(eq=False)
class Term(ATerm):
    """Application (or constant) with aterm arguments."""

    symbol: Symbol
    args: tuple[ATerm, ...] = ()
    pos: Pos = NOPOS


@dataclass(eq=False)
class VarRef(ATerm):
    name: str
    pos: Pos = NOPOS


@dataclass(eq=False)
class Assign(ATerm):
    """x <- rhs; rest   (rhs contains no assignments)"""

    target: str
    rhs: ATerm
    rest: ATerm
    pos: Pos = NOPOS


@dataclass(eq=False)
class TupleAssign(ATerm):
    """<x1,..,xn> <- rhs; rest"""

    targets: tuple[str, ...]
    rhs: ATerm
    rest: ATerm
    pos: Pos = NOPOS


@dataclass(eq=False)
class If(ATerm):
    """Value-position conditional; both branches are complete aterms."""

    cond: ATerm
    then: ATerm
    els: ATerm
    pos: Pos = NOPOS


@dataclass(eq=False)
class IfChain(ATerm):
    """Statement-position conditional: branch statement lists, then a
    continuation that both branches fall through to."""

    cond: ATerm
    then_stmts: tuple["Stmt", ...]
    else_stmts: tuple["Stmt", ...]
    rest: ATerm
    pos: Pos = NOPOS


@dataclass(eq=False)
class Loop(ATerm):
    """for/while/until statement followed by the continuation aterm."""

    kind: str  # FOR | WHILE | UNTIL
    index: str | None  # for-loops only
    start: ATerm | None  # for-loops only
    limit: ATerm | None  # for-loops only
    cond: ATerm | None  # while/until only
    body: tuple["Stmt", ...]
    rest: ATerm
    pos: Pos = NOPOS


class Stmt:
    __slots__ = ()


@dataclass(eq=False)
class SAssign(Stmt):
    target: str
    rhs: ATerm
    pos: Pos = NOPOS


@dataclass(eq=False)
class STupleAssign(Stmt):
    targets: tuple[str, ...]
    rhs: ATerm
    pos: Pos = NOPOS


@dataclass(eq=False)
class SIf(Stmt):
    cond: ATerm
    then_stmts: tuple[Stmt, ...]
    else_stmts: tuple[Stmt, ...]
    pos: Pos = NOPOS


@dataclass(eq=False)
class SLoop(Stmt):
    kind: str
    index: str | None
    start: ATerm | None
    limit: ATerm | None
    cond: ATerm | None
    body: tuple[Stmt, ...]
    pos: Pos = NOPOS


def chain(stmts: tuple[Stmt, ...] | list[Stmt], tail: ATerm) -> ATerm:
    """Fold a statement list onto a final expression, right to left.  The
    continuation object is reused, never copied, so later passes can keep
    it shared."""
    out = tail
    for s in reversed(list(stmts)):
        if isinstance(s, SAssign):
            out = Assign(s.target, s.rhs, out, s.pos)
        elif isinstance(s, STupleAssign):
            out = TupleAssign(s.targets, s.rhs, out, s.pos)
        elif isinstance(s, SIf):
            out = IfChain(s.cond, s.then_stmts, s.else_stmts, out, s.pos)
        elif isinstance(s, SLoop):
            out = Loop(s.kind, s.index, s.start, s.limit, s.cond, s.body, out, s.pos)
        else:
            raise TypeError(s)
    return out


@dataclass(eq=False)
class Rule:
    lhs: PlainTerm
    rhs: ATerm
    pos: Pos = NOPOS


REWRITE = "rewrite"
FLAT = "flat"


@dataclass(eq=False)
class Procedure:
    name: str
    arity: int
    kind: str  # REWRITE | FLAT
    rules: list[Rule] = field(default_factory=list)  # rewrite procedures
    params: tuple[str, ...] = ()  # flat procedures
    body: ATerm | None = None  # flat procedures
    pos: Pos = NOPOS

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)


@dataclass(eq=False)
class Program:
    constructors: dict[tuple[str, int], Symbol] = field(default_factory=dict)
    procedures: dict[tuple[str, int], Procedure] = field(default_factory=dict)
    source_name: str = "<program>"

    def declared_constructors(self) -> list[Symbol]:
        return list(self.constructors.values())


# -- free variables ---------------------------------------------------------


def free_vars(a: ATerm, bound: frozenset[str] = frozenset()) -> set[str]:
    """Variables read before being assigned, under sequential binding.
    Loop continuations do not see body-local bindings (those travel
    through the generated procedure's parameters instead)."""
    out: set[str] = set()

    def expr(t: ATerm, env: frozenset[str]) -> None:
        if isinstance(t, VarRef):
            if t.name not in env:
                out.add(t.name)
        elif isinstance(t, Term):
            for x in t.args:
                walk(x, env)
        elif isinstance(t, If):
            walk(t.cond, env)
            walk(t.then, env)
            walk(t.els, env)
        else:
            walk(t, env)

    def stmts(ss: tuple[Stmt, ...], env: frozenset[str]) -> frozenset[str]:
        for s in ss:
            if isinstance(s, SAssign):
                expr(s.rhs, env)
                env = env | {s.target}
            elif isinstance(s, STupleAssign):
                expr(s.rhs, env)
                env = env | set(s.targets)
            elif isinstance(s, SIf):
                expr(s.cond, env)
                e1 = stmts(s.then_stmts, env)
                e2 = stmts(s.else_stmts, env)
                env = e1 & e2
            elif isinstance(s, SLoop):
                env = loop_header(s.kind, s.index, s.start, s.limit, s.cond, s.body, env)
            else:
                raise TypeError(s)
        return env

    def loop_header(kind, index, start, limit, cond, body, env) -> frozenset[str]:
        inner = env
        if kind == FOR:
            expr(start, env)
            expr(limit, env)
            inner = env | {index}
        after_body = stmts(body, inner)
        if kind == WHILE:
            expr(cond, inner)
        elif kind == UNTIL:
            expr(cond, after_body)
        return env

    def walk(t: ATerm, env: frozenset[str]) -> None:
        if isinstance(t, (VarRef, Term, If)):
            expr(t, env)
        elif isinstance(t, Assign):
            expr(t.rhs, env)
            walk(t.rest, env | {t.target})
        elif isinstance(t, TupleAssign):
            expr(t.rhs, env)
            walk(t.rest, env | set(t.targets))
        elif isinstance(t, IfChain):
            expr(t.cond, env)
            e1 = stmts(t.then_stmts, env)
            e2 = stmts(t.else_stmts, env)
            walk(t.rest, e1)
            walk(t.rest, e2)
        elif isinstance(t, Loop):
            env2 = loop_header(t.kind, t.index, t.start, t.limit, t.cond, t.body, env)
            walk(t.rest, env2)
        else:
            raise TypeError(t)

    walk(a, bound)
    return out


def contains_assign(t: ATerm) -> bool:
    if isinstance(t, (Assign, TupleAssign)):
        return True
    if isinstance(t, Term):
        return any(contains_assign(a) for a in t.args)
    if isinstance(t, If):
        return any(contains_assign(x) for x in (t.cond, t.then, t.els))
    if isinstance(t, IfChain):
        return True
    if isinstance(t, Loop):
        return True
    return False


def contains_loop(t: ATerm) -> bool:
    if isinstance(t, Loop):
        return True
    if isinstance(t, Term):
        return any(contains_loop(a) for a in t.args)
    if isinstance(t, VarRef):
        return False
    if isinstance(t, If):
        return any(contains_loop(x) for x in (t.cond, t.then, t.els))
    if isinstance(t, (Assign, TupleAssign)):
        return contains_loop(t.rhs) or contains_loop(t.rest)
    if isinstance(t, IfChain):
        return (
            contains_loop(t.cond)
            or any(stmt_contains_loop(s) for s in t.then_stmts + t.else_stmts)
            or contains_loop(t.rest)
        )
    raise TypeError(t)


def stmt_contains_loop(s: Stmt) -> bool:
    if isinstance(s, SLoop):
        return True
    if isinstance(s, (SAssign, STupleAssign)):
        return contains_loop(s.rhs)
    if isinstance(s, SIf):
        return contains_loop(s.cond) or any(
            stmt_contains_loop(x) for x in s.then_stmts + s.else_stmts
        )
    raise TypeError(s)
