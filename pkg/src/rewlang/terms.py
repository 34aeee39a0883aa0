"""Plain terms and function symbols.

A symbol is identified by (name, arity); the same name may appear at
several arities, but always with a single kind.  Plain terms are ordinary
first-order terms; shared-subterm structure is expressed by reusing the
same node object, so object identity carries the sharing information that
the store turns into equivalence labels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

CONSTRUCTOR = "constructor"
DEFINED = "defined"
COMPILED = "compiled"

_INT_RE = re.compile(r"-?[0-9]+")
_TUPLE_RE = re.compile(r"tuple([0-9]+)")


@dataclass(frozen=True)
class Symbol:
    name: str
    arity: int
    kind: str

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


class PlainTerm:
    """Base class for term nodes.  Nodes compare by identity; use
    ``equal`` for structural comparison."""

    __slots__ = ()


@dataclass(eq=False)
class Var(PlainTerm):
    name: str

    def __repr__(self) -> str:
        return f"Var({self.name})"


@dataclass(eq=False)
class App(PlainTerm):
    symbol: Symbol
    args: tuple[PlainTerm, ...] = field(default_factory=tuple)

    def __repr__(self) -> str:
        if not self.args:
            return f"App({self.symbol.name})"
        return f"App({self.symbol.name}, {len(self.args)} args)"


def int_symbol(value: int) -> Symbol:
    return Symbol(str(value), 0, CONSTRUCTOR)


def int_value(sym: Symbol) -> int | None:
    """The integer a constant denotes, or None."""
    if sym.arity == 0 and sym.kind == CONSTRUCTOR and _INT_RE.fullmatch(sym.name):
        return int(sym.name)
    return None


def tuple_symbol(arity: int) -> Symbol:
    return Symbol(f"tuple{arity}", arity, CONSTRUCTOR)


def is_tuple_symbol(sym: Symbol) -> bool:
    m = _TUPLE_RE.fullmatch(sym.name)
    return m is not None and sym.kind == CONSTRUCTOR and int(m.group(1)) == sym.arity


# Predeclared constructor constants.
ERROR = Symbol("error", 0, CONSTRUCTOR)
TRUE = Symbol("true", 0, CONSTRUCTOR)
FALSE = Symbol("false", 0, CONSTRUCTOR)
NONE = Symbol("none", 0, CONSTRUCTOR)

# The lazy conditional; arity 3, handled specially by the evaluator.
IF = Symbol("if", 3, COMPILED)


def mkint(value: int) -> App:
    return App(int_symbol(value))


def mktuple(*args: PlainTerm) -> App:
    return App(tuple_symbol(len(args)), tuple(args))


def equal(a: PlainTerm, b: PlainTerm) -> bool:
    """Structural equality, sharing-insensitive."""
    if a is b:
        return True
    if isinstance(a, Var) and isinstance(b, Var):
        return a.name == b.name
    if isinstance(a, App) and isinstance(b, App):
        return a.symbol == b.symbol and len(a.args) == len(b.args) and all(
            equal(x, y) for x, y in zip(a.args, b.args)
        )
    return False


def term_key(t: PlainTerm):
    """Hashable structural key (ignores sharing)."""
    if isinstance(t, Var):
        return ("v", t.name)
    return (t.symbol.name, t.symbol.arity) + tuple(term_key(a) for a in t.args)


def variables(t: PlainTerm, acc: set[str] | None = None) -> set[str]:
    if acc is None:
        acc = set()
    if isinstance(t, Var):
        acc.add(t.name)
    else:
        for a in t.args:
            variables(a, acc)
    return acc


def is_ground(t: PlainTerm) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_ground(a) for a in t.args)


def is_linear(t: PlainTerm) -> bool:
    seen: set[str] = set()

    def walk(u: PlainTerm) -> bool:
        if isinstance(u, Var):
            if u.name in seen:
                return False
            seen.add(u.name)
            return True
        return all(walk(a) for a in u.args)

    return walk(t)


def is_constructor_term(t: PlainTerm) -> bool:
    """Ground term built from constructors only."""
    if isinstance(t, Var):
        return False
    return t.symbol.kind == CONSTRUCTOR and all(is_constructor_term(a) for a in t.args)


def subst(t: PlainTerm, binding: dict[str, PlainTerm]) -> PlainTerm:
    """Substitute, preserving sharing: unchanged subtrees are returned as
    the original objects, and each shared input node maps to one output
    node."""
    memo: dict[int, PlainTerm] = {}

    def walk(u: PlainTerm) -> PlainTerm:
        if isinstance(u, Var):
            return binding.get(u.name, u)
        cached = memo.get(id(u))
        if cached is not None:
            return cached
        new_args = tuple(walk(a) for a in u.args)
        if all(n is o for n, o in zip(new_args, u.args)):
            result: PlainTerm = u
        else:
            result = App(u.symbol, new_args)
        memo[id(u)] = result
        return result

    return walk(t)


def unify(a: PlainTerm, b: PlainTerm) -> dict[str, PlainTerm] | None:
    """Syntactic first-order unification with occurs check.

    Variables in ``a`` and ``b`` are assumed to be disjoint (rename
    beforehand).  Returns the mgu as a fully applied binding, or None.
    """
    binding: dict[str, PlainTerm] = {}

    def resolve(t: PlainTerm) -> PlainTerm:
        while isinstance(t, Var) and t.name in binding:
            t = binding[t.name]
        return t

    def occurs(name: str, t: PlainTerm) -> bool:
        t = resolve(t)
        if isinstance(t, Var):
            return t.name == name
        return any(occurs(name, a) for a in t.args)

    def go(x: PlainTerm, y: PlainTerm) -> bool:
        x, y = resolve(x), resolve(y)
        if isinstance(x, Var):
            if isinstance(y, Var) and y.name == x.name:
                return True
            if occurs(x.name, y):
                return False
            binding[x.name] = y
            return True
        if isinstance(y, Var):
            return go(y, x)
        if x.symbol != y.symbol:
            return False
        return all(go(p, q) for p, q in zip(x.args, y.args))

    if not go(a, b):
        return None

    # Fully apply the binding so callers can substitute directly; the
    # occurs check guarantees this terminates.
    def expand(t: PlainTerm) -> PlainTerm:
        t = resolve(t)
        if isinstance(t, Var):
            return t
        return App(t.symbol, tuple(expand(a) for a in t.args))

    return {name: expand(Var(name)) for name in binding}
