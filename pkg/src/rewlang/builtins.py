"""Builtin procedure schemas and compiled operations.

Each entry takes evaluated (constructor-normal) argument classes and
returns a result class.  Domain errors (index out of range, wrong operand
kind, division by zero) return the `error` constant; the evaluator decides
separately whether an error value halts the run.  d_replace is the only
destructive entry: it rewrites its target class in place, so every holder
of that class observes the change.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .store import Label, OccursViolation, Snapshot, copy_class
from .terms import (
    CONSTRUCTOR,
    ERROR,
    FALSE,
    TRUE,
    Symbol,
    int_symbol,
    int_value,
    is_tuple_symbol,
)


class BuiltinDomainError(Exception):
    """Internal signal: produce the error constant."""


@dataclass(frozen=True)
class Builtin:
    name: str
    arity: int
    destructive: bool
    fn: Callable[["BuiltinContext", list[Label]], Label]


@dataclass
class BuiltinContext:
    snap: Snapshot
    occurs_check: bool = False

    def err(self) -> Label:
        return self.snap.constant(ERROR)

    def bool_label(self, b: bool) -> Label:
        return self.snap.constant(TRUE if b else FALSE)

    def int_label(self, v: int) -> Label:
        return self.snap.constant(int_symbol(v))

    def int_of(self, lab: Label) -> int:
        sym = self.snap.symbol_of(self.snap.resolve(lab))
        v = int_value(sym)
        if v is None:
            raise BuiltinDomainError(f"expected an integer, got {sym.name}")
        return v

    def bool_of(self, lab: Label) -> bool:
        sym = self.snap.symbol_of(self.snap.resolve(lab))
        if sym == TRUE:
            return True
        if sym == FALSE:
            return False
        raise BuiltinDomainError(f"expected a truth value, got {sym.name}")


def _top(ctx: BuiltinContext, args: list[Label]) -> Label:
    lab = ctx.snap.resolve(args[0])
    sym = ctx.snap.symbol_of(lab)
    if sym.kind != CONSTRUCTOR:
        raise BuiltinDomainError(f"top applied to non-constructor {sym.name}")
    if sym.arity == 0:
        return lab
    return ctx.snap.constant(Symbol(f"c_{sym.name}", 0, CONSTRUCTOR))


def structurally_equal(snap: Snapshot, a: Label, b: Label) -> bool:
    memo: set[tuple[Label, Label]] = set()

    def go(x: Label, y: Label) -> bool:
        x, y = snap.resolve(x), snap.resolve(y)
        if x == y or (x, y) in memo:
            return True
        nx, ny = snap.node(x), snap.node(y)
        if nx.symbol != ny.symbol:
            return False
        memo.add((x, y))
        return all(go(p, q) for p, q in zip(nx.children, ny.children))

    return go(a, b)


def _eq(ctx: BuiltinContext, args: list[Label]) -> Label:
    return ctx.bool_label(structurally_equal(ctx.snap, args[0], args[1]))


def _indexed_child(ctx: BuiltinContext, idx: Label, subject: Label, tuples_only: bool) -> Label:
    i = ctx.int_of(idx)
    lab = ctx.snap.resolve(subject)
    node = ctx.snap.node(lab)
    if node.symbol.kind != CONSTRUCTOR:
        raise BuiltinDomainError(f"subject {node.symbol.name} is not a constructor term")
    if tuples_only and not is_tuple_symbol(node.symbol):
        raise BuiltinDomainError(f"projection applied to non-tuple {node.symbol.name}")
    if not 1 <= i <= len(node.children):
        raise BuiltinDomainError(f"index {i} out of range for {node.symbol}")
    return node.children[i - 1]


def _arg(ctx: BuiltinContext, args: list[Label]) -> Label:
    return _indexed_child(ctx, args[0], args[1], tuples_only=False)


def _pi(ctx: BuiltinContext, args: list[Label]) -> Label:
    return _indexed_child(ctx, args[0], args[1], tuples_only=True)


def _replace(ctx: BuiltinContext, args: list[Label]) -> Label:
    i = ctx.int_of(args[0])
    y = ctx.snap.resolve(args[1])
    lab = ctx.snap.resolve(args[2])
    node = ctx.snap.node(lab)
    if node.symbol.kind != CONSTRUCTOR:
        raise BuiltinDomainError(f"subject {node.symbol.name} is not a constructor term")
    if not 1 <= i <= len(node.children):
        raise BuiltinDomainError(f"index {i} out of range for {node.symbol}")
    children = list(node.children)
    children[i - 1] = y
    return ctx.snap.add_node(node.symbol, children)


def _d_replace(ctx: BuiltinContext, args: list[Label]) -> Label:
    i = ctx.int_of(args[0])
    y = ctx.snap.resolve(args[1])
    lab = ctx.snap.resolve(args[2])
    node = ctx.snap.node(lab)
    if node.symbol.kind != CONSTRUCTOR:
        raise BuiltinDomainError(f"subject {node.symbol.name} is not a constructor term")
    if not 1 <= i <= len(node.children):
        raise BuiltinDomainError(f"index {i} out of range for {node.symbol}")
    if ctx.occurs_check and lab in ctx.snap.reachable(y):
        raise OccursViolation(
            f"destructive update would make class {lab} contain itself"
        )
    ctx.snap.set_child(lab, i - 1, y)
    return lab


def _copy(ctx: BuiltinContext, args: list[Label]) -> Label:
    return copy_class(args[0], ctx.snap)


def _arith(op: Callable[[int, int], int]):
    def fn(ctx: BuiltinContext, args: list[Label]) -> Label:
        return ctx.int_label(op(ctx.int_of(args[0]), ctx.int_of(args[1])))

    return fn


def _floordiv(ctx: BuiltinContext, args: list[Label]) -> Label:
    a, b = ctx.int_of(args[0]), ctx.int_of(args[1])
    if b == 0:
        raise BuiltinDomainError("division by zero")
    return ctx.int_label(a // b)


def _cmp(op: Callable[[int, int], bool]):
    def fn(ctx: BuiltinContext, args: list[Label]) -> Label:
        return ctx.bool_label(op(ctx.int_of(args[0]), ctx.int_of(args[1])))

    return fn


def _and(ctx: BuiltinContext, args: list[Label]) -> Label:
    return ctx.bool_label(ctx.bool_of(args[0]) and ctx.bool_of(args[1]))


def _or(ctx: BuiltinContext, args: list[Label]) -> Label:
    return ctx.bool_label(ctx.bool_of(args[0]) or ctx.bool_of(args[1]))


def _not(ctx: BuiltinContext, args: list[Label]) -> Label:
    return ctx.bool_label(not ctx.bool_of(args[0]))


BUILTINS: dict[tuple[str, int], Builtin] = {
    (b.name, b.arity): b
    for b in (
        Builtin("top", 1, False, _top),
        Builtin("eq", 2, False, _eq),
        Builtin("arg", 2, False, _arg),
        Builtin("pi", 2, False, _pi),
        Builtin("replace", 3, False, _replace),
        Builtin("d_replace", 3, True, _d_replace),
        Builtin("copy", 1, False, _copy),
        Builtin("+", 2, False, _arith(lambda a, b: a + b)),
        Builtin("-", 2, False, _arith(lambda a, b: a - b)),
        Builtin("*", 2, False, _arith(lambda a, b: a * b)),
        Builtin("/", 2, False, _floordiv),
        Builtin("<", 2, False, _cmp(lambda a, b: a < b)),
        Builtin("<=", 2, False, _cmp(lambda a, b: a <= b)),
        Builtin(">", 2, False, _cmp(lambda a, b: a > b)),
        Builtin(">=", 2, False, _cmp(lambda a, b: a >= b)),
        Builtin("and", 2, False, _and),
        Builtin("or", 2, False, _or),
        Builtin("not", 1, False, _not),
    )
}


def apply_builtin(
    name: str, snap: Snapshot, args: list[Label], occurs_check: bool = False
) -> Label:
    """Apply a builtin to evaluated argument classes.  Domain errors come
    back as the error constant; occurs violations propagate."""
    impl = BUILTINS[(name, len(args))]
    ctx = BuiltinContext(snap, occurs_check)
    try:
        return impl.fn(ctx, args)
    except BuiltinDomainError:
        return ctx.err()
