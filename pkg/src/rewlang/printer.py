"""Pretty-printer for terms, aterms, and programs.

Output re-parses to a structurally identical tree: infix operators carry
their usual precedence, tuples print as <...>, and statement chains print
';'-separated.  Shared subterms print once per occurrence (textual form
carries no labels).
"""

from __future__ import annotations

from . import ast
from .ast import (
    Assign,
    ATerm,
    If,
    IfChain,
    Loop,
    Procedure,
    Program,
    SAssign,
    SIf,
    SLoop,
    STupleAssign,
    Stmt,
    Term,
    TupleAssign,
    VarRef,
)
from .terms import IF, App, PlainTerm, Var, is_tuple_symbol

_INFIX = {
    "or": (1, "or"),
    "and": (2, "and"),
    "eq": (4, "=="),
    "<": (4, "<"),
    "<=": (4, "<="),
    ">": (4, ">"),
    ">=": (4, ">="),
    "+": (5, "+"),
    "-": (5, "-"),
    "*": (6, "*"),
    "/": (6, "/"),
}
_NOT_PREC = 3
# Inside <...> a bare '>' would close the tuple, so tuple elements print
# at a precedence that parenthesizes comparisons and looser operators.
_TUPLE_ARG_PREC = 5


def plain(t: PlainTerm) -> str:
    """Concrete syntax of a plain term."""
    return _plain(t, 0)


def _plain(t: PlainTerm, prec: int) -> str:
    if isinstance(t, Var):
        return t.name
    sym = t.symbol
    if sym == IF:
        s = (
            f"if {_plain(t.args[0], 0)} then {_plain(t.args[1], 0)}"
            f" else {_plain(t.args[2], 0)}"
        )
        return f"({s})" if prec > 0 else s
    if is_tuple_symbol(sym):
        return "<" + ", ".join(_plain(a, _TUPLE_ARG_PREC) for a in t.args) + ">"
    info = _INFIX.get(sym.name)
    if info is not None and len(t.args) == 2:
        p, text = info
        left = _plain(t.args[0], p)
        right = _plain(t.args[1], p + 1)
        s = f"{left} {text} {right}"
        return f"({s})" if prec > p else s
    if sym.name == "not" and len(t.args) == 1:
        s = f"not {_plain(t.args[0], _NOT_PREC)}"
        return f"({s})" if prec > _NOT_PREC else s
    if not t.args:
        return sym.name
    return sym.name + "(" + ", ".join(_plain(a, 0) for a in t.args) + ")"


def aterm(t: ATerm) -> str:
    return _aterm(t, 0)


def _aterm(t: ATerm, prec: int) -> str:
    if isinstance(t, VarRef):
        return t.name
    if isinstance(t, Term):
        return _term(t, prec)
    if isinstance(t, If):
        s = f"if {_aterm(t.cond, 0)} then {_aterm(t.then, 0)} else {_aterm(t.els, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Assign):
        s = f"{t.target} <- {_aterm(t.rhs, 0)}; {_aterm(t.rest, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, TupleAssign):
        tgt = "<" + ", ".join(t.targets) + ">"
        s = f"{tgt} <- {_aterm(t.rhs, 0)}; {_aterm(t.rest, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, IfChain):
        s = (
            f"if {_aterm(t.cond, 0)} then {{ {stmt_list(t.then_stmts)} }}"
            f" else {{ {stmt_list(t.else_stmts)} }}; {_aterm(t.rest, 0)}"
        )
        return f"({s})" if prec > 0 else s
    if isinstance(t, Loop):
        s = f"{_loop_header(t.kind, t.index, t.start, t.limit, t.cond, t.body)}; {_aterm(t.rest, 0)}"
        return f"({s})" if prec > 0 else s
    raise TypeError(t)


def _term(t: Term, prec: int) -> str:
    sym = t.symbol
    if is_tuple_symbol(sym):
        return "<" + ", ".join(_aterm(a, _TUPLE_ARG_PREC) for a in t.args) + ">"
    info = _INFIX.get(sym.name)
    if info is not None and len(t.args) == 2:
        p, text = info
        s = f"{_aterm(t.args[0], p)} {text} {_aterm(t.args[1], p + 1)}"
        return f"({s})" if prec > p else s
    if sym.name == "not" and len(t.args) == 1:
        s = f"not {_aterm(t.args[0], _NOT_PREC)}"
        return f"({s})" if prec > _NOT_PREC else s
    if not t.args:
        return sym.name
    return sym.name + "(" + ", ".join(_aterm(a, 0) for a in t.args) + ")"


def stmt_list(stmts: tuple[Stmt, ...]) -> str:
    return " ".join(_stmt(s) + ";" for s in stmts)


def _stmt(s: Stmt) -> str:
    if isinstance(s, SAssign):
        return f"{s.target} <- {_aterm(s.rhs, 0)}"
    if isinstance(s, STupleAssign):
        return "<" + ", ".join(s.targets) + f"> <- {_aterm(s.rhs, 0)}"
    if isinstance(s, SIf):
        return (
            f"if {_aterm(s.cond, 0)} then {{ {stmt_list(s.then_stmts)} }}"
            f" else {{ {stmt_list(s.else_stmts)} }}"
        )
    if isinstance(s, SLoop):
        return _loop_header(s.kind, s.index, s.start, s.limit, s.cond, s.body)
    raise TypeError(s)


def _loop_header(kind, index, start, limit, cond, body) -> str:
    inner = stmt_list(body)
    if kind == ast.FOR:
        return (
            f"for {index} = {_aterm(start, 0)} step 1 until {_aterm(limit, 0)}"
            f" do {{ {inner} }}"
        )
    if kind == ast.WHILE:
        return f"while {_aterm(cond, 0)} do {{ {inner} }}"
    return f"do {{ {inner} }} until {_aterm(cond, 0)}"


def rule(r: ast.Rule) -> str:
    return f"{plain(r.lhs)} -> {aterm(r.rhs)};"


def procedure(proc: Procedure) -> str:
    if proc.kind == ast.REWRITE:
        lines = [f"rewrite {proc.name} {{"]
        for r in proc.rules:
            lines.append(f"    {rule(r)}")
        lines.append("}")
        return "\n".join(lines)
    params = ", ".join(proc.params)
    return f"flat {proc.name}({params}) {{\n    {aterm(proc.body)}\n}}"


def program(prog: Program) -> str:
    parts: list[str] = []
    ctors = sorted(prog.constructors.values(), key=lambda s: (s.name, s.arity))
    if ctors:
        decl = ", ".join(f"{c.name}/{c.arity}" for c in ctors)
        parts.append(f"constructors {decl};")
    for proc in prog.procedures.values():
        parts.append(procedure(proc))
    return "\n\n".join(parts) + "\n"
