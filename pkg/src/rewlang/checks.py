"""Static verification run before desugaring and evaluation.

Errors block evaluation; warnings do not.  Diagnostic codes are stable
strings that the CLI and the test fixtures key on:

    kind-conflict        a name used as both constructor and procedure
    constructor-rule-head   a rule defines a constructor
    defined-in-pattern   a rule pattern contains a defined/compiled symbol
    nonlinear-lhs        repeated variable on a rule left-hand side
    overlap              two rules of one procedure unify
    unbound-var          a variable read without ever being bound
    rebind               reassignment in single-assignment mode
    self-reference       x <- ..x.. where x was never bound
    incomplete-patterns  (warning) a rewrite procedure misses a case
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ast
from .ast import (
    Assign,
    ATerm,
    If,
    IfChain,
    Loop,
    Pos,
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
from .terms import (
    CONSTRUCTOR,
    App,
    PlainTerm,
    Symbol,
    Var,
    int_value,
    is_tuple_symbol,
)
from .parser import PREDECLARED_CONSTANTS

ERROR = "error"
WARNING = "warning"

SINGLE_ASSIGNMENT = "single-assignment"
MULTI_ASSIGNMENT = "multi-assignment"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    pos: Pos
    message: str

    def render(self, source_name: str) -> str:
        return f"{self.severity} {self.code} {source_name}:{self.pos.line}:{self.pos.col} {self.message}"


def _sorted(diags: list[Diagnostic]) -> list[Diagnostic]:
    unique = list(dict.fromkeys(diags))
    return sorted(unique, key=lambda d: (d.pos.line, d.pos.col, d.code, d.message))


def check_partition(prog: Program) -> list[Diagnostic]:
    """Constructor-system shape: constructor and defined names disjoint,
    no constructor heads a rule, no defined symbol inside a pattern."""
    out: list[Diagnostic] = []
    ctor_names = {name for (name, _a) in prog.constructors}
    for proc in prog.procedures.values():
        if proc.name in ctor_names:
            out.append(
                Diagnostic(
                    ERROR,
                    "kind-conflict",
                    proc.pos,
                    f"{proc.name} is declared as a constructor and defined by rules",
                )
            )
        if proc.kind != ast.REWRITE:
            continue
        for rule in proc.rules:
            head = rule.lhs
            assert isinstance(head, App)
            if head.symbol.kind == CONSTRUCTOR:
                out.append(
                    Diagnostic(
                        ERROR,
                        "constructor-rule-head",
                        rule.pos,
                        f"rule head {head.symbol.name} is a constructor",
                    )
                )
            for arg in head.args:
                _pattern_symbols(arg, rule.pos, out)
    return _sorted(out)


def _pattern_symbols(p: PlainTerm, pos: Pos, out: list[Diagnostic]) -> None:
    if isinstance(p, Var):
        return
    if p.symbol.kind != CONSTRUCTOR:
        out.append(
            Diagnostic(
                ERROR,
                "defined-in-pattern",
                pos,
                f"pattern argument contains non-constructor symbol {p.symbol.name}",
            )
        )
    for a in p.args:
        _pattern_symbols(a, pos, out)


def check_left_linear(prog: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for proc in prog.procedures.values():
        if proc.kind != ast.REWRITE:
            continue
        for rule in proc.rules:
            seen: set[str] = set()
            dups: set[str] = set()

            def walk(t: PlainTerm) -> None:
                if isinstance(t, Var):
                    if t.name in seen:
                        dups.add(t.name)
                    seen.add(t.name)
                    return
                for a in t.args:
                    walk(a)

            walk(rule.lhs)
            for name in sorted(dups):
                out.append(
                    Diagnostic(
                        ERROR,
                        "nonlinear-lhs",
                        rule.pos,
                        f"variable {name} repeated on the left-hand side",
                    )
                )
    return _sorted(out)


def _rename_apart(p: PlainTerm, suffix: str) -> PlainTerm:
    if isinstance(p, Var):
        return Var(p.name + suffix)
    return App(p.symbol, tuple(_rename_apart(a, suffix) for a in p.args))


def check_orthogonal(prog: Program) -> list[Diagnostic]:
    """Rules of one procedure must be pairwise non-unifiable after
    renaming; for constructor systems that is exactly non-overlap."""
    from .terms import subst, unify
    from . import printer

    out: list[Diagnostic] = []
    for proc in prog.procedures.values():
        if proc.kind != ast.REWRITE:
            continue
        for i in range(len(proc.rules)):
            for j in range(i + 1, len(proc.rules)):
                a = _rename_apart(proc.rules[i].lhs, "#1")
                b = _rename_apart(proc.rules[j].lhs, "#2")
                mgu = unify(a, b)
                if mgu is not None:
                    witness = subst(a, mgu)
                    out.append(
                        Diagnostic(
                            ERROR,
                            "overlap",
                            proc.rules[j].pos,
                            f"rules {i + 1} and {j + 1} of {proc.name} overlap"
                            f" on {printer.plain(_scrub(witness))}",
                        )
                    )
    return _sorted(out)


def _scrub(t: PlainTerm) -> PlainTerm:
    """Drop the rename-apart suffixes for display."""
    if isinstance(t, Var):
        return Var(t.name.split("#")[0])
    return App(t.symbol, tuple(_scrub(a) for a in t.args))


def check_bindings(prog: Program, mode: str = MULTI_ASSIGNMENT) -> list[Diagnostic]:
    """Variable-binding discipline over rule bodies.

    Every variable read must be bound (by a formal, pattern variable, or
    earlier assignment).  In single-assignment mode a bound variable may
    not be reassigned; in multi-assignment mode reassignment is fine but a
    never-bound variable still cannot appear in its own right-hand side.
    """
    out: list[Diagnostic] = []

    for proc in prog.procedures.values():
        if proc.kind == ast.REWRITE:
            for rule in proc.rules:
                formals = frozenset(_pattern_vars(rule.lhs))
                _check_aterm(rule.rhs, formals, mode, out)
        else:
            _check_aterm(proc.body, frozenset(proc.params), mode, out)
    return _sorted(out)


def _pattern_vars(p: PlainTerm) -> set[str]:
    if isinstance(p, Var):
        return {p.name}
    acc: set[str] = set()
    for a in p.args:
        acc |= _pattern_vars(a)
    return acc


def _check_expr(t: ATerm, env: frozenset[str], mode: str, out: list[Diagnostic]) -> None:
    if isinstance(t, VarRef):
        if t.name not in env:
            out.append(
                Diagnostic(ERROR, "unbound-var", t.pos, f"variable {t.name} is not bound")
            )
    elif isinstance(t, Term):
        for a in t.args:
            _check_aterm(a, env, mode, out)
    elif isinstance(t, If):
        _check_aterm(t.cond, env, mode, out)
        _check_aterm(t.then, env, mode, out)
        _check_aterm(t.els, env, mode, out)
    else:
        _check_aterm(t, env, mode, out)


def _check_assign(
    target: str,
    rhs: ATerm,
    pos: Pos,
    env: frozenset[str],
    mode: str,
    out: list[Diagnostic],
) -> frozenset[str]:
    rhs_vars = ast.free_vars(rhs, frozenset())
    if target in rhs_vars and target not in env:
        out.append(
            Diagnostic(
                ERROR,
                "self-reference",
                pos,
                f"{target} occurs in its own right-hand side but was never bound",
            )
        )
    if mode == SINGLE_ASSIGNMENT and target in env:
        out.append(
            Diagnostic(ERROR, "rebind", pos, f"{target} is already bound")
        )
    _check_expr(rhs, env, mode, out)
    return env | {target}


def _check_stmts(
    stmts: tuple[Stmt, ...], env: frozenset[str], mode: str, out: list[Diagnostic]
) -> frozenset[str]:
    for s in stmts:
        if isinstance(s, SAssign):
            env = _check_assign(s.target, s.rhs, s.pos, env, mode, out)
        elif isinstance(s, STupleAssign):
            _check_expr(s.rhs, env, mode, out)
            if mode == SINGLE_ASSIGNMENT:
                for name in s.targets:
                    if name in env:
                        out.append(
                            Diagnostic(ERROR, "rebind", s.pos, f"{name} is already bound")
                        )
            env = env | set(s.targets)
        elif isinstance(s, SIf):
            _check_expr(s.cond, env, mode, out)
            e1 = _check_stmts(s.then_stmts, env, mode, out)
            e2 = _check_stmts(s.else_stmts, env, mode, out)
            env = e1 & e2
        elif isinstance(s, SLoop):
            env = _check_loop(s.kind, s.index, s.start, s.limit, s.cond, s.body, env, mode, out)
        else:
            raise TypeError(s)
    return env


def _check_loop(
    kind, index, start, limit, cond, body, env, mode, out
) -> frozenset[str]:
    inner = env
    if kind == ast.FOR:
        _check_expr(start, env, mode, out)
        _check_expr(limit, env, mode, out)
        inner = env | {index}
    after = _check_stmts(body, inner, mode, out)
    if kind == ast.WHILE:
        _check_expr(cond, inner, mode, out)
    elif kind == ast.UNTIL:
        _check_expr(cond, after, mode, out)
    # The continuation sees the loop-site environment: body-local values
    # reach it only through the generated procedure's parameters, which
    # must already be bound here.
    return env


def _check_aterm(t: ATerm, env: frozenset[str], mode: str, out: list[Diagnostic]) -> None:
    if isinstance(t, (VarRef, Term, If)):
        _check_expr(t, env, mode, out)
    elif isinstance(t, Assign):
        env2 = _check_assign(t.target, t.rhs, t.pos, env, mode, out)
        _check_aterm(t.rest, env2, mode, out)
    elif isinstance(t, TupleAssign):
        _check_expr(t.rhs, env, mode, out)
        if mode == SINGLE_ASSIGNMENT:
            for name in t.targets:
                if name in env:
                    out.append(Diagnostic(ERROR, "rebind", t.pos, f"{name} is already bound"))
        _check_aterm(t.rest, env | set(t.targets), mode, out)
    elif isinstance(t, IfChain):
        _check_expr(t.cond, env, mode, out)
        e1 = _check_stmts(t.then_stmts, env, mode, out)
        e2 = _check_stmts(t.else_stmts, env, mode, out)
        _check_aterm(t.rest, e1, mode, out)
        if e2 != e1:
            _check_aterm(t.rest, e2, mode, out)
    elif isinstance(t, Loop):
        env2 = _check_loop(t.kind, t.index, t.start, t.limit, t.cond, t.body, env, mode, out)
        _check_aterm(t.rest, env2, mode, out)
    else:
        raise TypeError(t)


# -- pattern coverage ---------------------------------------------------------


def check_exhaustive(prog: Program) -> list[Diagnostic]:
    """Best-effort coverage warning for rewrite procedures.

    The constructor universe is the program's declared constructors; the
    predeclared constants join it only when a procedure's patterns mention
    them.  Integer and tuple patterns make a column open-ended, so only a
    variable row can complete it.  Incompleteness is a warning: at run
    time an unmatched call rewrites to the error constant.
    """
    out: list[Diagnostic] = []
    declared = list(prog.constructors.values())
    for proc in prog.procedures.values():
        if proc.kind != ast.REWRITE:
            continue
        matrix = [list(r.lhs.args) for r in proc.rules]
        uses_predeclared = any(
            _mentions_predeclared(cell) for row in matrix for cell in row
        )
        universe = list(declared)
        if uses_predeclared:
            universe = universe + [PREDECLARED_CONSTANTS[n] for n in sorted(PREDECLARED_CONSTANTS)]
        witness = _missing(matrix, len(matrix[0]) if matrix else 0, universe)
        if witness is not None:
            shown = App(
                Symbol(proc.name, proc.arity, "defined"),
                tuple(witness),
            )
            from . import printer

            out.append(
                Diagnostic(
                    WARNING,
                    "incomplete-patterns",
                    proc.pos,
                    f"{proc.name} does not cover {printer.plain(shown)}",
                )
            )
    return _sorted(out)


def _mentions_predeclared(p: PlainTerm) -> bool:
    if isinstance(p, Var):
        return False
    if p.symbol.name in PREDECLARED_CONSTANTS and p.symbol.arity == 0:
        return True
    return any(_mentions_predeclared(a) for a in p.args)


_WILD = Var("_")


def _missing(matrix: list[list[PlainTerm]], width: int, universe: list[Symbol]):
    """A constructor vector no row matches, or None if covered.  Classic
    specialization/default recursion over the first column."""
    if width == 0:
        return None if matrix else []
    if not matrix:
        return [_WILD] * width

    heads: dict[tuple[str, int], Symbol] = {}
    open_column = False
    for row in matrix:
        cell = row[0]
        if isinstance(cell, App):
            sym = cell.symbol
            heads[(sym.name, sym.arity)] = sym
            if int_value(sym) is not None or is_tuple_symbol(sym):
                open_column = True

    declared_keys = {(s.name, s.arity) for s in universe}
    complete = not open_column and heads and set(heads) >= declared_keys and set(heads) <= declared_keys

    if complete:
        for sym in universe:
            sub = _specialize(matrix, sym)
            rest = _missing(sub, sym.arity + width - 1, universe)
            if rest is not None:
                return [App(sym, tuple(rest[: sym.arity]))] + rest[sym.arity :]
        return None

    # Signature incomplete: the default matrix (variable rows only) must
    # cover everything else.
    default = [row[1:] for row in matrix if isinstance(row[0], Var)]
    rest = _missing(default, width - 1, universe)
    if rest is None:
        return None
    missing_sym = _some_uncovered(heads, universe)
    return [missing_sym] + rest


def _specialize(matrix: list[list[PlainTerm]], sym: Symbol) -> list[list[PlainTerm]]:
    out = []
    for row in matrix:
        cell = row[0]
        if isinstance(cell, Var):
            out.append([_WILD] * sym.arity + row[1:])
        elif cell.symbol == sym:
            out.append(list(cell.args) + row[1:])
    return out


def _some_uncovered(heads: dict[tuple[str, int], Symbol], universe: list[Symbol]) -> PlainTerm:
    for sym in universe:
        if (sym.name, sym.arity) not in heads:
            return App(sym, tuple(_WILD for _ in range(sym.arity)))
    used_ints = sorted(
        v for (n, a), s in heads.items() if (v := int_value(s)) is not None
    )
    fresh = (used_ints[-1] + 1) if used_ints else 0
    return App(Symbol(str(fresh), 0, CONSTRUCTOR))


def run_checks(prog: Program, mode: str = MULTI_ASSIGNMENT) -> list[Diagnostic]:
    """All checks, merged and sorted by source position."""
    diags = check_partition(prog) + check_left_linear(prog)
    diags += check_orthogonal(prog)
    diags += check_bindings(prog, mode)
    diags += check_exhaustive(prog)
    return _sorted(diags)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diags)
