"""Source-to-source lowering down to assignment-free rewrite rules.

The passes run in a fixed order.  Loops become fresh recursive flat
procedures; tuple assignments expand into projections; statement-position
conditionals are distributed over their continuation (the continuation
object is shared, not copied, so untouched parts keep one identity);
reassigned variables get fresh numbered versions; finally assignments are
eliminated by substitution.

Elimination produces plain-term DAGs in which sharing is object identity:
every occurrence of one bound variable receives the same node object, and
substitution returns untouched subtrees unchanged.  The store later maps
one object to one equivalence label, which is what makes the result of
elimination independent of the order in which assignments are removed,
labels included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

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
    Rule,
    SAssign,
    SIf,
    SLoop,
    STupleAssign,
    Stmt,
    Term,
    TupleAssign,
    VarRef,
    chain,
    free_vars,
)
from .parser import BUILTIN_ARITIES, RESERVED_NAMES, builtin_symbol
from .terms import (
    CONSTRUCTOR,
    DEFINED,
    IF,
    App,
    PlainTerm,
    Symbol,
    Var,
    int_symbol,
)


@dataclass
class LoweredProgram:
    program: Program
    provenance: dict[str, tuple[str, str, Pos]]  # generated -> (origin, kind, pos)


@dataclass
class FlatRule:
    lhs: PlainTerm
    rhs: PlainTerm  # assignment-free DAG
    pos: Pos = ast.NOPOS


@dataclass
class RewriteSystem:
    rules: list[FlatRule]
    origin: Program


# -- loop elimination ---------------------------------------------------------


class _NameSource:
    def __init__(self, taken: set[str]):
        self.taken = set(taken) | RESERVED_NAMES
        self.counter = 0

    def fresh_proc(self, kind: str) -> str:
        while True:
            self.counter += 1
            name = f"p_{kind}_{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def lower_loops(prog: Program) -> LoweredProgram:
    """Replace every loop, outermost first, by a call to a fresh flat
    procedure whose parameters are the variables the loop body and
    continuation need."""
    names = _NameSource({name for (name, _a) in prog.procedures} | {name for (name, _a) in prog.constructors})
    out = Program(constructors=dict(prog.constructors), source_name=prog.source_name)
    provenance: dict[str, tuple[str, str, Pos]] = {}
    worklist: list[Procedure] = []

    def emit(proc: Procedure) -> None:
        out.procedures[proc.key] = proc

    def lower_body(a: ATerm, origin: str) -> ATerm:
        if isinstance(a, (VarRef,)):
            return a
        if isinstance(a, Term):
            args = tuple(lower_body(x, origin) for x in a.args)
            if all(n is o for n, o in zip(args, a.args)):
                return a
            return Term(a.symbol, args, a.pos)
        if isinstance(a, If):
            c = lower_body(a.cond, origin)
            t = lower_body(a.then, origin)
            e = lower_body(a.els, origin)
            if c is a.cond and t is a.then and e is a.els:
                return a
            return If(c, t, e, a.pos)
        if isinstance(a, Assign):
            rhs = lower_body(a.rhs, origin)
            rest = lower_body(a.rest, origin)
            if rhs is a.rhs and rest is a.rest:
                return a
            return Assign(a.target, rhs, rest, a.pos)
        if isinstance(a, TupleAssign):
            rhs = lower_body(a.rhs, origin)
            rest = lower_body(a.rest, origin)
            if rhs is a.rhs and rest is a.rest:
                return a
            return TupleAssign(a.targets, rhs, rest, a.pos)
        if isinstance(a, IfChain):
            return IfChain(
                lower_body(a.cond, origin),
                a.then_stmts,
                a.else_stmts,
                lower_body(a.rest, origin),
                a.pos,
            )
        if isinstance(a, Loop):
            return lower_loop(a, origin)
        raise TypeError(a)

    def lower_loop(loop: Loop, origin: str) -> ATerm:
        name = names.fresh_proc(loop.kind)
        provenance[name] = (origin, loop.kind, loop.pos)
        # State parameters: what the body, exit condition, and continuation
        # read.  Start and limit expressions are evaluated at the call
        # site, so their variables stay out.
        if loop.kind == ast.FOR:
            zero = Term(int_symbol(0))
            frees = sorted(
                free_vars(
                    Loop(loop.kind, loop.index, zero, zero, None, loop.body, loop.rest, loop.pos)
                )
            )
        else:
            frees = sorted(free_vars(loop))
        if loop.kind == ast.FOR:
            limit_param = _fresh_var(f"{loop.index}_limit", set(frees) | {loop.index})
            params = (loop.index, limit_param) + tuple(v for v in frees if v != loop.index)
            state = params[2:]
            sym = Symbol(name, len(params), DEFINED)
            recurse = Term(
                sym,
                (
                    Term(builtin_symbol("+"), (VarRef(loop.index), Term(int_symbol(1)))),
                    VarRef(limit_param),
                )
                + tuple(VarRef(v) for v in state),
                loop.pos,
            )
            cond = Term(builtin_symbol("<="), (VarRef(loop.index), VarRef(limit_param)), loop.pos)
            gen_body: ATerm = If(cond, chain(loop.body, recurse), loop.rest, loop.pos)
            call = Term(
                sym,
                (lower_body(loop.start, origin), lower_body(loop.limit, origin))
                + tuple(VarRef(v) for v in state),
                loop.pos,
            )
        else:
            params = tuple(frees)
            sym = Symbol(name, len(params), DEFINED)
            recurse = Term(sym, tuple(VarRef(v) for v in params), loop.pos)
            if loop.kind == ast.WHILE:
                gen_body = If(loop.cond, chain(loop.body, recurse), loop.rest, loop.pos)
            else:  # do { body } until cond
                gen_body = chain(loop.body, If(loop.cond, loop.rest, recurse, loop.pos))
            call = Term(sym, tuple(VarRef(v) for v in params), loop.pos)
        gen = Procedure(name, len(params), ast.FLAT, params=params, body=gen_body, pos=loop.pos)
        worklist.append(gen)
        return call

    for proc in list(prog.procedures.values()):
        worklist.append(proc)
        while worklist:
            cur = worklist.pop(0)
            if cur.kind == ast.REWRITE:
                rules = [Rule(r.lhs, lower_body(r.rhs, cur.name), r.pos) for r in cur.rules]
                emit(Procedure(cur.name, cur.arity, ast.REWRITE, rules=rules, pos=cur.pos))
            else:
                body = lower_body(cur.body, cur.name)
                emit(
                    Procedure(
                        cur.name, cur.arity, ast.FLAT, params=cur.params, body=body, pos=cur.pos
                    )
                )
    return LoweredProgram(out, provenance)


def _fresh_var(base: str, taken: set[str]) -> str:
    if base not in taken and base not in RESERVED_NAMES:
        return base
    k = 2
    while f"{base}{k}" in taken or f"{base}{k}" in RESERVED_NAMES:
        k += 1
    return f"{base}{k}"


# -- tuple assignment expansion ------------------------------------------------


def _all_var_names(a: ATerm) -> set[str]:
    out: set[str] = set()

    def stmt(s: Stmt) -> None:
        if isinstance(s, SAssign):
            out.add(s.target)
            walk(s.rhs)
        elif isinstance(s, STupleAssign):
            out.update(s.targets)
            walk(s.rhs)
        elif isinstance(s, SIf):
            walk(s.cond)
            for x in s.then_stmts + s.else_stmts:
                stmt(x)
        elif isinstance(s, SLoop):
            for e in (s.start, s.limit, s.cond):
                if e is not None:
                    walk(e)
            if s.index:
                out.add(s.index)
            for x in s.body:
                stmt(x)

    def walk(t: ATerm) -> None:
        if isinstance(t, VarRef):
            out.add(t.name)
        elif isinstance(t, Term):
            for x in t.args:
                walk(x)
        elif isinstance(t, If):
            walk(t.cond)
            walk(t.then)
            walk(t.els)
        elif isinstance(t, (Assign,)):
            out.add(t.target)
            walk(t.rhs)
            walk(t.rest)
        elif isinstance(t, TupleAssign):
            out.update(t.targets)
            walk(t.rhs)
            walk(t.rest)
        elif isinstance(t, IfChain):
            walk(t.cond)
            for x in t.then_stmts + t.else_stmts:
                stmt(x)
            walk(t.rest)
        elif isinstance(t, Loop):
            for e in (t.start, t.limit, t.cond):
                if e is not None:
                    walk(e)
            if t.index:
                out.add(t.index)
            for x in t.body:
                stmt(x)
            walk(t.rest)

    walk(a)
    return out


def expand_tuple_assign(a: ATerm) -> ATerm:
    """<x1,..,xn> <- t; E  becomes  x <- t; x1 <- pi(1,x); ..; E with x
    fresh.  The evaluated tuple may be wider than n; narrower fails at
    run time through pi's error result."""
    taken = _all_var_names(a)
    pi = builtin_symbol("pi")

    def expand_stmts(stmts: tuple[Stmt, ...]) -> tuple[Stmt, ...]:
        out: list[Stmt] = []
        for s in stmts:
            if isinstance(s, STupleAssign):
                binder = _fresh_var("_tup", taken)
                taken.add(binder)
                out.append(SAssign(binder, walk(s.rhs), s.pos))
                for k, name in enumerate(s.targets, start=1):
                    out.append(
                        SAssign(
                            name,
                            Term(pi, (Term(int_symbol(k)), VarRef(binder)), s.pos),
                            s.pos,
                        )
                    )
            elif isinstance(s, SAssign):
                out.append(SAssign(s.target, walk(s.rhs), s.pos))
            elif isinstance(s, SIf):
                out.append(
                    SIf(walk(s.cond), expand_stmts(s.then_stmts), expand_stmts(s.else_stmts), s.pos)
                )
            elif isinstance(s, SLoop):
                out.append(
                    SLoop(
                        s.kind,
                        s.index,
                        walk(s.start) if s.start is not None else None,
                        walk(s.limit) if s.limit is not None else None,
                        walk(s.cond) if s.cond is not None else None,
                        expand_stmts(s.body),
                        s.pos,
                    )
                )
            else:
                raise TypeError(s)
        return tuple(out)

    def walk(t: ATerm) -> ATerm:
        if isinstance(t, VarRef):
            return t
        if isinstance(t, Term):
            args = tuple(walk(x) for x in t.args)
            if all(n is o for n, o in zip(args, t.args)):
                return t
            return Term(t.symbol, args, t.pos)
        if isinstance(t, If):
            c, th, el = walk(t.cond), walk(t.then), walk(t.els)
            if c is t.cond and th is t.then and el is t.els:
                return t
            return If(c, th, el, t.pos)
        if isinstance(t, Assign):
            rhs, rest = walk(t.rhs), walk(t.rest)
            if rhs is t.rhs and rest is t.rest:
                return t
            return Assign(t.target, rhs, rest, t.pos)
        if isinstance(t, TupleAssign):
            binder = _fresh_var("_tup", taken)
            taken.add(binder)
            rest: ATerm = walk(t.rest)
            for k in range(len(t.targets), 0, -1):
                rest = Assign(
                    t.targets[k - 1],
                    Term(pi, (Term(int_symbol(k)), VarRef(binder)), t.pos),
                    rest,
                    t.pos,
                )
            return Assign(binder, walk(t.rhs), rest, t.pos)
        if isinstance(t, IfChain):
            return IfChain(
                walk(t.cond),
                expand_stmts(t.then_stmts),
                expand_stmts(t.else_stmts),
                walk(t.rest),
                t.pos,
            )
        if isinstance(t, Loop):
            return Loop(
                t.kind,
                t.index,
                walk(t.start) if t.start is not None else None,
                walk(t.limit) if t.limit is not None else None,
                walk(t.cond) if t.cond is not None else None,
                expand_stmts(t.body),
                walk(t.rest),
                t.pos,
            )
        raise TypeError(t)

    return walk(a)


# -- conditional distribution ---------------------------------------------------


def distribute_if_seq(a: ATerm) -> ATerm:
    """Push statement-position conditionals over their continuation:
    (if B then S1 else S2); E  becomes  if B then S1;E else S2;E.  The
    continuation object E is inserted into both branches unchanged, so its
    untouched parts keep a single identity."""

    def walk(t: ATerm) -> ATerm:
        if isinstance(t, VarRef):
            return t
        if isinstance(t, Term):
            args = tuple(walk(x) for x in t.args)
            if all(n is o for n, o in zip(args, t.args)):
                return t
            return Term(t.symbol, args, t.pos)
        if isinstance(t, If):
            c, th, el = walk(t.cond), walk(t.then), walk(t.els)
            if c is t.cond and th is t.then and el is t.els:
                return t
            return If(c, th, el, t.pos)
        if isinstance(t, Assign):
            rhs, rest = walk(t.rhs), walk(t.rest)
            if rhs is t.rhs and rest is t.rest:
                return t
            return Assign(t.target, rhs, rest, t.pos)
        if isinstance(t, TupleAssign):
            rhs, rest = walk(t.rhs), walk(t.rest)
            if rhs is t.rhs and rest is t.rest:
                return t
            return TupleAssign(t.targets, rhs, rest, t.pos)
        if isinstance(t, IfChain):
            rest = walk(t.rest)
            then = walk(chain(t.then_stmts, rest))
            els = walk(chain(t.else_stmts, rest))
            return If(walk(t.cond), then, els, t.pos)
        if isinstance(t, Loop):
            raise ValueError("loops must be lowered before distribution")
        raise TypeError(t)

    return walk(a)


# -- multiple-assignment renaming ------------------------------------------------


def rename_multi_assign(a: ATerm, formals: tuple[str, ...] = ()) -> ATerm:
    """Turn reassignments into single-assignment form: each rebinding
    introduces a fresh numbered variable and later reads use the newest
    version.  Branches rename independently; their continuations were
    already distributed into them."""
    taken = _all_var_names(a) | set(formals)

    def fresh_version(name: str) -> str:
        base = name.rstrip("0123456789") or name
        k = 2
        while f"{base}{k}" in taken:
            k += 1
        out = f"{base}{k}"
        taken.add(out)
        return out

    def walk(t: ATerm, env: dict[str, str]) -> ATerm:
        if isinstance(t, VarRef):
            new = env.get(t.name, t.name)
            if new == t.name:
                return t
            return VarRef(new, t.pos)
        if isinstance(t, Term):
            args = tuple(walk(x, env) for x in t.args)
            if all(n is o for n, o in zip(args, t.args)):
                return t
            return Term(t.symbol, args, t.pos)
        if isinstance(t, If):
            c = walk(t.cond, env)
            th = walk(t.then, dict(env))
            el = walk(t.els, dict(env))
            if c is t.cond and th is t.then and el is t.els:
                return t
            return If(c, th, el, t.pos)
        if isinstance(t, Assign):
            rhs = walk(t.rhs, env)
            bound = t.target in env
            new_name = fresh_version(t.target) if bound else t.target
            env2 = dict(env)
            env2[t.target] = new_name
            rest = walk(t.rest, env2)
            if rhs is t.rhs and rest is t.rest and new_name == t.target:
                return t
            return Assign(new_name, rhs, rest, t.pos)
        if isinstance(t, (TupleAssign, IfChain, Loop)):
            raise ValueError(f"{type(t).__name__} must be expanded before renaming")
        raise TypeError(t)

    return walk(a, {v: v for v in formals})


# -- assignment elimination -------------------------------------------------------


def _subst_dag(
    t: PlainTerm, binding: dict[str, PlainTerm], memo: dict[int, PlainTerm]
) -> PlainTerm:
    if isinstance(t, Var):
        return binding.get(t.name, t)
    hit = memo.get(id(t))
    if hit is not None:
        return hit
    args = tuple(_subst_dag(a, binding, memo) for a in t.args)
    if all(n is o for n, o in zip(args, t.args)):
        out: PlainTerm = t
    else:
        out = App(t.symbol, args)
    memo[id(t)] = out
    return out


def eliminate_assignments(a: ATerm) -> PlainTerm:
    """[[x <- t; E]] = [[E]] with t substituted for x; conditionals and
    applications pass through homomorphically.  The result is a DAG whose
    sharing records which occurrences came from one binding."""
    dag, _plan = eliminate_with_plan(a)
    return dag


@dataclass
class PAssign:
    rhs_ref: PlainTerm
    rest: "Plan"
    pos: Pos = ast.NOPOS


@dataclass
class PIf:
    if_ref: PlainTerm
    then: "Plan"
    els: "Plan"
    pos: Pos = ast.NOPOS


@dataclass
class PExpr:
    ref: PlainTerm


Plan = PAssign | PIf | PExpr


def _remap_plan(plan: Plan, binding: dict[str, PlainTerm], memo: dict[int, PlainTerm]) -> Plan:
    if isinstance(plan, PAssign):
        return PAssign(
            _subst_dag(plan.rhs_ref, binding, memo),
            _remap_plan(plan.rest, binding, memo),
            plan.pos,
        )
    if isinstance(plan, PIf):
        return PIf(
            _subst_dag(plan.if_ref, binding, memo),
            _remap_plan(plan.then, binding, memo),
            _remap_plan(plan.els, binding, memo),
            plan.pos,
        )
    return PExpr(_subst_dag(plan.ref, binding, memo))


def eliminate_with_plan(a: ATerm) -> tuple[PlainTerm, Plan]:
    """Eliminate assignments and keep a statement-order walk plan whose
    entries reference the assignment images inside the resulting DAG (an
    image may be unreachable when its variable is never read)."""
    vars_cache: dict[str, Var] = {}
    expr_memo: dict[int, PlainTerm] = {}
    go_memo: dict[int, tuple[PlainTerm, "Plan"]] = {}

    def term_of(t: ATerm) -> PlainTerm:
        """Assignment-free image of an expression; embedded assignment
        chains are eliminated in place."""
        if isinstance(t, VarRef):
            v = vars_cache.get(t.name)
            if v is None:
                v = Var(t.name)
                vars_cache[t.name] = v
            return v
        hit = expr_memo.get(id(t))
        if hit is not None:
            return hit
        if isinstance(t, Term):
            out: PlainTerm = App(t.symbol, tuple(term_of(x) for x in t.args))
        elif isinstance(t, If):
            out = App(IF, (term_of(t.cond), term_of(t.then), term_of(t.els)))
        elif isinstance(t, (Assign, TupleAssign)):
            out, _ = go(t)
        else:
            raise ValueError(f"cannot eliminate {type(t).__name__} here")
        expr_memo[id(t)] = out
        return out

    def go(t: ATerm) -> tuple[PlainTerm, Plan]:
        hit = go_memo.get(id(t))
        if hit is not None:
            return hit
        if isinstance(t, Assign):
            rhs_dag = term_of(t.rhs)
            rest_dag, rest_plan = go(t.rest)
            binding = {t.target: rhs_dag}
            memo: dict[int, PlainTerm] = {}
            out = _subst_dag(rest_dag, binding, memo)
            plan = _remap_plan(rest_plan, binding, memo)
            result = out, PAssign(_subst_dag(rhs_dag, binding, memo), plan, t.pos)
        elif isinstance(t, If):
            cond_dag = term_of(t.cond)
            then_dag, then_plan = go(t.then)
            els_dag, els_plan = go(t.els)
            node = App(IF, (cond_dag, then_dag, els_dag))
            result = node, PIf(node, then_plan, els_plan, t.pos)
        elif isinstance(t, (VarRef, Term)):
            dag = term_of(t)
            result = dag, PExpr(dag)
        elif isinstance(t, TupleAssign):
            raise ValueError("tuple assignments must be expanded before elimination")
        elif isinstance(t, (IfChain, Loop)):
            raise ValueError(f"{type(t).__name__} must be lowered before elimination")
        else:
            raise TypeError(t)
        go_memo[id(t)] = result
        return result

    return go(a)


# -- stepwise elimination (order-independence support) -----------------------------


def count_assigns(a: ATerm) -> int:
    if isinstance(a, VarRef):
        return 0
    if isinstance(a, Term):
        return sum(count_assigns(x) for x in a.args)
    if isinstance(a, If):
        return count_assigns(a.cond) + count_assigns(a.then) + count_assigns(a.els)
    if isinstance(a, Assign):
        return 1 + count_assigns(a.rhs) + count_assigns(a.rest)
    raise TypeError(a)


def elimination_sites(a: ATerm) -> list[Assign]:
    """Every assignment node, anywhere in the aterm."""
    out: list[Assign] = []
    seen: set[int] = set()

    def walk(t: ATerm) -> None:
        if id(t) in seen:
            return
        seen.add(id(t))
        if isinstance(t, VarRef):
            return
        if isinstance(t, Term):
            for x in t.args:
                walk(x)
        elif isinstance(t, If):
            walk(t.cond)
            walk(t.then)
            walk(t.els)
        elif isinstance(t, Assign):
            out.append(t)
            walk(t.rhs)
            walk(t.rest)
        else:
            raise TypeError(t)

    walk(a)
    return out


def _subst_aterm(t: ATerm, name: str, replacement: ATerm, memo: dict[int, ATerm]) -> ATerm:
    if isinstance(t, VarRef):
        return replacement if t.name == name else t
    hit = memo.get(id(t))
    if hit is not None:
        return hit
    if isinstance(t, Term):
        args = tuple(_subst_aterm(x, name, replacement, memo) for x in t.args)
        out: ATerm = t if all(n is o for n, o in zip(args, t.args)) else Term(t.symbol, args, t.pos)
    elif isinstance(t, If):
        c = _subst_aterm(t.cond, name, replacement, memo)
        th = _subst_aterm(t.then, name, replacement, memo)
        el = _subst_aterm(t.els, name, replacement, memo)
        out = t if (c is t.cond and th is t.then and el is t.els) else If(c, th, el, t.pos)
    elif isinstance(t, Assign):
        assert t.target != name, "stepwise elimination expects single-assignment form"
        rhs = _subst_aterm(t.rhs, name, replacement, memo)
        rest = _subst_aterm(t.rest, name, replacement, memo)
        out = t if (rhs is t.rhs and rest is t.rest) else Assign(t.target, rhs, rest, t.pos)
    else:
        raise TypeError(t)
    memo[id(t)] = out
    return out


def eliminate_at(a: ATerm, site: Assign) -> ATerm:
    """One elimination step: replace the given assignment node by its
    continuation with the bound term substituted in."""
    memo: dict[int, ATerm] = {}

    def walk(t: ATerm) -> ATerm:
        if t is site:
            return _subst_aterm(site.rest, site.target, site.rhs, {})
        hit = memo.get(id(t))
        if hit is not None:
            return hit
        if isinstance(t, VarRef):
            out: ATerm = t
        elif isinstance(t, Term):
            args = tuple(walk(x) for x in t.args)
            out = t if all(n is o for n, o in zip(args, t.args)) else Term(t.symbol, args, t.pos)
        elif isinstance(t, If):
            c, th, el = walk(t.cond), walk(t.then), walk(t.els)
            out = t if (c is t.cond and th is t.then and el is t.els) else If(c, th, el, t.pos)
        elif isinstance(t, Assign):
            rhs, rest = walk(t.rhs), walk(t.rest)
            out = t if (rhs is t.rhs and rest is t.rest) else Assign(t.target, rhs, rest, t.pos)
        else:
            raise TypeError(t)
        memo[id(t)] = out
        return out

    return walk(a)


def to_dag(a: ATerm) -> PlainTerm:
    """Assignment-free aterm to a plain-term DAG, sharing preserved."""
    assert count_assigns(a) == 0
    return eliminate_assignments(a)


def canonical_labels(dag: PlainTerm) -> tuple:
    """Deterministic label sequence of a DAG: depth-first left-to-right,
    first visit of a node assigns the next label, constants share one
    label per symbol, variables carry no label."""
    labels: dict[object, int] = {}
    counter = 0
    out: list[tuple] = []

    def key(node: PlainTerm):
        assert isinstance(node, App)
        if node.symbol.arity == 0 and node.symbol.kind == CONSTRUCTOR:
            return ("const", node.symbol.name)
        return id(node)

    def walk(node: PlainTerm) -> None:
        nonlocal counter
        if isinstance(node, Var):
            out.append(("var", node.name))
            return
        k = key(node)
        if k not in labels:
            labels[k] = counter
            counter += 1
        out.append((node.symbol.name, node.symbol.arity, labels[k]))
        for a in node.args:
            walk(a)

    walk(dag)
    return tuple(out)


# -- whole-program flattening -------------------------------------------------------


def aterm_pipeline(a: ATerm, formals: tuple[str, ...] = ()) -> ATerm:
    """Tuple expansion, distribution, renaming: everything except the
    final elimination (the evaluator keeps this form for statement
    order)."""
    return rename_multi_assign(distribute_if_seq(expand_tuple_assign(a)), formals)


def flatten_program(prog: Program) -> RewriteSystem:
    """The rewrite system of a program: loops lowered, then every rule and
    flat body taken through the full pipeline to an assignment-free rule."""
    lowered = lower_loops(prog)
    rules: list[FlatRule] = []
    for proc in lowered.program.procedures.values():
        if proc.kind == ast.REWRITE:
            for r in proc.rules:
                formals = tuple(sorted(_pattern_var_names(r.lhs)))
                body = aterm_pipeline(r.rhs, formals)
                rules.append(FlatRule(r.lhs, eliminate_assignments(body), r.pos))
        else:
            lhs = App(
                Symbol(proc.name, proc.arity, DEFINED),
                tuple(Var(p) for p in proc.params),
            )
            body = aterm_pipeline(proc.body, proc.params)
            rules.append(FlatRule(lhs, eliminate_assignments(body), proc.pos))
    return RewriteSystem(rules, lowered.program)


def _pattern_var_names(p: PlainTerm) -> set[str]:
    if isinstance(p, Var):
        return {p.name}
    acc: set[str] = set()
    for x in p.args:
        acc |= _pattern_var_names(x)
    return acc
