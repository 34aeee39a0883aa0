"""The evaluator: leftmost-innermost reduction over the shared-term store.

Rewrite procedures reduce through their assignment-free rules.  Flat
procedures splice their whole body image into the call site first, then a
walk plan drives evaluation in statement order, which is what gives
destructive operations a deterministic meaning.  Conditionals evaluate the
guard, splice in exactly one branch, and never touch the other; everything
else is strict, left to right.

A randomized-innermost driver exists for confluence testing only: it picks
an arbitrary innermost redex each step and refuses programs that use
d_replace.
"""

from __future__ import annotations

import os
import random
import sys
import threading
from dataclasses import dataclass, field

from . import ast, checks
from .ast import Program
from .builtins import BUILTINS, apply_builtin
from .desugar import (
    FlatRule,
    PAssign,
    PExpr,
    PIf,
    Plan,
    aterm_pipeline,
    eliminate_assignments,
    eliminate_with_plan,
    lower_loops,
)
from .parser import parse_query
from .store import (
    CycleError,
    Label,
    LabelPolicy,
    OccursViolation,
    Snapshot,
    decorate,
    instantiate,
    match,
    render_safe,
    strip,
)
from .terms import (
    COMPILED,
    CONSTRUCTOR,
    DEFINED,
    ERROR,
    FALSE,
    IF,
    TRUE,
    App,
    PlainTerm,
    Symbol,
    Var,
)

DEFAULT_MAX_STEPS = 10**6
DEFAULT_MAX_DEPTH = 10**4


class EvalError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind  # step-limit | depth-limit | error-constant | guard |
        #                   occurs-violation | store-violation | cycle | internal


@dataclass
class TraceEvent:
    step: int
    kind: str  # rewrite | builtin | destructive | cond | call | splice
    rule: str
    label: Label
    before: PlainTerm
    after: PlainTerm
    result: Label
    ops: list[tuple] = field(default_factory=list)


@dataclass
class RunResult:
    outcome: str  # ok | error-constant | guard | step-limit | depth-limit |
    #               occurs-violation | store-violation | cycle
    term: PlainTerm | None
    trace: list[TraceEvent]
    steps: int
    message: str = ""


@dataclass
class PreparedRewrite:
    name: str
    rules: list[FlatRule]


@dataclass
class PreparedFlat:
    name: str
    params: tuple[str, ...]
    dag: PlainTerm
    plan: Plan
    flat_rule: FlatRule  # single-rule view, for rule-only evaluation modes


@dataclass
class PreparedProgram:
    program: Program  # loop-free
    procs: dict[tuple[str, int], PreparedRewrite | PreparedFlat]
    has_destructive: bool

    def lookup(self, name: str, arity: int):
        return self.procs.get((name, arity))


def _mentions_destructive(dag: PlainTerm, seen: set[int]) -> bool:
    if isinstance(dag, Var) or id(dag) in seen:
        return False
    seen.add(id(dag))
    if dag.symbol.name == "d_replace":
        return True
    return any(_mentions_destructive(a, seen) for a in dag.args)


def prepare(prog: Program, mode: str = checks.MULTI_ASSIGNMENT) -> PreparedProgram:
    """Lower loops and take every body through the aterm pipeline; rewrite
    rules become assignment-free DAG rules, flat bodies keep a statement
    plan alongside their image."""
    lowered = lower_loops(prog)
    procs: dict[tuple[str, int], PreparedRewrite | PreparedFlat] = {}
    destructive = False
    seen: set[int] = set()
    for proc in lowered.program.procedures.values():
        if proc.kind == ast.REWRITE:
            rules = []
            for r in proc.rules:
                formals = tuple(sorted(_pattern_vars(r.lhs)))
                dag = eliminate_assignments(aterm_pipeline(r.rhs, formals))
                destructive = destructive or _mentions_destructive(dag, seen)
                rules.append(FlatRule(r.lhs, dag, r.pos))
            procs[proc.key] = PreparedRewrite(proc.name, rules)
        else:
            body = aterm_pipeline(proc.body, proc.params)
            dag, plan = eliminate_with_plan(body)
            destructive = destructive or _mentions_destructive(dag, seen)
            lhs = App(
                Symbol(proc.name, proc.arity, DEFINED),
                tuple(Var(p) for p in proc.params),
            )
            procs[proc.key] = PreparedFlat(
                proc.name, proc.params, dag, plan, FlatRule(lhs, dag, proc.pos)
            )
    return PreparedProgram(lowered.program, procs, destructive)


def _pattern_vars(p: PlainTerm) -> set[str]:
    if isinstance(p, Var):
        return {p.name}
    out: set[str] = set()
    for a in p.args:
        out |= _pattern_vars(a)
    return out


@dataclass
class EvalState:
    max_steps: int = DEFAULT_MAX_STEPS
    max_depth: int = DEFAULT_MAX_DEPTH
    occurs_check: bool = False
    per_step_store_check: bool = False
    right_first: bool = False  # test-only argument-order flip
    flat_as_rules: bool = False  # test-only: flat procedures via their rules
    collect_trace: bool = True
    step_count: int = 0
    depth: int = 0
    trace: list[TraceEvent] = field(default_factory=list)


class Evaluator:
    def __init__(self, prepared: PreparedProgram, snap: Snapshot, state: EvalState):
        self.prepared = prepared
        self.snap = snap
        self.state = state
        self.nf: set[Label] = set()
        self.on_stack: set[Label] = set()
        if state.collect_trace:
            snap.ops = []

    # -- bookkeeping -------------------------------------------------------

    def _count_step(self) -> int:
        st = self.state
        st.step_count += 1
        if st.step_count > st.max_steps:
            raise EvalError("step-limit", f"exceeded {st.max_steps} steps")
        return st.step_count

    def _enter(self) -> None:
        self.state.depth += 1
        if self.state.depth > self.state.max_depth:
            raise EvalError("depth-limit", f"exceeded depth {self.state.max_depth}")

    def _leave(self) -> None:
        self.state.depth -= 1

    def _emit(self, step: int, kind: str, rule: str, label: Label,
              before: PlainTerm, result: Label) -> None:
        if not self.state.collect_trace:
            return
        ops = self.snap.ops or []
        self.snap.ops = []
        self.state.trace.append(
            TraceEvent(
                step,
                kind,
                rule,
                label,
                before,
                render_safe(result, self.snap),
                self.snap.resolve(result),
                ops,
            )
        )
        if self.state.per_step_store_check:
            violation = self.snap.check_store(acyclic=self.state.occurs_check)
            if violation is not None:
                raise EvalError("store-violation", str(violation))

    def _splice(self, beta: Label, lab: Label) -> None:
        self.snap.splice(beta, lab, occurs_check=self.state.occurs_check)

    # -- the evaluator proper ------------------------------------------------

    def eval(self, lab: Label) -> Label:
        """Normal form of a class; updates the store in place."""
        lab = self.snap.resolve(lab)
        if lab in self.nf:
            return lab
        if lab in self.on_stack:
            raise EvalError("cycle", f"class {lab} depends on itself")
        self.on_stack.add(lab)
        try:
            node = self.snap.node(lab)
            sym = node.symbol
            if sym.kind == CONSTRUCTOR:
                self._eval_children(lab)
                self.nf.add(lab)
                return lab
            if sym == IF:
                return self.eval_cond(lab)
            # Strict symbol: arguments first, left to right.
            self._eval_children(lab)
            if sym.kind == COMPILED:
                return self._step_builtin(lab)
            proc = self.prepared.lookup(sym.name, sym.arity)
            if proc is None:
                raise EvalError("internal", f"no procedure for {sym}")
            if isinstance(proc, PreparedRewrite):
                return self.eval_rewrite_proc(lab, proc)
            if self.state.flat_as_rules:
                return self._eval_via_rules(lab, proc.name, [proc.flat_rule])
            return self.eval_flat_call(lab, proc)
        finally:
            self.on_stack.discard(lab)

    def _eval_children(self, lab: Label) -> None:
        n = len(self.snap.node(lab).children)
        order = range(n - 1, -1, -1) if self.state.right_first else range(n)
        for i in order:
            child = self.snap.node(lab).children[i]  # re-read: earlier evals splice
            self.eval(child)

    def eval_list(self, labels: list[Label]) -> list[Label]:
        """Strict left-to-right evaluation; each element sees the store its
        predecessors produced."""
        seq = reversed(labels) if self.state.right_first else labels
        out = [self.eval(lab) for lab in seq]
        if self.state.right_first:
            out.reverse()
        return out

    def _check_error_args(self, lab: Label, opname: str) -> None:
        node = self.snap.node(lab)
        for c in node.children:
            if self.snap.symbol_of(self.snap.resolve(c)) == ERROR:
                raise EvalError(
                    "error-constant",
                    f"error value reached strict operation {opname}",
                )

    def _step_builtin(self, lab: Label) -> Label:
        node = self.snap.node(lab)
        name = node.symbol.name
        self._check_error_args(lab, name)
        before = render_safe(lab, self.snap) if self.state.collect_trace else None
        step = self._count_step()
        impl = BUILTINS[(name, len(node.children))]
        result = apply_builtin(
            name, self.snap, list(node.children), self.state.occurs_check
        )
        self._splice(lab, result)
        self._emit(
            step,
            "destructive" if impl.destructive else "builtin",
            name,
            lab,
            before,
            result,
        )
        self.nf.add(self.snap.resolve(result))
        return self.snap.resolve(result)

    def eval_cond(self, lab: Label) -> Label:
        """Guard first, then exactly one branch; the other is never
        evaluated."""
        cond_child = self.snap.node(lab).children[0]
        guard = self.eval(cond_child)
        gsym = self.snap.symbol_of(guard)
        node = self.snap.node(lab)  # re-read after guard evaluation
        if gsym == TRUE:
            taken = node.children[1]
        elif gsym == FALSE:
            taken = node.children[2]
        else:
            raise EvalError("guard", f"conditional guard is {gsym.name}, not a truth value")
        before = render_safe(lab, self.snap) if self.state.collect_trace else None
        step = self._count_step()
        self._splice(lab, taken)
        self._emit(step, "cond", "if", lab, before, taken)
        return self.eval(taken)

    def _eval_via_rules(self, lab: Label, name: str, rules: list[FlatRule]) -> Label:
        result, matched = self._step_rules(lab, name, rules)
        if not matched:
            return result  # error fallback, already normal
        self._enter()
        try:
            return self.eval(result)
        finally:
            self._leave()

    def _step_rules(self, lab: Label, name: str, rules: list[FlatRule]) -> tuple[Label, bool]:
        """One rule application at ``lab`` (or the error fallback when no
        rule matches); parallel by construction since the class is
        spliced."""
        for idx, rule in enumerate(rules):
            theta = match(rule.lhs, lab, self.snap)
            if theta is None:
                continue
            before = render_safe(lab, self.snap) if self.state.collect_trace else None
            step = self._count_step()
            result = instantiate(rule.rhs, theta, self.snap)
            self._splice(lab, result)
            self._emit(step, "rewrite", f"{name}#{idx + 1}", lab, before, result)
            return result, True
        before = render_safe(lab, self.snap) if self.state.collect_trace else None
        step = self._count_step()
        err = self.snap.constant(ERROR)
        self._splice(lab, err)
        self._emit(step, "rewrite", f"{name}#no-rule", lab, before, err)
        return err, False

    def eval_rewrite_proc(self, lab: Label, proc: PreparedRewrite) -> Label:
        return self._eval_via_rules(lab, proc.name, proc.rules)

    def eval_flat_call(self, lab: Label, proc: PreparedFlat) -> Label:
        """Splice the body image at the call site, then evaluate in
        statement order via the walk plan."""
        node = self.snap.node(lab)
        theta = dict(zip(proc.params, node.children))
        before = render_safe(lab, self.snap) if self.state.collect_trace else None
        step = self._count_step()
        memo: dict[int, Label] = {}
        root = instantiate(proc.dag, theta, self.snap, memo)
        self._instantiate_plan_refs(proc.plan, theta, memo)
        self._splice(lab, root)
        self._emit(step, "call", proc.name, lab, before, root)
        self._enter()
        try:
            return self._walk_plan(proc.plan, theta, memo)
        finally:
            self._leave()

    def _instantiate_plan_refs(
        self, plan: Plan, theta: dict[str, Label], memo: dict[int, Label]
    ) -> None:
        """Assignment images whose variable is never read are not part of
        the body image; build them anyway so their effects still happen."""
        if isinstance(plan, PAssign):
            instantiate(plan.rhs_ref, theta, self.snap, memo)
            self._instantiate_plan_refs(plan.rest, theta, memo)
        elif isinstance(plan, PIf):
            self._instantiate_plan_refs(plan.then, theta, memo)
            self._instantiate_plan_refs(plan.els, theta, memo)

    def _plan_label(
        self, ref: PlainTerm, theta: dict[str, Label], memo: dict[int, Label]
    ) -> Label:
        if isinstance(ref, Var):
            return theta[ref.name]
        return memo[id(ref)]

    def _walk_plan(
        self, plan: Plan, theta: dict[str, Label], memo: dict[int, Label]
    ) -> Label:
        if isinstance(plan, PAssign):
            self.eval_assign(self._plan_label(plan.rhs_ref, theta, memo))
            return self._walk_plan(plan.rest, theta, memo)
        if isinstance(plan, PIf):
            if_lab = self.snap.resolve(self._plan_label(plan.if_ref, theta, memo))
            if self.snap.symbol_of(if_lab) != IF:
                # A shared continuation may already have been resolved past
                # its conditional; just evaluate what the class holds now.
                return self.eval(if_lab)
            guard = self.eval(self.snap.node(if_lab).children[0])
            gsym = self.snap.symbol_of(guard)
            node = self.snap.node(if_lab)
            if gsym == TRUE:
                taken_child, taken_plan = node.children[1], plan.then
            elif gsym == FALSE:
                taken_child, taken_plan = node.children[2], plan.els
            else:
                raise EvalError(
                    "guard", f"conditional guard is {gsym.name}, not a truth value"
                )
            before = render_safe(if_lab, self.snap) if self.state.collect_trace else None
            step = self._count_step()
            self._splice(if_lab, taken_child)
            self._emit(step, "cond", "if", if_lab, before, taken_child)
            return self._walk_plan(taken_plan, theta, memo)
        return self.eval(self._plan_label(plan.ref, theta, memo))

    def eval_assign(self, rhs_label: Label) -> Label:
        """Evaluate one assignment's bound term; sharing propagates the
        value to every occurrence of the variable."""
        return self.eval(rhs_label)

    def eval_d_replace(self, lab: Label) -> Label:
        """Destructive step at an already argument-evaluated call; exposed
        for direct exercise in tests."""
        return self._step_builtin(lab)

    # -- randomized-innermost mode (confluence testing only) -----------------

    def normalize_random(self, root: Label, rng: random.Random) -> Label:
        if self.prepared.has_destructive:
            raise EvalError(
                "internal", "randomized strategy refuses destructive programs"
            )
        while True:
            root = self.snap.resolve(root)
            redexes = self._innermost_redexes(root)
            if not redexes:
                return root
            lab = redexes[rng.randrange(len(redexes))]
            self._reduce_once(lab)

    def _innermost_redexes(self, root: Label) -> list[Label]:
        out: list[Label] = []
        seen: set[Label] = set()

        def normal(lab: Label) -> bool:
            lab = self.snap.resolve(lab)
            if lab in self.nf:
                return True
            node = self.snap.node(lab)
            if node.symbol.kind != CONSTRUCTOR:
                return False
            if all(normal(c) for c in node.children):
                self.nf.add(lab)
                return True
            return False

        def visit(lab: Label) -> None:
            lab = self.snap.resolve(lab)
            if lab in seen:
                return
            seen.add(lab)
            node = self.snap.node(lab)
            sym = node.symbol
            if sym.kind == CONSTRUCTOR:
                for c in node.children:
                    visit(c)
                return
            if sym == IF:
                visit(node.children[0])
                if normal(node.children[0]):
                    out.append(lab)
                return
            for c in node.children:
                visit(c)
            if all(normal(c) for c in node.children):
                out.append(lab)

        visit(root)
        return out

    def _reduce_once(self, lab: Label) -> None:
        node = self.snap.node(lab)
        sym = node.symbol
        if sym == IF:
            gsym = self.snap.symbol_of(self.snap.resolve(node.children[0]))
            if gsym == TRUE:
                taken = node.children[1]
            elif gsym == FALSE:
                taken = node.children[2]
            else:
                raise EvalError("guard", f"guard is {gsym.name}")
            step = self._count_step()
            before = render_safe(lab, self.snap) if self.state.collect_trace else None
            self._splice(lab, taken)
            self._emit(step, "cond", "if", lab, before, taken)
            return
        if sym.kind == COMPILED:
            self._step_builtin(lab)
            return
        proc = self.prepared.lookup(sym.name, sym.arity)
        if isinstance(proc, PreparedRewrite):
            self._step_rules(lab, proc.name, proc.rules)
        else:
            self._step_rules(lab, proc.name, [proc.flat_rule])
        return


# -- deep-stack worker ------------------------------------------------------------


class _DeepWorker:
    """One process-wide thread with a very large stack; evaluation jobs run
    there so deeply recursive programs fail with the engine's own depth
    limit instead of exhausting the interpreter stack."""

    def __init__(self) -> None:
        import queue

        self.jobs: queue.Queue = queue.Queue()
        old = threading.stack_size(512 * 1024 * 1024)
        try:
            self.thread = threading.Thread(
                target=self._loop, name="rewlang-eval", daemon=True
            )
            self.thread.start()
        finally:
            threading.stack_size(old)

    def _loop(self) -> None:
        while True:
            fn, limit, box, done = self.jobs.get()
            if sys.getrecursionlimit() < limit:
                sys.setrecursionlimit(limit)
            try:
                box.append((True, fn()))
            except BaseException as e:  # noqa: BLE001 - reraised on the caller
                box.append((False, e))
            done.set()

    def run(self, fn, limit: int):
        if threading.current_thread() is self.thread:
            return fn()
        box: list = []
        done = threading.Event()
        self.jobs.put((fn, limit, box, done))
        done.wait()
        ok, payload = box[0]
        if ok:
            return payload
        raise payload


_worker: _DeepWorker | None = None


def _run_deep(fn, limit: int):
    global _worker
    if _worker is None:
        _worker = _DeepWorker()
    return _worker.run(fn, limit)


# -- one-shot driver ------------------------------------------------------------


class Session:
    """One evaluation session over one snapshot."""

    def __init__(
        self,
        prog: Program,
        mode: str = checks.MULTI_ASSIGNMENT,
        state: EvalState | None = None,
        label_seed: int | None = None,
        prepared: PreparedProgram | None = None,
    ):
        if prepared is None:
            diags = checks.run_checks(prog, mode)
            if checks.has_errors(diags):
                raise ValueError(
                    "program has check errors: "
                    + "; ".join(
                        d.render(prog.source_name)
                        for d in diags
                        if d.severity == checks.ERROR
                    )
                )
            prepared = prepare(prog, mode)
        self.program = prog
        self.prepared = prepared
        if label_seed is None:
            label_seed = int(os.environ.get("REWLANG_SEED", "0"))
        self.snap = Snapshot(counter=label_seed)
        self.state = state or EvalState()
        self.evaluator = Evaluator(self.prepared, self.snap, self.state)

    def load_query(self, query: str | PlainTerm,
                   policy: LabelPolicy = LabelPolicy.SHARE_IDENTICAL) -> Label:
        term = parse_query(query, self.program) if isinstance(query, str) else query
        lab = decorate(term, self.snap, policy)
        self.snap.root = lab
        return lab

    def evaluate(self, lab: Label) -> Label:
        """Evaluate on the shared deep-stack worker: the evaluator recurses
        a few frames per activation, so the default depth limit needs far
        more headroom than the main thread offers."""
        limit = max(20000, 30 * self.state.max_depth)
        return _run_deep(lambda: self.evaluator.eval(lab), limit)


def run_query(
    prog: Program,
    query: str | PlainTerm,
    state: EvalState | None = None,
    mode: str = checks.MULTI_ASSIGNMENT,
    label_seed: int | None = None,
    prepared: PreparedProgram | None = None,
) -> RunResult:
    """Evaluate a query to normal form under a fresh session.

    The result term of a successful run is a constructor term.  A bare
    error constant at the top level reports outcome "error-constant" while
    still carrying the term.  Pass ``prepared`` to amortize checking and
    preparation across many queries.
    """
    session = Session(prog, mode, state, label_seed, prepared)
    st = session.state
    try:
        root = session.load_query(query)
        result = session.evaluate(root)
        term = strip(result, session.snap)
        if isinstance(term, App) and term.symbol == ERROR:
            return RunResult("error-constant", term, st.trace, st.step_count,
                             "evaluation produced the error constant")
        return RunResult("ok", term, st.trace, st.step_count)
    except EvalError as e:
        return RunResult(e.kind, None, st.trace, st.step_count, str(e))
    except OccursViolation as e:
        return RunResult("occurs-violation", None, st.trace, st.step_count, str(e))
    except CycleError as e:
        return RunResult("cycle", None, st.trace, st.step_count, str(e))
