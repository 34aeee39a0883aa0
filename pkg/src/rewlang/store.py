"""The shared-term store.

A Snapshot is the global term being reduced, kept as a table from
equivalence labels to (symbol, child labels) nodes.  One label denotes at
most one node, so all occurrences of a label are structurally identical by
construction; distinct labels may still denote identical terms.  Rewriting
a class replaces every occurrence at once (splice), which is what makes
sharing and destructive updates observable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .terms import (
    CONSTRUCTOR,
    App,
    PlainTerm,
    Symbol,
    Var,
    term_key,
)

Label = int


class LabelPolicy(Enum):
    SHARE_IDENTICAL = "share-identical"
    ALL_FRESH = "all-fresh"


class StoreError(Exception):
    pass


class CycleError(StoreError):
    """A class graph turned out to be cyclic where a tree was required."""


class OccursViolation(StoreError):
    """A splice or destructive update would have created a cycle."""


@dataclass
class Node:
    symbol: Symbol
    children: list[Label]


@dataclass
class Violation:
    kind: str  # closedness | parent-index | root | forwarding
    label: Label
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at label {self.label}: {self.detail}"


@dataclass
class Snapshot:
    """Class table plus bookkeeping: a reverse index of parent slots (so a
    splice touches only actual occurrences) and a forwarding map recording
    which class superseded a spliced-away one."""

    counter: int = 0
    table: dict[Label, Node] = field(default_factory=dict)
    root: Label | None = None
    parents: dict[Label, set[tuple[Label, int]]] = field(default_factory=dict)
    forward: dict[Label, Label] = field(default_factory=dict)
    constants: dict[str, Label] = field(default_factory=dict)
    # When set, every structural change is appended here as
    # ("add", lab, sym, children) / ("splice", beta, lab) /
    # ("mutate", lab, slot, child); trace replay applies these.
    ops: list[tuple] | None = None

    def fresh(self) -> Label:
        lab = self.counter
        self.counter += 1
        return lab

    def node(self, lab: Label) -> Node:
        return self.table[lab]

    def symbol_of(self, lab: Label) -> Symbol:
        return self.table[lab].symbol

    def children_of(self, lab: Label) -> list[Label]:
        return list(self.table[lab].children)

    def add_node(self, symbol: Symbol, children: list[Label]) -> Label:
        lab = self.fresh()
        self.table[lab] = Node(symbol, list(children))
        self.parents.setdefault(lab, set())
        for i, c in enumerate(children):
            self.parents.setdefault(c, set()).add((lab, i))
        if self.ops is not None:
            self.ops.append(("add", lab, symbol, tuple(children)))
        return lab

    def constant(self, symbol: Symbol) -> Label:
        """The globally shared class of a constructor constant."""
        assert symbol.arity == 0 and symbol.kind == CONSTRUCTOR, symbol
        lab = self.constants.get(symbol.name)
        if lab is None:
            lab = self.add_node(symbol, [])
            self.constants[symbol.name] = lab
        return lab

    def resolve(self, lab: Label) -> Label:
        """Follow forwarding to the live representative of a class."""
        seen = lab
        while seen in self.forward:
            seen = self.forward[seen]
        # Path compression keeps long reduction chains cheap.
        while lab in self.forward:
            nxt = self.forward[lab]
            self.forward[lab] = seen
            lab = nxt
        return seen

    # -- class-wide replacement -------------------------------------------

    def splice(self, beta: Label, lab: Label, occurs_check: bool = False) -> None:
        """Replace every occurrence of class ``beta`` by ``lab``.

        The old class stays in the table as garbage; ``beta`` forwards to
        ``lab`` so stale handles still resolve to the live class.
        """
        if beta == lab:
            return
        if beta not in self.table or lab not in self.table:
            raise StoreError(f"splice of unknown label {beta} <- {lab}")
        if occurs_check and beta in self.reachable(lab):
            raise OccursViolation(f"splice {beta} <- {lab} would create a cycle")
        for parent, slot in self.parents.pop(beta, set()):
            self.table[parent].children[slot] = lab
            self.parents.setdefault(lab, set()).add((parent, slot))
        self.parents[beta] = set()
        if self.root == beta:
            self.root = lab
        self.forward[beta] = lab
        if self.ops is not None:
            self.ops.append(("splice", beta, lab))

    def set_child(self, lab: Label, slot: int, child: Label) -> None:
        """Destructively overwrite one child slot of a class in place."""
        node = self.table[lab]
        old = node.children[slot]
        self.parents.get(old, set()).discard((lab, slot))
        node.children[slot] = child
        self.parents.setdefault(child, set()).add((lab, slot))
        if self.ops is not None:
            self.ops.append(("mutate", lab, slot, child))

    def reachable(self, lab: Label) -> set[Label]:
        seen: set[Label] = set()
        stack = [lab]
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(self.table[cur].children)
        return seen

    # -- consistency -------------------------------------------------------

    def check_store(self, acyclic: bool = False) -> Violation | None:
        """Verify closedness and index coherence; returns the first
        violation found, or None."""
        for lab, node in self.table.items():
            for i, c in enumerate(node.children):
                if c not in self.table:
                    return Violation("closedness", lab, f"child {i} -> missing {c}")
                if (lab, i) not in self.parents.get(c, set()):
                    return Violation("parent-index", lab, f"slot {i} not indexed under {c}")
        for child, entries in self.parents.items():
            for parent, slot in entries:
                node = self.table.get(parent)
                if node is None or slot >= len(node.children) or node.children[slot] != child:
                    return Violation("parent-index", child, f"stale entry ({parent},{slot})")
        if self.root is not None and self.root not in self.table:
            return Violation("root", self.root, "root label missing")
        for src, dst in self.forward.items():
            if dst not in self.table:
                return Violation("forwarding", src, f"forwards to missing {dst}")
        if acyclic:
            state: dict[Label, int] = {}

            def visit(lab: Label) -> Label | None:
                stack = [(lab, iter(self.table[lab].children))]
                state[lab] = 1
                while stack:
                    cur, it = stack[-1]
                    nxt = next(it, None)
                    if nxt is None:
                        state[cur] = 2
                        stack.pop()
                        continue
                    s = state.get(nxt)
                    if s == 1:
                        return nxt
                    if s is None:
                        state[nxt] = 1
                        stack.append((nxt, iter(self.table[nxt].children)))
                return None

            for lab in self.table:
                if state.get(lab) is None:
                    bad = visit(lab)
                    if bad is not None:
                        return Violation("cycle", bad, "class reachable from itself")
        return None


@dataclass(frozen=True)
class DecoratedTerm:
    """Materialized view of a class: label, symbol, and child views."""

    label: Label
    symbol: Symbol
    children: tuple["DecoratedTerm", ...]

    def labels(self) -> set[Label]:
        out = {self.label}
        for c in self.children:
            out |= c.labels()
        return out


def decorate(
    t: PlainTerm,
    snap: Snapshot,
    policy: LabelPolicy = LabelPolicy.SHARE_IDENTICAL,
) -> Label:
    """Enter a ground plain term into the store.

    Under SHARE_IDENTICAL, syntactically identical subterms receive one
    label (constants share the global class); under ALL_FRESH every
    occurrence gets its own label.
    """
    memo: dict[tuple, Label] = {}

    def walk(u: PlainTerm) -> Label:
        if isinstance(u, Var):
            raise StoreError(f"cannot decorate non-ground term: variable {u.name}")
        if policy is LabelPolicy.SHARE_IDENTICAL:
            if u.symbol.arity == 0 and u.symbol.kind == CONSTRUCTOR:
                return snap.constant(u.symbol)
            key = term_key(u)
            hit = memo.get(key)
            if hit is not None:
                return hit
            children = [walk(a) for a in u.args]
            lab = snap.add_node(u.symbol, children)
            memo[key] = lab
            return lab
        children = [walk(a) for a in u.args]
        return snap.add_node(u.symbol, children)

    return walk(t)


def strip(lab: Label, snap: Snapshot) -> PlainTerm:
    """The plain term of a class, labels erased.  Shared classes come back
    as shared objects; cyclic classes raise CycleError."""
    lab = snap.resolve(lab)
    memo: dict[Label, PlainTerm] = {}
    on_path: set[Label] = set()

    def walk(cur: Label) -> PlainTerm:
        hit = memo.get(cur)
        if hit is not None:
            return hit
        if cur in on_path:
            raise CycleError(f"class {cur} is cyclic")
        on_path.add(cur)
        node = snap.table[cur]
        out = App(node.symbol, tuple(walk(c) for c in node.children))
        on_path.discard(cur)
        memo[cur] = out
        return out

    return walk(lab)


def render_safe(lab: Label, snap: Snapshot, max_depth: int = 200) -> PlainTerm:
    """Like strip but renders back-edges and very deep terms as the
    `...` constant instead of failing; used for trace output."""
    ellipsis = Symbol("...", 0, CONSTRUCTOR)

    def walk(cur: Label, path: frozenset[Label], depth: int) -> PlainTerm:
        cur = snap.resolve(cur)
        if cur in path or depth > max_depth:
            return App(ellipsis)
        node = snap.table[cur]
        path2 = path | {cur}
        return App(node.symbol, tuple(walk(c, path2, depth + 1) for c in node.children))

    return walk(lab, frozenset(), 0)


def decorated(lab: Label, snap: Snapshot) -> DecoratedTerm:
    lab = snap.resolve(lab)
    on_path: set[Label] = set()

    def walk(cur: Label) -> DecoratedTerm:
        if cur in on_path:
            raise CycleError(f"class {cur} is cyclic")
        on_path.add(cur)
        node = snap.table[cur]
        out = DecoratedTerm(cur, node.symbol, tuple(walk(c) for c in node.children))
        on_path.discard(cur)
        return out

    return walk(lab)


def match(pattern: PlainTerm, lab: Label, snap: Snapshot) -> dict[str, Label] | None:
    """Match a left-linear pattern against a class; returns variable
    bindings to labels, or None."""
    binding: dict[str, Label] = {}

    def walk(p: PlainTerm, cur: Label) -> bool:
        if isinstance(p, Var):
            binding[p.name] = cur
            return True
        node = snap.table[cur]
        if node.symbol != p.symbol:
            return False
        return all(walk(q, c) for q, c in zip(p.args, node.children))

    if walk(pattern, snap.resolve(lab)):
        return binding
    return None


def instantiate(
    rhs: PlainTerm,
    theta: dict[str, Label],
    snap: Snapshot,
    memo: dict[int, Label] | None = None,
) -> Label:
    """Build the class of ``rhs`` under ``theta``.

    New structure gets fresh labels; constructor constants reuse the global
    shared class; every occurrence of one bound variable (and of one shared
    rhs node object) receives the same label, so sharing of origin is
    preserved.  Passing one ``memo`` across several roots keeps their
    common substructure in common classes.
    """
    if memo is None:
        memo = {}

    def walk(u: PlainTerm) -> Label:
        if isinstance(u, Var):
            try:
                return theta[u.name]
            except KeyError:
                raise StoreError(f"unbound variable {u.name} in instantiation") from None
        hit = memo.get(id(u))
        if hit is not None:
            return hit
        if u.symbol.arity == 0 and u.symbol.kind == CONSTRUCTOR:
            lab = snap.constant(u.symbol)
        else:
            lab = snap.add_node(u.symbol, [walk(a) for a in u.args])
        memo[id(u)] = lab
        return lab

    return walk(rhs)


def copy_class(lab: Label, snap: Snapshot) -> Label:
    """Isomorphic deep copy: structurally identical, internal sharing
    preserved, no labels in common with the source subgraph."""
    lab = snap.resolve(lab)
    memo: dict[Label, Label] = {}
    on_path: set[Label] = set()

    def walk(cur: Label) -> Label:
        hit = memo.get(cur)
        if hit is not None:
            return hit
        if cur in on_path:
            raise CycleError(f"class {cur} is cyclic")
        on_path.add(cur)
        node = snap.table[cur]
        out = snap.add_node(node.symbol, [walk(c) for c in node.children])
        on_path.discard(cur)
        memo[cur] = out
        return out

    return walk(lab)
