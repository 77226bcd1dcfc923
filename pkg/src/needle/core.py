"""Shared term-graph machinery: symbols, nodes, patterns, snapshots, erasure.

Terms are mutable graphs of `Node` objects.  A rewrite never edits a node in
place; it sets the node's `forward` pointer to the replacement, and every
reader goes through `resolve`.  That keeps sharing exact: all parents of a
rewritten node observe the result.

Labels are either `Symbol` instances (interned per system, compared by
identity) or plain Python ints for integer literals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

# ---- symbols ----------------------------------------------------------------

CONSTRUCTOR = "constructor"
OPERATION = "operation"
BUILTIN = "builtin"
CONTROL = "control"
SPECIALIZED = "specialized"

INT_SORT = "Int"


class Symbol:
    """An interned signature symbol; equality is object identity."""

    __slots__ = ("name", "kind", "arity", "arg_sorts", "result_sort", "base")

    def __init__(self, name, kind, arity, arg_sorts=(), result_sort=None, base=None):
        self.name = name
        self.kind = kind
        self.arity = arity
        self.arg_sorts = tuple(arg_sorts)
        self.result_sort = result_sort
        # For specialized evaluation symbols: the operation they stand for.
        self.base = base

    def __repr__(self):
        return f"Symbol({self.name!r}, {self.kind})"

    @property
    def is_data(self):
        """True for symbols that may appear in source terms and values."""
        return self.kind in (CONSTRUCTOR, OPERATION, BUILTIN)

    @property
    def is_op(self):
        return self.kind in (OPERATION, BUILTIN)


# The two evaluation wrappers: head-normalize and normalize.
H = Symbol("H", CONTROL, 1)
N = Symbol("N", CONTROL, 1)

Label = Union[Symbol, int]


# ---- graph nodes ------------------------------------------------------------

_node_ids = itertools.count(1)


class Node:
    """A mutable term-graph node.

    `forward` is None for a live node; a rewritten node points at its
    replacement (possibly transitively).
    """

    __slots__ = ("nid", "label", "children", "forward")

    def __init__(self, label, children=()):
        self.nid = next(_node_ids)
        self.label = label
        self.children = list(children)
        self.forward = None

    def __repr__(self):
        name = self.label.name if isinstance(self.label, Symbol) else self.label
        return f"<node {self.nid} {name}>"


def mk(label, *children):
    return Node(label, children)


def resolve(node):
    """Follow forwarding pointers; compresses the path as it goes."""
    target = node
    while target.forward is not None:
        target = target.forward
    while node.forward is not None and node.forward is not target:
        nxt = node.forward
        node.forward = target
        node = nxt
    return target


def child_at(node, path):
    """Resolved node at `path` (a tuple of child indices) below `node`."""
    cur = resolve(node)
    for i in path:
        cur = resolve(cur.children[i])
    return cur


# ---- snapshots --------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    """Immutable copy of the reachable graph below a root.

    `nodes` maps nid -> (label, tuple of child nids).  Node ids are stable
    across snapshots of the same evaluation, so consecutive snapshots can be
    correlated node-for-node.
    """

    root: int
    nodes: dict


def capture(root):
    root = resolve(root)
    nodes = {}
    stack = [root]
    while stack:
        n = resolve(stack.pop())
        if n.nid in nodes:
            continue
        kids = tuple(resolve(c).nid for c in n.children)
        nodes[n.nid] = (n.label, kids)
        stack.extend(n.children)
    return Snapshot(root.nid, nodes)


def erase(snap):
    """Erase a snapshot: splice out H/N wrappers, relabel f^H back to f.

    Returns (erased_snapshot, rep) where rep maps every original nid to the
    nid representing it in the erased graph (wrappers map to what they wrap).
    """
    rep = {}
    for nid in snap.nodes:
        cur = nid
        chain = []
        while cur not in rep:
            label, kids = snap.nodes[cur]
            if isinstance(label, Symbol) and label.kind == CONTROL:
                chain.append(cur)
                cur = kids[0]
            else:
                rep[cur] = cur
                break
        target = rep[cur]
        for c in chain:
            rep[c] = target
    root = rep[snap.root]
    nodes = {}
    stack = [root]
    while stack:
        nid = stack.pop()
        if nid in nodes:
            continue
        label, kids = snap.nodes[nid]
        if isinstance(label, Symbol) and label.kind == SPECIALIZED:
            label = label.base
        kids = tuple(rep[k] for k in kids)
        nodes[nid] = (label, kids)
        stack.extend(kids)
    return Snapshot(root, nodes), rep


def snapshots_equal(a, b):
    """Tree-unfolding equality of two snapshots (insensitive to sharing)."""
    seen = set()
    stack = [(a.root, b.root)]
    while stack:
        x, y = stack.pop()
        if (x, y) in seen:
            continue
        seen.add((x, y))
        la, ka = a.nodes[x]
        lb, kb = b.nodes[y]
        if (la is not lb and la != lb) or len(ka) != len(kb):
            return False
        stack.extend(zip(ka, kb))
    return True


def term_of(snap, nid=None, override=None):
    """Unfold (part of) a snapshot into nested `(label, kids_tuple)` tuples.

    `override` may map a nid to a prebuilt term, which is spliced in place of
    that node.  Shared nodes unfold to the same tuple object, so DAGs stay
    cheap in memory.
    """
    if nid is None:
        nid = snap.root
    memo = dict(override) if override else {}
    stack = [(nid, False)]
    while stack:
        cur, expanded = stack.pop()
        if cur in memo:
            continue
        label, kids = snap.nodes[cur]
        if expanded:
            memo[cur] = (label, tuple(memo[k] for k in kids))
        else:
            stack.append((cur, True))
            for k in kids:
                if k not in memo:
                    stack.append((k, False))
    return memo[nid]


# ---- patterns ---------------------------------------------------------------


@dataclass(frozen=True)
class PVar:
    """Pattern variable.  Matches anything; binds the matched node."""

    name: str
    sort: Optional[str] = None


@dataclass(frozen=True)
class PLit:
    """Matches one specific integer literal."""

    value: int


@dataclass(frozen=True)
class PAnyLit:
    """Matches any integer literal; binds the matched literal node."""

    name: str


@dataclass(frozen=True)
class PApp:
    """Matches a node labeled `label`, then the children in order."""

    label: Symbol
    args: tuple = ()


Pattern = Union[PVar, PLit, PAnyLit, PApp]


def pattern_vars(p) -> Iterator[PVar]:
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, PVar):
            yield q
        elif isinstance(q, PApp):
            stack.extend(q.args)


def pattern_at(p, path):
    for i in path:
        p = p.args[i]
    return p


def pattern_subst(p, path, repl):
    """Return `p` with the subpattern at `path` replaced by `repl`."""
    if not path:
        return repl
    i = path[0]
    args = list(p.args)
    args[i] = pattern_subst(args[i], path[1:], repl)
    return PApp(p.label, tuple(args))


def var_path(p, name):
    """Path of the (unique, by left-linearity) occurrence of variable `name`."""
    stack = [(p, ())]
    while stack:
        q, path = stack.pop()
        if isinstance(q, PVar) and q.name == name:
            return path
        if isinstance(q, PApp):
            for i, a in enumerate(q.args):
                stack.append((a, path + (i,)))
    raise KeyError(name)


def patterns_variant(p, q):
    """True if two patterns are equal up to a bijective renaming of variables."""
    fwd, bwd = {}, {}
    stack = [(p, q)]
    while stack:
        a, b = stack.pop()
        if isinstance(a, PVar) and isinstance(b, PVar):
            if fwd.setdefault(a.name, b.name) != b.name:
                return False
            if bwd.setdefault(b.name, a.name) != a.name:
                return False
        elif isinstance(a, PAnyLit) and isinstance(b, PAnyLit):
            if fwd.setdefault(a.name, b.name) != b.name:
                return False
            if bwd.setdefault(b.name, a.name) != a.name:
                return False
        elif isinstance(a, PLit) and isinstance(b, PLit):
            if a.value != b.value:
                return False
        elif isinstance(a, PApp) and isinstance(b, PApp):
            if a.label is not b.label or len(a.args) != len(b.args):
                return False
            stack.extend(zip(a.args, b.args))
        else:
            return False
    return True


# ---- right-hand-side templates ----------------------------------------------


@dataclass(frozen=True)
class RVar:
    """Reuse the node bound to a pattern variable (shares the subgraph)."""

    name: str


@dataclass(frozen=True)
class RLit:
    """Allocate a fresh integer literal node."""

    value: int


@dataclass(frozen=True)
class RApp:
    """Allocate a fresh node labeled `label` over instantiated children."""

    label: Symbol
    children: tuple = ()


@dataclass(frozen=True)
class RShare:
    """Reuse the node matched at `path` in the rule's left-hand side."""

    path: tuple


Template = Union[RVar, RLit, RApp, RShare]


def template_vars(t) -> Iterator[str]:
    stack = [t]
    while stack:
        q = stack.pop()
        if isinstance(q, RVar):
            yield q.name
        elif isinstance(q, RApp):
            stack.extend(q.children)


# ---- source rules -----------------------------------------------------------


@dataclass
class SourceRule:
    """A user-level rewrite rule `op(patterns) = template`."""

    op: Symbol
    lhs: PApp
    rhs: Template
    index: int
    var_sorts: dict = field(default_factory=dict)

    def __repr__(self):
        return f"SourceRule({self.op.name}#{self.index})"


class NeedleError(Exception):
    """Base class for user-facing errors."""


class EvaluationError(NeedleError):
    """Raised for runtime evaluation failures (e.g. arithmetic overflow)."""


INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


def check_int(value):
    if value < INT_MIN or value > INT_MAX:
        raise EvaluationError(f"integer overflow: {value} exceeds 64-bit range")
    return value
