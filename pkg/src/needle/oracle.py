"""Source-level reference strategy and trace validation.

`oracle_eval` normalizes a source expression directly, with no compiled
rules: it repeatedly locates the leftmost-outermost operation-rooted node,
descends through argument positions its definitional tree demands, and
contracts the redex found there.  Rewrites forward graph nodes, so shared
subterms are evaluated once, exactly like the compiled evaluators.

`validate_trace` replays a traced compiled run against the source system:
erasing the evaluation wrappers from consecutive machine states must yield
either equal graphs (dispatch/norm steps) or graphs one source-rule step
apart, applied at the erased image of the machine redex — which must also be
the redex the source strategy itself would pick.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    BUILTIN,
    EvaluationError,
    Node,
    PApp,
    PLit,
    PVar,
    RApp,
    RLit,
    RVar,
    Symbol,
    capture,
    check_int,
    erase,
    resolve,
    snapshots_equal,
    term_of,
)
from .deftree import Exempt, Redex, build_all_deftrees, needed_descent
from .runtime import default_max_steps


@dataclass
class OracleResult:
    outcome: str  # "value", "aborted", "steplimit"
    root: Node
    steps: int


def _first_op(root, clean):
    """Leftmost-outermost operation-rooted node, or None if none remains.

    `clean` persists across calls and accumulates nodes whose subgraphs are
    known operation-free.
    """
    stack = [(root, 0)]
    while stack:
        node, phase = stack.pop()
        node = resolve(node)
        if node.nid in clean:
            continue
        label = node.label
        if isinstance(label, int):
            clean.add(node.nid)
            continue
        if phase == 0:
            if label.is_op:
                return node
            stack.append((node, 1))
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((node.children[i], 0))
        else:
            clean.add(node.nid)
    return None


def _match_source(pattern, node, bindings):
    node = resolve(node)
    if isinstance(pattern, PVar):
        bindings[pattern.name] = node
        return True
    if isinstance(pattern, PLit):
        return node.label == pattern.value and isinstance(node.label, int)
    if node.label is not pattern.label:
        return False
    return all(_match_source(p, c, bindings)
               for p, c in zip(pattern.args, node.children))


def _instantiate_source(template, bindings):
    if isinstance(template, RVar):
        return bindings[template.name]
    if isinstance(template, RLit):
        return Node(template.value)
    kids = [_instantiate_source(c, bindings) for c in template.children]
    return Node(template.label, kids)


def apply_source_rule(rule, node):
    bindings = {}
    matched = _match_source(rule.lhs, node, bindings)
    assert matched, "descent selected a rule that does not match"
    return _instantiate_source(rule.rhs, bindings)


def _apply_builtin(node):
    a = resolve(node.children[0]).label
    b = resolve(node.children[1]).label
    value = a + b if node.label.name == "add" else a - b
    return Node(check_int(value))


def oracle_eval(system, root, max_steps=None, trees=None):
    """Drive `root` to constructor normal form with the source strategy."""
    if trees is None:
        trees = build_all_deftrees(system)
    if max_steps is None:
        max_steps = default_max_steps()
    clean = set()
    steps = 0
    while True:
        root = resolve(root)
        opnode = _first_op(root, clean)
        if opnode is None:
            return OracleResult("value", root, steps)
        found = needed_descent(system, trees, opnode)
        if isinstance(found, Exempt):
            return OracleResult("aborted", root, steps)
        if steps >= max_steps:
            return OracleResult("steplimit", root, steps)
        steps += 1
        node = found.node
        if found.rule is None:
            node.forward = _apply_builtin(node)
        else:
            node.forward = apply_source_rule(found.rule, node)


# ---- trace validation ---------------------------------------------------------


@dataclass
class Violation:
    step: int
    kind: str
    detail: str

    def __str__(self):
        return f"step {self.step}: {self.kind}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list
    proper_steps: int

    @property
    def ok(self):
        return not self.violations


def _snap_first_op(snap):
    stack = [snap.root]
    seen = set()
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        label, kids = snap.nodes[nid]
        if isinstance(label, Symbol) and label.is_op:
            return nid
        stack.extend(reversed(kids))
    return None


def _snap_descent(system, trees, snap, nid):
    """Needed-redex descent over a snapshot; mirrors `needed_descent`."""
    from .deftree import DTBranch, DTExempt, DTIntBranch, DTRule

    while True:
        label, kids = snap.nodes[nid]
        if label.kind == BUILTIN:
            descended = False
            for k in kids:
                klabel, _ = snap.nodes[k]
                if isinstance(klabel, Symbol) and klabel.is_op:
                    nid = k
                    descended = True
                    break
            if descended:
                continue
            return ("redex", nid, None)
        cur = trees[label]
        descend_to = None
        while True:
            if isinstance(cur, DTRule):
                return ("redex", nid, cur.rule)
            if isinstance(cur, DTExempt):
                return ("exempt", nid, None)
            sub = nid
            for i in cur.path:
                sub = snap.nodes[sub][1][i]
            sub_label = snap.nodes[sub][0]
            if isinstance(sub_label, Symbol) and sub_label.is_op:
                descend_to = sub
                break
            if isinstance(cur, DTBranch):
                nxt = None
                for ctor, subtree in cur.children:
                    if ctor is sub_label:
                        nxt = subtree
                        break
                assert nxt is not None, "branch met an unknown constructor"
                cur = nxt
            else:
                nxt = None
                for value, subtree in cur.children:
                    if value == sub_label:
                        nxt = subtree
                        break
                if nxt is None:
                    nxt = cur.default
                if nxt is None:
                    return ("exempt", nid, None)
                cur = nxt
        nid = descend_to


def _match_term(pattern, term, bindings):
    label, kids = term
    if isinstance(pattern, PVar):
        bindings[pattern.name] = term
        return True
    if isinstance(pattern, PLit):
        return isinstance(label, int) and label == pattern.value
    if label is not pattern.label:
        return False
    return all(_match_term(p, k, bindings)
               for p, k in zip(pattern.args, kids))


def _instantiate_term(template, bindings):
    if isinstance(template, RVar):
        return bindings[template.name]
    if isinstance(template, RLit):
        return (template.value, ())
    return (template.label,
            tuple(_instantiate_term(c, bindings) for c in template.children))


def _source_step_term(rule, term):
    if rule is None:  # builtin
        label, kids = term
        a, b = kids[0][0], kids[1][0]
        value = a + b if label.name == "add" else a - b
        return (check_int(value), ())
    bindings = {}
    if not _match_term(rule.lhs, term, bindings):
        return None
    return _instantiate_term(rule.rhs, bindings)


def validate_trace(system, result, trees=None):
    """Check a traced compiled run step by step against the source system.

    Checks, per step: dispatch/norm steps leave the erased state unchanged,
    and the argument a dispatch rule forces is operation-rooted; rewrite and
    shortcut steps perform exactly one source-rule step, at the node the
    source strategy itself demands.  For completed runs the final state must
    be wrapper-free.  Returns a ValidationReport.
    """
    assert result.trace is not None, "run the evaluator with trace=True"
    if trees is None:
        trees = build_all_deftrees(system)
    violations = []
    proper = 0
    snaps = [step.pre for step in result.trace] + [result.final]
    for i, step in enumerate(result.trace):
        pre, post = snaps[i], snaps[i + 1]
        epre, rep = erase(pre)
        epost, _ = erase(post)
        rule = step.rule
        if rule.step_class in ("dispatch", "norm"):
            if not snapshots_equal(epre, epost):
                violations.append(Violation(
                    i, "state-changed",
                    f"{rule.origin} step altered the erased state"))
            if rule.dispatch_path is not None:
                sub = step.redex_nid
                for j in rule.dispatch_path:
                    sub = pre.nodes[sub][1][j]
                sub_label = pre.nodes[sub][0]
                if not (isinstance(sub_label, Symbol) and sub_label.is_op):
                    violations.append(Violation(
                        i, "dispatch-target",
                        f"dispatch forced a non-operation node {sub}"))
            continue
        # rewrite / shortcut: one source step at the erased redex image
        proper += 1
        e = rep.get(step.redex_nid)
        first = _snap_first_op(epre)
        if first is None:
            violations.append(Violation(
                i, "no-redex", "proper step in an operation-free state"))
            continue
        kind, want, want_rule = _snap_descent(system, trees, epre, first)
        if kind != "redex" or want != e:
            violations.append(Violation(
                i, "not-needed",
                f"step fired at node {e}, strategy demands node {want}"))
            continue
        src = rule.source if rule.builtin_op is None else None
        if rule.builtin_op is None and src is not want_rule:
            violations.append(Violation(
                i, "wrong-rule",
                f"step used rule {src}, strategy demands {want_rule}"))
            continue
        redex_term = term_of(epre, e)
        contract = _source_step_term(src, redex_term)
        if contract is None:
            violations.append(Violation(
                i, "no-match", "source rule does not match the erased redex"))
            continue
        expected = term_of(epre, override={e: contract})
        if expected != term_of(epost):
            violations.append(Violation(
                i, "wrong-result",
                "erased post-state is not the source-step result"))
    if result.outcome == "value":
        for nid, (label, _) in snaps[-1].nodes.items():
            if isinstance(label, Symbol) and not label.is_data:
                violations.append(Violation(
                    len(result.trace), "wrapper-in-value",
                    f"final state contains {label.name} at node {nid}"))
                break
    return ValidationReport(violations, proper)
