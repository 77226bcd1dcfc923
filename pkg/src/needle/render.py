"""Plain-text rendering of terms, rules, trees, traces, and counter tables."""

from __future__ import annotations

from .core import (
    PAnyLit,
    PApp,
    PLit,
    PVar,
    RApp,
    RLit,
    RShare,
    RVar,
    Symbol,
    erase,
    pattern_at,
    resolve,
)
from .deftree import DTBranch, DTExempt, DTIntBranch, DTRule

# ---- terms -------------------------------------------------------------------


def format_node(node):
    """Prefix rendering of a live graph (shared nodes print repeatedly)."""
    parts = []
    stack = [node]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        n = resolve(item)
        label = n.label
        if isinstance(label, int):
            parts.append(str(label))
            continue
        if not n.children:
            parts.append(label.name)
            continue
        parts.append(label.name + "(")
        stack.append(")")
        for i in range(len(n.children) - 1, -1, -1):
            stack.append(n.children[i])
            if i > 0:
                stack.append(", ")
    return "".join(parts)


def format_snapshot(snap, nid=None):
    parts = []
    stack = [snap.root if nid is None else nid]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        label, kids = snap.nodes[item]
        if isinstance(label, int):
            parts.append(str(label))
            continue
        if not kids:
            parts.append(label.name)
            continue
        parts.append(label.name + "(")
        stack.append(")")
        for i in range(len(kids) - 1, -1, -1):
            stack.append(kids[i])
            if i > 0:
                stack.append(", ")
    return "".join(parts)


def format_term(term):
    label, kids = term
    if isinstance(label, int):
        return str(label)
    if not kids:
        return label.name
    return f"{label.name}({', '.join(format_term(k) for k in kids)})"


# ---- patterns, templates, rules ------------------------------------------------


def format_pattern(p):
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PLit):
        return str(p.value)
    if isinstance(p, PAnyLit):
        return f"#{p.name}"
    if not p.args:
        return p.label.name
    return f"{p.label.name}({', '.join(format_pattern(a) for a in p.args)})"


def _anylit_names(p):
    names = set()
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, PAnyLit):
            names.add(q.name)
        elif isinstance(q, PApp):
            stack.extend(q.args)
    return names


def format_template(t, lhs):
    literal_vars = _anylit_names(lhs)

    def fmt(t):
        if isinstance(t, RVar):
            return f"#{t.name}" if t.name in literal_vars else t.name
        if isinstance(t, RLit):
            return str(t.value)
        if isinstance(t, RShare):
            return format_pattern(pattern_at(lhs, t.path))
        if not t.children:
            return t.label.name
        return f"{t.label.name}({', '.join(fmt(c) for c in t.children)})"

    return fmt(t)


def format_rule(rule):
    lhs = format_pattern(rule.lhs)
    if rule.exempt:
        rhs = "abort"
    elif rule.builtin_op is not None:
        op = "+" if rule.builtin_op == "add" else "-"
        a, b = rule.builtin_operands or ("a", "b")
        rhs = f"<{a} {op} {b}>"
    else:
        rhs = format_template(rule.rhs, rule.lhs)
    return f"{lhs} = {rhs}  ; {rule.origin}"


_SECTION_TITLES = {
    "h": {"cr": "-- H rules", "tr": "-- specialized rules",
          "or": "-- specialized rules"},
    "n": {"cr": "-- N rules", "tr": "-- N rules", "or": "-- N rules"},
    "builtin": {"cr": "-- builtin rules", "tr": "-- builtin rules",
                "or": "-- builtin rules"},
}


def format_program(program):
    lines = [f"-- object program: {program.system.name} (mode {program.mode})"]
    for section in ("h", "n", "builtin"):
        rules = [r for r in program.rules if r.section == section]
        if not rules:
            continue
        lines.append("")
        lines.append(_SECTION_TITLES[section][program.mode])
        lines.extend(format_rule(r) for r in rules)
    return "\n".join(lines) + "\n"


# ---- definitional trees ---------------------------------------------------------


def _path_str(path):
    return ".".join(str(i + 1) for i in path)


def format_tree(op, tree, indent=0):
    pad = "  " * indent
    if isinstance(tree, DTRule):
        rule = tree.rule
        text = (f"{format_pattern(rule.lhs)} = "
                f"{format_template(rule.rhs, rule.lhs)}")
        return [f"{pad}rule {text}"]
    if isinstance(tree, DTExempt):
        return [f"{pad}exempt"]
    if isinstance(tree, DTBranch):
        lines = [f"{pad}branch @{_path_str(tree.path)} ({tree.sort})"]
        for ctor, sub in tree.children:
            lines.append(f"{pad}  {ctor.name}:")
            lines.extend(format_tree(op, sub, indent + 2))
        return lines
    if isinstance(tree, DTIntBranch):
        lines = [f"{pad}branch @{_path_str(tree.path)} (Int)"]
        for value, sub in tree.children:
            lines.append(f"{pad}  {value}:")
            lines.extend(format_tree(op, sub, indent + 2))
        if tree.default is not None:
            lines.append(f"{pad}  default:")
            lines.extend(format_tree(op, tree.default, indent + 2))
        return lines
    raise AssertionError(tree)


def format_trees(system, trees, only=None):
    lines = []
    for op in system.operations:
        if only is not None and op.name != only:
            continue
        lines.append(f"op {op.name}")
        lines.extend(format_tree(op, trees[op], indent=1))
        lines.append("")
    return "\n".join(lines)


# ---- traces ----------------------------------------------------------------------


def trace_states(result):
    """Printable machine states of a traced run.

    Every state is shown except the output of literal-normalization steps
    (`N(k) -> k`), which change nothing visible; the final state is always
    shown.
    """
    assert result.trace is not None
    snaps = [step.pre for step in result.trace] + [result.final]
    states = [format_snapshot(snaps[0])]
    for i, step in enumerate(result.trace):
        if not step.rule.is_literal_norm:
            states.append(format_snapshot(snaps[i + 1]))
    return states


def erased_states(result):
    """Erased machine states with consecutive duplicates removed.

    Erasing splices out the evaluation wrappers, so stretches of machine
    states project to one source expression; the survivors are exactly the
    source-level derivation the run performs.
    """
    assert result.trace is not None
    snaps = [step.pre for step in result.trace] + [result.final]
    out = []
    for snap in snaps:
        erased, _ = erase(snap)
        text = format_snapshot(erased)
        if not out or out[-1] != text:
            out.append(text)
    return out


def format_trace(result):
    states = trace_states(result)
    width = len(str(len(states)))
    return "\n".join(f"{i + 1:>{width}}  {s}" for i, s in enumerate(states))


# ---- counter tables ----------------------------------------------------------------

_RATIO_ROWS = ("rewrite steps", "shortcut steps",
               "node allocations", "node matches")


def format_counter_table(results):
    """`results`: list of (mode, EvalResult) pairs; cr first for the ratio block."""
    modes = [mode for mode, _ in results]
    rows = list(results[0][1].counters.as_dict().keys())
    table = {mode: res.counters.as_dict() for mode, res in results}
    name_w = max(len(r) for r in rows) + 2
    col_w = max(10, *(len(str(v)) + 2 for t in table.values()
                      for v in t.values()))
    lines = [" " * name_w + "".join(f"{m:>{col_w}}" for m in modes)]
    for row in rows:
        cells = "".join(f"{table[m][row]:>{col_w}}" for m in modes)
        lines.append(f"{row:<{name_w}}" + cells)
    base = None
    for mode, res in results:
        if mode == "cr":
            base = res.counters.rewrite_steps
    if base:
        lines.append("")
        lines.append("per 10 rewrite steps of cr:")
        for row in _RATIO_ROWS:
            cells = "".join(
                f"{table[m][row] * 10 / base:>{col_w}.2f}" for m in modes)
            lines.append(f"{row:<{name_w}}" + cells)
    return "\n".join(lines)
