"""Source-strategy baseline and machine-trace validation."""

from __future__ import annotations

from needle import evaluate, oracle_eval, parse_expr, validate_trace
from needle.render import format_node

APPEND_EXPR = "append(Cons(1, Nil), Cons(2, Nil))"

SMALL_INPUTS = [
    ("append", APPEND_EXPR),
    ("length", "length(append(Cons(4, Nil), Cons(5, Cons(6, Nil))))"),
    ("fib", "fib(5)"),
    ("head", "head(Cons(7, Nil))"),
    ("loop", "snd(MkPair(loop, 0))"),
    ("tree", "size(mirror(Fork(Tip(1), Fork(Tip(2), Leaf))))"),
]


def oracle(systems, name, text, **kw):
    expr, _ = parse_expr(systems[name], text)
    return oracle_eval(systems[name], expr, **kw)


# ---- the strategy itself -----------------------------------------------------


def test_oracle_values_and_step_counts(systems):
    res = oracle(systems, "append", APPEND_EXPR)
    assert res.outcome == "value"
    assert format_node(res.root) == "Cons(1, Cons(2, Nil))"
    assert res.steps == 2

    res = oracle(systems, "fib", "fib(5)")
    assert (res.outcome, res.root.label, res.steps) == ("value", 5, 36)

    res = oracle(systems, "loop", "snd(MkPair(loop, 0))")
    assert (res.outcome, res.root.label, res.steps) == ("value", 0, 1)

    res = oracle(systems, "head", "head(Cons(7, Nil))")
    assert (res.outcome, res.root.label, res.steps) == ("value", 7, 1)


def test_oracle_aborts_without_spending_steps(systems):
    res = oracle(systems, "head", "head(Nil)")
    assert (res.outcome, res.steps) == ("aborted", 0)


def test_oracle_respects_step_budget(systems):
    res = oracle(systems, "loop", "fst(MkPair(loop, 0))", max_steps=50)
    assert (res.outcome, res.steps) == ("steplimit", 50)


def test_oracle_matches_compiled_proper_steps(systems, programs):
    for name, text in SMALL_INPUTS:
        base = oracle(systems, name, text)
        for mode in ("cr", "tr", "or"):
            expr, _ = parse_expr(systems[name], text)
            res = evaluate(programs(name, mode), expr)
            assert res.proper_steps == base.steps, (name, mode)


# ---- trace validation --------------------------------------------------------


def test_validation_accepts_honest_traces(systems, programs):
    for name, text in SMALL_INPUTS:
        for mode in ("cr", "tr", "or"):
            expr, _ = parse_expr(systems[name], text)
            res = evaluate(programs(name, mode), expr, trace=True)
            report = validate_trace(systems[name], res)
            assert report.ok, (name, mode, report.violations[:3])
            assert report.proper_steps == res.proper_steps


def test_validation_accepts_truncated_traces(systems, programs):
    expr, _ = parse_expr(systems["loop"], "fst(MkPair(loop, 0))")
    res = evaluate(programs("loop", "cr"), expr, max_steps=20, trace=True)
    assert res.outcome == "steplimit"
    report = validate_trace(systems["loop"], res)
    assert report.ok


def test_validation_catches_a_dropped_step(systems, programs):
    expr, _ = parse_expr(systems["append"], APPEND_EXPR)
    res = evaluate(programs("append", "cr"), expr, trace=True)
    cut = next(i for i, s in enumerate(res.trace)
               if s.rule.step_class == "rewrite")
    del res.trace[cut]
    report = validate_trace(systems["append"], res)
    assert not report.ok
    assert report.violations


def test_validation_catches_a_swapped_rule(systems, programs):
    expr, _ = parse_expr(systems["append"], APPEND_EXPR)
    res = evaluate(programs("append", "cr"), expr, trace=True)
    rewrites = [i for i, s in enumerate(res.trace)
                if s.rule.step_class == "rewrite"]
    a, b = rewrites[0], rewrites[1]
    res.trace[a].rule, res.trace[b].rule = res.trace[b].rule, res.trace[a].rule
    report = validate_trace(systems["append"], res)
    assert not report.ok
    first = report.violations[0]
    assert first.step == a
    assert first.detail
