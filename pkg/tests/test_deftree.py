"""Definitional trees: construction, demanded arguments, needed descent."""

from __future__ import annotations

import pytest

from needle import (
    DuplicateRule,
    NotInductivelySequential,
    build_all_deftrees,
    build_deftree,
    parse_expr,
    parse_system,
)
from needle.deftree import (
    DTBranch,
    DTExempt,
    DTIntBranch,
    DTRule,
    Exempt,
    Redex,
    demanded_args,
    needed_descent,
)


def tree_for(system, opname):
    return build_deftree(system, system.symbols[opname])


# ---- shapes ------------------------------------------------------------------


def test_append_tree_branches_on_first_argument(systems):
    system = systems["append"]
    tree = tree_for(system, "append")
    assert isinstance(tree, DTBranch)
    assert tree.path == (0,) and tree.sort == "List"
    (nil, sub_nil), (cons, sub_cons) = tree.children
    assert (nil.name, cons.name) == ("Nil", "Cons")
    rules = system.rules[system.symbols["append"]]
    assert sub_nil == DTRule(rules[0])
    assert sub_cons == DTRule(rules[1])


def test_fib_tree_is_a_literal_branch_with_default(systems):
    system = systems["fib"]
    tree = tree_for(system, "fib")
    assert isinstance(tree, DTIntBranch)
    assert tree.path == (0,)
    rules = system.rules[system.symbols["fib"]]
    assert [(v, sub.rule.index) for v, sub in tree.children] == [(0, 0), (1, 1)]
    # the variable rule becomes the default; its variable is literal-guarded
    assert tree.default == DTRule(rules[2], guards=((0,),))


def test_head_tree_marks_the_missing_constructor_exempt(systems):
    system = systems["head"]
    tree = tree_for(system, "head")
    children = dict((c.name, sub) for c, sub in tree.children)
    assert children["Nil"] == DTExempt()
    assert isinstance(children["Cons"], DTRule)


def test_nullary_operation_tree_is_a_plain_rule(systems):
    system = systems["loop"]
    tree = tree_for(system, "loop")
    assert isinstance(tree, DTRule)
    assert tree.rule.op.name == "loop"


def test_nested_branching_descends_into_subpatterns():
    system = parse_system("""
        data Pair = MkPair(Int, Int);
        data List = Nil | Cons(Pair, List);
        op firsts(List) -> List:
          firsts(Nil) = Nil
          firsts(Cons(MkPair(x, _), r)) = Cons(MkPair(x, 0), firsts(r))
        ;
    """)
    tree = tree_for(system, "firsts")
    assert isinstance(tree, DTBranch) and tree.path == (0,)
    sub_cons = dict((c.name, sub) for c, sub in tree.children)["Cons"]
    assert isinstance(sub_cons, DTBranch)
    assert sub_cons.path == (0, 0) and sub_cons.sort == "Pair"
    (_, leaf), = sub_cons.children
    assert isinstance(leaf, DTRule)


def test_trees_branch_on_literals_without_default():
    system = parse_system("op sign(Int) -> Int: sign(0) = 0 sign(1) = 1;")
    tree = tree_for(system, "sign")
    assert isinstance(tree, DTIntBranch)
    assert [v for v, _ in tree.children] == [0, 1]
    assert tree.default is None


def test_build_all_deftrees_covers_user_operations(systems):
    system = systems["tree"]
    trees = build_all_deftrees(system)
    assert sorted(op.name for op in trees) == ["mirror", "size"]


# ---- rejection ---------------------------------------------------------------


def test_duplicate_rules_rejected():
    src = "data A = MkA; op f(A) -> A: f(x) = x f(y) = MkA;"
    with pytest.raises(DuplicateRule, match="rules 1 and 2 have the same left"):
        build_all_deftrees(parse_system(src))


def test_overlapping_variable_rule_rejected():
    src = ("data Nat = Z | S(Nat);\n"
           "op f(Nat) -> Nat: f(Z) = Z f(x) = x f(S(n)) = n;")
    with pytest.raises(NotInductivelySequential,
                       match="rule 2 overlaps rule 1 and can never apply"):
        build_all_deftrees(parse_system(src))


def test_parallel_patterns_rejected():
    src = ("data S = A | B;\n"
           "op f(S, S) -> Int: f(A, y) = 0 f(x, B) = 1;")
    with pytest.raises(NotInductivelySequential,
                       match="no argument position is demanded"):
        build_all_deftrees(parse_system(src))


# ---- demanded arguments ------------------------------------------------------


def test_demanded_args(systems):
    for name, opname, want in [
        ("append", "append", {0}),
        ("length", "length", {0}),
        ("fib", "fib", {0}),
        ("head", "head", {0}),
        ("loop", "snd", {0}),
        ("loop", "loop", set()),
        ("tree", "size", {0}),
        ("tree", "mirror", {0}),
    ]:
        system = systems[name]
        op = system.symbols[opname]
        assert demanded_args(op, build_deftree(system, op)) == want, opname


def test_builtins_demand_every_argument(systems):
    add = systems["fib"].symbols["add"]
    assert demanded_args(add, None) == {0, 1}


# ---- needed descent ----------------------------------------------------------


def trees_of(system):
    return build_all_deftrees(system)


def test_descent_stops_at_the_outermost_matching_redex(systems):
    system = systems["loop"]
    expr, _ = parse_expr(system, "snd(MkPair(loop, 0))")
    found = needed_descent(system, trees_of(system), expr)
    assert isinstance(found, Redex)
    assert found.node is expr
    assert found.rule.op.name == "snd"


def test_descent_moves_into_a_demanded_operation_argument(systems):
    system = systems["length"]
    expr, _ = parse_expr(system, "length(append(Nil, Nil))")
    found = needed_descent(system, trees_of(system), expr)
    assert isinstance(found, Redex)
    assert found.node is expr.children[0]
    assert found.rule.op.name == "append"


def test_descent_reports_exempt_positions(systems):
    system = systems["head"]
    expr, _ = parse_expr(system, "head(Nil)")
    found = needed_descent(system, trees_of(system), expr)
    assert isinstance(found, Exempt)
    assert found.node is expr


def test_descent_through_builtin_arguments(systems):
    system = systems["fib"]
    trees = trees_of(system)
    expr, _ = parse_expr(system, "add(add(1, 2), 3)")
    found = needed_descent(system, trees, expr)
    assert isinstance(found, Redex)
    assert found.node is expr.children[0]
    assert found.rule is None  # builtin reduction
    flat, _ = parse_expr(system, "add(1, 2)")
    found = needed_descent(system, trees, flat)
    assert found == Redex(flat, None)


def test_descent_picks_literal_branch_or_default(systems):
    system = systems["fib"]
    trees = trees_of(system)
    base, _ = parse_expr(system, "fib(1)")
    found = needed_descent(system, trees, base)
    assert found.rule.index == 1
    other, _ = parse_expr(system, "fib(7)")
    found = needed_descent(system, trees, other)
    assert found.rule.index == 2
    nested, _ = parse_expr(system, "fib(add(3, 4))")
    found = needed_descent(system, trees, nested)
    assert found == Redex(nested.children[0], None)
