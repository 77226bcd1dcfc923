"""Object-code generation: sections, origins, phases, step classes, counts."""

from __future__ import annotations

import pytest

from needle import build_program
from needle.codegen import phase1
from needle.core import CONTROL, SPECIALIZED, H, N, PAnyLit
from needle.render import format_rule


def rules_in(program, section):
    return [r for r in program.rules if r.section == section]


def by_origin(program, origin):
    return [r for r in program.rules if r.origin == origin]


# ---- rule inventory ----------------------------------------------------------


def test_append_rule_inventory(programs):
    program = programs("append", "cr")
    assert [r.origin for r in rules_in(program, "h")] == [
        "collapse-instance",
        "collapse-instance",
        "collapse-default",
        "ctor-rooted",
        "dispatch",
    ]
    assert [r.origin for r in rules_in(program, "n")] == [
        "norm-ctor",  # Nil
        "norm-ctor",  # Cons
        "norm-op",    # append
    ]
    assert [r.origin for r in rules_in(program, "builtin")] == (
        ["builtin-leaf", "builtin-dispatch", "builtin-dispatch"] * 2
        + ["norm-op", "norm-op", "literal-norm"]
    )


def test_head_has_an_exempt_rule(programs):
    program = programs("head", "cr")
    (exempt,) = by_origin(program, "exempt")
    assert exempt.rhs is None
    assert exempt.step_class == "none"
    assert format_rule(exempt) == "H(head(Nil)) = abort  ; exempt"


def test_int_branch_compiles_guarded_rules(programs):
    program = programs("fib", "cr")
    listed = [format_rule(r) for r in rules_in(program, "h")]
    assert listed == [
        "H(fib(0)) = 0  ; ctor-rooted",
        "H(fib(1)) = 1  ; ctor-rooted",
        "H(fib(#n)) = H(add(fib(sub(#n, 1)), fib(sub(#n, 2))))  ; op-rooted",
        "H(fib(x)) = H(fib(H(x)))  ; dispatch",
    ]


def test_dispatch_paths_locate_the_forced_argument(programs):
    (dispatch,) = by_origin(programs("append", "cr"), "dispatch")
    assert dispatch.dispatch_path == (0, 0)
    (dispatch,) = by_origin(programs("append", "tr"), "dispatch")
    assert dispatch.dispatch_path == (0,)
    for rule in by_origin(programs("append", "cr"), "builtin-dispatch"):
        assert rule.dispatch_path in ((0, 0), (0, 1))


# ---- transformation phases ---------------------------------------------------


def test_phase1_instantiates_wrapped_variables(programs, systems):
    system = systems["append"]
    staged = phase1(system, programs("append", "cr").rules)
    defaults = [format_rule(r) for r in staged if r.origin == "collapse-default"]
    # the one producer of List is append itself
    assert defaults == [
        "H(append(Nil, append(u, v))) = H(append(u, v))  ; collapse-default"
    ]


def test_phase1_drops_rules_with_no_producing_operation(programs):
    # nothing in head.rw returns List, so the H(x)-forcing rule vanishes
    assert by_origin(programs("head", "tr"), "dispatch") == []
    assert len(by_origin(programs("head", "cr"), "dispatch")) == 1


def test_phase2_specializes_every_wrapper(programs):
    for name in ("append", "length", "fib", "head", "loop", "tree"):
        for mode in ("tr", "or"):
            program = programs(name, mode)
            for rule in program.rules:
                assert rule.head is not H, format_rule(rule)
                assert rule.head.kind in (CONTROL, SPECIALIZED)
            # sections keep their meaning after specialization
            assert all(r.head.kind == SPECIALIZED for r in rules_in(program, "h"))


def test_specialized_symbols_remember_their_base(programs, systems):
    program = programs("append", "tr")
    append = systems["append"].symbols["append"]
    special = program.specialized[append]
    assert special.name == "append^H"
    assert special.base is append
    assert special.kind == SPECIALIZED
    assert program.evaluable == {N} | set(program.specialized.values())
    assert programs("append", "cr").evaluable == {H, N}


def test_needed_argument_wrapping_distinguishes_or_from_tr(programs):
    def op_rooted_rhs(program, headname):
        (rule,) = [r for r in program.rules
                   if r.origin == "op-rooted" and r.head.name == headname]
        return format_rule(rule)

    assert op_rooted_rhs(programs("fib", "tr"), "fib^H") == (
        "fib^H(#n) = add^H(fib(sub(#n, 1)), fib(sub(#n, 2)))  ; op-rooted")
    assert op_rooted_rhs(programs("fib", "or"), "fib^H") == (
        "fib^H(#n) = add^H(fib^H(sub^H(#n, 1)), fib^H(sub^H(#n, 2)))"
        "  ; op-rooted")
    assert op_rooted_rhs(programs("length", "or"), "length^H") == (
        "length^H(Cons(_, xs)) = add^H(1, length^H(xs))  ; op-rooted")


# ---- step classes and allocation counts ---------------------------------------


def test_step_classes_cr(programs):
    classes = {r.origin: r.step_class for r in programs("append", "cr").rules}
    assert classes == {
        "collapse-instance": "rewrite",
        "collapse-default": "rewrite",
        "ctor-rooted": "rewrite",
        "dispatch": "dispatch",
        "builtin-leaf": "rewrite",
        "builtin-dispatch": "dispatch",
        "norm-ctor": "norm",
        "norm-op": "norm",
        "literal-norm": "norm",
    }


def test_specialized_right_sides_upgrade_to_shortcut(programs):
    # collapse-default instances hand off to another specialized symbol
    # without a wrapper round trip: that is the shortcut step
    (inst,) = by_origin(programs("append", "tr"), "collapse-default")
    assert inst.step_class == "shortcut"
    # ... but argument-forcing rules stay dispatch steps
    (dispatch,) = by_origin(programs("append", "tr"), "dispatch")
    assert dispatch.step_class == "dispatch"
    # a right side rooted by the op's own specialization also shortcuts
    (loop_rule,) = [r for r in programs("loop", "tr").rules
                    if r.head.name == "loop^H"]
    assert format_rule(loop_rule) == "loop^H = loop^H  ; op-rooted"
    assert loop_rule.step_class == "shortcut"


def test_countable_allocations(programs):
    def allocs(program, origin):
        return [r.countable_allocs for r in by_origin(program, origin)]

    cr = programs("append", "cr")
    assert allocs(cr, "collapse-instance") == [0, 0]  # reuse matched nodes
    assert allocs(cr, "ctor-rooted") == [2]           # Cons + append
    assert allocs(cr, "dispatch") == [0]
    assert allocs(cr, "builtin-leaf") == [1, 1]       # the result literal
    assert allocs(cr, "builtin-dispatch") == [0, 0, 0, 0]
    assert all(r.countable_allocs == 0 for r in cr.rules if r.section == "n")

    fib_cr = programs("fib", "cr")
    # add, fib, sub, fib, sub and two literals
    assert allocs(fib_cr, "op-rooted") == [7]
    fib_or = programs("fib", "or")
    # specialized symbols are bookkeeping: only the two literals count
    assert allocs(fib_or, "op-rooted") == [2]


def test_builtin_leaf_rules_know_their_operands(programs):
    leaves = by_origin(programs("fib", "cr"), "builtin-leaf")
    assert [r.builtin_op for r in leaves] == ["add", "sub"]
    for rule in leaves:
        assert rule.builtin_operands == ("a", "b")
        assert all(isinstance(p, PAnyLit)
                   for p in rule.lhs.args[0].args)


def test_build_program_rejects_unknown_modes(systems):
    with pytest.raises(AssertionError):
        build_program(systems["append"], "xx")
