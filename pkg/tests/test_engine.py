import random

import pytest

from flowdialog.engine import (
    ArityError,
    DuplicateFunction,
    FunctionDef,
    Param,
    Registry,
    UnknownFunction,
    UnknownParam,
    build_graph,
    evaluate,
    refer,
    resume,
    run_turn,
    set_result_value,
    input_value,
)
from flowdialog.expr import parse_call
from flowdialog.functions import default_registry, register_core
from flowdialog.graph import ConstraintSpec, GraphContext, MISSING_INPUT


def test_evaluate_add_chain(ctx):
    o = run_turn("Add(2,Add(3,5))", ctx)
    assert o.kind == "success"
    assert o.message == "10"


def test_missing_input_pending(ctx):
    o = run_turn("Add(2)", ctx)
    assert o.kind == "pending"
    assert ctx.pending.kind == MISSING_INPUT
    assert ctx.pending.param == "pos2"
    assert ctx.pending.expected_type == "Int"


def test_resume_missing_input(ctx):
    run_turn("Add(2)", ctx)
    o = run_turn("7", ctx)
    assert (o.kind, o.message) == ("success", "9")
    assert ctx.pending is None
    assert ctx.turns[0].outcome.message == "9"


def test_resume_wrong_answer_type_keeps_pending(ctx):
    run_turn("Add(2)", ctx)
    o = run_turn('"abc"', ctx)
    assert o.kind == "failed"
    assert "wrong answer type" in o.message
    assert ctx.pending is not None
    o = run_turn("7", ctx)
    assert o.message == "9"


def test_expression_of_expected_type_is_an_answer(ctx):
    run_turn("Add(2)", ctx)
    o = run_turn("Add(1,1)", ctx)
    assert (o.kind, o.message) == ("success", "4")
    assert ctx.pending is None


def test_non_answer_abandons_prompt(ctx):
    run_turn("Add(2)", ctx)
    o = run_turn("tomorrow()", ctx)
    assert (o.kind, o.message) == ("success", "2023-01-02")
    assert ctx.pending is None
    # the prompt is gone; a literal now starts a plain display turn
    assert run_turn("7", ctx).message == "7"


def test_reevaluation_is_idempotent(ctx):
    o1 = run_turn("Add(2,Add(3,5))", ctx)
    count = len(ctx.nodes)
    o2 = evaluate(ctx.turns[0].root, ctx)
    assert (o2.kind, o2.message) == (o1.kind, o1.message)
    assert len(ctx.nodes) == count


def test_refer_matches_specific_leaf(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    five = next(n.id for n in ctx.iter_nodes() if n.value == 5)
    assert refer(ConstraintSpec("Int", None, (("value", 5),)), ctx) == five


def test_refer_prefers_most_recent(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    found = refer(ConstraintSpec("Int"), ctx)
    assert ctx.node(found).value == 10  # the computed result is newest


def test_refer_no_match_fails_turn(ctx):
    o = run_turn("refer(Str?())", ctx)
    assert o.kind == "failed"
    assert "no match for Str?()" in o.message


def test_revise_appendix_dialogue(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    o = run_turn("revise(old=Int?(3), new=Int(6))", ctx)
    assert o.message == "13"
    old_root, new_root = ctx.turns[0].root, ctx.turns[1].root
    assert old_root != new_root
    old_reach = ctx.reachable(old_root)
    new_reach = ctx.reachable(new_root)
    new_adds = [n for n in new_reach - old_reach if ctx.node(n).func == "Add"]
    assert len(new_adds) == 2
    shared = {ctx.node(n).value for n in new_reach & old_reach}
    assert {2, 5} <= shared
    # the old graph still evaluates to its original value
    again = evaluate(old_root, ctx)
    assert again.message == "10"


def test_revise_root_match_uses_new_directly(ctx):
    run_turn("42", ctx)
    o = run_turn("revise(old=Int?(42), new=Int(6))", ctx)
    assert o.message == "6"


def test_revise_without_match_fails(ctx):
    run_turn("Add(1,1)", ctx)
    o = run_turn("revise(old=Str?(), new=Int(6))", ctx)
    assert o.kind == "failed"
    assert "no match" in o.message


def test_revise_chain_targets_latest_graph(ctx):
    run_turn("Add(1,Add(2,3))", ctx)
    assert run_turn("revise(old=Int?(2), new=Int(7))", ctx).message == "11"
    assert run_turn("revise(old=Int?(3), new=Int(9))", ctx).message == "17"


def test_yield_neutrality(registry):
    from conftest import make_ctx

    a, b = make_ctx(registry), make_ctx(registry)
    oa = run_turn("Add(2,3)", a)
    ob = run_turn("Yield(Add(2,3))", b)
    assert (oa.kind, oa.message) == (ob.kind, ob.message)


def test_evaluation_determinism(registry):
    from conftest import make_ctx

    counts = []
    messages = []
    for _ in range(2):
        c = make_ctx(registry)
        o = run_turn("Add(Add(1,2),Add(3,4))", c)
        counts.append(len(c.nodes))
        messages.append(o.message)
    assert counts[0] == counts[1]
    assert messages[0] == messages[1]


def test_malformed_turn_recorded_and_recoverable(ctx):
    o = run_turn("Add(2,", ctx)
    assert o.kind == "failed"
    assert ctx.turns[0].outcome.kind == "failed"
    assert run_turn("Add(2,3)", ctx).message == "5"


def test_unknown_function_fails_turn(ctx):
    o = run_turn("Frobnicate(1)", ctx)
    assert o.kind == "failed"
    assert "unknown function" in o.message


def test_arity_and_param_errors(ctx):
    assert run_turn("Add(1,2,3)", ctx).kind == "failed"
    assert run_turn("Add(flip=1)", ctx).kind == "failed"
    assert run_turn("Add(1,pos1=2)", ctx).kind == "failed"


def test_registry_duplicate_and_lookup():
    reg = Registry()
    register_core(reg)
    with pytest.raises(DuplicateFunction):
        reg.register(FunctionDef("Add", [], "Int", lambda n, c: None))
    assert reg.get("NoSuchThing") is None


def test_registry_size_stable(registry):
    before = len(registry)
    ctx = GraphContext(registry=registry)
    run_turn("Add(1,2)", ctx)
    assert len(registry) == before


def test_int64_range_enforced_at_build(ctx):
    o = run_turn("Add(9223372036854775808,1)", ctx)
    assert o.kind == "failed"
    assert "out of range" in o.message


# ---------------------------------------------------------------------------
# Resume equivalence property

def _sum_exec(node, ctx):
    total = 0
    for name in ("pos1", "pos2", "pos3", "pos4"):
        if name in node.inputs:
            total += input_value(ctx, node, name)
    set_result_value(ctx, node, "Int", total)


def _property_registry():
    reg = default_registry()
    test_reg = Registry()
    for name in reg.names():
        test_reg.register(reg.get(name))
    for arity in (2, 3, 4):
        params = [Param(f"pos{i}", "Int") for i in range(1, arity + 1)]
        test_reg.register(FunctionDef(f"Sum{arity}", params, "Int", _sum_exec))
    return test_reg


def test_resume_equivalence_property():
    from flowdialog.calendar import Clock, EventStore

    reg = _property_registry()
    rng = random.Random(77)
    cases = []
    for _ in range(200):
        arity = rng.choice([2, 2, 3, 4])
        func = "Add" if arity == 2 and rng.random() < 0.5 else f"Sum{arity}"
        values = [rng.randint(-50, 50) for _ in range(arity)]
        missing = rng.randrange(arity)
        cases.append((func, values, missing))
    for func, values, missing in cases:
        direct = GraphContext(registry=reg, store=EventStore(), clock=Clock())
        full = f"{func}({','.join(str(v) for v in values)})"
        expected = run_turn(full, direct)
        assert expected.kind == "success"

        staged = GraphContext(registry=reg, store=EventStore(), clock=Clock())
        present = [
            f"pos{i + 1}={v}" for i, v in enumerate(values) if i != missing
        ]
        partial = f"{func}({','.join(present)})"
        o = run_turn(partial, staged)
        assert o.kind == "pending" and o.exc.param == f"pos{missing + 1}"
        resumed = run_turn(str(values[missing]), staged)
        assert resumed.kind == "success"
        assert resumed.message == expected.message
