import json

import pytest

from flowdialog.engine import build_graph, evaluate, run_turn
from flowdialog.expr import parse_call
from flowdialog.graph import (
    ConstraintSpec,
    GraphContext,
    UnknownTurn,
    export_dot,
    export_json,
    import_json,
    match_constraint,
    snapshot,
)


def test_build_nested_add_nodes(ctx):
    root = build_graph(parse_call("Add(2,Add(3,5))"), ctx)
    funcs = [ctx.node(i).func for i in sorted(ctx.reachable(root))]
    assert funcs == ["Add", "Int", "Add", "Int", "Int"]
    outer = ctx.node(root)
    assert ctx.node(outer.inputs["pos1"]).value == 2
    assert ctx.node(outer.inputs["pos2"]).func == "Add"


def test_build_shares_bound_subgraphs(ctx):
    root = build_graph(parse_call("x0=Int(1); Add(x0,x0)"), ctx)
    node = ctx.node(root)
    assert node.inputs["pos1"] == node.inputs["pos2"]
    int_nodes = [n for n in ctx.iter_nodes() if n.func == "Int"]
    assert len(int_nodes) == 1


def test_build_preorder_ids(ctx):
    # the call gets its id before its arguments, textual order
    root = build_graph(parse_call("Add(2,Add(3,5))"), ctx)
    assert root == 0
    assert ctx.node(2).func == "Add"  # the inner call


def test_match_constraint_literal_value(ctx):
    root = build_graph(parse_call("Add(2,Add(3,5))"), ctx)
    three = next(n for n in ctx.iter_nodes() if n.value == 3)
    assert match_constraint(three, ConstraintSpec("Int", None, (("value", 3),)), ctx)
    assert not match_constraint(three, ConstraintSpec("Int", None, (("value", 5),)), ctx)
    assert match_constraint(three, ConstraintSpec("Int"), ctx)
    assert not match_constraint(three, ConstraintSpec("Str"), ctx)


def test_match_constraint_typeparam_form(ctx):
    build_graph(parse_call("42"), ctx)
    node = ctx.node(0)
    assert match_constraint(node, ConstraintSpec("Constraint", "Int"), ctx)
    assert not match_constraint(node, ConstraintSpec("Constraint", "Event"), ctx)


def test_unevaluated_fields_never_match(ctx):
    root = build_graph(parse_call("Add(2,3)"), ctx)
    node = ctx.node(root)
    assert not node.evaluated
    spec = ConstraintSpec("Int", None, (("value", 5),))
    assert not match_constraint(node, spec, ctx)


def test_export_dot_counts(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    dot = export_dot(ctx)
    solid = [l for l in dot.splitlines() if "->" in l and "dashed" not in l]
    dashed = [l for l in dot.splitlines() if "->" in l and "dashed" in l]
    assert len(solid) == 5  # four Add inputs plus the Yield wrapper edge
    assert len(dashed) == 3  # each Add and the Yield point at results


def test_export_dot_empty_context(ctx):
    dot = export_dot(ctx)
    assert dot.startswith("digraph")
    assert "->" not in dot


def test_export_dot_unknown_turn(ctx):
    with pytest.raises(UnknownTurn):
        export_dot(ctx, turn=3)


def test_export_dot_turn_filter(ctx):
    run_turn("Add(1,2)", ctx)
    run_turn("Add(3,4)", ctx)
    dot = export_dot(ctx, turn=0)
    assert 'label="Int_2' in dot and 'label="Int_3' in dot
    assert "Int_7" not in dot


def test_export_json_empty(ctx):
    data = json.loads(export_json(ctx))
    assert data == {"version": "v1", "nodes": [], "turns": [], "pending": None}


def test_export_json_single_literal_turn(ctx):
    run_turn("42", ctx)
    data = json.loads(export_json(ctx))
    assert len(data["turns"]) == 1
    assert data["turns"][0]["outcome"]["message"] == "42"
    leaf = [n for n in data["nodes"] if n["func"] == "Int"]
    assert leaf and leaf[0]["value"] == 42


def test_json_roundtrip(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    run_turn("revise(old=Int?(3), new=Int(6))", ctx)
    text = export_json(ctx)
    again = import_json(text)
    assert snapshot(again)["nodes"] == json.loads(text)["nodes"]
    assert [t["root"] for t in snapshot(again)["turns"]] == \
        [t.root for t in ctx.turns]


def test_acyclicity(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    run_turn("revise(old=Int?(3), new=Int(6))", ctx)
    for node in ctx.iter_nodes():
        assert node.id not in ctx.transitive_inputs(node.id)


def test_history_immutable_across_turns(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    before = {
        n.id: (n.func, dict(n.inputs), n.value, n.result)
        for n in ctx.iter_nodes()
    }
    run_turn("revise(old=Int?(3), new=Int(6))", ctx)
    for nid, state in before.items():
        n = ctx.node(nid)
        assert (n.func, dict(n.inputs), n.value, n.result) == state


def test_revise_sharing_soundness(ctx):
    run_turn("Add(2,Add(3,5))", ctx)
    old_reach = ctx.reachable(ctx.turns[0].root, follow_results=True)
    run_turn("revise(old=Int?(3), new=Int(6))", ctx)
    new_root = ctx.turns[1].root
    for nid in ctx.reachable(new_root):
        node = ctx.node(nid)
        assert node.turn == 1 or nid in old_reach
