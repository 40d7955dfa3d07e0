"""Framework function definitions and the default registry.

``Yield`` renders results for the user, ``Add`` is the reference
arithmetic function, ``singleton`` unwraps one-element sets (and asks
the user otherwise), the literal constructors make ``Int(6)`` behave
like ``6``, and ``refer``/``revise`` expose the history operations as
callable functions.
"""

from __future__ import annotations

from . import calendar as caldomain
from . import engine
from .engine import (
    DISAMBIGUATION,
    EvalError,
    FunctionDef,
    GraphContext,
    Node,
    Param,
    Registry,
    input_value,
    point_result,
    raise_pending,
    self_result,
    set_result_value,
)


def _exec_yield(node: Node, ctx: GraphContext) -> None:
    point_result(ctx, node, node.inputs["pos1"])


def _exec_add(node: Node, ctx: GraphContext) -> None:
    a = input_value(ctx, node, "pos1")
    b = input_value(ctx, node, "pos2")
    if not isinstance(a, int) or not isinstance(b, int) or isinstance(a, bool) or isinstance(b, bool):
        raise EvalError(f"Add needs two integers, got {a!r} and {b!r}")
    set_result_value(ctx, node, "Int", a + b)


def _exec_literal_ctor(kind: str, py_type):
    def body(node: Node, ctx: GraphContext) -> None:
        v = input_value(ctx, node, "pos1")
        if not isinstance(v, py_type) or (kind != "Bool" and isinstance(v, bool)):
            raise EvalError(f"{kind} constructor got {v!r}")
        self_result(ctx, node, v)

    return body


def _exec_singleton(node: Node, ctx: GraphContext) -> None:
    items = input_value(ctx, node, "pos1")
    if not isinstance(items, tuple):
        raise EvalError(f"singleton expects a set, got {items!r}")
    if len(items) == 0:
        raise_pending(DISAMBIGUATION, node, "no matching item")
    if len(items) > 1:
        listing = "; ".join(e.summary() for e in items)
        raise_pending(
            DISAMBIGUATION, node,
            f"which one? {listing} (answer with the event id)",
            candidates=tuple(e.id for e in items),
        )
    set_result_value(ctx, node, "Event", items[0])


def _exec_confirm_word(value: bool):
    def body(node: Node, ctx: GraphContext) -> None:
        self_result(ctx, node, value)

    return body


def _exec_refer(node: Node, ctx: GraphContext) -> None:
    pattern = ctx.node(node.inputs["pos1"])
    spec = pattern.value
    found = engine.refer(spec, ctx)
    if found is None:
        raise engine.NoMatch(spec)
    point_result(ctx, node, found)


def _exec_revise(node: Node, ctx: GraphContext) -> None:
    pattern = ctx.node(node.inputs["old"])
    dup_root = engine.revise(pattern.value, node.inputs["new"], ctx)
    point_result(ctx, node, dup_root)


def register_core(reg: Registry) -> None:
    reg.register(FunctionDef("Yield", [Param("pos1")], "Any", _exec_yield))
    reg.register(FunctionDef(
        "Add", [Param("pos1", "Int"), Param("pos2", "Int")], "Int", _exec_add))
    reg.register(FunctionDef("Int", [Param("pos1")], "Int", _exec_literal_ctor("Int", int)))
    reg.register(FunctionDef("Float", [Param("pos1")], "Float", _exec_literal_ctor("Float", float)))
    reg.register(FunctionDef("Str", [Param("pos1")], "Str", _exec_literal_ctor("Str", str)))
    reg.register(FunctionDef("Bool", [Param("pos1")], "Bool", _exec_literal_ctor("Bool", bool)))
    reg.register(FunctionDef("singleton", [Param("pos1", "EventSet")], "Event", _exec_singleton))
    reg.register(FunctionDef("Confirm", [], "Bool", _exec_confirm_word(True)))
    reg.register(FunctionDef("Decline", [], "Bool", _exec_confirm_word(False)))
    reg.register(FunctionDef(
        "refer", [Param("pos1", engine.CONSTRAINT_PATTERN)], "Any", _exec_refer))
    reg.register(FunctionDef(
        "revise", [Param("old", engine.CONSTRAINT_PATTERN), Param("new")], "Any", _exec_revise))


def default_registry() -> Registry:
    reg = Registry()
    register_core(reg)
    caldomain.register_calendar(reg)
    return reg
