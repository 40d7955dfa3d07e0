"""Evaluation engine.

Functions are registered with a typed signature, an optional validity
check, and an execution body.  Expressions compile to graph nodes in
pre-order (a call node gets its id before its arguments), evaluation
runs post-order and attaches result nodes, and a failed validity check
suspends the turn with a user-facing prompt instead of aborting it.

``refer`` searches the dialogue history (and the event store) for a
node matching a constraint; ``revise`` duplicates the path from a
matched node up to its turn root, substitutes a new subexpression,
re-evaluates, and becomes the new turn's graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .expr import (
    BOOL,
    FLOAT,
    INT,
    STR,
    AssignSeq,
    Call,
    ConstraintCall,
    ExprError,
    Literal,
    SurfaceExpr,
    VarRef,
    parse_call,
    parse_prefix,
)
from .graph import (
    CONFIRMATION,
    DISAMBIGUATION,
    MISSING_INPUT,
    ConstraintSpec,
    ExceptionRecord,
    Failed,
    GraphContext,
    Node,
    Outcome,
    Pending,
    Success,
    Turn,
    match_constraint,
)

INT64_MAX = 2**63 - 1

CONSTRAINT_PATTERN = "ConstraintPattern"

LITERAL_KINDS = {INT, FLOAT, STR, BOOL}


class EngineError(Exception):
    pass


class UnknownFunction(EngineError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown function {name!r}")


class DuplicateFunction(EngineError):
    def __init__(self, name: str):
        super().__init__(f"function {name!r} already registered")


class ArityError(EngineError):
    def __init__(self, func: str, got: int, allowed: int):
        super().__init__(f"{func} takes at most {allowed} positional arguments, got {got}")


class UnknownParam(EngineError):
    def __init__(self, func: str, name: str):
        super().__init__(f"{func} has no parameter {name!r}")


class InputTypeError(EngineError):
    def __init__(self, func: str, param: str, expected: str, got: str):
        self.expected = expected
        self.got = got
        super().__init__(f"{func}.{param} expects {expected}, got {got}")


class NoMatch(EngineError):
    def __init__(self, spec: ConstraintSpec):
        self.spec = spec
        super().__init__(f"no match for {spec.render()}")


class WrongAnswerType(EngineError):
    def __init__(self, expected: str, got: str):
        self.expected = expected
        self.got = got
        super().__init__(f"wrong answer type: expected {expected}, got {got}")


class EvalError(EngineError):
    """Domain failure during execution; becomes a Failed outcome."""


class _PendingSignal(Exception):
    """Internal control flow: evaluation suspended on a user prompt."""

    def __init__(self, record: ExceptionRecord):
        self.record = record
        super().__init__(record.prompt)


def raise_pending(kind: str, node: Node, prompt: str, *, param: str | None = None,
                  expected_type: str = "Any", candidates: tuple[int, ...] = ()):
    raise _PendingSignal(ExceptionRecord(kind, node.id, prompt, param, expected_type, candidates))


# ---------------------------------------------------------------------------
# Registry

@dataclass(frozen=True)
class Param:
    name: str
    type: str = "Any"
    required: bool = True


@dataclass
class FunctionDef:
    name: str
    params: list[Param]
    out_type: str
    exec_fn: Callable[[Node, GraphContext], None]
    check: Callable[[Node, GraphContext, "FunctionDef"], None] | None = None
    coercions: dict[str, str] = field(default_factory=dict)

    def param(self, name: str) -> Param | None:
        for p in self.params:
            if p.name == name:
                return p
        return None


class Registry:
    """Function table; immutable once a dialogue starts."""

    def __init__(self):
        self._defs: dict[str, FunctionDef] = {}

    def register(self, fdef: FunctionDef) -> None:
        if fdef.name in self._defs:
            raise DuplicateFunction(fdef.name)
        self._defs[fdef.name] = fdef

    def get(self, name: str) -> FunctionDef | None:
        return self._defs.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._defs

    def __len__(self) -> int:
        return len(self._defs)

    def names(self) -> list[str]:
        return sorted(self._defs)


# ---------------------------------------------------------------------------
# Literal payloads

def literal_value(lit: Literal) -> Any:
    if lit.kind == INT:
        v = int(lit.text)
        if abs(v) > INT64_MAX:
            raise EvalError(f"integer out of range: {lit.text}")
        return v
    if lit.kind == FLOAT:
        return float(lit.text)
    if lit.kind == BOOL:
        return lit.text == "true"
    return lit.text


def static_type(node: Node, ctx: GraphContext) -> str:
    if node.detached:
        return CONSTRAINT_PATTERN
    fdef = ctx.registry.get(node.func) if ctx.registry else None
    if fdef is not None:
        return fdef.out_type
    if node.func in LITERAL_KINDS:
        return node.func
    return "Any"


def static_type_of_ast(expr: SurfaceExpr, registry: Registry) -> str:
    if isinstance(expr, Literal):
        return expr.kind
    if isinstance(expr, Call):
        fdef = registry.get(expr.func)
        return fdef.out_type if fdef else "Any"
    if isinstance(expr, ConstraintCall):
        return "EventConstraint" if _constraint_effective_type(expr) == "Event" else CONSTRAINT_PATTERN
    return "Any"


def _constraint_effective_type(c: ConstraintCall) -> str:
    if c.type_name == "Constraint" and c.type_param:
        return c.type_param
    return c.type_name


# ---------------------------------------------------------------------------
# Graph building

def build_graph(expr: SurfaceExpr, ctx: GraphContext) -> int:
    """Compile a tree into graph nodes; returns the root node id."""
    return _build(expr, ctx, {})


def _build(expr: SurfaceExpr, ctx: GraphContext, env: dict[str, int],
           pattern_pos: bool = False) -> int:
    if isinstance(expr, Literal):
        node = ctx.new_node(expr.kind, value=literal_value(expr), evaluated=True)
        return node.id
    if isinstance(expr, VarRef):
        if expr.name not in env:
            raise ExprError(f"unbound variable {expr.name!r}")
        return env[expr.name]
    if isinstance(expr, AssignSeq):
        inner = dict(env)
        for name, sub in expr.bindings:
            inner[name] = _build(sub, ctx, inner)
        return _build(expr.body, ctx, inner)
    if isinstance(expr, ConstraintCall):
        if pattern_pos:
            return _build_pattern(expr, ctx)
        return _build_constraint_value(expr, ctx, env)
    assert isinstance(expr, Call)
    return _build_call(expr, ctx, env)


def _build_call(expr: Call, ctx: GraphContext, env: dict[str, int]) -> int:
    fdef = ctx.registry.get(expr.func) if ctx.registry else None
    if fdef is None:
        raise UnknownFunction(expr.func)
    # literal constructors over a bare literal fold into one value node
    if expr.func in LITERAL_KINDS and len(expr.args) == 1 and not expr.named \
            and isinstance(expr.args[0], Literal) and expr.args[0].kind == expr.func:
        node = ctx.new_node(expr.func, value=literal_value(expr.args[0]), evaluated=True)
        return node.id
    if len(expr.args) > len(fdef.params):
        raise ArityError(expr.func, len(expr.args), len(fdef.params))
    pairs: list[tuple[Param, SurfaceExpr]] = []
    taken: set[str] = set()
    for i, arg in enumerate(expr.args):
        pairs.append((fdef.params[i], arg))
        taken.add(fdef.params[i].name)
    for name, arg in expr.named:
        p = fdef.param(name)
        if p is None:
            raise UnknownParam(expr.func, name)
        if p.name in taken:
            raise ArityError(expr.func, len(expr.args) + len(expr.named), len(fdef.params))
        taken.add(p.name)
        pairs.append((p, arg))
    node = ctx.new_node(expr.func)
    for p, arg in pairs:
        child = _build(arg, ctx, env, pattern_pos=(p.type == CONSTRAINT_PATTERN))
        node.inputs[p.name] = coerce_input(p, child, fdef, ctx)
    return node.id


def _build_pattern(expr: ConstraintCall, ctx: GraphContext) -> int:
    spec = constraint_spec_from_ast(expr)
    label = expr.type_name + (f"[{expr.type_param}]" if expr.type_param else "?")
    node = ctx.new_node(label, value=spec, detached=True)
    return node.id


def constraint_spec_from_ast(expr: ConstraintCall) -> ConstraintSpec:
    fields = []
    for name, sub in expr.fields:
        if isinstance(sub, Literal):
            fields.append((name, literal_value(sub)))
        elif isinstance(sub, ConstraintCall):
            fields.append((name, constraint_spec_from_ast(sub)))
        else:
            raise EvalError("constraint patterns may only hold literals or nested constraints")
    return ConstraintSpec(expr.type_name, expr.type_param, tuple(fields))


def _build_constraint_value(expr: ConstraintCall, ctx: GraphContext, env: dict[str, int]) -> int:
    eff = _constraint_effective_type(expr)
    builder = f"Constraint[{eff}]"
    fdef = ctx.registry.get(builder) if ctx.registry else None
    if fdef is None:
        raise UnknownFunction(builder)
    node = ctx.new_node(builder)
    for name, sub in expr.fields:
        p = fdef.param(name)
        if p is None:
            raise UnknownParam(builder, name)
        child = _build(sub, ctx, env)
        node.inputs[p.name] = coerce_input(p, child, fdef, ctx)
    return node.id


def coerce_input(param: Param, arg_id: int, fdef: FunctionDef, ctx: GraphContext) -> int:
    """Insert wrapper nodes until the argument's type fits the parameter.

    Wrappers are ordinary registered functions, so every conversion is
    visible in graph exports.
    """
    current = static_type(ctx.node(arg_id), ctx)
    if param.type == "Any" or current == param.type or current == "Any":
        return arg_id
    if param.type == CONSTRAINT_PATTERN or current == CONSTRAINT_PATTERN:
        raise InputTypeError(fdef.name, param.name, param.type, current)
    hops = 0
    while current != param.type:
        wrapper = fdef.coercions.get(current)
        if wrapper is None or hops >= 4:
            raise InputTypeError(fdef.name, param.name, param.type, current)
        wdef = ctx.registry.get(wrapper)
        if wdef is None:
            raise UnknownFunction(wrapper)
        wnode = ctx.new_node(wrapper)
        wnode.inputs[wdef.params[0].name] = arg_id
        arg_id = wnode.id
        current = wdef.out_type
        hops += 1
    return arg_id


# ---------------------------------------------------------------------------
# Evaluation

def evaluate(root: int, ctx: GraphContext) -> Outcome:
    """Post-order evaluation of a turn graph."""
    if ctx.pending is not None:
        return Failed("a prompt is pending; answer it first")
    try:
        _eval_node(root, ctx)
    except _PendingSignal as sig:
        ctx.pending = sig.record
        return Pending(sig.record)
    except (EvalError, EngineError) as err:
        return Failed(str(err))
    node = ctx.node(root)
    value = result_value(ctx, node.id)
    return Success(node.result, render_value(value))


def _eval_node(nid: int, ctx: GraphContext) -> None:
    node = ctx.node(nid)
    if node.evaluated or node.detached:
        return
    for src in node.inputs.values():
        if not ctx.node(src).detached:
            _eval_node(src, ctx)
    fdef = ctx.registry.get(node.func) if ctx.registry else None
    if fdef is None:
        raise UnknownFunction(node.func)
    (fdef.check or default_check)(node, ctx, fdef)
    fdef.exec_fn(node, ctx)
    if not node.evaluated or node.result is None:
        raise EvalError(f"{node.func} did not produce a result")


def default_check(node: Node, ctx: GraphContext, fdef: FunctionDef) -> None:
    for p in fdef.params:
        if p.name not in node.inputs:
            if p.required:
                raise_pending(
                    MISSING_INPUT, node,
                    f"Missing input: {p.name} (expected {p.type}) for {fdef.name}",
                    param=p.name, expected_type=p.type,
                )
            continue
        if p.type in ("Any", CONSTRAINT_PATTERN):
            continue
        got = static_type(ctx.node(node.inputs[p.name]), ctx)
        if got not in ("Any", p.type):
            raise InputTypeError(fdef.name, p.name, p.type, got)


# -- helpers used by function bodies ----------------------------------------

def resolved_input(ctx: GraphContext, node: Node, name: str) -> Node | None:
    """The value node behind an input (its result node once evaluated)."""
    if name not in node.inputs:
        return None
    src = ctx.node(node.inputs[name])
    if src.result is not None:
        return ctx.node(src.result)
    return src


def input_value(ctx: GraphContext, node: Node, name: str) -> Any:
    target = resolved_input(ctx, node, name)
    return target.value if target is not None else None


def result_value(ctx: GraphContext, node_id: int) -> Any:
    node = ctx.node(node_id)
    if node.result is None:
        return None
    return ctx.node(node.result).value


def set_result_value(ctx: GraphContext, node: Node, type_name: str, value: Any) -> Node:
    rnode = ctx.new_node(type_name, value=value, evaluated=True)
    node.result = rnode.id
    node.evaluated = True
    return rnode


def point_result(ctx: GraphContext, node: Node, target_id: int) -> None:
    target = ctx.node(target_id)
    node.result = target.result if target.result is not None else target.id
    node.evaluated = True


def self_result(ctx: GraphContext, node: Node, value: Any) -> None:
    node.value = value
    node.result = node.id
    node.evaluated = True


# ---------------------------------------------------------------------------
# refer / revise

def refer(spec: ConstraintSpec, ctx: GraphContext) -> int | None:
    """Newest-first search of the dialogue graphs, then the event store.

    A turn's graph is everything reachable from its root (results
    included); shared nodes count for the newest turn that reaches
    them.  Nodes of a still-building turn are searched too.
    """
    seen: set[int] = set()
    for turn_index in range(len(ctx.turns) - 1, -1, -1):
        root = ctx.turns[turn_index].root
        if root is not None:
            pool = ctx.reachable(root, follow_results=True)
        else:
            pool = set(ctx.nodes_of_turn(turn_index))
        for nid in sorted(pool - seen, reverse=True):
            node = ctx.node(nid)
            if node.detached:
                continue
            if match_constraint(node, spec, ctx):
                return nid
        seen |= pool
    if spec.effective_type == "Event" and ctx.store is not None:
        events = ctx.store.search(spec, ctx.clock)
        if events:
            node = ctx.new_node("Event", value=events[0], evaluated=True)
            return node.id
    return None


def revise(old: ConstraintSpec, new_root: int, ctx: GraphContext) -> int:
    """Duplicate the matched turn's path to its root around a replacement.

    Nodes off the path keep their ids (shared structure); the duplicate
    is evaluated and recorded as the context's latest revision root.
    """
    current = len(ctx.turns) - 1
    target: int | None = None
    target_turn = -1
    for turn_index in range(current - 1, -1, -1):
        root = ctx.turns[turn_index].root
        if root is None:
            continue
        # only nodes consumed somewhere under the root have a path to copy
        for nid in sorted(ctx.reachable(root), reverse=True):
            node = ctx.node(nid)
            if node.detached:
                continue
            if match_constraint(node, old, ctx):
                target = nid
                target_turn = turn_index
                break
        if target is not None:
            break
    if target is None:
        raise NoMatch(old)
    root = ctx.turns[target_turn].root
    assert root is not None
    if target == root:
        dup_root = new_root
    else:
        reach = ctx.reachable(root)
        ancestors = {n for n in reach if target in ctx.transitive_inputs(n)}
        memo: dict[int, int] = {target: new_root}

        def dup(nid: int) -> int:
            if nid in memo:
                return memo[nid]
            if nid not in ancestors:
                return nid
            src = ctx.node(nid)
            new_inputs = {k: dup(v) for k, v in src.inputs.items()}
            copy = ctx.new_node(src.func, value=src.value, detached=src.detached)
            copy.inputs = new_inputs
            memo[nid] = copy.id
            return copy.id

        dup_root = dup(root)
    _eval_node(dup_root, ctx)
    ctx.last_revise_root = dup_root
    return dup_root


# ---------------------------------------------------------------------------
# Exception resumption

def _strip_yield(expr: SurfaceExpr) -> SurfaceExpr:
    if isinstance(expr, Call) and expr.func == "Yield" and len(expr.args) == 1 and not expr.named:
        return expr.args[0]
    return expr


def _is_affirmative(expr: SurfaceExpr) -> bool | None:
    """True / False for yes/no answers, None when neither."""
    expr = _strip_yield(expr)
    if isinstance(expr, Call) and expr.func == "Confirm" and not expr.args and not expr.named:
        return True
    if isinstance(expr, Call) and expr.func == "Decline" and not expr.args and not expr.named:
        return False
    if isinstance(expr, Literal) and expr.kind == BOOL:
        return expr.text == "true"
    return None


def is_answer(expr: SurfaceExpr, rec: ExceptionRecord, registry: Registry) -> bool:
    expr = _strip_yield(expr)
    if isinstance(expr, Literal):
        return True
    if _is_affirmative(expr) is not None:
        return True
    if rec.kind == MISSING_INPUT:
        return static_type_of_ast(expr, registry) == rec.expected_type
    return False


def resume(answer: SurfaceExpr, ctx: GraphContext) -> Outcome:
    """Feed an answer to the pending prompt and re-run the suspended turn."""
    rec = ctx.pending
    if rec is None:
        return Failed("nothing is pending")
    answer = _strip_yield(answer)
    node = ctx.node(rec.node)
    turn = ctx.turns[node.turn]

    if rec.kind == MISSING_INPUT:
        fdef = ctx.registry.get(node.func)
        param = fdef.param(rec.param) if fdef else None
        if fdef is None or param is None:
            return Failed(f"cannot resume {node.func}")
        got = static_type_of_ast(answer, ctx.registry)
        if got != param.type and param.type != "Any" and got not in fdef.coercions:
            return Failed(str(WrongAnswerType(param.type, got)))
        try:
            built = _build(answer, ctx, {})
            node.inputs[param.name] = coerce_input(param, built, fdef, ctx)
        except InputTypeError as err:
            return Failed(str(WrongAnswerType(err.expected, err.got)))
        except EngineError as err:
            return Failed(str(err))
        ctx.pending = None
        outcome = evaluate(turn.root, ctx)
        turn.outcome = outcome
        return outcome

    if rec.kind == CONFIRMATION:
        verdict = _is_affirmative(answer)
        if verdict is None:
            return Failed(str(WrongAnswerType("Confirm()/Decline()", static_type_of_ast(answer, ctx.registry))))
        ctx.pending = None
        if not verdict:
            outcome: Outcome = Success(None, "cancelled")
            turn.outcome = outcome
            return outcome
        ctx.confirmed.add(rec.node)
        outcome = evaluate(turn.root, ctx)
        turn.outcome = outcome
        return outcome

    if rec.kind == DISAMBIGUATION:
        if not (isinstance(answer, Literal) and answer.kind == INT):
            return Failed(str(WrongAnswerType("Int (an id)", static_type_of_ast(answer, ctx.registry))))
        chosen_id = int(answer.text)
        pool = input_value(ctx, node, "pos1") or ()
        chosen = next((e for e in pool if getattr(e, "id", None) == chosen_id), None)
        if chosen is None or chosen_id not in rec.candidates:
            return Failed(str(WrongAnswerType(f"one of {list(rec.candidates)}", str(chosen_id))))
        set_result_value(ctx, node, "Event", chosen)
        ctx.pending = None
        outcome = evaluate(turn.root, ctx)
        turn.outcome = outcome
        return outcome

    return Failed(f"unknown pending kind {rec.kind!r}")


# ---------------------------------------------------------------------------
# Turn driver

def run_turn(text: str, ctx: GraphContext, syntax: str = "call") -> Outcome:
    """Parse one user line, expand, build, evaluate, and record the turn.

    While a prompt is pending, a line that looks like an answer (a bare
    literal, Confirm()/Decline(), or an expression of the expected
    type) resumes the suspended computation instead of starting a turn;
    anything else abandons the prompt.
    """
    from . import rewrite

    try:
        parsed = parse_prefix(text) if syntax == "prefix" else parse_call(text)
    except ExprError as err:
        turn = ctx.begin_turn(utterance=text)
        turn.outcome = Failed(str(err))
        return turn.outcome

    if ctx.pending is not None:
        if is_answer(parsed, ctx.pending, ctx.registry):
            return resume(parsed, ctx)
        ctx.pending = None  # topic change abandons the prompt

    expanded = rewrite.expand(parsed)
    wrapped = _ensure_yield(expanded)
    turn = ctx.begin_turn(utterance=text)
    ctx.last_revise_root = None
    try:
        root = build_graph(wrapped, ctx)
    except (EngineError, ExprError) as err:
        turn.outcome = Failed(str(err))
        return turn.outcome
    turn.root = root
    outcome = evaluate(root, ctx)
    if ctx.last_revise_root is not None and _is_revise_turn(ctx, root):
        turn.root = ctx.last_revise_root
    turn.outcome = outcome
    return outcome


def _ensure_yield(expr: SurfaceExpr) -> SurfaceExpr:
    if isinstance(expr, AssignSeq):
        return AssignSeq(expr.bindings, _ensure_yield(expr.body))
    if isinstance(expr, Call) and expr.func == "Yield":
        return expr
    return Call("Yield", (expr,))


def _is_revise_turn(ctx: GraphContext, root: int) -> bool:
    node = ctx.node(root)
    if node.func == "revise":
        return True
    if node.func == "Yield" and node.inputs:
        inner = ctx.node(next(iter(node.inputs.values())))
        return inner.func == "revise"
    return False


def render_value(value: Any) -> str:
    import datetime as dt

    if value is None:
        return "ok"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return str(value)
    if isinstance(value, str):
        return value
    if isinstance(value, dt.datetime):
        return value.strftime("%Y-%m-%d %H:%M")
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, dt.time):
        return value.strftime("%H:%M")
    if isinstance(value, tuple):
        if not value:
            return "no events found"
        word = "event" if len(value) == 1 else "events"
        return f"{len(value)} {word}: " + "; ".join(render_value(v) for v in value)
    if hasattr(value, "summary"):
        return value.summary()
    if isinstance(value, ConstraintSpec):
        return value.render()
    if hasattr(value, "render"):
        return value.render()
    return str(value)
