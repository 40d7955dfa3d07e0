"""Computational-graph data model.

One :class:`Node` per function call or literal, one :class:`Turn` per
user request, one :class:`GraphContext` per dialogue.  Nodes are
created with a single monotonically increasing counter for the whole
dialogue, so node labels like ``Add_0`` stay stable across turns.

Input edges always point at nodes that already exist, so graphs are
acyclic by construction.  Completed turns are never mutated; a repeat
request duplicates nodes instead of editing them.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

MISSING_INPUT = "missing_input"
CONFIRMATION = "confirmation"
DISAMBIGUATION = "disambiguation"

SNAPSHOT_VERSION = "v1"


class GraphError(Exception):
    pass


class UnknownTurn(GraphError):
    def __init__(self, index):
        super().__init__(f"unknown turn {index!r}")


@dataclass
class ExceptionRecord:
    """A suspended evaluation waiting on the user."""

    kind: str  # MISSING_INPUT | CONFIRMATION | DISAMBIGUATION
    node: int
    prompt: str
    param: str | None = None
    expected_type: str = "Any"
    candidates: tuple[int, ...] = ()


@dataclass
class Success:
    result: int | None
    message: str
    kind: str = "success"


@dataclass
class Pending:
    exc: ExceptionRecord
    kind: str = "pending"

    @property
    def message(self) -> str:
        return self.exc.prompt


@dataclass
class Failed:
    error: str
    kind: str = "failed"

    @property
    def message(self) -> str:
        return self.error


Outcome = Success | Pending | Failed


@dataclass
class Node:
    id: int
    func: str
    inputs: dict[str, int] = field(default_factory=dict)
    result: int | None = None
    value: Any = None
    evaluated: bool = False
    turn: int = -1
    detached: bool = False  # constraint pattern, never evaluated

    def is_value(self) -> bool:
        return self.evaluated and self.result == self.id


@dataclass
class Turn:
    index: int
    root: int | None
    utterance: str | None = None
    outcome: Outcome | None = None


@dataclass(frozen=True)
class ConstraintSpec:
    """A match pattern: a type name plus optional field requirements."""

    type_name: str
    type_param: str | None = None
    fields: tuple[tuple[str, Any], ...] = ()

    @property
    def effective_type(self) -> str:
        if self.type_name == "Constraint" and self.type_param:
            return self.type_param
        return self.type_name

    def field_map(self) -> dict[str, Any]:
        return dict(self.fields)

    def merged_with(self, other: "ConstraintSpec") -> "ConstraintSpec":
        mine = self.field_map()
        for k, v in other.fields:
            if k in mine and mine[k] != v:
                raise GraphError(f"conflicting constraint field {k!r}")
            mine.setdefault(k, v)
        return ConstraintSpec(self.effective_type, None, tuple(mine.items()))

    def render(self) -> str:
        head = self.effective_type
        if len(self.fields) == 1 and self.fields[0][0] == "value":
            return f"{head}?({_render_value(self.fields[0][1])})"
        inner = ",".join(f"{k}={_render_value(v)}" for k, v in self.fields)
        return f"{head}?({inner})"


def _render_value(v: Any) -> str:
    if isinstance(v, ConstraintSpec):
        return v.render()
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, dt.datetime):
        return v.strftime("%Y-%m-%d %H:%M")
    if hasattr(v, "render"):
        return v.render()
    return str(v)


class GraphContext:
    """Whole-dialogue state: node registry, turn list, pending exception.

    A context is owned by one logical caller at a time; separate
    dialogues use separate contexts and can run in parallel.
    """

    def __init__(self, registry=None, store=None, clock=None):
        self.nodes: dict[int, Node] = {}
        self.turns: list[Turn] = []
        self.pending: ExceptionRecord | None = None
        self.registry = registry
        self.store = store
        self.clock = clock
        self.confirmed: set[int] = set()
        self.last_revise_root: int | None = None
        self._next_id = 0
        self._turn_nodes: list[list[int]] = []

    # -- node management ----------------------------------------------------

    def new_node(self, func: str, *, value: Any = None, detached: bool = False,
                 evaluated: bool = False) -> Node:
        node = Node(
            id=self._next_id,
            func=func,
            value=value,
            detached=detached,
            evaluated=evaluated,
            turn=self.current_turn_index(),
        )
        if evaluated:
            node.result = node.id
        self.nodes[node.id] = node
        self._next_id += 1
        while len(self._turn_nodes) <= node.turn:
            self._turn_nodes.append([])
        self._turn_nodes[node.turn].append(node.id)
        return node

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def current_turn_index(self) -> int:
        return max(len(self.turns) - 1, 0)

    def nodes_of_turn(self, index: int) -> list[int]:
        if index < len(self._turn_nodes):
            return self._turn_nodes[index]
        return []

    def begin_turn(self, utterance: str | None = None) -> Turn:
        turn = Turn(index=len(self.turns), root=None, utterance=utterance)
        self.turns.append(turn)
        self._turn_nodes.append([])
        return turn

    # -- traversal ----------------------------------------------------------

    def reachable(self, root: int, follow_results: bool = False) -> set[int]:
        seen: set[int] = set()
        stack = [root]
        while stack:
            nid = stack.pop()
            if nid in seen or nid not in self.nodes:
                continue
            seen.add(nid)
            node = self.nodes[nid]
            stack.extend(node.inputs.values())
            if follow_results and node.result is not None:
                stack.append(node.result)
        return seen

    def transitive_inputs(self, root: int) -> set[int]:
        out = self.reachable(root)
        out.discard(root)
        return out

    def iter_nodes(self) -> Iterator[Node]:
        for nid in sorted(self.nodes):
            yield self.nodes[nid]


# ---------------------------------------------------------------------------
# Constraint matching

def match_constraint(node: Node, spec: ConstraintSpec, ctx: GraphContext) -> bool:
    """True when the node satisfies the pattern.

    Unevaluated inputs never match field requirements; an empty spec
    matches any node of the right type.  Detached pattern nodes are the
    caller's business to skip.
    """
    want = spec.effective_type
    if node.func != want and not _value_has_type(node.value, want):
        return False
    for name, expected in spec.fields:
        if not _match_field(node, name, expected, ctx):
            return False
    return True


def _value_has_type(value: Any, type_name: str) -> bool:
    if value is None:
        return False
    if type_name == "Int":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_name == "Str":
        return isinstance(value, str)
    if type_name == "Bool":
        return isinstance(value, bool)
    if type_name == "Float":
        return isinstance(value, float)
    return type(value).__name__ == type_name


def _match_field(node: Node, name: str, expected: Any, ctx: GraphContext) -> bool:
    if name == "value":
        return node.evaluated and node.value == expected
    if name in node.inputs:
        in_node = ctx.node(node.inputs[name])
        if isinstance(expected, ConstraintSpec):
            return match_constraint(in_node, expected, ctx)
        if not in_node.evaluated:
            return False
        target = ctx.node(in_node.result) if in_node.result is not None else in_node
        return target.value == expected
    payload = node.value
    if payload is not None and hasattr(payload, name):
        got = getattr(payload, name)
        if isinstance(expected, ConstraintSpec):
            return False
        return got == expected
    return False


# ---------------------------------------------------------------------------
# Export

def export_dot(ctx: GraphContext, turn: int | None = None) -> str:
    """Graphviz text: solid input edges labeled with the parameter name,
    dashed edges from a node to its result."""
    if turn is not None:
        if turn < 0 or turn >= len(ctx.turns):
            raise UnknownTurn(turn)
        root = ctx.turns[turn].root
        keep = ctx.reachable(root, follow_results=True) if root is not None else set()
    else:
        keep = set(ctx.nodes)
    lines = ["digraph dialogue {", "  rankdir=TB;"]
    for node in ctx.iter_nodes():
        if node.id not in keep:
            continue
        label = f"{node.func}_{node.id}"
        if node.is_value() and node.value is not None:
            label += f"\\n{_dot_escape(_render_value(node.value))}"
        style = ' style=dashed' if node.detached else ""
        lines.append(f'  n{node.id} [label="{label}"{style}];')
    for node in ctx.iter_nodes():
        if node.id not in keep:
            continue
        for param, src in node.inputs.items():
            lines.append(f'  n{src} -> n{node.id} [label="{param}"];')
    for node in ctx.iter_nodes():
        if node.id not in keep:
            continue
        if node.result is not None and node.result != node.id:
            lines.append(f"  n{node.id} -> n{node.result} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


# Value payload codecs.  Domain types register themselves so snapshots
# can round-trip without this module importing them.
_VALUE_DECODERS: dict[str, Callable[[Any], Any]] = {}


def register_value_codec(tag: str, decoder: Callable[[Any], Any]) -> None:
    _VALUE_DECODERS[tag] = decoder


def encode_value(value: Any) -> Any:
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, dt.datetime):
        return {"$datetime": value.isoformat()}
    if isinstance(value, dt.date):
        return {"$date": value.isoformat()}
    if isinstance(value, dt.time):
        return {"$time": value.isoformat(timespec="minutes")}
    if isinstance(value, ConstraintSpec):
        return {
            "$constraint": {
                "type": value.type_name,
                "param": value.type_param,
                "fields": [[k, encode_value(v)] for k, v in value.fields],
            }
        }
    if isinstance(value, tuple):
        return {"$list": [encode_value(v) for v in value]}
    if hasattr(value, "to_json"):
        return {f"${type(value).__name__}": value.to_json()}
    raise GraphError(f"cannot encode value {value!r}")


def decode_value(data: Any) -> Any:
    if not isinstance(data, dict):
        return data
    (tag, payload), = data.items()
    if tag == "$datetime":
        return dt.datetime.fromisoformat(payload)
    if tag == "$date":
        return dt.date.fromisoformat(payload)
    if tag == "$time":
        return dt.time.fromisoformat(payload)
    if tag == "$list":
        return tuple(decode_value(v) for v in payload)
    if tag == "$constraint":
        return ConstraintSpec(
            payload["type"],
            payload["param"],
            tuple((k, decode_value(v)) for k, v in payload["fields"]),
        )
    decoder = _VALUE_DECODERS.get(tag.lstrip("$"))
    if decoder is None:
        raise GraphError(f"unknown value tag {tag!r}")
    return decoder(payload)


def _outcome_to_json(outcome: Outcome | None) -> Any:
    if outcome is None:
        return None
    data: dict[str, Any] = {"kind": outcome.kind, "message": outcome.message}
    if isinstance(outcome, Success):
        data["result"] = outcome.result
    return data


def _exception_to_json(rec: ExceptionRecord | None) -> Any:
    if rec is None:
        return None
    return {
        "kind": rec.kind,
        "node": rec.node,
        "prompt": rec.prompt,
        "param": rec.param,
        "expected_type": rec.expected_type,
        "candidates": list(rec.candidates),
    }


def snapshot(ctx: GraphContext) -> dict[str, Any]:
    return {
        "version": SNAPSHOT_VERSION,
        "nodes": [
            {
                "id": n.id,
                "func": n.func,
                "inputs": {k: v for k, v in n.inputs.items()},
                "result": n.result,
                "value": encode_value(n.value),
                "evaluated": n.evaluated,
                "turn": n.turn,
                "detached": n.detached,
            }
            for n in ctx.iter_nodes()
        ],
        "turns": [
            {
                "index": t.index,
                "root": t.root,
                "utterance": t.utterance,
                "outcome": _outcome_to_json(t.outcome),
            }
            for t in ctx.turns
        ],
        "pending": _exception_to_json(ctx.pending),
    }


def export_json(ctx: GraphContext) -> str:
    return json.dumps(snapshot(ctx), indent=2, sort_keys=False)


def import_json(text: str) -> GraphContext:
    """Rebuild the node/turn/pending state of a snapshot (test fixtures)."""
    data = json.loads(text)
    if data.get("version") != SNAPSHOT_VERSION:
        raise GraphError(f"unsupported snapshot version {data.get('version')!r}")
    ctx = GraphContext()
    for nd in data["nodes"]:
        node = Node(
            id=nd["id"],
            func=nd["func"],
            inputs=dict(nd["inputs"]),
            result=nd["result"],
            value=decode_value(nd["value"]),
            evaluated=nd["evaluated"],
            turn=nd["turn"],
            detached=nd["detached"],
        )
        ctx.nodes[node.id] = node
        ctx._next_id = max(ctx._next_id, node.id + 1)
        while len(ctx._turn_nodes) <= max(node.turn, 0):
            ctx._turn_nodes.append([])
        ctx._turn_nodes[max(node.turn, 0)].append(node.id)
    for td in data["turns"]:
        outcome: Outcome | None = None
        od = td["outcome"]
        if od and od["kind"] == "success":
            outcome = Success(od.get("result"), od["message"])
        elif od and od["kind"] == "failed":
            outcome = Failed(od["message"])
        elif od:
            outcome = Pending(ExceptionRecord("confirmation", -1, od["message"]))
        ctx.turns.append(Turn(td["index"], td["root"], td["utterance"], outcome))
    pd = data.get("pending")
    if pd:
        ctx.pending = ExceptionRecord(
            pd["kind"], pd["node"], pd["prompt"], pd["param"],
            pd["expected_type"], tuple(pd["candidates"]),
        )
    return ctx
