"""Dataset handling: JSONL dialogues, batch simplification, length
statistics, and the original-vs-simplified execution equivalence check.

A dialogue record is one JSON object per line::

    {"dialogue_id": "d1",
     "turns": [{"utterance": "...", "annotation": "(Yield ...)", "syntax": "prefix"}]}

Simplification adds ``annotation_simplified`` (call syntax) to every
turn.  Length statistics are nearest-rank quantiles of the token
counts; the bundled corpus only supports the directional comparison,
not any externally reported absolute numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import rewrite
from .calendar import Clock, EventStore
from .engine import run_turn
from .expr import ExprError, parse_call, parse_prefix, print_call, tokenize_for_length
from .functions import default_registry
from .graph import GraphContext


class CorpusError(Exception):
    pass


class EmptyCorpus(CorpusError):
    def __init__(self):
        super().__init__("the corpus has no expressions")


@dataclass(frozen=True)
class TurnRecord:
    utterance: str
    annotation: str
    syntax: str = "prefix"
    annotation_simplified: str | None = None


@dataclass(frozen=True)
class DialogueRecord:
    dialogue_id: str
    turns: tuple[TurnRecord, ...]


@dataclass
class LoadResult:
    records: list[DialogueRecord]
    errors: list[str] = field(default_factory=list)


def _parse_record(data: dict) -> DialogueRecord:
    turns = []
    for t in data["turns"]:
        syntax = t.get("syntax", "prefix")
        if syntax not in ("prefix", "call"):
            raise CorpusError(f"bad syntax {syntax!r}")
        ann = t["annotation"]
        (parse_prefix if syntax == "prefix" else parse_call)(ann)
        turns.append(TurnRecord(
            utterance=t.get("utterance", ""),
            annotation=ann,
            syntax=syntax,
            annotation_simplified=t.get("annotation_simplified"),
        ))
    if not turns:
        raise CorpusError("record has no turns")
    return DialogueRecord(dialogue_id=str(data["dialogue_id"]), turns=tuple(turns))


def load_jsonl(path) -> LoadResult:
    out = LoadResult(records=[])
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.records.append(_parse_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, CorpusError, ExprError) as err:
                out.errors.append(f"line {lineno}: {err}")
    return out


def dump_jsonl(records: list[DialogueRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "dialogue_id": rec.dialogue_id,
                "turns": [
                    {k: v for k, v in {
                        "utterance": t.utterance,
                        "annotation": t.annotation,
                        "syntax": t.syntax,
                        "annotation_simplified": t.annotation_simplified,
                    }.items() if v is not None}
                    for t in rec.turns
                ],
            }) + "\n")


def simplify_turn(t: TurnRecord, trace=None) -> TurnRecord:
    parse = parse_prefix if t.syntax == "prefix" else parse_call
    simplified = print_call(rewrite.simplify(parse(t.annotation), trace))
    return replace(t, annotation_simplified=simplified)


def simplify_dataset(records: list[DialogueRecord]) -> tuple[list[DialogueRecord], list[str]]:
    """Add the simplified form to every turn; failed records pass through."""
    out: list[DialogueRecord] = []
    errors: list[str] = []
    for rec in records:
        try:
            out.append(DialogueRecord(rec.dialogue_id, tuple(simplify_turn(t) for t in rec.turns)))
        except (ExprError, rewrite.CycleError) as err:
            errors.append(f"{rec.dialogue_id}: {err}")
            out.append(rec)
    return out, errors


# ---------------------------------------------------------------------------
# Length statistics

@dataclass(frozen=True)
class LengthReport:
    q25: int
    q50: int
    q75: int
    count: int


def nearest_rank(values: list[int], q: float) -> int:
    if not values:
        raise EmptyCorpus()
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


def _report(values: list[int]) -> LengthReport:
    return LengthReport(
        q25=nearest_rank(values, 0.25),
        q50=nearest_rank(values, 0.50),
        q75=nearest_rank(values, 0.75),
        count=len(values),
    )


def length_stats(records: list[DialogueRecord]) -> tuple[LengthReport, LengthReport]:
    """(original, simplified) token-count quantiles over every turn."""
    original: list[int] = []
    simplified: list[int] = []
    for rec in records:
        for t in rec.turns:
            if t.annotation_simplified is None:
                raise CorpusError(f"{rec.dialogue_id}: not simplified yet")
            original.append(len(tokenize_for_length(t.annotation)))
            simplified.append(len(tokenize_for_length(t.annotation_simplified)))
    if not original:
        raise EmptyCorpus()
    return _report(original), _report(simplified)


def stats_table(original: LengthReport, simplified: LengthReport) -> str:
    rows = [
        ("", "q25", "q50", "q75", "count"),
        ("original", str(original.q25), str(original.q50), str(original.q75), str(original.count)),
        ("simplified", str(simplified.q25), str(simplified.q50), str(simplified.q75), str(simplified.count)),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [r[i].rjust(widths[i]) for i in range(1, 5)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


def stats_json(original: LengthReport, simplified: LengthReport) -> str:
    def enc(r: LengthReport):
        return {"q25": r.q25, "q50": r.q50, "q75": r.q75, "count": r.count}

    return json.dumps({"original": enc(original), "simplified": enc(simplified)}, indent=2)


# ---------------------------------------------------------------------------
# Execution equivalence

@dataclass(frozen=True)
class EquivalenceRow:
    dialogue_id: str
    ok: bool
    detail: str = ""


def _run_dialogue(texts: list[tuple[str, str]], store: EventStore, now) -> tuple[list[tuple[str, str]], tuple]:
    ctx = GraphContext(registry=default_registry(), store=store, clock=Clock(now))
    outcomes = []
    for text, syntax in texts:
        o = run_turn(text, ctx, syntax=syntax)
        outcomes.append((o.kind, o.message))
    return outcomes, store.state()


def equivalence_harness(records: list[DialogueRecord], make_store, now) -> list[EquivalenceRow]:
    """Execute each dialogue twice, original vs simplified, on twin
    fresh stores, and compare per-turn outcomes and final store states."""
    rows: list[EquivalenceRow] = []
    for rec in records:
        try:
            originals = [(t.annotation, t.syntax) for t in rec.turns]
            simplifieds = []
            for t in rec.turns:
                simp = t.annotation_simplified
                if simp is None:
                    simp = simplify_turn(t).annotation_simplified
                simplifieds.append((simp, "call"))
            got_a, store_a = _run_dialogue(originals, make_store(), now)
            got_b, store_b = _run_dialogue(simplifieds, make_store(), now)
        except Exception as err:  # a crash is a finding, not a test abort
            rows.append(EquivalenceRow(rec.dialogue_id, False, f"crashed: {err}"))
            continue
        if got_a != got_b:
            rows.append(EquivalenceRow(
                rec.dialogue_id, False, f"outcomes differ: {got_a!r} vs {got_b!r}"))
        elif store_a != store_b:
            rows.append(EquivalenceRow(
                rec.dialogue_id, False, f"stores differ: {store_a!r} vs {store_b!r}"))
        else:
            rows.append(EquivalenceRow(rec.dialogue_id, True))
    return rows


# ---------------------------------------------------------------------------
# Bundled data

def bundled_corpus_path() -> Path:
    return Path(resources.files("flowdialog").joinpath("data/corpus.jsonl"))


def bundled_store_path() -> Path:
    return Path(resources.files("flowdialog").joinpath("data/corpus_store.json"))
