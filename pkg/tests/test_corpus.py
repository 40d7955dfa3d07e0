import json
import random

import pytest

from flowdialog.calendar import DEFAULT_NOW, EventStore
from flowdialog.corpus import (
    DialogueRecord,
    EmptyCorpus,
    TurnRecord,
    bundled_corpus_path,
    bundled_store_path,
    dump_jsonl,
    equivalence_harness,
    length_stats,
    load_jsonl,
    nearest_rank,
    simplify_dataset,
    stats_json,
    stats_table,
)


def bundled():
    res = load_jsonl(bundled_corpus_path())
    assert not res.errors
    return res.records


def corpus_store():
    return EventStore.from_file(bundled_store_path())


def test_bundled_corpus_has_fifty_records():
    assert len(bundled()) == 50


def test_load_empty_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    res = load_jsonl(p)
    assert res.records == [] and res.errors == []


def test_load_skips_and_reports_bad_lines(tmp_path):
    p = tmp_path / "mixed.jsonl"
    good = {"dialogue_id": "ok", "turns": [
        {"utterance": "hi", "annotation": "(Yield (Add 1 2))", "syntax": "prefix"}]}
    bad_ann = {"dialogue_id": "bad", "turns": [
        {"utterance": "x", "annotation": "(Add 1", "syntax": "prefix"}]}
    p.write_text(json.dumps(good) + "\n{not json}\n" + json.dumps(bad_ann) + "\n")
    res = load_jsonl(p)
    assert [r.dialogue_id for r in res.records] == ["ok"]
    assert len(res.errors) == 2
    assert "line 2" in res.errors[0] and "line 3" in res.errors[1]


def test_simplify_dataset_keeps_identity_fields():
    records = bundled()
    out, errors = simplify_dataset(records)
    assert errors == []
    assert len(out) == len(records)
    for before, after in zip(records, out):
        assert before.dialogue_id == after.dialogue_id
        assert [t.utterance for t in before.turns] == [t.utterance for t in after.turns]
        assert all(t.annotation_simplified for t in after.turns)


def test_simplify_dataset_idempotent_on_simplified():
    records, _ = simplify_dataset(bundled())
    again, errors = simplify_dataset(records)
    assert errors == []
    for a, b in zip(records, again):
        assert [t.annotation_simplified for t in a.turns] == \
            [t.annotation_simplified for t in b.turns]


def test_nearest_rank_quantiles():
    assert nearest_rank([1, 2, 3, 4], 0.25) == 1
    assert nearest_rank([1, 2, 3, 4], 0.50) == 2
    assert nearest_rank([1, 2, 3, 4], 0.75) == 3
    assert nearest_rank([9], 0.5) == 9


def test_length_stats_strictly_smaller():
    records, _ = simplify_dataset(bundled())
    orig, simp = length_stats(records)
    assert simp.q25 < orig.q25
    assert simp.q50 < orig.q50
    assert simp.q75 < orig.q75
    assert orig.count == simp.count


def test_length_stats_single_expression():
    rec = DialogueRecord("one", (TurnRecord("u", "(Yield (Add 1 2))", "prefix"),))
    records, _ = simplify_dataset([rec])
    orig, simp = length_stats(records)
    assert orig.q25 == orig.q50 == orig.q75
    assert simp.q25 == simp.q50 == simp.q75


def test_length_stats_empty():
    with pytest.raises(EmptyCorpus):
        length_stats([])


def test_stats_permutation_invariant():
    records, _ = simplify_dataset(bundled())
    shuffled = records[:]
    random.Random(5).shuffle(shuffled)
    assert length_stats(records) == length_stats(shuffled)


def test_stats_render_formats():
    records, _ = simplify_dataset(bundled())
    orig, simp = length_stats(records)
    table = stats_table(orig, simp)
    assert "original" in table and "simplified" in table and "q50" in table
    data = json.loads(stats_json(orig, simp))
    assert data["original"]["q50"] == orig.q50


def test_equivalence_harness_full_pass():
    records, _ = simplify_dataset(bundled())
    rows = equivalence_harness(records, corpus_store, DEFAULT_NOW)
    assert len(rows) == 50
    bad = [r for r in rows if not r.ok]
    assert bad == []


def test_equivalence_harness_flags_fault_injection():
    records, _ = simplify_dataset(bundled())
    broken = []
    for rec in records:
        if rec.dialogue_id == "d01":
            turns = tuple(
                TurnRecord(t.utterance, t.annotation, t.syntax, "Add(2,Add(4,5))")
                for t in rec.turns
            )
            broken.append(DialogueRecord(rec.dialogue_id, turns))
        else:
            broken.append(rec)
    rows = equivalence_harness(broken, corpus_store, DEFAULT_NOW)
    bad = [r.dialogue_id for r in rows if not r.ok]
    assert bad == ["d01"]


def test_equivalence_harness_empty():
    assert equivalence_harness([], corpus_store, DEFAULT_NOW) == []


def test_dump_roundtrip(tmp_path):
    records, _ = simplify_dataset(bundled())
    p = tmp_path / "out.jsonl"
    dump_jsonl(records, p)
    res = load_jsonl(p)
    assert not res.errors
    assert res.records == records
