"""One-off generator for the bundled corpus; validates every record
through the equivalence harness before writing."""
import json, sys
sys.path.insert(0, "src")

from flowdialog.corpus import (DialogueRecord, TurnRecord, dump_jsonl,
                               equivalence_harness, simplify_dataset,
                               bundled_store_path)
from flowdialog.calendar import DEFAULT_NOW, EventStore

EX1 = ('(Yield (DeleteCommitEventWrapper (DeletePreflightEventWrapper '
       '(:id (singleton (:results (FindEventWrapperWithDefaults '
       '(EventOnDateTime (DateAtTimeWithDefaults (Tomorrow) (NumberAM 10)) '
       '(Constraint[Event])))))))))')

EX2 = ('(let (x0 (DateAtTimeWithDefaults (NextDOW "Sunday") (NumberAM 10)) '
       'x1 (singleton (:results (FindEventWrapperWithDefaults (EventAllOf '
       '(EventAtLocation "Jeffs") (EventDuringRange x0 (TimeAfterDateTime x0 '
       '(HourMinuteAM 10 30))))))) '
       'x2 (DateAtTimeWithDefaults (:date (:start x1)) (NumberAM 10))) '
       '(Yield (UpdateCommitEventWrapper (UpdatePreflightEventWrapper x1 '
       '(EventAllOf (EventOnDateTime x2 (Constraint[Event])) '
       '(EventEndsAt (TimeAfterDateTime x2 (NumberPM 2))))))))')

CONFIRM = ("yes", "(Yield (Confirm))")
DECLINE = ("no", "(Yield (Decline))")

def find(c):
    return f"(Yield (FindEventWrapperWithDefaults {c}))"

def delete_chain(c):
    return ("(Yield (DeleteCommitEventWrapper (DeletePreflightEventWrapper "
            f"(:id (singleton (:results (FindEventWrapperWithDefaults {c})))))))")

def update_chain(c, changes):
    return ("(Yield (UpdateCommitEventWrapper (UpdatePreflightEventWrapper "
            f"(singleton (:results (FindEventWrapperWithDefaults {c}))) {changes})))")

def create_chain(spec):
    return f"(Yield (CreateCommitEventWrapper (CreatePreflightEventWrapper {spec})))"

D = []
def rec(rid, *turns):
    D.append((rid, list(turns)))

# arithmetic displays
rec("d01", ("add 2 to the sum of 3 and 5", "(Yield (Add 2 (Add 3 5)))"))
rec("d02", ("what is 1 plus 2", "(Yield (Add 1 2))"))
rec("d03", ("add 10 to 20 plus 30", "(Yield (Add 10 (Add 20 30)))"))
rec("d04", ("add 1 plus 1 and 2 plus 2", "(Yield (Add (Add 1 1) (Add 2 2)))"))
rec("d05", ("double 2 plus 3", "(let (x0 (Add 2 3)) (Yield (Add x0 x0)))"))
rec("d06", ("sum of 4, 5 and 6", "(Yield (Add (Add 4 5) 6))"))

# revise / refer
rec("d07", ("add 2 to the sum of 3 and 5", "(Yield (Add 2 (Add 3 5)))"),
           ("make it 6 instead of 3", "(Yield (revise :old (Int? 3) :new (Int 6)))"))
rec("d08", ("add 7 and 2", "(Yield (Add 7 2))"),
           ("use 1 instead of 7", "(Yield (revise :old (Int? 7) :new (Int 1)))"))
rec("d09", ("add 4 and 4", "(Yield (Add 4 4))"),
           ("add one to that", "(Yield (Add (refer (Int? 8)) 1))"))
rec("d10", ("add 5 and 6", "(Yield (Add 5 6))"),
           ("replace the 6 with 1 plus 2", "(Yield (revise :old (Int? 6) :new (Add 1 2)))"))

# missing input
rec("d11", ("add 2 to...", "(Yield (Add 2))"), ("7", "7"))
rec("d12", ("add 3 and", "(Yield (Add 3))"), ("4", "4"))

# find displays
rec("d13", ("what's on tomorrow", find("(EventOnDateTime (Tomorrow) (Constraint[Event]))")))
rec("d14", ("events in room1", find('(EventAtLocation "room1")')))
rec("d15", ("find my lunch", find('(EventWithSubject "lunch")')))
rec("d16", ("room1 tomorrow", find('(EventAllOf (EventAtLocation "room1") (EventOnDateTime (Tomorrow) (Constraint[Event])))')))
rec("d17", ("tomorrow at 10", find("(EventOnDateTime (DateAtTimeWithDefaults (Tomorrow) (NumberAM 10)) (Constraint[Event]))")))
rec("d18", ("next sunday", find('(EventOnDateTime (NextDOW "Sunday") (Constraint[Event]))')))
rec("d19", ("show my whole calendar", find("(Constraint[Event])")))
rec("d20", ("today at 4 pm", find("(EventOnDateTime (DateAtTimeWithDefaults (Today) (NumberPM 4)) (Constraint[Event]))")))
rec("d21", ("anything at the gym", find('(EventAtLocation "gym")')))
rec("d22", ("find the call", find('(EventWithSubject "call")')))

# deletes
rec("d23", ("Cancel my 10 AM tomorrow", EX1), CONFIRM)
rec("d24", ("cancel the room1 meeting tomorrow",
            delete_chain('(EventAllOf (EventAtLocation "room1") (EventOnDateTime (Tomorrow) (Constraint[Event])))')), CONFIRM)
rec("d25", ("cancel my 10 AM tomorrow", EX1), DECLINE)
rec("d26", ("cancel yoga", delete_chain('(EventWithSubject "yoga")')), CONFIRM)
rec("d27", ("delete event 5", "(Yield (DeleteCommitEventWrapper (DeletePreflightEventWrapper 5)))"), CONFIRM)
rec("d28", ("cancel the call with Bob", delete_chain('(EventWithSubject "call with Bob")')), CONFIRM)
rec("d29", ("cancel planning on thursday",
            delete_chain('(EventAllOf (EventAtLocation "room1") (EventOnDateTime (NextDOW "Thursday") (Constraint[Event])))')), CONFIRM)
rec("d30", ("cancel the brunch at Jeffs", delete_chain('(EventAtLocation "Jeffs")')), DECLINE)

# updates
rec("d31", ("Change on Sunday at Jeffs from 10:00 to 10:30 AM to 10:00 am to 2:00 pm.", EX2), CONFIRM)
rec("d32", ("move yoga to the park", update_chain('(EventWithSubject "yoga")', '(EventAtLocation "park")')), CONFIRM)
rec("d33", ("extend planning to 1 pm", update_chain('(EventWithSubject "planning")', "(EventEndsAt (HourMinutePM 1 0))")), CONFIRM)
rec("d34", ("rename the lunch", update_chain('(EventWithSubject "lunch")', '(EventWithSubject "team lunch")')), CONFIRM)
rec("d35", ("move the dentist to 9:30", update_chain('(EventWithSubject "dentist")', "(EventOnDateTime (HourMinuteAM 9 30) (Constraint[Event]))")), CONFIRM)

# creates
rec("d36", ("book a gym class tomorrow 6 pm",
            create_chain('(Constraint[Event] :subject "gym class" :start (DateAtTimeWithDefaults (Tomorrow) (NumberPM 6)))')), CONFIRM)
rec("d37", ("demo on friday 9 to 10 in room2",
            create_chain('(Constraint[Event] :subject "demo" :start (DateAtTimeWithDefaults (NextDOW "Friday") (NumberAM 9)) :end (NumberAM 10) :location "room2")')), CONFIRM)
rec("d38", ("coffee chat tomorrow at 3",
            create_chain('(Constraint[Event] :subject "coffee chat" :start (DateAtTimeWithDefaults (Tomorrow) (NumberPM 3)))')), DECLINE)
rec("d39", ("review prep next wednesday 2 pm",
            create_chain('(Constraint[Event] :subject "review prep" :start (DateAtTimeWithDefaults (NextDOW "Wednesday") (NumberPM 2)))')), CONFIRM)
rec("d40", ("notes today 5 pm to 5:45",
            create_chain('(Constraint[Event] :subject "notes" :start (DateAtTimeWithDefaults (Today) (NumberPM 5)) :end (HourMinutePM 5 45))')), CONFIRM)

# date/time displays
rec("d41", ("tomorrow half past three", "(Yield (DateAtTimeWithDefaults (Tomorrow) (HourMinutePM 3 30)))"))
rec("d42", ("when is next friday", '(Yield (NextDOW "Friday"))'))
rec("d43", ("eleven in the morning", "(Yield (NumberAM 11))"))
rec("d44", ("today at 11:15", "(Yield (TimeAfterDateTime (DateAtTimeWithDefaults (Today) (NumberAM 9)) (HourMinuteAM 11 15)))"))
rec("d45", ("what day is it", "(Yield (Today))"))
rec("d46", ("and tomorrow", "(Yield (Tomorrow))"))

# mixed multi-turn
rec("d47", ("what's on tomorrow", find("(EventOnDateTime (Tomorrow) (Constraint[Event]))")),
           ("cancel the 10 am", EX1), CONFIRM)
rec("d48", ("add 1 to 2 plus 3", "(Yield (Add 1 (Add 2 3)))"),
           ("use 7 instead of 2", "(Yield (revise :old (Int? 2) :new (Int 7)))"),
           ("and 9 instead of 3", "(Yield (revise :old (Int? 3) :new (Int 9)))"))
rec("d49", ("book a sync tomorrow 8 to 8:30",
            create_chain('(Constraint[Event] :subject "sync" :start (DateAtTimeWithDefaults (Tomorrow) (NumberAM 8)) :end (HourMinuteAM 8 30))')),
           CONFIRM, ("find the sync", find('(EventWithSubject "sync")')))
rec("d50", ("cancel whatever is at the gym",
            '(Yield (DeleteCommitEventWrapper (DeletePreflightEventWrapper (refer (Event? :location "gym")))))'), CONFIRM)

records = [DialogueRecord(rid, tuple(TurnRecord(u, a, "prefix") for u, a in turns))
           for rid, turns in D]
assert len(records) == 50, len(records)

simplified, errors = simplify_dataset(records)
assert not errors, errors

make_store = lambda: EventStore.from_file("src/flowdialog/data/corpus_store.json")
rows = equivalence_harness(simplified, make_store, DEFAULT_NOW)
bad = [r for r in rows if not r.ok]
for r in bad:
    print("FAIL", r.dialogue_id, r.detail[:400])
assert not bad, f"{len(bad)} records fail equivalence"

dump_jsonl(records, "src/flowdialog/data/corpus.jsonl")
print("wrote 50 records, all equivalent")

# token accounting for the strict-quantile criterion
from flowdialog.corpus import length_stats, stats_table
orig, simp = length_stats(simplified)
print(stats_table(orig, simp))
