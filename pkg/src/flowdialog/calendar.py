"""Calendar domain: events, the in-memory store, and the event functions.

Temporal constraint values are carried as :class:`PartialDateTime` so a
date-only constraint can match a whole day and a time-only change can
keep an event's date.  :func:`fill_defaults` concretizes a partial when
an actual timestamp is needed: missing date comes from the dialogue
clock, a missing time is midnight, and a bare hour without AM/PM uses
the office-hours reading (8-11 are morning, 1-7 are afternoon, 12 is
noon).

Side-effecting operations run in two phases: a preflight resolves the
target, validates, and asks for confirmation; only the commit touches
the store.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, replace

from .engine import (
    CONFIRMATION,
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
    resolved_input,
    self_result,
    set_result_value,
)
from .graph import ConstraintSpec, register_value_codec

DEFAULT_NOW = dt.datetime(2023, 1, 1, 9, 0)

WEEKDAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]


class EmptySpec(EvalError):
    def __init__(self):
        super().__init__("empty date/time specification")


class InvalidUpdate(EvalError):
    pass


class EventVanished(EvalError):
    pass


@dataclass(frozen=True)
class Clock:
    now: dt.datetime = DEFAULT_NOW


@dataclass(frozen=True)
class Event:
    id: int
    subject: str
    start: dt.datetime
    end: dt.datetime
    location: str | None = None

    def summary(self) -> str:
        span = f"{self.start:%Y-%m-%d %H:%M}-"
        span += f"{self.end:%H:%M}" if self.end.date() == self.start.date() else f"{self.end:%Y-%m-%d %H:%M}"
        text = f"#{self.id} '{self.subject}' {span}"
        if self.location:
            text += f" @ {self.location}"
        return text

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "subject": self.subject,
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "location": self.location,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Event":
        return cls(
            id=int(data["id"]),
            subject=data["subject"],
            start=dt.datetime.fromisoformat(data["start"]),
            end=dt.datetime.fromisoformat(data["end"]),
            location=data.get("location"),
        )


@dataclass(frozen=True)
class PartialDateTime:
    date: dt.date | None = None
    hour: int | None = None
    minute: int | None = None
    meridiem: str | None = None  # "AM" | "PM" | None

    def is_empty(self) -> bool:
        return self.date is None and self.hour is None

    def has_time(self) -> bool:
        return self.hour is not None

    def merged(self, other: "PartialDateTime") -> "PartialDateTime":
        if self.date is not None and other.date is not None and self.date != other.date:
            raise EvalError("conflicting dates in time specification")
        if self.hour is not None and other.hour is not None:
            raise EvalError("conflicting times in time specification")
        return PartialDateTime(
            date=self.date if self.date is not None else other.date,
            hour=self.hour if self.hour is not None else other.hour,
            minute=self.minute if self.minute is not None else other.minute,
            meridiem=self.meridiem if self.meridiem is not None else other.meridiem,
        )

    def resolved_time(self) -> dt.time:
        if self.hour is None:
            return dt.time(0, 0)
        return dt.time(resolve_hour(self.hour, self.meridiem), self.minute or 0)

    def onto(self, base: dt.datetime) -> dt.datetime:
        """Merge onto an existing timestamp, keeping absent components."""
        date = self.date if self.date is not None else base.date()
        time = self.resolved_time() if self.hour is not None else base.time()
        return dt.datetime.combine(date, time)

    def render(self) -> str:
        parts = []
        if self.date is not None:
            parts.append(self.date.isoformat())
        if self.hour is not None:
            parts.append(f"{self.hour:02d}:{self.minute or 0:02d}{self.meridiem or ''}")
        return " ".join(parts) or "(empty)"

    def to_json(self) -> dict:
        return {
            "date": self.date.isoformat() if self.date else None,
            "hour": self.hour,
            "minute": self.minute,
            "meridiem": self.meridiem,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PartialDateTime":
        return cls(
            date=dt.date.fromisoformat(data["date"]) if data["date"] else None,
            hour=data["hour"],
            minute=data["minute"],
            meridiem=data["meridiem"],
        )


register_value_codec("Event", Event.from_json)
register_value_codec("PartialDateTime", PartialDateTime.from_json)


def resolve_hour(hour: int, meridiem: str | None) -> int:
    if meridiem == "AM":
        return 0 if hour == 12 else hour
    if meridiem == "PM":
        return 12 if hour == 12 else hour + 12
    # no meridiem given: office-hours heuristic for 1-12, else literal
    if 8 <= hour <= 11:
        return hour
    if 1 <= hour <= 7:
        return hour + 12
    if hour == 12:
        return 12
    if 0 <= hour <= 23:
        return hour
    raise EvalError(f"hour out of range: {hour}")


def to_partial(value) -> PartialDateTime:
    if isinstance(value, PartialDateTime):
        return value
    if isinstance(value, dt.datetime):
        return PartialDateTime(value.date(), value.hour, value.minute, None)
    if isinstance(value, dt.date):
        return PartialDateTime(date=value)
    if isinstance(value, dt.time):
        return PartialDateTime(hour=value.hour, minute=value.minute)
    if isinstance(value, int) and not isinstance(value, bool):
        if not 0 <= value <= 23:
            raise EvalError(f"hour out of range: {value}")
        return PartialDateTime(hour=value)
    raise EvalError(f"not a date/time value: {value!r}")


def fill_defaults(partial, clock: Clock) -> dt.datetime:
    """Concretize a partial timestamp; idempotent on full timestamps."""
    if isinstance(partial, dt.datetime):
        return partial
    partial = to_partial(partial)
    if partial.is_empty():
        raise EmptySpec()
    date = partial.date if partial.date is not None else clock.now.date()
    return dt.datetime.combine(date, partial.resolved_time())


class EventStore:
    """In-memory stand-in for an external calendar service."""

    def __init__(self, events: list[Event] | None = None):
        self.events: dict[int, Event] = {}
        self.next_id = 1
        for ev in events or []:
            self.events[ev.id] = ev
            self.next_id = max(self.next_id, ev.id + 1)

    def __len__(self) -> int:
        return len(self.events)

    def get(self, event_id: int) -> Event | None:
        return self.events.get(event_id)

    def add(self, subject: str, start: dt.datetime, end: dt.datetime,
            location: str | None = None) -> Event:
        ev = Event(self.next_id, subject, start, end, location)
        self.events[ev.id] = ev
        self.next_id += 1
        return ev

    def remove(self, event_id: int) -> Event:
        if event_id not in self.events:
            raise EventVanished(f"event #{event_id} is no longer in the store")
        return self.events.pop(event_id)

    def replace(self, event: Event) -> None:
        if event.id not in self.events:
            raise EventVanished(f"event #{event.id} is no longer in the store")
        self.events[event.id] = event

    def all(self) -> list[Event]:
        return [self.events[k] for k in sorted(self.events)]

    def state(self) -> tuple:
        return tuple(self.events[k] for k in sorted(self.events))

    def search(self, spec: ConstraintSpec, clock: Clock) -> list[Event]:
        out = [ev for ev in self.all() if event_matches(ev, spec, clock)]
        return out

    @classmethod
    def from_file(cls, path) -> "EventStore":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls([Event.from_json(item) for item in data])


def event_matches(ev: Event, spec: ConstraintSpec, clock: Clock) -> bool:
    if spec.effective_type != "Event":
        return False
    for name, want in spec.fields:
        if name == "subject":
            if not isinstance(want, str) or want.lower() not in ev.subject.lower():
                return False
        elif name == "location":
            if ev.location is None or not isinstance(want, str) \
                    or ev.location.lower() != want.lower():
                return False
        elif name == "id":
            if ev.id != want:
                return False
        elif name in ("start", "end"):
            got = ev.start if name == "start" else ev.end
            if not _temporal_matches(got, want, clock):
                return False
        else:
            return False
    return True


def _temporal_matches(got: dt.datetime, want, clock: Clock) -> bool:
    if isinstance(want, dt.datetime):
        return got == want
    if isinstance(want, dt.date):
        return got.date() == want
    partial = to_partial(want)
    if partial.is_empty():
        return True
    if not partial.has_time():
        return got.date() == partial.date
    return got == fill_defaults(partial, clock)


# ---------------------------------------------------------------------------
# Registered functions

def _spec_value(ctx: GraphContext, node: Node, name: str) -> ConstraintSpec:
    v = input_value(ctx, node, name)
    if not isinstance(v, ConstraintSpec):
        raise EvalError(f"{node.func}.{name} expects an event constraint, got {v!r}")
    return v


def _temporal_input(ctx: GraphContext, node: Node, name: str) -> PartialDateTime:
    v = input_value(ctx, node, name)
    if isinstance(v, ConstraintSpec):
        raise EvalError(f"{node.func} expects a date/time, got a constraint")
    return to_partial(v)


def _constraint_from_partial(field: str, partial: PartialDateTime) -> ConstraintSpec:
    return ConstraintSpec("Event", None, ((field, partial),))


def _exec_time_anchor(field: str):
    def body(node: Node, ctx: GraphContext) -> None:
        partial = _temporal_input(ctx, node, "pos1")
        if "pos2" in node.inputs:
            partial = partial.merged(_temporal_input(ctx, node, "pos2"))
        if field == "start" and "constraint" in node.inputs:
            extra = _spec_value(ctx, node, "constraint")
            spec = _constraint_from_partial(field, partial).merged_with(extra)
        else:
            spec = _constraint_from_partial(field, partial)
        set_result_value(ctx, node, "EventConstraint", spec)

    return body


def _exec_and(node: Node, ctx: GraphContext) -> None:
    spec: ConstraintSpec | None = None
    for name in ("pos1", "pos2", "pos3", "pos4"):
        if name not in node.inputs:
            continue
        part = _spec_value(ctx, node, name)
        spec = part if spec is None else spec.merged_with(part)
    assert spec is not None
    set_result_value(ctx, node, "EventConstraint", spec)


def _exec_field_constraint(field: str):
    def body(node: Node, ctx: GraphContext) -> None:
        v = input_value(ctx, node, "pos1")
        if not isinstance(v, str):
            raise EvalError(f"{node.func} expects a string, got {v!r}")
        set_result_value(ctx, node, "EventConstraint", ConstraintSpec("Event", None, ((field, v),)))

    return body


def _exec_during_range(node: Node, ctx: GraphContext) -> None:
    start = _temporal_input(ctx, node, "pos1")
    end = _temporal_input(ctx, node, "pos2")
    spec = ConstraintSpec("Event", None, (("start", start), ("end", end)))
    set_result_value(ctx, node, "EventConstraint", spec)


def _exec_event_spec(node: Node, ctx: GraphContext) -> None:
    fields = []
    for name in ("subject", "start", "end", "location", "id"):
        if name not in node.inputs:
            continue
        v = input_value(ctx, node, name)
        if name in ("start", "end"):
            v = to_partial(v)
        fields.append((name, v))
    set_result_value(ctx, node, "EventConstraint", ConstraintSpec("Event", None, tuple(fields)))


def _exec_find(node: Node, ctx: GraphContext) -> None:
    spec = _spec_value(ctx, node, "pos1")
    found = ctx.store.search(spec, ctx.clock) if ctx.store else []
    set_result_value(ctx, node, "EventSet", tuple(found))


def _exec_date_at_time(node: Node, ctx: GraphContext) -> None:
    merged = _temporal_input(ctx, node, "pos1").merged(_temporal_input(ctx, node, "pos2"))
    set_result_value(ctx, node, "DateTime", fill_defaults(merged, ctx.clock))


def _exec_time_after(node: Node, ctx: GraphContext) -> None:
    anchor = input_value(ctx, node, "pos1")
    if not isinstance(anchor, dt.datetime):
        raise EvalError(f"{node.func} expects a full timestamp anchor, got {anchor!r}")
    t = input_value(ctx, node, "pos2")
    if not isinstance(t, dt.time):
        raise EvalError(f"{node.func} expects a time of day, got {t!r}")
    set_result_value(ctx, node, "DateTime", dt.datetime.combine(anchor.date(), t))


def _exec_tomorrow(node: Node, ctx: GraphContext) -> None:
    set_result_value(ctx, node, "Date", ctx.clock.now.date() + dt.timedelta(days=1))


def _exec_today(node: Node, ctx: GraphContext) -> None:
    set_result_value(ctx, node, "Date", ctx.clock.now.date())


def _exec_next_dow(node: Node, ctx: GraphContext) -> None:
    name = input_value(ctx, node, "pos1")
    if not isinstance(name, str) or name.lower() not in WEEKDAYS:
        raise EvalError(f"unknown weekday {name!r}")
    target = WEEKDAYS.index(name.lower())
    today = ctx.clock.now.date()
    ahead = (target - today.weekday() - 1) % 7 + 1
    set_result_value(ctx, node, "Date", today + dt.timedelta(days=ahead))


def _exec_clock_time(meridiem: str, with_minutes: bool):
    def body(node: Node, ctx: GraphContext) -> None:
        h = input_value(ctx, node, "pos1")
        if not isinstance(h, int) or isinstance(h, bool) or not 1 <= h <= 12:
            raise EvalError(f"hour must be 1-12, got {h!r}")
        m = 0
        if with_minutes:
            m = input_value(ctx, node, "pos2")
            if not isinstance(m, int) or isinstance(m, bool) or not 0 <= m <= 59:
                raise EvalError(f"minute must be 0-59, got {m!r}")
        set_result_value(ctx, node, "Time", dt.time(resolve_hour(h, meridiem), m))

    return body


def _exec_accessor_id(node: Node, ctx: GraphContext) -> None:
    ev = input_value(ctx, node, "pos1")
    if not isinstance(ev, Event):
        raise EvalError(f":id expects an event, got {ev!r}")
    set_result_value(ctx, node, "Int", ev.id)


def _exec_accessor_results(node: Node, ctx: GraphContext) -> None:
    point_result(ctx, node, node.inputs["pos1"])


def _exec_accessor_start(field: str):
    def body(node: Node, ctx: GraphContext) -> None:
        ev = input_value(ctx, node, "pos1")
        if not isinstance(ev, Event):
            raise EvalError(f":{field} expects an event, got {ev!r}")
        set_result_value(ctx, node, "DateTime", getattr(ev, field))

    return body


def _exec_accessor_date(node: Node, ctx: GraphContext) -> None:
    v = input_value(ctx, node, "pos1")
    if isinstance(v, dt.datetime):
        set_result_value(ctx, node, "Date", v.date())
    elif isinstance(v, dt.date):
        set_result_value(ctx, node, "Date", v)
    else:
        raise EvalError(f":date expects a timestamp, got {v!r}")


def _exec_event_by_id(node: Node, ctx: GraphContext) -> None:
    eid = input_value(ctx, node, "pos1")
    ev = ctx.store.get(eid) if ctx.store else None
    if ev is None:
        raise EvalError(f"no event with id {eid!r}")
    set_result_value(ctx, node, "Event", ev)


_EVENT_COERCIONS = {
    "EventSet": "singleton",
    "EventConstraint": "FindEvents",
    "Int": "EventById",
}


def _exec_delete_preflight(node: Node, ctx: GraphContext) -> None:
    ev = input_value(ctx, node, "pos1")
    if not isinstance(ev, Event):
        raise EvalError(f"delete expects an event, got {ev!r}")
    if node.id not in ctx.confirmed:
        raise_pending(CONFIRMATION, node, f"Delete {ev.summary()}? (Confirm()/Decline())")
    point_result(ctx, node, node.inputs["pos1"])


def _require_confirmed_preflight(node: Node, ctx: GraphContext, kind: str) -> Node:
    src = ctx.node(node.inputs["pos1"])
    if kind not in src.func or src.id not in ctx.confirmed:
        raise EvalError(f"{node.func} requires a confirmed {kind} step")
    return src


def _exec_delete_commit(node: Node, ctx: GraphContext) -> None:
    _require_confirmed_preflight(node, ctx, "Preflight")
    ev = input_value(ctx, node, "pos1")
    ctx.store.remove(ev.id)
    set_result_value(ctx, node, "Str", f"deleted {ev.summary()}")


def _updated_event(old: Event, changes: ConstraintSpec) -> Event:
    if not changes.fields:
        raise InvalidUpdate("no changes requested")
    new = old
    for name, v in changes.fields:
        if name == "subject":
            new = replace(new, subject=v)
        elif name == "location":
            new = replace(new, location=v)
        elif name == "start":
            new = replace(new, start=to_partial(v).onto(old.start))
        elif name == "end":
            new = replace(new, end=to_partial(v).onto(old.end))
        else:
            raise InvalidUpdate(f"cannot update field {name!r}")
    if new.start >= new.end:
        raise InvalidUpdate(f"start {new.start} is not before end {new.end}")
    return new


def _exec_update_preflight(node: Node, ctx: GraphContext) -> None:
    ev = input_value(ctx, node, "pos1")
    if not isinstance(ev, Event):
        raise EvalError(f"update expects an event, got {ev!r}")
    changes = _spec_value(ctx, node, "pos2")
    prospective = _updated_event(ev, changes)
    if node.id not in ctx.confirmed:
        raise_pending(
            CONFIRMATION, node,
            f"Update {ev.summary()} -> {prospective.summary()}? (Confirm()/Decline())",
        )
    point_result(ctx, node, node.inputs["pos1"])


def _exec_update_commit(node: Node, ctx: GraphContext) -> None:
    pre = _require_confirmed_preflight(node, ctx, "Preflight")
    old = input_value(ctx, node, "pos1")
    changes_node = resolved_input(ctx, pre, "pos2")
    new = _updated_event(old, changes_node.value)
    ctx.store.replace(new)
    set_result_value(ctx, node, "Event", new)


def _prospective_create(spec: ConstraintSpec, ctx: GraphContext) -> Event:
    fields = spec.field_map()
    if "subject" not in fields and "start" not in fields:
        raise InvalidUpdate("creating an event needs a subject or a start")
    start = fill_defaults(to_partial(fields["start"]), ctx.clock) if "start" in fields \
        else dt.datetime.combine(ctx.clock.now.date(), dt.time(0, 0))
    if "end" in fields:
        end = to_partial(fields["end"]).onto(start)
    else:
        end = start + dt.timedelta(minutes=30)
    if start >= end:
        raise InvalidUpdate(f"start {start} is not before end {end}")
    return Event(0, fields.get("subject", "(untitled)"), start, end, fields.get("location"))


def _exec_create_preflight(node: Node, ctx: GraphContext) -> None:
    spec = _spec_value(ctx, node, "pos1")
    prospective = _prospective_create(spec, ctx)
    if node.id not in ctx.confirmed:
        raise_pending(
            CONFIRMATION, node,
            f"Create {prospective.summary()}? (Confirm()/Decline())",
        )
    self_result(ctx, node, prospective)


def _exec_create_commit(node: Node, ctx: GraphContext) -> None:
    pre = _require_confirmed_preflight(node, ctx, "Preflight")
    draft: Event = pre.value
    created = ctx.store.add(draft.subject, draft.start, draft.end, draft.location)
    set_result_value(ctx, node, "Event", created)


def register_calendar(reg: Registry) -> None:
    """Event-domain functions, both annotation vocabularies."""
    pos1 = [Param("pos1")]

    def add(name, params, out, exec_fn, check=None, coercions=None):
        reg.register(FunctionDef(name, params, out, exec_fn, check, coercions or {}))

    # time builders
    add("tomorrow", [], "Date", _exec_tomorrow)
    add("today", [], "Date", _exec_today)
    add("nextDOW", [Param("pos1", "Str")], "Date", _exec_next_dow)
    add("Tomorrow", [], "Date", _exec_tomorrow)
    add("Today", [], "Date", _exec_today)
    add("NextDOW", [Param("pos1", "Str")], "Date", _exec_next_dow)
    add("NumberAM", [Param("pos1", "Int")], "Time", _exec_clock_time("AM", False))
    add("NumberPM", [Param("pos1", "Int")], "Time", _exec_clock_time("PM", False))
    add("HourMinuteAM", [Param("pos1", "Int"), Param("pos2", "Int")], "Time",
        _exec_clock_time("AM", True))
    add("HourMinutePM", [Param("pos1", "Int"), Param("pos2", "Int")], "Time",
        _exec_clock_time("PM", True))

    # constraint builders (compact style)
    two_optional = [Param("pos1"), Param("pos2", required=False)]
    add("starts_at", list(two_optional), "EventConstraint", _exec_time_anchor("start"))
    add("ends_at", list(two_optional), "EventConstraint", _exec_time_anchor("end"))
    add("at_location", [Param("pos1", "Str")], "EventConstraint", _exec_field_constraint("location"))
    add("has_subject", [Param("pos1", "Str")], "EventConstraint", _exec_field_constraint("subject"))
    add("AND", [Param("pos1", "EventConstraint"),
                Param("pos2", "EventConstraint", required=False),
                Param("pos3", "EventConstraint", required=False),
                Param("pos4", "EventConstraint", required=False)],
        "EventConstraint", _exec_and)
    add("Constraint[Event]",
        [Param("subject", "Str", required=False), Param("start", required=False),
         Param("end", required=False), Param("location", "Str", required=False),
         Param("id", "Int", required=False)],
        "EventConstraint", _exec_event_spec)

    # constraint builders (verbose original style)
    add("EventOnDateTime",
        [Param("pos1"), Param("constraint", "EventConstraint", required=False)],
        "EventConstraint", _exec_time_anchor("start"))
    add("EventEndsAt", pos1, "EventConstraint", _exec_time_anchor("end"))
    add("EventAtLocation", [Param("pos1", "Str")], "EventConstraint",
        _exec_field_constraint("location"))
    add("EventWithSubject", [Param("pos1", "Str")], "EventConstraint",
        _exec_field_constraint("subject"))
    add("EventAllOf", [Param("pos1", "EventConstraint"),
                       Param("pos2", "EventConstraint"),
                       Param("pos3", "EventConstraint", required=False)],
        "EventConstraint", _exec_and)
    add("EventDuringRange", [Param("pos1"), Param("pos2")], "EventConstraint",
        _exec_during_range)
    add("DateAtTimeWithDefaults", [Param("pos1"), Param("pos2")], "DateTime",
        _exec_date_at_time)
    add("DateTime", [Param("pos1"), Param("pos2")], "DateTime", _exec_date_at_time)
    add("TimeAfterDateTime", [Param("pos1", "DateTime"), Param("pos2", "Time")],
        "DateTime", _exec_time_after)

    # accessors
    add(":id", [Param("pos1", "Event")], "Int", _exec_accessor_id,
        coercions=dict(_EVENT_COERCIONS))
    add(":results", [Param("pos1", "EventSet")], "EventSet", _exec_accessor_results)
    add(":start", [Param("pos1", "Event")], "DateTime", _exec_accessor_start("start"))
    add(":end", [Param("pos1", "Event")], "DateTime", _exec_accessor_start("end"))
    add(":date", [Param("pos1")], "Date", _exec_accessor_date)

    # lookups
    add("FindEvents", [Param("pos1", "EventConstraint")], "EventSet", _exec_find)
    add("FindEventWrapperWithDefaults", [Param("pos1", "EventConstraint")], "EventSet",
        _exec_find)
    add("EventById", [Param("pos1", "Int")], "Event", _exec_event_by_id)

    # two-phase side effects
    add("DeletePreflightEventWrapper", [Param("pos1", "Event")], "Event",
        _exec_delete_preflight, coercions=dict(_EVENT_COERCIONS))
    add("DeleteCommitEventWrapper", [Param("pos1", "Event")], "Str",
        _exec_delete_commit)
    add("UpdatePreflightEventWrapper",
        [Param("pos1", "Event"), Param("pos2", "EventConstraint")], "Event",
        _exec_update_preflight, coercions=dict(_EVENT_COERCIONS))
    add("UpdateCommitEventWrapper", [Param("pos1", "Event")], "Event",
        _exec_update_commit)
    add("CreatePreflightEventWrapper", [Param("pos1", "EventConstraint")],
        "EventConstraint", _exec_create_preflight)
    add("CreateCommitEventWrapper", [Param("pos1", "EventConstraint")], "Event",
        _exec_create_commit)
