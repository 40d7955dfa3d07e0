"""HTTP JSON API over dialogue sessions (v1).

Endpoints::

    POST   /v1/sessions                  -> {"session_id": ...}
    POST   /v1/sessions/{id}/turns       {"text": ..., "syntax"?: "call"|"prefix"}
    GET    /v1/sessions/{id}/graph       -> snapshot (schema v1)
    GET    /v1/sessions/{id}/graph.dot   -> Graphviz text
    DELETE /v1/sessions/{id}

Errors are ``{"error": {"code", "message"}}``; 404 for unknown
sessions, 400 for malformed bodies, 409 when a session is already
processing a turn.  Sessions are independent; within one session turns
are serialized by a per-session lock.
"""

from __future__ import annotations

import datetime as dt
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from .calendar import DEFAULT_NOW, Clock, EventStore
from .engine import run_turn
from .functions import default_registry
from .graph import GraphContext, UnknownTurn, export_dot, snapshot


@dataclass
class SessionState:
    session_id: str
    ctx: GraphContext
    created: dt.datetime
    lock: threading.Lock = field(default_factory=threading.Lock)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def _outcome_payload(outcome) -> dict:
    data = {"kind": outcome.kind, "message": outcome.message}
    if outcome.kind == "pending":
        rec = outcome.exc
        data["pending"] = {
            "kind": rec.kind,
            "prompt": rec.prompt,
            "param": rec.param,
            "expected_type": rec.expected_type,
            "candidates": list(rec.candidates),
        }
    return data


def create_app(now: dt.datetime = DEFAULT_NOW, events_path: str | None = None,
               default_syntax: str = "call") -> FastAPI:
    app = FastAPI(title="dialogue graph service", version="1.0")
    registry = default_registry()
    sessions: dict[str, SessionState] = {}
    sessions_lock = threading.Lock()

    def new_context() -> GraphContext:
        store = EventStore.from_file(events_path) if events_path else EventStore()
        return GraphContext(registry=registry, store=store, clock=Clock(now))

    @app.exception_handler(RequestValidationError)
    async def bad_body(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", "malformed request body")

    def get_session(session_id: str) -> SessionState | None:
        with sessions_lock:
            return sessions.get(session_id)

    @app.post("/v1/sessions")
    def create_session():
        state = SessionState(uuid.uuid4().hex, new_context(), dt.datetime.utcnow())
        with sessions_lock:
            sessions[state.session_id] = state
        return {"session_id": state.session_id}

    @app.post("/v1/sessions/{session_id}/turns")
    async def post_turn(session_id: str, request: Request):
        state = get_session(session_id)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "bad_request", "body must be JSON")
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            return _error(400, "bad_request", 'body needs a "text" string')
        syntax = body.get("syntax", default_syntax)
        if syntax not in ("call", "prefix"):
            return _error(400, "bad_request", f"unknown syntax {syntax!r}")
        if not state.lock.acquire(blocking=False):
            return _error(409, "busy", "a turn is already being processed")
        try:
            outcome = run_turn(body["text"], state.ctx, syntax=syntax)
            payload = _outcome_payload(outcome)
            payload["graph"] = snapshot(state.ctx)
            return payload
        finally:
            state.lock.release()

    @app.get("/v1/sessions/{session_id}/graph")
    def get_graph(session_id: str):
        state = get_session(session_id)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        return snapshot(state.ctx)

    @app.get("/v1/sessions/{session_id}/graph.dot")
    def get_graph_dot(session_id: str, turn: int | None = None):
        state = get_session(session_id)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        try:
            return PlainTextResponse(export_dot(state.ctx, turn=turn))
        except UnknownTurn as err:
            return _error(404, "unknown_turn", str(err))

    @app.delete("/v1/sessions/{session_id}")
    def delete_session(session_id: str):
        with sessions_lock:
            state = sessions.pop(session_id, None)
        if state is None:
            return _error(404, "unknown_session", f"no session {session_id}")
        return {"deleted": session_id}

    return app
