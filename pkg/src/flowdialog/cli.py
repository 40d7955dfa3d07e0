"""Command-line interface.

Subcommands: ``run`` a script of turns, ``repl`` interactively,
``simplify``/``stats`` over JSONL datasets, and ``serve`` the HTTP API.
Exit codes: 0 success, 1 user error, 2 internal error.

All clocks are injected (``--now``, default 2023-01-01T09:00:00), so
transcripts are reproducible.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .calendar import DEFAULT_NOW, Clock, EventStore
from .engine import run_turn
from .expr import ExprError
from .functions import default_registry
from .graph import GraphContext, export_dot
from .rewrite import RewriteStep


def _make_context(args) -> GraphContext:
    store = EventStore.from_file(args.events) if args.events else EventStore()
    now = dt.datetime.fromisoformat(args.now) if args.now else DEFAULT_NOW
    return GraphContext(registry=default_registry(), store=store, clock=Clock(now))


def _add_context_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--now", help="reference time, ISO-8601 (default 2023-01-01T09:00:00)")
    p.add_argument("--events", help="JSON file of events to preload")
    p.add_argument("--syntax", choices=["call", "prefix"], default="call")


def cmd_run(args) -> int:
    try:
        lines = Path(args.script).read_text(encoding="utf-8").splitlines()
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    ctx = _make_context(args)
    failed = False
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        outcome = run_turn(line, ctx, syntax=args.syntax)
        print(outcome.message)
        failed = failed or outcome.kind == "failed"
    if args.export_dot:
        out = Path(args.export_dot)
        out.mkdir(parents=True, exist_ok=True)
        for turn in ctx.turns:
            (out / f"turn{turn.index:03d}.dot").write_text(
                export_dot(ctx, turn=turn.index) if turn.root is not None
                else "digraph dialogue {\n}\n",
                encoding="utf-8",
            )
    return 1 if failed else 0


def cmd_repl(args) -> int:
    ctx = _make_context(args)
    print("type an expression; :graph shows the last turn, :quit exits")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            return 0
        if not line:
            continue
        if line == ":quit":
            return 0
        if line == ":graph":
            if ctx.turns:
                print(export_dot(ctx, turn=ctx.turns[-1].index), end="")
            else:
                print("no turns yet")
            continue
        outcome = run_turn(line, ctx, syntax=args.syntax)
        print(outcome.message)


def cmd_simplify(args) -> int:
    res = corpus_mod.load_jsonl(args.input)
    for e in res.errors:
        print(f"skipped: {e}", file=sys.stderr)
    if args.explain:
        for rec in res.records:
            for t in rec.turns:
                trace: list[RewriteStep] = []
                simplified = corpus_mod.simplify_turn(t, trace)
                print(f"# {rec.dialogue_id}: {t.annotation}")
                for step in trace:
                    where = "/".join(str(p[1]) if len(p) > 1 else p[0] for p in step.path) or "root"
                    print(f"  {step.rule} @ {where}")
                print(f"  => {simplified.annotation_simplified}")
    records, errors = corpus_mod.simplify_dataset(res.records)
    for e in errors:
        print(f"rewrite error: {e}", file=sys.stderr)
    corpus_mod.dump_jsonl(records, args.output)
    if (res.errors or errors) and not args.lenient:
        return 1
    return 0


def cmd_stats(args) -> int:
    res = corpus_mod.load_jsonl(args.input)
    for e in res.errors:
        print(f"skipped: {e}", file=sys.stderr)
    records, errors = corpus_mod.simplify_dataset(res.records)
    for e in errors:
        print(f"rewrite error: {e}", file=sys.stderr)
    try:
        original, simplified = corpus_mod.length_stats(records)
    except corpus_mod.EmptyCorpus as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    if args.format == "json":
        print(corpus_mod.stats_json(original, simplified))
    else:
        print(corpus_mod.stats_table(original, simplified))
    if (res.errors or errors) and not args.lenient:
        return 1
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    now = dt.datetime.fromisoformat(args.now) if args.now else DEFAULT_NOW
    app = create_app(now=now, events_path=args.events)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowdialog")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a script, one turn per line")
    p.add_argument("script")
    _add_context_flags(p)
    p.add_argument("--export-dot", metavar="DIR", help="write one DOT file per turn")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("repl", help="interactive dialogue")
    _add_context_flags(p)
    p.set_defaults(fn=cmd_repl)

    p = sub.add_parser("simplify", help="simplify a JSONL dataset")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--lenient", action="store_true", help="exit 0 despite per-record errors")
    p.add_argument("--explain", action="store_true", help="print each applied rule")
    p.set_defaults(fn=cmd_simplify)

    p = sub.add_parser("stats", help="token-length quantiles, original vs simplified")
    p.add_argument("input")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("serve", help="HTTP JSON API for dialogue sessions")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--now")
    p.add_argument("--events")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, ExprError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # unexpected: report and use the internal code
        print(f"internal error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
