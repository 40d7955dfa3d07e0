"""Tree rewriting between the two annotation styles.

A rule is a pattern and a template over surface trees.  Patterns are
written in call-like text with three extras: ``_`` matches any subtree,
``?name`` captures one (repeating a capture requires equal subtrees),
and ``?name:Int`` only captures a literal of that kind.  An empty
constraint pattern such as ``Event?()`` matches only an empty
constraint.  Named arguments in patterns match positionally-identical
named lists.

Rewriting is a bottom-up sweep: children first, then the rules in
manifest order at each node, first match wins, and the node is retried
until no rule fires.  Sweeps repeat until a fixpoint, capped at 100.

The simplify rule set turns verbose annotations into compact ones
(drop the Yield wrapper, fuse two-phase pairs, drop inferable lookup
chains and empty constraint arguments, rename constraint builders,
remove self-referential date anchors, inline single-use assignments).
The expand set restores an executable form (re-add Yield, split the
event operations back into preflight/commit pairs); type-directed
coercions are left to graph building.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .expr import (
    AssignSeq,
    Call,
    ConstraintCall,
    ExprSyntaxError,
    Literal,
    SurfaceExpr,
    VarRef,
    lex,
    _Cursor,
    _literal_from_token,
    _BOOL_WORDS,
)


class CycleError(Exception):
    def __init__(self, last_rule: str):
        self.last_rule = last_rule
        super().__init__(f"rewriting did not reach a fixpoint (last rule: {last_rule})")


# ---------------------------------------------------------------------------
# Patterns

@dataclass(frozen=True)
class Pattern:
    pass


@dataclass(frozen=True)
class PWild(Pattern):
    pass


@dataclass(frozen=True)
class PCapture(Pattern):
    name: str
    kind: str | None = None


@dataclass(frozen=True)
class PLit(Pattern):
    lit: Literal


@dataclass(frozen=True)
class PVar(Pattern):
    name: str


@dataclass(frozen=True)
class PCall(Pattern):
    func: str
    args: tuple[Pattern, ...] = ()
    named: tuple[tuple[str, Pattern], ...] = ()


@dataclass(frozen=True)
class PConstraint(Pattern):
    type_name: str
    type_param: str | None = None
    fields: tuple[tuple[str, Pattern], ...] = ()


def parse_pattern(text: str) -> Pattern:
    cur = _Cursor(lex(text))
    pat = _parse_pat(cur)
    t = cur.peek()
    if t.kind != "eof":
        raise ExprSyntaxError(t.pos, "end of pattern", t.text)
    return pat


def _parse_pat(cur: _Cursor) -> Pattern:
    t = cur.peek()
    if t.kind in ("int", "float", "str"):
        return PLit(_literal_from_token(cur.next()))
    if cur.at_punct("?"):
        cur.next()
        name = cur.expect("name").text
        kind = None
        if cur.at_punct(":"):
            cur.next()
            kind = cur.expect("name").text
        return PCapture(name, kind)
    if cur.at_punct(":"):
        cur.next()
        name = ":" + cur.expect("name").text
        cur.expect("punct", "(")
        args, named = _parse_pat_args(cur)
        return PCall(name, args, named)
    if t.kind != "name":
        raise ExprSyntaxError(t.pos, "pattern", t.text or t.kind)
    name = cur.next().text
    if name == "_":
        return PWild()
    if name in _BOOL_WORDS:
        return PLit(Literal("Bool", _BOOL_WORDS[name]))
    type_param = None
    is_constraint = False
    if cur.at_punct("["):
        cur.next()
        type_param = cur.expect("name").text
        cur.expect("punct", "]")
        is_constraint = True
    if cur.at_punct("?"):
        cur.next()
        is_constraint = True
    if not cur.at_punct("("):
        if is_constraint:
            raise ExprSyntaxError(cur.peek().pos, "(")
        return PVar(name)
    cur.next()
    if is_constraint:
        fields = _parse_pat_fields(cur)
        return PConstraint(name, type_param, fields)
    args, named = _parse_pat_args(cur)
    return PCall(name, args, named)


def _parse_pat_args(cur: _Cursor):
    args: list[Pattern] = []
    named: list[tuple[str, Pattern]] = []
    if cur.at_punct(")"):
        cur.next()
        return tuple(args), tuple(named)
    while True:
        t = cur.peek()
        if t.kind == "name" and cur.peek(1).kind == "punct" and cur.peek(1).text == "=":
            key = cur.next().text
            cur.next()
            named.append((key, _parse_pat(cur)))
        else:
            args.append(_parse_pat(cur))
        if cur.at_punct(","):
            cur.next()
            continue
        cur.expect("punct", ")")
        return tuple(args), tuple(named)


def _parse_pat_fields(cur: _Cursor):
    fields: list[tuple[str, Pattern]] = []
    if cur.at_punct(")"):
        cur.next()
        return tuple(fields)
    positional: Pattern | None = None
    while True:
        t = cur.peek()
        if t.kind == "name" and cur.peek(1).kind == "punct" and cur.peek(1).text == "=":
            key = cur.next().text
            cur.next()
            fields.append((key, _parse_pat(cur)))
        else:
            if positional is not None or fields:
                raise ExprSyntaxError(t.pos, "named field", t.text)
            positional = _parse_pat(cur)
        if cur.at_punct(","):
            cur.next()
            continue
        cur.expect("punct", ")")
        break
    if positional is not None:
        fields.insert(0, ("value", positional))
    return tuple(fields)


def match_pattern(pat: Pattern, expr: SurfaceExpr, binding: dict[str, SurfaceExpr]) -> bool:
    if isinstance(pat, PWild):
        return True
    if isinstance(pat, PCapture):
        if pat.kind is not None and not (isinstance(expr, Literal) and expr.kind == pat.kind):
            return False
        if pat.name in binding:
            return binding[pat.name] == expr
        binding[pat.name] = expr
        return True
    if isinstance(pat, PLit):
        return expr == pat.lit
    if isinstance(pat, PVar):
        return isinstance(expr, VarRef) and expr.name == pat.name
    if isinstance(pat, PCall):
        if not isinstance(expr, Call) or expr.func != pat.func:
            return False
        if len(expr.args) != len(pat.args) or len(expr.named) != len(pat.named):
            return False
        for p, e in zip(pat.args, expr.args):
            if not match_pattern(p, e, binding):
                return False
        for (pk, pv), (ek, ev) in zip(pat.named, expr.named):
            if pk != ek or not match_pattern(pv, ev, binding):
                return False
        return True
    if isinstance(pat, PConstraint):
        if not isinstance(expr, ConstraintCall):
            return False
        if expr.type_name != pat.type_name or expr.type_param != pat.type_param:
            return False
        if len(expr.fields) != len(pat.fields):
            return False
        for (pk, pv), (ek, ev) in zip(pat.fields, expr.fields):
            if pk != ek or not match_pattern(pv, ev, binding):
                return False
        return True
    raise TypeError(f"bad pattern {pat!r}")


def instantiate(pat: Pattern, binding: dict[str, SurfaceExpr]) -> SurfaceExpr:
    if isinstance(pat, PCapture):
        return binding[pat.name]
    if isinstance(pat, PLit):
        return pat.lit
    if isinstance(pat, PVar):
        return VarRef(pat.name)
    if isinstance(pat, PCall):
        return Call(
            pat.func,
            tuple(instantiate(p, binding) for p in pat.args),
            tuple((k, instantiate(p, binding)) for k, p in pat.named),
        )
    if isinstance(pat, PConstraint):
        return ConstraintCall(
            pat.type_name,
            pat.type_param,
            tuple((k, instantiate(p, binding)) for k, p in pat.fields),
        )
    raise TypeError(f"cannot instantiate {pat!r}")


# ---------------------------------------------------------------------------
# Rules

@dataclass
class RewriteRule:
    name: str
    pattern: Pattern | None = None
    template: Pattern | None = None
    custom: Callable[[SurfaceExpr, bool], SurfaceExpr | None] | None = None
    root_only: bool = False
    note: str = ""

    def apply(self, expr: SurfaceExpr, is_root: bool) -> SurfaceExpr | None:
        if self.root_only and not is_root:
            return None
        if self.custom is not None:
            return self.custom(expr, is_root)
        binding: dict[str, SurfaceExpr] = {}
        if match_pattern(self.pattern, expr, binding):
            return instantiate(self.template, binding)
        return None


def rule(name: str, pattern: str, template: str, note: str = "") -> RewriteRule:
    return RewriteRule(name, parse_pattern(pattern), parse_pattern(template), note=note)


@dataclass(frozen=True)
class RewriteStep:
    rule: str
    path: tuple
    before: SurfaceExpr
    after: SurfaceExpr


def apply_rules(expr: SurfaceExpr, rules: list[RewriteRule],
                trace: list[RewriteStep] | None = None,
                max_passes: int = 100) -> SurfaceExpr:
    """Rewrite to a fixpoint; raises CycleError past the pass cap."""
    last_rule = ""
    for _ in range(max_passes):
        new_expr, changed, last_rule = _sweep(expr, rules, trace, last_rule)
        if not changed:
            return new_expr
        expr = new_expr
    raise CycleError(last_rule)


def _sweep(expr: SurfaceExpr, rules, trace, last_rule, path=(), is_root=True):
    changed = False

    if isinstance(expr, AssignSeq):
        new_bindings = []
        for name, sub in expr.bindings:
            new_sub, ch, last_rule = _sweep(sub, rules, trace, last_rule,
                                            path + (("binding", name),), False)
            changed = changed or ch
            new_bindings.append((name, new_sub))
        body, ch, last_rule = _sweep(expr.body, rules, trace, last_rule,
                                     path + (("body",),), False)
        changed = changed or ch
        expr = AssignSeq(tuple(new_bindings), body)
    elif isinstance(expr, Call):
        new_args = []
        for i, sub in enumerate(expr.args):
            new_sub, ch, last_rule = _sweep(sub, rules, trace, last_rule,
                                            path + (("arg", i),), False)
            changed = changed or ch
            new_args.append(new_sub)
        new_named = []
        for key, sub in expr.named:
            new_sub, ch, last_rule = _sweep(sub, rules, trace, last_rule,
                                            path + (("named", key),), False)
            changed = changed or ch
            new_named.append((key, new_sub))
        expr = Call(expr.func, tuple(new_args), tuple(new_named))
    elif isinstance(expr, ConstraintCall):
        new_fields = []
        for key, sub in expr.fields:
            new_sub, ch, last_rule = _sweep(sub, rules, trace, last_rule,
                                            path + (("field", key),), False)
            changed = changed or ch
            new_fields.append((key, new_sub))
        expr = ConstraintCall(expr.type_name, expr.type_param, tuple(new_fields))

    for _ in range(100):
        hit = None
        for r in rules:
            replacement = r.apply(expr, is_root)
            if replacement is not None and replacement != expr:
                hit = (r, replacement)
                break
        if hit is None:
            break
        r, replacement = hit
        if trace is not None:
            trace.append(RewriteStep(r.name, path, expr, replacement))
        expr = replacement
        changed = True
        last_rule = r.name
    else:
        raise CycleError(last_rule)
    return expr, changed, last_rule


# ---------------------------------------------------------------------------
# Assignment inlining

def count_var_uses(expr: SurfaceExpr, counts: dict[str, int]) -> None:
    if isinstance(expr, VarRef):
        counts[expr.name] = counts.get(expr.name, 0) + 1
    elif isinstance(expr, Call):
        for a in expr.args:
            count_var_uses(a, counts)
        for _, v in expr.named:
            count_var_uses(v, counts)
    elif isinstance(expr, ConstraintCall):
        for _, v in expr.fields:
            count_var_uses(v, counts)
    elif isinstance(expr, AssignSeq):
        for _, v in expr.bindings:
            count_var_uses(v, counts)
        count_var_uses(expr.body, counts)


def _substitute(expr: SurfaceExpr, name: str, value: SurfaceExpr) -> SurfaceExpr:
    if isinstance(expr, VarRef):
        return value if expr.name == name else expr
    if isinstance(expr, Call):
        return Call(
            expr.func,
            tuple(_substitute(a, name, value) for a in expr.args),
            tuple((k, _substitute(v, name, value)) for k, v in expr.named),
        )
    if isinstance(expr, ConstraintCall):
        return ConstraintCall(
            expr.type_name,
            expr.type_param,
            tuple((k, _substitute(v, name, value)) for k, v in expr.fields),
        )
    if isinstance(expr, AssignSeq):
        return AssignSeq(
            tuple((n, _substitute(v, name, value)) for n, v in expr.bindings),
            _substitute(expr.body, name, value),
        )
    return expr


def inline_single_use(expr: AssignSeq) -> SurfaceExpr:
    """Splice bindings used once, drop unused ones, keep shared ones."""
    bindings = list(expr.bindings)
    body = expr.body
    progress = True
    while progress and bindings:
        progress = False
        counts: dict[str, int] = {}
        for _, v in bindings:
            count_var_uses(v, counts)
        count_var_uses(body, counts)
        for i, (name, value) in enumerate(bindings):
            uses = counts.get(name, 0)
            if uses > 1:
                continue
            del bindings[i]
            if uses == 1:
                bindings = [(n, _substitute(v, name, value)) for n, v in bindings]
                body = _substitute(body, name, value)
            progress = True
            break
    if not bindings:
        return body
    return AssignSeq(tuple(bindings), body)


# ---------------------------------------------------------------------------
# The two rule sets

def _strip_root_yield(expr: SurfaceExpr, is_root: bool) -> SurfaceExpr | None:
    if isinstance(expr, AssignSeq):
        if isinstance(expr.body, Call) and expr.body.func == "Yield" \
                and len(expr.body.args) == 1 and not expr.body.named:
            return AssignSeq(expr.bindings, expr.body.args[0])
        return None
    if isinstance(expr, Call) and expr.func == "Yield" and len(expr.args) == 1 and not expr.named:
        return expr.args[0]
    return None


def _inline_rule(expr: SurfaceExpr, is_root: bool) -> SurfaceExpr | None:
    if not isinstance(expr, AssignSeq):
        return None
    out = inline_single_use(expr)
    return out if out != expr else None


def _add_root_yield(expr: SurfaceExpr, is_root: bool) -> SurfaceExpr | None:
    if isinstance(expr, AssignSeq):
        inner = _add_root_yield(expr.body, True)
        return AssignSeq(expr.bindings, inner) if inner is not None else None
    if isinstance(expr, Call) and expr.func == "Yield":
        return None
    return Call("Yield", (expr,))


SIMPLIFY_RULES: list[RewriteRule] = [
    rule("rename_find", "FindEventWrapperWithDefaults(?x)", "FindEvents(?x)",
         "searches keep one canonical spelling"),
    rule("drop_results", ":results(FindEvents(?x))", "FindEvents(?x)",
         "a search already denotes its results"),
    rule("drop_singleton", "singleton(FindEvents(?x))", "FindEvents(?x)",
         "unwrapping one result is re-added as a coercion when needed"),
    rule("drop_id", ":id(FindEvents(?x))", "FindEvents(?x)",
         "event ids are accepted wherever events are"),
    rule("fuse_delete",
         "DeleteCommitEventWrapper(DeletePreflightEventWrapper(?x))", "DeleteEvent(?x)",
         "the two-phase pair reads as one operation"),
    rule("fuse_update",
         "UpdateCommitEventWrapper(UpdatePreflightEventWrapper(?e,?c))", "UpdateEvent(?e,?c)"),
    rule("fuse_create",
         "CreateCommitEventWrapper(CreatePreflightEventWrapper(?c))", "CreateEvent(?c)"),
    rule("unwrap_delete_find", "DeleteEvent(FindEvents(?c))", "DeleteEvent(?c)",
         "lookup is re-added as a coercion"),
    rule("unwrap_update_find", "UpdateEvent(FindEvents(?e),?c)", "UpdateEvent(?e,?c)"),
    rule("compact_empty_constraint", "Constraint[Event]()", "Event?()"),
    rule("drop_empty_constraint_arg", "EventOnDateTime(?x,Event?())", "EventOnDateTime(?x)",
         "an empty formal argument carries no information"),
    rule("drop_self_range_end", "EventDuringRange(?x,TimeAfterDateTime(?x,_))",
         "starts_at(?x)",
         "a range end anchored on its own start adds nothing to the search"),
    rule("split_range", "EventDuringRange(?a,?b)", "AND(starts_at(?a),ends_at(?b))"),
    rule("drop_self_date", "DateAtTimeWithDefaults(:date(:start(_)),?t)", "?t",
         "re-using the target's own date is the default behaviour"),
    rule("drop_self_date_compact", "DateTime(:date(:start(_)),?t)", "?t"),
    rule("drop_end_anchor", "EventEndsAt(TimeAfterDateTime(_,?t))", "ends_at(?t)",
         "the date part is inherited from the anchor"),
    rule("starts_at", "EventOnDateTime(?x)", "starts_at(?x)"),
    rule("ends_at", "EventEndsAt(?x)", "ends_at(?x)"),
    rule("at_location", "EventAtLocation(?x)", "at_location(?x)"),
    rule("has_subject", "EventWithSubject(?x)", "has_subject(?x)"),
    rule("allof2", "EventAllOf(?a,?b)", "AND(?a,?b)"),
    rule("allof3", "EventAllOf(?a,?b,?c)", "AND(?a,?b,?c)"),
    rule("lc_tomorrow", "Tomorrow()", "tomorrow()"),
    rule("lc_today", "Today()", "today()"),
    rule("lc_nextdow", "NextDOW(?x)", "nextDOW(?x)"),
    rule("compact_datetime", "DateAtTimeWithDefaults(?d,?t)", "DateTime(?d,?t)"),
    rule("splice_start_datetime", "starts_at(DateTime(?d,?t))",
         "starts_at(?d,?t)", "default filling lives in the implementation"),
    rule("splice_end_datetime", "ends_at(DateTime(?d,?t))", "ends_at(?d,?t)"),
    RewriteRule("strip_yield", custom=_strip_root_yield, root_only=True,
                note="every annotation is wrapped in Yield at execution time"),
    RewriteRule("inline_assignments", custom=_inline_rule, root_only=True,
                note="keep assignments only for shared subgraphs"),
]


EXPAND_RULES: list[RewriteRule] = [
    rule("expand_delete", "DeleteEvent(?x)",
         "DeleteCommitEventWrapper(DeletePreflightEventWrapper(?x))"),
    rule("expand_update", "UpdateEvent(?e,?c)",
         "UpdateCommitEventWrapper(UpdatePreflightEventWrapper(?e,?c))"),
    rule("expand_create", "CreateEvent(?c)",
         "CreateCommitEventWrapper(CreatePreflightEventWrapper(?c))"),
    RewriteRule("add_yield", custom=_add_root_yield, root_only=True),
]


def simplify(expr: SurfaceExpr, trace: list[RewriteStep] | None = None) -> SurfaceExpr:
    return apply_rules(expr, SIMPLIFY_RULES, trace)


def expand(expr: SurfaceExpr, trace: list[RewriteStep] | None = None) -> SurfaceExpr:
    return apply_rules(expr, EXPAND_RULES, trace)


def manifest(rules: list[RewriteRule]) -> list[str]:
    return [r.name for r in rules]


# -- helpers for tests and --explain ----------------------------------------

def subtree_at(expr: SurfaceExpr, path: tuple) -> SurfaceExpr:
    for step in path:
        if step[0] == "binding":
            expr = dict(expr.bindings)[step[1]]
        elif step[0] == "body":
            expr = expr.body
        elif step[0] == "arg":
            expr = expr.args[step[1]]
        elif step[0] == "named":
            expr = dict(expr.named)[step[1]]
        elif step[0] == "field":
            expr = dict(expr.fields)[step[1]]
    return expr


def replace_at(expr: SurfaceExpr, path: tuple, new: SurfaceExpr) -> SurfaceExpr:
    if not path:
        return new
    step, rest = path[0], path[1:]
    if step[0] == "binding":
        return AssignSeq(
            tuple((n, replace_at(v, rest, new) if n == step[1] else v)
                  for n, v in expr.bindings),
            expr.body,
        )
    if step[0] == "body":
        return AssignSeq(expr.bindings, replace_at(expr.body, rest, new))
    if step[0] == "arg":
        args = list(expr.args)
        args[step[1]] = replace_at(args[step[1]], rest, new)
        return Call(expr.func, tuple(args), expr.named)
    if step[0] == "named":
        return Call(
            expr.func, expr.args,
            tuple((k, replace_at(v, rest, new) if k == step[1] else v)
                  for k, v in expr.named),
        )
    if step[0] == "field":
        return ConstraintCall(
            expr.type_name, expr.type_param,
            tuple((k, replace_at(v, rest, new) if k == step[1] else v)
                  for k, v in expr.fields),
        )
    raise ValueError(f"bad path step {step!r}")
