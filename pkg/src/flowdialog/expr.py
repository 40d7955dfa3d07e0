"""Surface expression trees and the two annotation syntaxes.

Two textual forms describe the same trees:

* call syntax, e.g. ``x0=tomorrow(); DeleteEvent(starts_at(x0,NumberAM(10)))``
* prefix syntax, e.g. ``(Yield (DeleteCommitEventWrapper ...))``

Both parse into :class:`SurfaceExpr` values and both have canonical
printers whose output re-parses to an identical tree.  A shared lexer
also backs :func:`tokenize_for_length`, the token counter used for the
annotation-length statistics.

Grammar notes (frozen here because golden files depend on them):

* call syntax: ``program := (binding ';')* expr``; a binding is
  ``name '=' expr``.  Calls take positional arguments first, then
  ``name=value`` pairs.  ``T?(...)`` and ``Constraint[T](...)`` are
  constraint expressions; a single positional argument inside a
  constraint is shorthand for the field ``value``.
* prefix syntax: ``(Func pos ... :key val ...)``, ``(let (x0 e0 ...) body)``,
  ``(T? ...)`` and ``(Constraint[T] ...)`` for constraints.
* accessor functions are spelled with a leading colon: ``:id(x)`` /
  ``(:id x)``.
* assignment sequences are only allowed at the top level of a program.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ExprError(Exception):
    """Base class for surface-syntax errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, position: int, expected: str, found: str = ""):
        self.position = position
        self.expected = expected
        self.found = found
        msg = f"at {position}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnbalancedParens(ExprSyntaxError):
    def __init__(self, position: int):
        super().__init__(position, "balanced parentheses")


class UnboundVariable(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")


# ---------------------------------------------------------------------------
# Trees

INT, FLOAT, STR, BOOL = "Int", "Float", "Str", "Bool"


@dataclass(frozen=True)
class SurfaceExpr:
    pass


@dataclass(frozen=True)
class Literal(SurfaceExpr):
    kind: str  # one of INT/FLOAT/STR/BOOL
    text: str  # canonical lexeme; for STR the unescaped value


@dataclass(frozen=True)
class VarRef(SurfaceExpr):
    name: str


@dataclass(frozen=True)
class Call(SurfaceExpr):
    func: str
    args: tuple[SurfaceExpr, ...] = ()
    named: tuple[tuple[str, SurfaceExpr], ...] = ()


@dataclass(frozen=True)
class ConstraintCall(SurfaceExpr):
    """A constraint expression such as ``Int?(3)`` or ``Constraint[Event]()``.

    Fields are always named; the ``value`` fieldholds the single
    positional shorthand.
    """

    type_name: str
    type_param: str | None = None
    fields: tuple[tuple[str, SurfaceExpr], ...] = ()


@dataclass(frozen=True)
class AssignSeq(SurfaceExpr):
    bindings: tuple[tuple[str, SurfaceExpr], ...]
    body: SurfaceExpr


def lit_int(value: int) -> Literal:
    return Literal(INT, str(value))


def lit_str(value: str) -> Literal:
    return Literal(STR, value)


def lit_bool(value: bool) -> Literal:
    return Literal(BOOL, "true" if value else "false")


# ---------------------------------------------------------------------------
# Lexer

PUNCT = set("()[],=;?:")

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}
_UNESCAPES = {"\n": "\\n", "\t": "\\t", '"': '\\"', "\\": "\\\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # "name" | "int" | "float" | "str" | "punct" | "eof"
    text: str
    pos: int


def _is_name_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_name_char(c: str) -> bool:
    return c.isalnum() or c == "_"


def lex(text: str) -> list[Token]:
    """Tokenize either syntax.  Whitespace separates, never appears in tokens."""
    toks: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in PUNCT:
            toks.append(Token("punct", c, i))
            i += 1
            continue
        if c == '"':
            j = i + 1
            out: list[str] = []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                    if j >= n:
                        raise ExprSyntaxError(j, "escape character")
                    out.append(_ESCAPES.get(text[j], text[j]))
                else:
                    out.append(text[j])
                j += 1
            if j >= n:
                raise ExprSyntaxError(i, "closing quote")
            toks.append(Token("str", "".join(out), i))
            i = j + 1
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                toks.append(Token("float", text[i:j], i))
            else:
                toks.append(Token("int", text[i:j], i))
            i = j
            continue
        if _is_name_start(c):
            j = i + 1
            while j < n and _is_name_char(text[j]):
                j += 1
            toks.append(Token("name", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(i, "token", c)
    toks.append(Token("eof", "", n))
    return toks


def _escape(value: str) -> str:
    return "".join(_UNESCAPES.get(c, c) for c in value)


# ---------------------------------------------------------------------------
# Shared parser plumbing

class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.toks) - 1)
        return self.toks[j]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            raise ExprSyntaxError(t.pos, text or kind, t.text or t.kind)
        return self.next()

    def at_punct(self, ch: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == ch


def _literal_from_token(t: Token) -> Literal:
    if t.kind == "int":
        return Literal(INT, t.text)
    if t.kind == "float":
        return Literal(FLOAT, t.text)
    if t.kind == "str":
        return Literal(STR, t.text)
    raise ExprSyntaxError(t.pos, "literal", t.text)


_BOOL_WORDS = {"true": "true", "false": "false", "True": "true", "False": "false"}


def _check_scope(expr: SurfaceExpr) -> None:
    """Verify binding uniqueness and that every VarRef is bound."""

    def walk(e: SurfaceExpr, bound: set[str]) -> None:
        if isinstance(e, VarRef):
            if e.name not in bound:
                raise UnboundVariable(e.name)
        elif isinstance(e, Call):
            for a in e.args:
                walk(a, bound)
            for _, v in e.named:
                walk(v, bound)
        elif isinstance(e, ConstraintCall):
            for _, v in e.fields:
                walk(v, bound)
        elif isinstance(e, AssignSeq):
            seen: set[str] = set()
            inner = set(bound)
            for name, sub in e.bindings:
                if name in seen:
                    raise ExprSyntaxError(0, f"unique binding name (duplicate {name!r})")
                walk(sub, inner)
                seen.add(name)
                inner.add(name)
            walk(e.body, inner)

    walk(expr, set())


# ---------------------------------------------------------------------------
# Call syntax

def parse_call(text: str) -> SurfaceExpr:
    """Parse call-syntax text into a tree."""
    if not text or not text.strip():
        raise ExprSyntaxError(0, "expression")
    cur = _Cursor(lex(text))
    bindings: list[tuple[str, SurfaceExpr]] = []
    while (
        cur.peek().kind == "name"
        and cur.peek(1).kind == "punct"
        and cur.peek(1).text == "="
    ):
        name = cur.next().text
        cur.next()  # '='
        value = _parse_call_expr(cur)
        cur.expect("punct", ";")
        bindings.append((name, value))
    body = _parse_call_expr(cur)
    t = cur.peek()
    if t.kind != "eof":
        raise ExprSyntaxError(t.pos, "end of input", t.text)
    expr: SurfaceExpr = AssignSeq(tuple(bindings), body) if bindings else body
    _check_scope(expr)
    return expr


def _parse_call_expr(cur: _Cursor) -> SurfaceExpr:
    t = cur.peek()
    if t.kind in ("int", "float", "str"):
        return _literal_from_token(cur.next())
    if cur.at_punct(":"):
        cur.next()
        name = ":" + cur.expect("name").text
        cur.expect("punct", "(")
        args, named = _parse_call_args(cur)
        return Call(name, args, named)
    if t.kind != "name":
        raise ExprSyntaxError(t.pos, "expression", t.text or t.kind)
    if t.text in _BOOL_WORDS:
        cur.next()
        return Literal(BOOL, _BOOL_WORDS[t.text])
    name = cur.next().text
    type_param: str | None = None
    if cur.at_punct("["):
        cur.next()
        type_param = cur.expect("name").text
        cur.expect("punct", "]")
    is_constraint = type_param is not None
    if cur.at_punct("?"):
        cur.next()
        is_constraint = True
    if not cur.at_punct("("):
        if is_constraint:
            raise ExprSyntaxError(cur.peek().pos, "(")
        return VarRef(name)
    cur.next()  # '('
    if is_constraint:
        fields = _parse_constraint_args(cur)
        return ConstraintCall(name, type_param, fields)
    args, named = _parse_call_args(cur)
    return Call(name, args, named)


def _parse_call_args(cur: _Cursor) -> tuple[tuple[SurfaceExpr, ...], tuple[tuple[str, SurfaceExpr], ...]]:
    args: list[SurfaceExpr] = []
    named: list[tuple[str, SurfaceExpr]] = []
    if cur.at_punct(")"):
        cur.next()
        return tuple(args), tuple(named)
    while True:
        t = cur.peek()
        if t.kind == "name" and cur.peek(1).kind == "punct" and cur.peek(1).text == "=":
            key = cur.next().text
            cur.next()  # '='
            named.append((key, _parse_call_expr(cur)))
        else:
            if named:
                raise ExprSyntaxError(t.pos, "named argument", t.text)
            args.append(_parse_call_expr(cur))
        if cur.at_punct(","):
            cur.next()
            continue
        cur.expect("punct", ")")
        return tuple(args), tuple(named)


def _parse_constraint_args(cur: _Cursor) -> tuple[tuple[str, SurfaceExpr], ...]:
    fields: list[tuple[str, SurfaceExpr]] = []
    if cur.at_punct(")"):
        cur.next()
        return tuple(fields)
    positional: SurfaceExpr | None = None
    while True:
        t = cur.peek()
        if t.kind == "name" and cur.peek(1).kind == "punct" and cur.peek(1).text == "=":
            key = cur.next().text
            cur.next()
            fields.append((key, _parse_call_expr(cur)))
        else:
            if positional is not None or fields:
                raise ExprSyntaxError(t.pos, "named constraint field", t.text)
            positional = _parse_call_expr(cur)
        if cur.at_punct(","):
            cur.next()
            continue
        cur.expect("punct", ")")
        break
    if positional is not None:
        fields.insert(0, ("value", positional))
    return tuple(fields)


def print_call(expr: SurfaceExpr) -> str:
    """Canonical call-syntax form: no spaces except one after each ';'."""
    if isinstance(expr, AssignSeq):
        parts = [f"{name}={_print_call_expr(value)};" for name, value in expr.bindings]
        parts.append(_print_call_expr(expr.body))
        return " ".join(parts)
    return _print_call_expr(expr)


def _print_call_expr(expr: SurfaceExpr) -> str:
    if isinstance(expr, Literal):
        if expr.kind == STR:
            return f'"{_escape(expr.text)}"'
        return expr.text
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, Call):
        items = [_print_call_expr(a) for a in expr.args]
        items += [f"{k}={_print_call_expr(v)}" for k, v in expr.named]
        return f"{expr.func}({','.join(items)})"
    if isinstance(expr, ConstraintCall):
        head = expr.type_name
        head += f"[{expr.type_param}]" if expr.type_param else "?"
        if len(expr.fields) == 1 and expr.fields[0][0] == "value":
            return f"{head}({_print_call_expr(expr.fields[0][1])})"
        inner = ",".join(f"{k}={_print_call_expr(v)}" for k, v in expr.fields)
        return f"{head}({inner})"
    if isinstance(expr, AssignSeq):
        raise ExprError("assignments are only allowed at the top level")
    raise ExprError(f"cannot print {expr!r}")


# ---------------------------------------------------------------------------
# Prefix syntax

def parse_prefix(text: str) -> SurfaceExpr:
    """Parse prefix-syntax text into the same tree type as parse_call."""
    if not text or not text.strip():
        raise ExprSyntaxError(0, "expression")
    cur = _Cursor(lex(text))
    expr = _parse_prefix_expr(cur, at_root=True)
    t = cur.peek()
    if t.kind != "eof":
        if t.kind == "punct" and t.text == ")":
            raise UnbalancedParens(t.pos)
        raise ExprSyntaxError(t.pos, "end of input", t.text)
    _check_scope(expr)
    return expr


def _parse_prefix_expr(cur: _Cursor, at_root: bool = False) -> SurfaceExpr:
    t = cur.peek()
    if t.kind in ("int", "float", "str"):
        return _literal_from_token(cur.next())
    if t.kind == "name":
        cur.next()
        if t.text in _BOOL_WORDS:
            return Literal(BOOL, _BOOL_WORDS[t.text])
        return VarRef(t.text)
    if not cur.at_punct("("):
        raise ExprSyntaxError(t.pos, "expression", t.text or t.kind)
    cur.next()  # '('
    head = cur.peek()
    if head.kind == "punct" and head.text == ":":
        cur.next()
        name = ":" + cur.expect("name").text
        args, named = _parse_prefix_args(cur)
        return Call(name, args, named)
    if head.kind != "name":
        raise ExprSyntaxError(head.pos, "function name", head.text or head.kind)
    name = cur.next().text
    if name == "let":
        if not at_root:
            raise ExprSyntaxError(head.pos, "let only at top level")
        return _parse_let(cur)
    type_param: str | None = None
    is_constraint = False
    if cur.at_punct("["):
        cur.next()
        type_param = cur.expect("name").text
        cur.expect("punct", "]")
        is_constraint = True
    if cur.at_punct("?"):
        cur.next()
        is_constraint = True
    if is_constraint:
        fields = _parse_prefix_constraint_fields(cur)
        return ConstraintCall(name, type_param, fields)
    args, named = _parse_prefix_args(cur)
    return Call(name, args, named)


def _parse_prefix_args(cur: _Cursor) -> tuple[tuple[SurfaceExpr, ...], tuple[tuple[str, SurfaceExpr], ...]]:
    args: list[SurfaceExpr] = []
    named: list[tuple[str, SurfaceExpr]] = []
    while not cur.at_punct(")"):
        if cur.peek().kind == "eof":
            raise UnbalancedParens(cur.peek().pos)
        if cur.at_punct(":"):
            cur.next()
            key = cur.expect("name").text
            named.append((key, _parse_prefix_expr(cur)))
        else:
            if named:
                raise ExprSyntaxError(cur.peek().pos, ":key", cur.peek().text)
            args.append(_parse_prefix_expr(cur))
    cur.next()  # ')'
    return tuple(args), tuple(named)


def _parse_prefix_constraint_fields(cur: _Cursor) -> tuple[tuple[str, SurfaceExpr], ...]:
    fields: list[tuple[str, SurfaceExpr]] = []
    positional: SurfaceExpr | None = None
    while not cur.at_punct(")"):
        if cur.peek().kind == "eof":
            raise UnbalancedParens(cur.peek().pos)
        if cur.at_punct(":"):
            cur.next()
            key = cur.expect("name").text
            fields.append((key, _parse_prefix_expr(cur)))
        else:
            if positional is not None or fields:
                raise ExprSyntaxError(cur.peek().pos, ":key", cur.peek().text)
            positional = _parse_prefix_expr(cur)
    cur.next()  # ')'
    if positional is not None:
        fields.insert(0, ("value", positional))
    return tuple(fields)


def _parse_let(cur: _Cursor) -> AssignSeq:
    cur.expect("punct", "(")
    bindings: list[tuple[str, SurfaceExpr]] = []
    while not cur.at_punct(")"):
        name = cur.expect("name").text
        bindings.append((name, _parse_prefix_expr(cur)))
    cur.next()  # ')'
    body = _parse_prefix_expr(cur)
    cur.expect("punct", ")")
    return AssignSeq(tuple(bindings), body)


def print_prefix(expr: SurfaceExpr) -> str:
    """Canonical prefix form; round-trips through parse_prefix."""
    if isinstance(expr, AssignSeq):
        inner = " ".join(f"{n} {print_prefix(v)}" for n, v in expr.bindings)
        return f"(let ({inner}) {print_prefix(expr.body)})"
    if isinstance(expr, Literal):
        if expr.kind == STR:
            return f'"{_escape(expr.text)}"'
        return expr.text
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, Call):
        parts = [expr.func]
        parts += [print_prefix(a) for a in expr.args]
        parts += [f":{k} {print_prefix(v)}" for k, v in expr.named]
        return f"({' '.join(parts)})"
    if isinstance(expr, ConstraintCall):
        head = expr.type_name
        head += f"[{expr.type_param}]" if expr.type_param else "?"
        parts = [head]
        if len(expr.fields) == 1 and expr.fields[0][0] == "value":
            parts.append(print_prefix(expr.fields[0][1]))
        else:
            parts += [f":{k} {print_prefix(v)}" for k, v in expr.fields]
        return f"({' '.join(parts)})"
    raise ExprError(f"cannot print {expr!r}")


# ---------------------------------------------------------------------------
# Length tokenization

@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def joined(self) -> str:
        return " ".join(self.tokens)


def tokenize_for_length(text: str) -> TokenSeq:
    """Token count used by the length statistics.

    Each identifier, each literal (a quoted string is one token), and
    each punctuation character is one token.  The text must parse in
    one of the two syntaxes; syntax is chosen by the leading character.
    """
    if text.lstrip().startswith("("):
        parse_prefix(text)
    else:
        parse_call(text)
    out: list[str] = []
    for t in lex(text):
        if t.kind == "eof":
            break
        if t.kind == "str":
            out.append(f'"{_escape(t.text)}"')
        else:
            out.append(t.text)
    return TokenSeq(tuple(out))
