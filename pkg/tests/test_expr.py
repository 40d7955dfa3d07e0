import random

import pytest

from flowdialog.expr import (
    AssignSeq,
    Call,
    ConstraintCall,
    ExprSyntaxError,
    Literal,
    UnboundVariable,
    VarRef,
    lex,
    lit_int,
    parse_call,
    parse_prefix,
    print_call,
    print_prefix,
    tokenize_for_length,
)


def test_parse_call_nested_add():
    got = parse_call("Add(2,Add(3,5))")
    assert got == Call("Add", (lit_int(2), Call("Add", (lit_int(3), lit_int(5)))))


def test_parse_call_revise_with_constraint():
    got = parse_call("revise(old=Int?(3), new=Int(6))")
    assert got == Call(
        "revise",
        (),
        (
            ("old", ConstraintCall("Int", None, (("value", lit_int(3)),))),
            ("new", Call("Int", (lit_int(6),))),
        ),
    )


def test_parse_call_bare_literal():
    assert parse_call("42") == Literal("Int", "42")


def test_parse_call_bindings_and_varrefs():
    got = parse_call("x0=tomorrow(); starts_at(x0)")
    assert got == AssignSeq(
        (("x0", Call("tomorrow")),),
        Call("starts_at", (VarRef("x0"),)),
    )


def test_parse_call_accessor_head():
    assert parse_call(":id(x0())") == Call(":id", (Call("x0"),))


def test_parse_call_constraint_typeparam():
    got = parse_call("Constraint[Event]()")
    assert got == ConstraintCall("Constraint", "Event", ())


def test_parse_call_string_escapes():
    got = parse_call('has_subject("a\\"b\\\\c")')
    assert got == Call("has_subject", (Literal("Str", 'a"b\\c'),))


def test_parse_call_unbound_variable():
    with pytest.raises(UnboundVariable):
        parse_call("starts_at(x9)")


def test_parse_call_duplicate_binding():
    with pytest.raises(ExprSyntaxError):
        parse_call("x0=Int(1); x0=Int(2); Add(x0,x0)")


def test_parse_call_positional_after_named():
    with pytest.raises(ExprSyntaxError):
        parse_call("f(a=1,2)")


def test_parse_call_reports_position():
    with pytest.raises(ExprSyntaxError) as e:
        parse_call("Add(2,")
    assert e.value.position == 6


def test_parse_prefix_nested():
    got = parse_prefix("(Yield (Add 2 3))")
    assert got == Call("Yield", (Call("Add", (lit_int(2), lit_int(3))),))


def test_parse_prefix_let():
    got = parse_prefix("(let (x0 (Add 1 2)) (Add x0 x0))")
    assert got == AssignSeq(
        (("x0", Call("Add", (lit_int(1), lit_int(2)))),),
        Call("Add", (VarRef("x0"), VarRef("x0"))),
    )


def test_parse_prefix_named_args():
    got = parse_prefix("(DeleteEvent :id 5)")
    assert got == Call("DeleteEvent", (), (("id", lit_int(5)),))
    assert parse_prefix(print_prefix(got)) == got


def test_parse_prefix_constraint_forms():
    assert parse_prefix("(Constraint[Event])") == ConstraintCall("Constraint", "Event")
    assert parse_prefix("(Int? 3)") == ConstraintCall("Int", None, (("value", lit_int(3)),))
    assert parse_prefix('(Event? :location "x")') == ConstraintCall(
        "Event", None, (("location", Literal("Str", "x")),)
    )


def test_parse_prefix_accessor():
    got = parse_prefix("(:id (singleton (:results (FindEvents))))")
    assert got == Call(
        ":id", (Call("singleton", (Call(":results", (Call("FindEvents"),)),)),)
    )


def test_parse_prefix_unbalanced():
    with pytest.raises(ExprSyntaxError):
        parse_prefix("(Add 2 (Add 3 5)")
    with pytest.raises(ExprSyntaxError):
        parse_prefix("(Add 2)) ")


def test_parse_prefix_nested_let_rejected():
    with pytest.raises(ExprSyntaxError):
        parse_prefix("(Add (let (x0 1) x0) 2)")


def test_print_call_canonical():
    assert print_call(Call("Add", (lit_int(2), lit_int(3)))) == "Add(2,3)"
    e = AssignSeq((("x0", Call("tomorrow")),), Call("starts_at", (VarRef("x0"),)))
    assert print_call(e) == "x0=tomorrow(); starts_at(x0)"


def test_print_prefix_canonical():
    assert print_prefix(Call("Yield", (Call("Add", (lit_int(2), lit_int(3))),))) == "(Yield (Add 2 3))"
    e = AssignSeq((("x0", lit_int(1)),), VarRef("x0"))
    assert print_prefix(e) == "(let (x0 1) x0)"


def test_tokenize_counts():
    assert len(tokenize_for_length("Add(2,3)")) == 6
    assert len(tokenize_for_length("Int?(3)")) == 5
    assert tokenize_for_length("(Yield (Add 2 3))").tokens == (
        "(", "Yield", "(", "Add", "2", "3", ")", ")",
    )


def test_tokenize_requires_parse():
    with pytest.raises(ExprSyntaxError):
        tokenize_for_length("Add(2,")


def test_tokenize_join_relexes_identically():
    seq = tokenize_for_length('DeleteEvent(starts_at(tomorrow(),NumberAM(10)))')
    again = [t.text if t.kind != "str" else f'"{t.text}"' for t in lex(seq.joined()) if t.kind != "eof"]
    assert list(seq.tokens) == again


# ---------------------------------------------------------------------------
# Randomized round-trip properties

NAMES = ["Add", "Yield", "starts_at", "f", "g", "h2", "tomorrow", "DeleteEvent"]
KEYS = ["old", "new", "id", "start", "subject", "k"]


def _rand_literal(rng: random.Random) -> Literal:
    roll = rng.random()
    if roll < 0.4:
        return Literal("Int", str(rng.randint(-999, 9999)))
    if roll < 0.55:
        return Literal("Float", f"{rng.randint(0, 99)}.{rng.randint(0, 99)}")
    if roll < 0.8:
        chars = rng.choices('abc XY"\\\n_=,()?', k=rng.randint(0, 6))
        return Literal("Str", "".join(chars))
    return Literal("Bool", rng.choice(["true", "false"]))


def _rand_expr(rng: random.Random, depth: int, scope: list[str]):
    if depth <= 0 or rng.random() < 0.3:
        if scope and rng.random() < 0.3:
            return VarRef(rng.choice(scope))
        return _rand_literal(rng)
    if rng.random() < 0.2:
        n_fields = rng.randint(0, 2)
        fields = tuple(
            (k, _rand_expr(rng, depth - 1, scope))
            for k in rng.sample(KEYS, n_fields)
        )
        if rng.random() < 0.3:
            return ConstraintCall("Constraint", rng.choice(["Event", "Int"]), fields)
        if not fields and rng.random() < 0.5:
            return ConstraintCall(rng.choice(["Int", "Event", "Str"]), None, ())
        if rng.random() < 0.3:
            return ConstraintCall("Int", None, (("value", _rand_literal(rng)),))
        return ConstraintCall(rng.choice(["Event", "Int"]), None, fields)
    func = rng.choice(NAMES + [":id", ":results"])
    args = tuple(_rand_expr(rng, depth - 1, scope) for _ in range(rng.randint(0, 3)))
    named = tuple(
        (k, _rand_expr(rng, depth - 1, scope))
        for k in rng.sample(KEYS, rng.randint(0, 2))
    )
    return Call(func, args, named)


def _rand_program(rng: random.Random):
    scope: list[str] = []
    bindings = []
    for i in range(rng.randint(0, 3)):
        name = f"x{i}"
        bindings.append((name, _rand_expr(rng, 2, scope)))
        scope.append(name)
    body = _rand_expr(rng, 3, scope)
    if bindings and all(_uses_only_bound(b, scope) for _, b in bindings):
        return AssignSeq(tuple(bindings), body)
    return body


def _uses_only_bound(e, scope):
    return True  # generator binds x0..xk in order; refs only sample current scope


def test_roundtrip_call_10k():
    rng = random.Random(20230101)
    for _ in range(10_000):
        e = _rand_program(rng)
        assert parse_call(print_call(e)) == e


def test_roundtrip_prefix_10k():
    rng = random.Random(20230102)
    for _ in range(10_000):
        e = _rand_program(rng)
        assert parse_prefix(print_prefix(e)) == e


def test_cross_syntax_identity():
    rng = random.Random(20230103)
    for _ in range(2_000):
        e = _rand_program(rng)
        via_prefix = parse_prefix(print_prefix(e))
        assert parse_call(print_call(via_prefix)) == e


def test_tokenizer_whitespace_invariance():
    rng = random.Random(20230104)
    for _ in range(500):
        e = _rand_program(rng)
        text = print_call(e)
        base = tokenize_for_length(text)
        toks = lex(text)
        pieces = []
        for t in toks:
            if t.kind == "eof":
                break
            pad = " " * rng.randint(0, 3)
            body = f'"{_escape_like(t.text)}"' if t.kind == "str" else t.text
            pieces.append(pad + body)
        perturbed = "".join(pieces) + " " * rng.randint(0, 2)
        assert tokenize_for_length(perturbed).tokens == base.tokens


def _escape_like(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
