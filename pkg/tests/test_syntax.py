import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cajal.fuzz import GenConfig, GenerationFailed, gen_typed
from cajal.syntax import (
    BOOL,
    EMPTY,
    NAT,
    App,
    Ctx,
    Fn,
    If,
    Iter,
    Lam,
    ParseError,
    Succ,
    Tt,
    Var,
    Zero,
    alpha_eq,
    alpha_rename,
    as_numeral,
    binders,
    depth,
    free_occurrences,
    numeral,
    parse,
    parse_ctx,
    parse_raw,
    parse_type,
    pretty,
    size,
)


def test_parse_doubling_iterator():
    e = parse_raw("iter 0 {y -> succ (succ y)} (succ 0)")
    assert e == Iter(Zero(), "y", Succ(Succ(Var("y"))), Succ(Zero()))


def test_parse_atoms_and_not():
    assert parse("tt") == Tt()
    e = parse_raw(r"\x:Bool. if x then ff else tt")
    assert e == Lam("x", BOOL, If(Var("x"), parse("ff"), parse("tt")))


def test_unicode_lambda_and_comments():
    src = "-- identity\nλx:Nat. x  # trailing"
    assert parse(src) == Lam("x", NAT, Var("x"))


def test_numerals_desugar():
    assert parse("3") == numeral(3)
    assert as_numeral(parse("succ succ 0")) == 2


def test_application_is_left_associative():
    e = parse_raw("f a b")
    assert e == App(App(Var("f"), Var("a")), Var("b"))


def test_types_right_associative():
    assert parse_type("Bool -o Nat -o Bool") == Fn(BOOL, Fn(NAT, BOOL))
    assert parse_type("(Bool -o Nat) -o Bool") == Fn(Fn(BOOL, NAT), BOOL)


@pytest.mark.parametrize(
    "src",
    ["(\\x:Bool. x", "iter 0 {y succ y} 1", "\\x. x", "if tt then ff", "f \\x:Bool. x", ")"],
)
def test_parse_errors_are_located(src):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert info.value.line >= 1 and info.value.col >= 1


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse("succ\n  )")
    assert (info.value.line, info.value.col) == (2, 3)


def test_pretty_examples():
    assert pretty(Zero()) == "0"
    assert pretty(Succ(Succ(Zero()))) == "2"
    assert pretty(Lam("x", BOOL, Var("x"))) == "\\x:Bool. x"


def test_numeral_printing_up_to_1000():
    for n in range(1001):
        assert pretty(numeral(n)) == str(n)


def test_alpha_rename_examples():
    e = parse_raw(r"\x:Bool. \x:Bool. x")
    assert pretty(alpha_rename(e)) == "\\x:Bool. \\x1:Bool. x1"
    e = parse_raw(r"(\x:Bool. x) (\x:Bool. x)")
    assert pretty(alpha_rename(e)) == "(\\x:Bool. x) (\\x1:Bool. x1)"
    unique = parse_raw(r"\a:Bool. \b:Nat. if a then b else b")
    assert alpha_rename(unique) == unique


def test_parse_makes_binders_unique():
    e = parse(r"(\x:Bool. x) ((\x:Bool. x) tt)")
    names = binders(e)
    assert len(names) == len(set(names))


def test_alpha_rename_avoids_free_variables():
    e = parse_raw(r"\x:Bool. x1 x")
    r = alpha_rename(e, avoid={"x"})
    assert "x1" not in binders(r) and "x" not in binders(r)
    assert alpha_eq(e, r)


def test_alpha_eq():
    assert alpha_eq(parse_raw(r"\a:Bool. a"), parse_raw(r"\b:Bool. b"))
    assert not alpha_eq(parse_raw(r"\a:Bool. a"), parse_raw(r"\b:Nat. b"))
    assert not alpha_eq(parse_raw(r"\a:Bool. c"), parse_raw(r"\b:Bool. b"))


def test_free_occurrences_counts():
    e = parse_raw(r"if x then x else (\y:Bool. y) z")
    assert free_occurrences(e) == {"x": 2, "z": 1}


def test_depth_and_size():
    e = parse(r"(\x:Nat. succ x) 5")
    assert size(e) == 4 + 6  # the literal 5 is six nodes
    assert depth(e) == 4  # App, Lam, Succ, Var
    assert depth(numeral(40)) == 1


def test_deep_numerals_compare_and_hash():
    a, b = numeral(50_000), numeral(50_000)
    assert a == b and hash(a) == hash(b)
    assert a != numeral(49_999)


# ---------------------------------------------------------------- contexts


def test_ctx_indexing_and_concat():
    c = parse_ctx("x:Bool, y:Nat, z:Bool")
    assert len(c) == 3
    assert c.index_of("z") == 3 == len(c)
    assert c.index_of("x") == 1
    assert c.index_of("w") == 0
    assert c.index_set() == {1, 2, 3}
    d = parse_ctx("x:Bool").concat(parse_ctx("y:Nat"))
    assert d.names == ("x", "y")
    assert str(EMPTY) == "∅"


def test_ctx_rejects_duplicates():
    with pytest.raises(ValueError):
        Ctx((("x", BOOL), ("x", NAT)))


def test_parse_ctx_blank_is_empty():
    assert parse_ctx("  ") == EMPTY


# ---------------------------------------------------------------- round trips

NAMES = st.sampled_from(["a", "b", "f", "x1", "y"])
TYPES = st.recursive(st.sampled_from([BOOL, NAT]), lambda t: st.builds(Fn, t, t), max_leaves=4)


def _raw_exprs():
    leaves = st.one_of(
        NAMES.map(Var),
        st.sampled_from([parse("tt"), parse("ff")]),
        st.integers(0, 7).map(numeral),
    )

    def extend(children):
        return st.one_of(
            children.map(Succ),
            st.builds(Lam, NAMES, TYPES, children),
            st.builds(App, children, children),
            st.builds(If, children, children, children),
            st.builds(Iter, children, NAMES, children, children),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(_raw_exprs())
@settings(max_examples=300, deadline=None)
def test_raw_round_trip(e):
    assert parse_raw(pretty(e)) == e


@given(st.integers(0, 2**63 - 1), st.sampled_from([BOOL, NAT, Fn(BOOL, BOOL), Fn(NAT, NAT)]))
@settings(max_examples=100, deadline=None)
def test_generated_round_trip(seed, ty):
    try:
        e = gen_typed(GenConfig(seed=seed, max_depth=5), EMPTY, ty, random.Random(seed))
    except GenerationFailed:
        return
    assert alpha_eq(parse(pretty(e)), e)


@given(TYPES)
def test_type_round_trip(t):
    assert parse_type(str(t)) == t
