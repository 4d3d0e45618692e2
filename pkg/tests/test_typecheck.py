import itertools
import random

import pytest

from cajal.fuzz import GenConfig, gen_open
from cajal.syntax import BOOL, EMPTY, NAT, Fn, free_occurrences, parse, parse_ctx, parse_raw
from cajal.typecheck import (
    BranchContextMismatch,
    CountNotNat,
    Derivation,
    Mismatch,
    NonlinearUse,
    UnboundVariable,
    UnusedVariable,
    split_ok,
    type_of,
    typecheck,
    validate,
)

from conftest import DOUBLE, ITER_NOT
from oracles import declarative_search, enumerate_programs


def test_split_ok_examples():
    xyz = parse_ctx("x:Bool, y:Bool, z:Bool")
    assert split_ok(xyz, [parse_ctx("x:Bool, y:Bool"), parse_ctx("z:Bool")])
    xy = parse_ctx("x:Bool, y:Bool")
    assert not split_ok(xy, [parse_ctx("x:Bool, y:Bool"), parse_ctx("y:Bool")])
    assert split_ok(EMPTY, [EMPTY, EMPTY])
    assert not split_ok(xy, [parse_ctx("x:Bool")])
    assert not split_ok(parse_ctx("x:Bool"), [parse_ctx("x:Nat")])


def test_linear_tru_accepted():
    d = typecheck(EMPTY, parse(r"\x:Bool. if x then tt else tt"))
    assert d.ty == Fn(BOOL, BOOL)
    assert validate(d)


def test_nonlinear_tru_rejected():
    with pytest.raises(NonlinearUse) as info:
        typecheck(EMPTY, parse(r"\x:Bool. if x then tt else x"))
    assert info.value.name == "x" and info.value.count == 2


def test_doubling_has_type_nat():
    d = typecheck(EMPTY, parse(DOUBLE))
    assert d.ty == NAT and d.rule == "Iter" and validate(d)


def test_weakening_forbidden():
    with pytest.raises(UnusedVariable) as info:
        typecheck(parse_ctx("x:Bool"), parse("tt"))
    assert info.value.name == "x"


def test_unused_lambda_binder():
    with pytest.raises(UnusedVariable):
        typecheck(EMPTY, parse(r"\x:Bool. tt"))


def test_unused_iter_binder():
    with pytest.raises(UnusedVariable):
        typecheck(EMPTY, parse("iter 0 {y -> 0} 3"))


def test_unbound():
    with pytest.raises(UnboundVariable):
        typecheck(EMPTY, parse("succ z"))


def test_mismatches():
    with pytest.raises(Mismatch):
        typecheck(EMPTY, parse("succ tt"))
    with pytest.raises(Mismatch):
        typecheck(EMPTY, parse("tt 0"))
    with pytest.raises(Mismatch):
        typecheck(EMPTY, parse(r"(\x:Bool. x) 0"))
    with pytest.raises(Mismatch):
        typecheck(EMPTY, parse("if 0 then tt else ff"))
    with pytest.raises(Mismatch):
        typecheck(EMPTY, parse("if tt then 0 else ff"))
    with pytest.raises(Mismatch):
        typecheck(EMPTY, parse("iter tt {y -> succ y} 2"))


def test_count_not_nat():
    with pytest.raises(CountNotNat):
        typecheck(EMPTY, parse("iter tt {y -> y} ff"))


def test_branch_context_mismatch():
    ctx = parse_ctx("x:Bool, y:Bool")
    with pytest.raises(BranchContextMismatch):
        typecheck(ctx, parse("if tt then x else y"))


def test_if_branches_share_context():
    ctx = parse_ctx("c:Bool, x:Bool")
    d = typecheck(ctx, parse("if c then x else x"))
    assert d.split == (parse_ctx("c:Bool"), parse_ctx("x:Bool"))
    assert d.children[1].ctx == d.children[2].ctx
    assert validate(d)


def test_iter_split_and_step_context():
    ctx = parse_ctx("b:Bool, f:Bool -o Bool, n:Nat")
    d = typecheck(ctx, parse("iter b {y -> f y} n"))
    assert d.split == (parse_ctx("b:Bool"), parse_ctx("f:Bool -o Bool"), parse_ctx("n:Nat"))
    step = d.children[1]
    assert step.ctx.binders[-1][1] == BOOL and len(step.ctx) == 2
    assert validate(d)


def test_split_preserves_context_order():
    ctx = parse_ctx("a:Nat, f:Nat -o Bool, c:Bool")
    d = typecheck(ctx, parse("if c then f a else f a"))
    # the branch context keeps a before f as in the parent
    assert d.split[1].names == ("a", "f")


def test_derivation_rendering():
    text = typecheck(EMPTY, parse(ITER_NOT)).render()
    assert text.splitlines()[0].startswith("[Iter] ∅ ⊢ iter tt")
    assert "  [If]" in text


def test_shadowed_source_is_renamed():
    d = typecheck(EMPTY, parse_raw(r"(\x:Bool. x) ((\x:Bool. x) tt)"))
    assert d.ty == BOOL and validate(d)


def test_deep_numeral_typechecks():
    from cajal.syntax import numeral

    d = typecheck(EMPTY, numeral(30_000))
    assert d.ty == NAT and validate(d)


# ---------------------------------------------------------------- validate negatives


def test_validate_rejects_bad_var_context():
    bad = Derivation(parse_ctx("x:Bool, y:Bool"), parse("x"), BOOL, "Var")
    assert not validate(bad)


def test_validate_rejects_branches_with_different_contexts():
    ctx = parse_ctx("c:Bool, x:Bool")
    good = typecheck(ctx, parse("if c then x else x"))
    dc, dt, _ = good.children
    wrong_else = Derivation(EMPTY, parse("x"), BOOL, "Var")
    bad = Derivation(good.ctx, good.expr, good.ty, "If", (dc, dt, wrong_else), good.split)
    assert not validate(bad)


def test_validate_rejects_overlapping_split():
    ctx = parse_ctx("f:Bool -o Bool, x:Bool")
    good = typecheck(ctx, parse("f x"))
    bad = Derivation(ctx, good.expr, good.ty, "App", good.children, (ctx, good.split[1]))
    assert not validate(bad)


def test_validate_rejects_weakened_constant():
    assert not validate(Derivation(parse_ctx("x:Bool"), parse("tt"), BOOL, "True"))


# ---------------------------------------------------------------- properties


def _path_occurrences(e, bound=frozenset()):
    """Free occurrences counted along one evaluation path: the branches of a
    conditional are alternatives, so they must agree and count once."""
    from cajal.syntax import If, Iter, Lam, Var, children

    match e:
        case Var(x):
            return {} if x in bound else {x: 1}
        case If(c, t, f):
            ot, of = _path_occurrences(t, bound), _path_occurrences(f, bound)
            assert ot == of
            return _merge(_path_occurrences(c, bound), ot)
        case Lam(x, _, body):
            return _path_occurrences(body, bound | {x})
        case Iter(b, y, s, n):
            parts = [_path_occurrences(b, bound), _path_occurrences(s, bound | {y}),
                     _path_occurrences(n, bound)]
            out = {}
            for p in parts:
                out = _merge(out, p)
            return out
    out = {}
    for c in children(e):
        out = _merge(out, _path_occurrences(c, bound))
    return out


def _merge(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return out


def test_each_context_variable_used_once_per_path():
    cfg = GenConfig(seed=3)
    for i in range(150):
        prog = gen_open(cfg, random.Random(f"occ:{i}"))
        d = typecheck(prog.ctx, prog.expr)
        assert _path_occurrences(prog.expr) == {n: 1 for n in prog.ctx.names}
        assert set(free_occurrences(prog.expr)) == set(prog.ctx.names)
        assert validate(d)


def test_exchange_typing():
    cfg = GenConfig(seed=4)
    for i in range(100):
        rng = random.Random(f"exch:{i}")
        prog = gen_open(cfg, rng)
        for perm in itertools.islice(itertools.permutations(range(len(prog.ctx))), 6):
            assert type_of(prog.ctx.permute(list(perm)), prog.expr) == prog.ty


@pytest.mark.parametrize("ctx_src", ["", "x:Bool", "x:Bool, y:Nat"])
def test_agrees_with_declarative_search_small(ctx_src):
    # a quick slice of the exhaustive comparison (the full bound runs in the acceptance suite)
    ctx = parse_ctx(ctx_src)
    for e in enumerate_programs(ctx, max_depth=4, max_size=4):
        found = declarative_search(ctx, e)
        try:
            d = typecheck(ctx, e)
        except Exception:
            assert not found, e
            continue
        assert found and validate(d)
        assert {f.ty for f in found} == {d.ty}
