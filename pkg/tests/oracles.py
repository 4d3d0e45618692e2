"""Reference implementations that share no code with the package under test."""
from __future__ import annotations

import functools
import itertools

from cajal.syntax import (
    BOOL,
    FALSE,
    NAT,
    TRUE,
    ZERO,
    App,
    Ctx,
    Ff,
    Fn,
    If,
    Iter,
    Lam,
    Succ,
    Tt,
    Var,
    Zero,
)
from cajal.typecheck import Derivation

# ---------------------------------------------------------------- integer dynamics


def int_states(init, m, steps):
    """States of x(n+1) = m x(n) with plain integer arithmetic."""
    out = [tuple(init)]
    for _ in range(steps):
        a, b = out[-1]
        out.append((m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b))
    return out


# ---------------------------------------------------------------- exhaustive enumeration

ANNOTATIONS = (BOOL, NAT, Fn(BOOL, BOOL))


def _compositions(total, k):
    if k == 1:
        if total >= 1:
            yield (total,)
        return
    for i in range(1, total - k + 2):
        for rest in _compositions(total - i, k - 1):
            yield (i,) + rest


@functools.lru_cache(maxsize=None)
def exprs_of_size(scope: tuple, depth: int, n: int, level: int = 0) -> tuple:
    """Every expression with exactly ``n`` nodes and depth at most ``depth``
    over the variables in ``scope``; binders at nesting level k are named vk."""
    if depth < 1 or n < 1:
        return ()
    if n == 1:
        return tuple([Var(v) for v in scope] + [TRUE, FALSE, ZERO])
    if depth < 2:
        return ()
    d, x = depth - 1, f"v{level}"
    out = [Succ(b) for b in exprs_of_size(scope, d, n - 1, level)]
    for t in ANNOTATIONS:
        out += [Lam(x, t, b) for b in exprs_of_size(scope + (x,), d, n - 1, level + 1)]
    for a, b in _compositions(n - 1, 2):
        out += [App(f, g) for f in exprs_of_size(scope, d, a, level)
                for g in exprs_of_size(scope, d, b, level)]
    for a, b, c in _compositions(n - 1, 3):
        ps = exprs_of_size(scope, d, a, level)
        qs = exprs_of_size(scope, d, b, level)
        rs = exprs_of_size(scope, d, c, level)
        out += [If(p, q, r) for p in ps for q in qs for r in rs]
        steps = exprs_of_size(scope + (x,), d, b, level + 1)
        out += [Iter(p, x, q, r) for p in ps for q in steps for r in rs]
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _splits(ctx: Ctx, k: int) -> tuple:
    """Every way to deal the binders of ``ctx`` into ``k`` order-preserving parts."""
    out = []
    for assign in itertools.product(range(k), repeat=len(ctx)):
        out.append(tuple(
            Ctx(tuple(b for b, i in zip(ctx.binders, assign) if i == j)) for j in range(k)
        ))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def declarative_search(ctx: Ctx, e) -> tuple:
    """All derivations of ``ctx |- e`` found by trying every rule and split."""
    match e:
        case Var(x):
            if len(ctx) == 1 and ctx.binders[0][0] == x:
                return (Derivation(ctx, e, ctx.binders[0][1], "Var"),)
            return ()
        case Tt():
            return (Derivation(ctx, e, BOOL, "True"),) if len(ctx) == 0 else ()
        case Ff():
            return (Derivation(ctx, e, BOOL, "False"),) if len(ctx) == 0 else ()
        case Zero():
            return (Derivation(ctx, e, NAT, "Zero"),) if len(ctx) == 0 else ()
        case Succ(b):
            return tuple(Derivation(ctx, e, NAT, "Succ", (d,))
                         for d in declarative_search(ctx, b) if d.ty == NAT)
        case Lam(x, t, b):
            if x in ctx:
                return ()
            return tuple(Derivation(ctx, e, Fn(t, d.ty), "Lam", (d,))
                         for d in declarative_search(ctx.extend(x, t), b))
        case App(f, a):
            out = []
            for p1, p2 in _splits(ctx, 2):
                for d1 in declarative_search(p1, f):
                    if not isinstance(d1.ty, Fn):
                        continue
                    for d2 in declarative_search(p2, a):
                        if d1.ty.domain == d2.ty:
                            out.append(Derivation(ctx, e, d1.ty.codomain, "App", (d1, d2), (p1, p2)))
            return tuple(out)
        case If(c, t, f):
            out = []
            for p1, p2 in _splits(ctx, 2):
                for dc in declarative_search(p1, c):
                    if dc.ty != BOOL:
                        continue
                    for dt in declarative_search(p2, t):
                        for df in declarative_search(p2, f):
                            if dt.ty == df.ty:
                                out.append(Derivation(ctx, e, dt.ty, "If", (dc, dt, df), (p1, p2)))
            return tuple(out)
        case Iter(b, y, s, c):
            out = []
            for p1, p2, p3 in _splits(ctx, 3):
                if y in p2:
                    continue
                for db in declarative_search(p1, b):
                    for ds in declarative_search(p2.extend(y, db.ty), s):
                        if ds.ty != db.ty:
                            continue
                        for dn in declarative_search(p3, c):
                            if dn.ty == NAT:
                                out.append(Derivation(ctx, e, db.ty, "Iter", (db, ds, dn), (p1, p2, p3)))
            return tuple(out)
    raise TypeError(e)


def enumerate_programs(ctx: Ctx, max_depth: int, max_size: int, min_size: int = 1):
    scope = tuple(ctx.names)
    for n in range(min_size, max_size + 1):
        yield from exprs_of_size(scope, max_depth, n)
