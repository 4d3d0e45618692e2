"""Compile typing derivations to multilinear maps over the semantic spaces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .semval import (
    Map,
    SemTy,
    SemValue,
    Seq,
    ShapeMismatch,
    Vec2,
    VFn,
    base_dim,
    basis,
    linear_combination,
    sem_type,
    semty_of,
    to_coords,
    zero,
)
from .syntax import Ctx, Expr
from .typecheck import Derivation, typecheck

TT = Vec2(1.0, 0.0)
FF = Vec2(0.0, 1.0)


class NotASubcontext(Exception):
    pass


class UnsupportedSignature(Exception):
    pass


@dataclass(frozen=True)
class Env:
    """One semantic value per binder of ``ctx``; the empty env is the unit {0}."""

    ctx: Ctx
    values: tuple = ()

    def __post_init__(self):
        if len(self.values) != len(self.ctx):
            raise ShapeMismatch(
                f"environment has {len(self.values)} values for {len(self.ctx)} binders"
            )
        for (name, ty), v in zip(self.ctx, self.values):
            if semty_of(v) != sem_type(ty):
                raise ShapeMismatch(f"{name} expects {sem_type(ty)}, got {semty_of(v)}")

    @classmethod
    def of(cls, ctx: Ctx, mapping: dict) -> "Env":
        return cls(ctx, tuple(mapping[n] for n in ctx.names))

    def get(self, name) -> SemValue:
        return self.values[self.ctx.index_of(name) - 1]

    def replace(self, name, value) -> "Env":
        i = self.ctx.index_of(name) - 1
        if i < 0:
            raise KeyError(name)
        vals = list(self.values)
        vals[i] = value
        return Env(self.ctx, tuple(vals))


UNIT = Env(Ctx())


def restrict(env: Env, target: Ctx) -> Env:
    """Reshape ``env`` (over its own context) to the sub-context ``target``.

    Builds the tuple left to right: the restriction to ``target`` minus its
    last binder, extended with the source entry at that binder's index.
    """
    values: tuple = ()
    for name, ty in target:
        i = env.ctx.index_of(name)
        if i == 0 or env.ctx.type_of(name) != ty:
            raise NotASubcontext(f"{name}:{ty} is not in {env.ctx}")
        values = values + (env.values[i - 1],)
    return Env(target, values)


def _route(source: Ctx, target: Ctx) -> tuple:
    """Positions in ``source`` of ``target``'s binders (0-based)."""
    idx = []
    for name, ty in target:
        i = source.index_of(name)
        if i == 0 or source.type_of(name) != ty:
            raise NotASubcontext(f"{name}:{ty} is not in {source}")
        idx.append(i - 1)
    return tuple(idx)


@dataclass(frozen=True)
class CompiledProgram:
    signature: Ctx
    result: SemTy
    run: Callable  # tuple of SemValues -> SemValue
    derivation: Derivation | None = None

    def __call__(self, *values):
        return self.run(tuple(values))


def compile_derivation(d: Derivation) -> CompiledProgram:
    return CompiledProgram(d.ctx, sem_type(d.ty), _compile(d), d)


def compile_expr(e: Expr, ctx: Ctx = Ctx()) -> CompiledProgram:
    return compile_derivation(typecheck(ctx, e))


def _compile(d: Derivation) -> Callable:
    match d.rule:
        case "Var":
            return lambda s: s[0]
        case "True":
            return lambda s: TT
        case "False":
            return lambda s: FF
        case "Zero":
            z = Seq.one_hot(0)
            return lambda s: z
        case "Succ":
            k = 0
            while d.rule == "Succ":
                d, k = d.children[0], k + 1
            body = _compile(d)
            return lambda s: body(s).shift(k)
        case "Lam":
            (child,) = d.children
            body = _compile(child)
            dom, cod = sem_type(d.ty.domain), sem_type(d.ty.codomain)
            return lambda s: Map(dom, cod, lambda x: body(s + (x,)))
        case "App":
            f, a = map(_compile, d.children)
            r1, r2 = (_route(d.ctx, part) for part in d.split)
            return lambda s: f(tuple(s[i] for i in r1)).fn(a(tuple(s[i] for i in r2)))
        case "If":
            c, t, e = map(_compile, d.children)
            r1, r2 = (_route(d.ctx, part) for part in d.split)
            st = sem_type(d.ty)

            def soft_branch(s):
                w = c(tuple(s[i] for i in r1))
                s2 = tuple(s[i] for i in r2)
                # a zero weight contributes nothing, so its branch is not run
                terms = []
                if w.a != 0.0:
                    terms.append((w.a, t(s2)))
                if w.b != 0.0:
                    terms.append((w.b, e(s2)))
                return linear_combination(terms, st)

            return soft_branch
        case "Iter":
            base, step, count = map(_compile, d.children)
            r1, r2, r3 = (_route(d.ctx, part) for part in d.split)
            st = sem_type(d.ty)

            def recurrence(s):
                n = count(tuple(s[i] for i in r3))
                if not n.support:
                    return zero(st)
                state = base(tuple(s[i] for i in r1))
                s2 = tuple(s[i] for i in r2)
                terms = []
                k = 0
                # states f^0(v), f^1(v), ... are produced once each
                for idx, coeff in n.support:
                    while k < idx:
                        state = step(s2 + (state,))
                        k += 1
                    terms.append((coeff, state))
                return linear_combination(terms, st)

            return recurrence
    raise ValueError(f"unknown rule {d.rule!r}")


def link(p: CompiledProgram, env: Env = UNIT) -> SemValue:
    if env.ctx != p.signature:
        if env.ctx.as_set() != p.signature.as_set():
            raise ShapeMismatch(f"environment over ({env.ctx}) does not match ({p.signature})")
        env = restrict(env, p.signature)
    return p.run(env.values)


def matrix_of(p: CompiledProgram, trunc: int = 10) -> np.ndarray:
    """Dense matrix of a base-to-base program by probing basis vectors.

    Accepts an open program with a single base-type binder, or a closed
    program whose result is a map between base types.
    """
    if trunc < 1:
        raise ValueError("trunc must be at least 1")
    if len(p.signature) == 1:
        (name, ty), = p.signature
        dom, cod = sem_type(ty), p.result
        if isinstance(dom, VFn) or isinstance(cod, VFn):
            raise UnsupportedSignature("matrix extraction needs base-type domain and result")
        fn = lambda x: p.run((x,))  # noqa: E731
    elif len(p.signature) == 0 and isinstance(p.result, VFn):
        dom, cod = p.result.domain, p.result.codomain
        if isinstance(dom, VFn) or isinstance(cod, VFn):
            raise UnsupportedSignature("matrix extraction needs a map between base types")
        fn = p.run(()).fn
    else:
        raise UnsupportedSignature(
            f"matrix extraction needs one base-type binder, got ({p.signature}) -> {p.result}"
        )
    cols = [to_coords(fn(e), trunc) for e in basis(dom, trunc)]
    m = np.column_stack(cols)
    assert m.shape == (base_dim(cod, trunc), base_dim(dom, trunc))
    return m
