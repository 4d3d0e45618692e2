"""Target vector spaces: R^2 for Bool, finite-support sequences for Nat,
and linear maps between them for function types.

All values are immutable.  Sequences are stored sparsely as sorted
``(index, coefficient)`` pairs with no zero coefficients, so the
infinite-dimensional space needs no truncation bound.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .syntax import BoolTy, Fn, NatTy, Ty

REL_TOL = 1e-9
ABS_TOL = 1e-12


class ShapeMismatch(Exception):
    pass


class NonFiniteError(ValueError):
    pass


def _finite(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteError(f"non-finite scalar {x!r}")
    return x


# ---------------------------------------------------------------- semantic types


@dataclass(frozen=True)
class VBool:
    def __str__(self):
        return "R^2"


@dataclass(frozen=True)
class VNat:
    def __str__(self):
        return "Seq"


@dataclass(frozen=True)
class VFn:
    domain: "SemTy"
    codomain: "SemTy"

    def __str__(self):
        return f"Lin({self.domain}, {self.codomain})"


SemTy = Union[VBool, VNat, VFn]


def sem_type(ty: Ty) -> SemTy:
    match ty:
        case BoolTy():
            return VBool()
        case NatTy():
            return VNat()
        case Fn(a, b):
            return VFn(sem_type(a), sem_type(b))
    raise TypeError(f"not a type: {ty!r}")


def source_type(st: SemTy) -> Ty:
    from .syntax import BOOL, NAT

    match st:
        case VBool():
            return BOOL
        case VNat():
            return NAT
        case VFn(a, b):
            return Fn(source_type(a), source_type(b))
    raise TypeError(f"not a semantic type: {st!r}")


# ---------------------------------------------------------------- values


@dataclass(frozen=True)
class Vec2:
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _finite(self.a))
        object.__setattr__(self, "b", _finite(self.b))

    @property
    def semty(self):
        return VBool()

    def __iter__(self):
        return iter((self.a, self.b))


class Seq:
    """Finite-support real sequence."""

    __slots__ = ("support",)

    def __init__(self, pairs=()):
        acc: dict = {}
        for n, c in pairs:
            n = int(n)
            if n < 0:
                raise ValueError(f"negative sequence index {n}")
            acc[n] = acc.get(n, 0.0) + _finite(c)
        object.__setattr__(
            self, "support", tuple((n, c) for n, c in sorted(acc.items()) if c != 0.0)
        )

    def __setattr__(self, *_):
        raise AttributeError("Seq is immutable")

    @classmethod
    def _trusted(cls, support):
        s = object.__new__(cls)
        object.__setattr__(s, "support", support)
        return s

    @classmethod
    def one_hot(cls, k: int) -> "Seq":
        return cls._trusted(((int(k), 1.0),))

    @classmethod
    def from_dense(cls, coeffs) -> "Seq":
        return cls(enumerate(coeffs))

    @property
    def semty(self):
        return VNat()

    def at(self, n: int) -> float:
        for i, c in self.support:
            if i == n:
                return c
            if i > n:
                break
        return 0.0

    def max_index(self) -> int:
        return self.support[-1][0] if self.support else -1

    def shift(self, k: int = 1) -> "Seq":
        return Seq._trusted(tuple((n + k, c) for n, c in self.support))

    def dense(self, length: int) -> np.ndarray:
        out = np.zeros(length)
        for n, c in self.support:
            if n < length:
                out[n] = c
        return out

    def __eq__(self, other):
        return isinstance(other, Seq) and self.support == other.support

    def __hash__(self):
        return hash(self.support)

    def __repr__(self):
        return f"Seq({list(self.support)})"


@dataclass(frozen=True, eq=False)
class Map:
    """A linear map, kept abstract as a function.

    ``fn`` is memoized: maps built by iterating function-typed states call
    their predecessors on the same arguments many times over.
    """

    domain: SemTy
    codomain: SemTy
    fn: Callable

    def __post_init__(self):
        if not hasattr(self.fn, "cache_info"):
            object.__setattr__(self, "fn", functools.lru_cache(maxsize=4096)(self.fn))

    @property
    def semty(self):
        return VFn(self.domain, self.codomain)

    def __call__(self, x):
        if semty_of(x) != self.domain:
            raise ShapeMismatch(f"map expects {self.domain}, got {semty_of(x)}")
        return self.fn(x)

    def __repr__(self):
        return f"Map({self.domain} -> {self.codomain})"


SemValue = Union[Vec2, Seq, Map]


def semty_of(v: SemValue) -> SemTy:
    try:
        return v.semty
    except AttributeError:
        raise ShapeMismatch(f"not a semantic value: {v!r}") from None


# ---------------------------------------------------------------- vector space


def add(u: SemValue, v: SemValue) -> SemValue:
    if isinstance(u, Vec2) and isinstance(v, Vec2):
        return Vec2(u.a + v.a, u.b + v.b)
    if isinstance(u, Seq) and isinstance(v, Seq):
        if not u.support:
            return v
        if not v.support:
            return u
        acc = dict(u.support)
        for n, c in v.support:
            acc[n] = acc.get(n, 0.0) + c
        return Seq(acc.items())
    if isinstance(u, Map) and isinstance(v, Map) and u.semty == v.semty:
        f, g = u.fn, v.fn
        return Map(u.domain, u.codomain, lambda x: add(f(x), g(x)))
    raise ShapeMismatch(f"cannot add {semty_of(u)} and {semty_of(v)}")


def scale(a: float, v: SemValue) -> SemValue:
    a = _finite(a)
    if isinstance(v, Vec2):
        return Vec2(a * v.a, a * v.b)
    if isinstance(v, Seq):
        if a == 1.0:
            return v
        return Seq((n, a * c) for n, c in v.support)
    if isinstance(v, Map):
        f = v.fn
        return Map(v.domain, v.codomain, lambda x: scale(a, f(x)))
    raise ShapeMismatch(f"cannot scale {v!r}")


def zero(st: SemTy) -> SemValue:
    match st:
        case VBool():
            return Vec2(0.0, 0.0)
        case VNat():
            return Seq()
        case VFn(a, b):
            z = zero(b)
            return Map(a, b, lambda x: z)
    raise TypeError(f"not a semantic type: {st!r}")


def linear_combination(terms, st: SemTy) -> SemValue:
    """Sum of ``coeff * value`` over ``terms``; the zero of ``st`` if empty."""
    terms = [(c, v) for c, v in terms if c != 0.0]
    if not terms:
        return zero(st)
    if st == VBool():
        return Vec2(sum(c * v.a for c, v in terms), sum(c * v.b for c, v in terms))
    if st == VNat():
        acc: dict = {}
        for c, v in terms:
            for n, x in v.support:
                acc[n] = acc.get(n, 0.0) + c * x
        return Seq(acc.items())
    out = scale(terms[0][0], terms[0][1])
    for c, v in terms[1:]:
        out = add(out, scale(c, v))
    return out


def proj(i: int, v: SemValue) -> float:
    if not isinstance(v, Vec2):
        raise ShapeMismatch(f"projection needs a 2-vector, got {semty_of(v)}")
    if i == 1:
        return v.a
    if i == 2:
        return v.b
    raise ValueError(f"projection index must be 1 or 2, got {i}")


def seq_at(s: Seq, n: int) -> float:
    return s.at(n)


def power_apply(f: Map, n: int, v: SemValue) -> SemValue:
    if not isinstance(f, Map) or f.domain != f.codomain:
        raise ShapeMismatch("power_apply needs an endomorphism")
    if semty_of(v) != f.domain:
        raise ShapeMismatch(f"power_apply: {semty_of(v)} is not {f.domain}")
    for _ in range(n):
        v = f.fn(v)
    return v


def inner(u: SemValue, v: SemValue) -> float:
    if isinstance(u, Vec2) and isinstance(v, Vec2):
        return u.a * v.a + u.b * v.b
    if isinstance(u, Seq) and isinstance(v, Seq):
        d = dict(v.support)
        return sum(c * d.get(n, 0.0) for n, c in u.support)
    raise ShapeMismatch(f"inner product needs matching base values, got {u!r} and {v!r}")


def norm(v: SemValue) -> float:
    return math.sqrt(inner(v, v))


# ---------------------------------------------------------------- comparison


def close(u: SemValue, v: SemValue, rel=REL_TOL, abs_tol=ABS_TOL, scale_hint=0.0) -> bool:
    """Coefficient-wise comparison of base-type values.

    Each coefficient pair must agree within ``rel`` times the larger magnitude
    (or ``scale_hint`` when that is larger), falling back to ``abs_tol``.
    """
    pairs = _coeff_pairs(u, v)
    for x, y in pairs:
        tol = max(rel * max(abs(x), abs(y), scale_hint), abs_tol)
        if abs(x - y) > tol:
            return False
    return True


def max_abs_diff(u: SemValue, v: SemValue) -> float:
    return max((abs(x - y) for x, y in _coeff_pairs(u, v)), default=0.0)


def _coeff_pairs(u, v):
    if isinstance(u, Vec2) and isinstance(v, Vec2):
        return [(u.a, v.a), (u.b, v.b)]
    if isinstance(u, Seq) and isinstance(v, Seq):
        du, dv = dict(u.support), dict(v.support)
        return [(du.get(n, 0.0), dv.get(n, 0.0)) for n in sorted(set(du) | set(dv))]
    raise ShapeMismatch(
        f"only base-type values can be compared, got {semty_of(u)} and {semty_of(v)}"
    )


def magnitude(v: SemValue) -> float:
    if isinstance(v, Vec2):
        return max(abs(v.a), abs(v.b))
    if isinstance(v, Seq):
        return max((abs(c) for _, c in v.support), default=0.0)
    raise ShapeMismatch(f"no magnitude for {semty_of(v)}")


# ---------------------------------------------------------------- matrices


def base_dim(st: SemTy, trunc: int) -> int:
    if st == VBool():
        return 2
    if st == VNat():
        return trunc
    raise ShapeMismatch(f"{st} is not a base type")


def basis(st: SemTy, trunc: int) -> list:
    if st == VBool():
        return [Vec2(1.0, 0.0), Vec2(0.0, 1.0)]
    if st == VNat():
        return [Seq.one_hot(j) for j in range(trunc)]
    raise ShapeMismatch(f"{st} is not a base type")


def to_coords(v: SemValue, trunc: int) -> np.ndarray:
    if isinstance(v, Vec2):
        return np.array([v.a, v.b])
    if isinstance(v, Seq):
        return v.dense(trunc)
    raise ShapeMismatch(f"{semty_of(v)} has no coordinates")


def from_coords(st: SemTy, coords) -> SemValue:
    if st == VBool():
        a, b = coords
        return Vec2(a, b)
    if st == VNat():
        return Seq.from_dense(coords)
    raise ShapeMismatch(f"{st} is not a base type")


def matrix_map(domain: SemTy, codomain: SemTy, matrix) -> Map:
    """Linear map given by a dense matrix between base types.

    For a sequence domain, entries beyond the matrix's column count are
    ignored; the map stays linear.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix must be 2-D and finite")
    rows, cols = m.shape
    if domain == VBool() and cols != 2 or codomain == VBool() and rows != 2:
        raise ShapeMismatch(f"a {rows}x{cols} matrix cannot map {domain} to {codomain}")

    def apply(x):
        y = m @ to_coords(x, cols)
        return from_coords(codomain, y)

    out = Map(domain, codomain, apply)
    object.__setattr__(out, "matrix", m)
    return out
