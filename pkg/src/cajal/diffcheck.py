"""Gradients of compiled programs, finite-difference checks, and the
recurrent-unfolding demo.

Compiled programs are linear in each environment slot, so the gradient of
``<c, p(env)>`` in one slot is read off exactly by probing basis vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .compiler import CompiledProgram, Env, compile_expr, link
from .semval import (
    Seq,
    ShapeMismatch,
    Vec2,
    VBool,
    VFn,
    base_dim,
    basis,
    from_coords,
    inner,
    matrix_map,
    sem_type,
    semty_of,
    to_coords,
)
from .syntax import parse, parse_ctx


class UnsupportedBinder(Exception):
    pass


# ---------------------------------------------------------------- dynamical systems


@dataclass(frozen=True)
class DynSystem:
    init: tuple
    transition: tuple  # rows of a 2x2 matrix

    def __post_init__(self):
        object.__setattr__(self, "init", tuple(self.init))
        object.__setattr__(self, "transition", tuple(tuple(r) for r in self.transition))
        if len(self.init) != 2 or len(self.transition) != 2 or any(len(r) != 2 for r in self.transition):
            raise ShapeMismatch("a DynSystem has a 2-vector state and a 2x2 transition")
        for x in self.init + self.transition[0] + self.transition[1]:
            if isinstance(x, float) and not math.isfinite(x):
                raise ValueError("DynSystem entries must be finite")

    def step(self, v):
        (a, b), (c, d) = self.transition
        return (a * v[0] + b * v[1], c * v[0] + d * v[1])


# the running example: f(0) = (1, 0), f(n+1) = M f(n)
EXAMPLE_SYSTEM = DynSystem((1, 0), ((0, 2), (3, 0)))


def unfold(sys: DynSystem, steps: int) -> list:
    """States f(0) .. f(steps).  Integer entries stay exact integers."""
    out = [sys.init]
    for _ in range(steps):
        out.append(sys.step(out[-1]))
    return out


def g_restricted(sys: DynSystem, x) -> tuple:
    """sum_i x_i f(i): the unfolded system as a linear function of x."""
    x = list(x)
    states = unfold(sys, max(len(x) - 1, 0))
    a = sum(xi * s[0] for xi, s in zip(x, states))
    b = sum(xi * s[1] for xi, s in zip(x, states))
    return (a, b)


# ---------------------------------------------------------------- gradients


@dataclass
class Gradient:
    binder: str
    kind: str  # "bool", "nat" or "matrix"
    values: np.ndarray

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _probes(st, trunc):
    """Basis of a binder's (truncated) space, with coordinate shape."""
    if isinstance(st, VFn):
        dom, cod = st.domain, st.codomain
        if isinstance(dom, VFn) or isinstance(cod, VFn):
            raise UnsupportedBinder(f"cannot differentiate with respect to a {st} binder")
        rows, cols = base_dim(cod, trunc), base_dim(dom, trunc)
        probes = []
        for i in range(rows):
            for j in range(cols):
                m = np.zeros((rows, cols))
                m[i, j] = 1.0
                probes.append(matrix_map(dom, cod, m))
        return probes, (rows, cols), "matrix"
    probes = basis(st, trunc)
    return probes, (len(probes),), "bool" if st == VBool() else "nat"


def _objective(p: CompiledProgram, env: Env, cotangent):
    def f(values):
        out = link(p, Env(env.ctx, values))
        return inner(cotangent, out)

    return f


def grad(p: CompiledProgram, env: Env, binder: str, cotangent, trunc: int = 10) -> Gradient:
    """Gradient of <cotangent, p(env)> with respect to ``binder``'s value."""
    if trunc < 1:
        raise ValueError("trunc must be at least 1")
    i = env.ctx.index_of(binder) - 1
    if i < 0:
        raise KeyError(f"{binder!r} is not bound in ({env.ctx})")
    if semty_of(cotangent) != p.result:
        raise ShapeMismatch(f"cotangent in {semty_of(cotangent)}, program result in {p.result}")
    probes, shape, kind = _probes(sem_type(env.ctx.type_of(binder)), trunc)
    f = _objective(p, env, cotangent)
    vals = list(env.values)
    out = []
    for e in probes:
        vals[i] = e
        out.append(f(tuple(vals)))
    return Gradient(binder, kind, np.array(out).reshape(shape))


def _as_coords(v, kind, trunc):
    if kind == "matrix":
        m = getattr(v, "matrix", None)
        if m is None:
            raise UnsupportedBinder("finite differences need a matrix-backed map value")
        return np.array(m, dtype=float)
    return to_coords(v, trunc)


def _from_coords(st, kind, coords):
    if kind == "matrix":
        return matrix_map(st.domain, st.codomain, coords)
    return from_coords(st, coords)


def fd_check(
    p: CompiledProgram, env: Env, binder: str, cotangent, trunc: int = 10, h: float = 1e-5
) -> float:
    """Max over coordinates of |analytic - central FD| / max(1, |analytic|)."""
    if h <= 0:
        raise ValueError("h must be positive")
    g = grad(p, env, binder, cotangent, trunc)
    i = env.ctx.index_of(binder) - 1
    st = sem_type(env.ctx.type_of(binder))
    x0 = _as_coords(env.values[i], g.kind, trunc)
    if g.kind == "nat":
        # coordinates beyond the truncation are held fixed
        rest = [(n, c) for n, c in env.values[i].support if n >= trunc]
    f = _objective(p, env, cotangent)
    vals = list(env.values)
    worst = 0.0
    for idx in np.ndindex(*g.values.shape):
        fx = []
        for sign in (1.0, -1.0):
            x = x0.copy()
            x[idx] += sign * h
            v = _from_coords(st, g.kind, x)
            if g.kind == "nat" and rest:
                v = Seq(list(v.support) + rest)
            vals[i] = v
            fx.append(f(tuple(vals)))
        fd = (fx[0] - fx[1]) / (2 * h)
        a = g.values[idx]
        worst = max(worst, abs(a - fd) / max(1.0, abs(a)))
    return worst


# ---------------------------------------------------------------- training demo

# state b, transition m, learned count n: the output is sum_j n_j m^j b
TRAIN_PROGRAM = "iter b {y -> m y} n"
TRAIN_CTX = "b:Bool, m:Bool -o Bool, n:Nat"


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return DynSystem((1, 0), ((c, -s), (s, c)))


# Fitting one system's state f(k) alone has many exact solutions (f(j) for
# different j are collinear), so the count would not be identified.  The
# auxiliary rotations share the count and pin it to the one-hot at k.
AUX_SYSTEMS = tuple(_rotation(t) for t in (0.4, 0.9, 1.7, 2.3, 2.9))


@dataclass
class TrainResult:
    loss: float
    counts: np.ndarray
    trace: list = field(default_factory=list)

    @property
    def argmax(self) -> int:
        w = self.counts / max(np.sum(np.abs(self.counts)), 1e-300)
        return int(np.argmax(w))


def toy_train(
    system: DynSystem = EXAMPLE_SYSTEM,
    k: int = 2,
    steps: int = 5000,
    lr: float = 0.1,
    trunc: int = 10,
    init=None,
    aux: tuple = AUX_SYSTEMS,
) -> TrainResult:
    """Gradient descent on the count vector of a compiled iteration so that
    it reproduces state f(k) of ``system`` (and of each auxiliary system).

    Each system's squared error is divided by the energy of its first
    ``trunc`` states so systems with growing states do not dominate.
    """
    if not 0 <= k < trunc:
        raise ValueError("target step must be below the truncation")
    p = compile_expr(parse(TRAIN_PROGRAM), parse_ctx(TRAIN_CTX))
    ctx = p.signature
    samples = []
    for sys in (system,) + tuple(aux):
        states = unfold(sys, trunc - 1)
        energy = sum(float(a) ** 2 + float(b) ** 2 for a, b in states)
        b0 = Vec2(*map(float, sys.init))
        m = matrix_map(sem_type(ctx.type_of("b")), sem_type(ctx.type_of("b")),
                       np.array(sys.transition, dtype=float))
        target = Vec2(*map(float, states[k]))
        samples.append((b0, m, target, energy))

    n = np.zeros(trunc) if init is None else np.array(init, dtype=float)
    if n.shape != (trunc,):
        raise ShapeMismatch(f"initial counts must have length {trunc}")

    def loss_and_grad(n):
        nseq = Seq.from_dense(n)
        total, g = 0.0, np.zeros(trunc)
        for b0, m, target, energy in samples:
            env = Env(ctx, (b0, m, nseq))
            out = link(p, env)
            r = Vec2(out.a - target.a, out.b - target.b)
            total += inner(r, r) / energy
            cot = Vec2(2 * r.a / energy, 2 * r.b / energy)
            g += grad(p, env, "n", cot, trunc).values
        return total / len(samples), g / len(samples)

    trace = []
    for _ in range(steps):
        loss, g = loss_and_grad(n)
        trace.append(loss)
        n = n - lr * g
    final, _ = loss_and_grad(n)
    trace.append(final)
    return TrainResult(final, n, trace)


def exact_states(sys: DynSystem, steps: int) -> list:
    """``unfold`` with rational arithmetic, used as an oracle."""
    conv = DynSystem(tuple(map(Fraction, sys.init)),
                     tuple(tuple(map(Fraction, r)) for r in sys.transition))
    return unfold(conv, steps)
