"""Linear typechecking with explicit derivations.

``typecheck`` infers, for every subterm, the exact set of context variables it
consumes.  Under linearity that set determines each context split, so the
derivation is built deterministically.  ``validate`` replays the declarative
rules on a finished derivation and shares no code with the inference.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    BOOL,
    EMPTY,
    NAT,
    App,
    Ctx,
    Expr,
    Ff,
    Fn,
    If,
    Iter,
    Lam,
    Succ,
    Tt,
    Ty,
    Var,
    Zero,
    alpha_rename,
    binders,
    free_occurrences,
)

RULES = ("Var", "True", "False", "Zero", "Succ", "Lam", "App", "If", "Iter")


class CajalTypeError(Exception):
    """Base class; ``expr`` is the offending node when known."""

    def __init__(self, message, expr: Optional[Expr] = None):
        super().__init__(message)
        self.expr = expr

    @property
    def pos(self):
        return getattr(self.expr, "pos", None)


class UnboundVariable(CajalTypeError):
    def __init__(self, name, expr=None):
        super().__init__(f"unbound variable {name!r}", expr)
        self.name = name


class NonlinearUse(CajalTypeError):
    def __init__(self, name, count, expr=None):
        super().__init__(f"variable {name!r} used {count} times (linear variables are used once)", expr)
        self.name = name
        self.count = count


class UnusedVariable(CajalTypeError):
    def __init__(self, name, expr=None):
        super().__init__(f"variable {name!r} is never used (linear variables cannot be discarded)", expr)
        self.name = name


class Mismatch(CajalTypeError):
    def __init__(self, expected, found, expr=None):
        super().__init__(f"type mismatch: expected {expected}, found {found}", expr)
        self.expected = expected
        self.found = found


class BranchContextMismatch(CajalTypeError):
    def __init__(self, then_vars, else_vars, expr=None):
        super().__init__(
            f"branches of 'if' must use the same variables: "
            f"then uses {sorted(then_vars)}, else uses {sorted(else_vars)}",
            expr,
        )
        self.then_vars = frozenset(then_vars)
        self.else_vars = frozenset(else_vars)


class CountNotNat(CajalTypeError):
    def __init__(self, found, expr=None):
        super().__init__(f"iteration count must be Nat, found {found}", expr)
        self.found = found


@dataclass(frozen=True)
class Derivation:
    ctx: Ctx
    expr: Expr
    ty: Ty
    rule: str
    children: tuple = ()
    split: Optional[tuple] = None

    def nodes(self):
        """Pre-order traversal as (depth, node) pairs."""
        stack = [(0, self)]
        while stack:
            level, d = stack.pop()
            yield level, d
            stack.extend((level + 1, c) for c in reversed(d.children))

    def rules_used(self) -> set:
        return {d.rule for _, d in self.nodes()}

    def render(self) -> str:
        from .syntax import pretty

        lines = []
        for level, d in self.nodes():
            line = f"{'  ' * level}[{d.rule}] {d.ctx} ⊢ {pretty(d.expr)} : {d.ty}"
            if d.split is not None:
                line += "   split " + " ⊙ ".join(f"({p})" for p in d.split)
            lines.append(line)
        return "\n".join(lines)


def split_ok(parent: Ctx, parts) -> bool:
    seen: set = set()
    union: set = set()
    for p in parts:
        names = set(p.names)
        if names & seen:
            return False
        seen |= names
        union |= p.as_set()
    return union == parent.as_set()


# ---------------------------------------------------------------- inference


def typecheck(ctx: Ctx, e: Expr) -> Derivation:
    names = binders(e)
    if len(set(names)) != len(names) or set(names) & set(ctx.names):
        e = alpha_rename(e, avoid=ctx.names)
    rank = {name: i for i, name in enumerate(ctx.names)}
    d = _infer(dict(ctx.binders), rank, e)
    used = set(d.ctx.names)
    for name in ctx.names:
        if name not in used:
            raise UnusedVariable(name, e)
    return d


def type_of(ctx: Ctx, e: Expr) -> Ty:
    return typecheck(ctx, e).ty


def _sub(rank, avail, names) -> Ctx:
    return Ctx(tuple((n, avail[n]) for n in sorted(names, key=rank.__getitem__)))


def _disjoint(e, *parts):
    seen: set = set()
    for p in parts:
        clash = seen & set(p.names)
        if clash:
            name = min(clash)
            raise NonlinearUse(name, free_occurrences(e).get(name, 2), e)
        seen |= set(p.names)


def _infer(avail: dict, rank: dict, e: Expr) -> Derivation:
    match e:
        case Var(x):
            if x not in avail:
                raise UnboundVariable(x, e)
            return Derivation(Ctx(((x, avail[x]),)), e, avail[x], "Var")
        case Tt():
            return Derivation(EMPTY, e, BOOL, "True")
        case Ff():
            return Derivation(EMPTY, e, BOOL, "False")
        case Zero():
            return Derivation(EMPTY, e, NAT, "Zero")
        case Succ():
            chain = []
            while isinstance(e, Succ):
                chain.append(e)
                e = e.body
            d = _infer(avail, rank, e)
            if d.ty != NAT:
                raise Mismatch(NAT, d.ty, e)
            for node in reversed(chain):
                d = Derivation(d.ctx, node, NAT, "Succ", (d,))
            return d
        case Lam(x, ty, body):
            d = _infer({**avail, x: ty}, {**rank, x: len(rank)}, body)
            if x not in d.ctx:
                raise UnusedVariable(x, e)
            outer = Ctx(d.ctx.binders[:-1])
            return Derivation(outer, e, Fn(ty, d.ty), "Lam", (d,))
        case App(f, a):
            df = _infer(avail, rank, f)
            da = _infer(avail, rank, a)
            if not isinstance(df.ty, Fn):
                raise Mismatch("a function type", df.ty, f)
            if df.ty.domain != da.ty:
                raise Mismatch(df.ty.domain, da.ty, a)
            _disjoint(e, df.ctx, da.ctx)
            ctx = _sub(rank, avail, set(df.ctx.names) | set(da.ctx.names))
            return Derivation(ctx, e, df.ty.codomain, "App", (df, da), (df.ctx, da.ctx))
        case If(c, t, f):
            dc = _infer(avail, rank, c)
            dt = _infer(avail, rank, t)
            df = _infer(avail, rank, f)
            if dc.ty != BOOL:
                raise Mismatch(BOOL, dc.ty, c)
            if dt.ty != df.ty:
                raise Mismatch(dt.ty, df.ty, f)
            _disjoint(e, dc.ctx, _sub(rank, avail, set(dt.ctx.names) | set(df.ctx.names)))
            if set(dt.ctx.names) != set(df.ctx.names):
                raise BranchContextMismatch(dt.ctx.names, df.ctx.names, e)
            ctx = _sub(rank, avail, set(dc.ctx.names) | set(dt.ctx.names))
            return Derivation(ctx, e, dt.ty, "If", (dc, dt, df), (dc.ctx, dt.ctx))
        case Iter(base, y, step, count):
            db = _infer(avail, rank, base)
            ds = _infer({**avail, y: db.ty}, {**rank, y: len(rank)}, step)
            dn = _infer(avail, rank, count)
            if y not in ds.ctx:
                raise UnusedVariable(y, e)
            if ds.ty != db.ty:
                raise Mismatch(db.ty, ds.ty, step)
            if dn.ty != NAT:
                raise CountNotNat(dn.ty, count)
            step_ctx = Ctx(ds.ctx.binders[:-1])
            _disjoint(e, db.ctx, step_ctx, dn.ctx)
            ctx = _sub(rank, avail, set(db.ctx.names) | set(step_ctx.names) | set(dn.ctx.names))
            return Derivation(ctx, e, db.ty, "Iter", (db, ds, dn), (db.ctx, step_ctx, dn.ctx))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------- validation


def validate(d: Derivation) -> bool:
    """Check that every node instantiates one of the declarative rules."""
    try:
        return _valid(d)
    except (AttributeError, TypeError, ValueError, IndexError):
        return False


def _valid(d: Derivation) -> bool:
    e, ctx, ty, kids = d.expr, d.ctx, d.ty, d.children
    match d.rule:
        case "Var":
            return (
                isinstance(e, Var) and not kids and ctx.binders == ((e.name, ty),)
            )
        case "True":
            return isinstance(e, Tt) and not kids and len(ctx) == 0 and ty == BOOL
        case "False":
            return isinstance(e, Ff) and not kids and len(ctx) == 0 and ty == BOOL
        case "Zero":
            return isinstance(e, Zero) and not kids and len(ctx) == 0 and ty == NAT
        case "Succ":
            while d.rule == "Succ":
                e, ctx, kids = d.expr, d.ctx, d.children
                ok = (
                    isinstance(e, Succ)
                    and d.ty == NAT
                    and len(kids) == 1
                    and (kids[0].expr is e.body or kids[0].expr == e.body)
                    and kids[0].ctx == ctx
                    and kids[0].ty == NAT
                )
                if not ok:
                    return False
                d = kids[0]
            return _valid(d)
        case "Lam":
            return (
                isinstance(e, Lam)
                and len(kids) == 1
                and ty == Fn(e.annotation, kids[0].ty)
                and kids[0].expr == e.body
                and e.binder not in ctx
                and kids[0].ctx == ctx.extend(e.binder, e.annotation)
                and _valid(kids[0])
            )
        case "App":
            if not (isinstance(e, App) and len(kids) == 2 and d.split and len(d.split) == 2):
                return False
            d1, d2 = kids
            return (
                split_ok(ctx, d.split)
                and d1.ctx == d.split[0]
                and d2.ctx == d.split[1]
                and d1.expr == e.fun
                and d2.expr == e.arg
                and d1.ty == Fn(d2.ty, ty)
                and _valid(d1)
                and _valid(d2)
            )
        case "If":
            if not (isinstance(e, If) and len(kids) == 3 and d.split and len(d.split) == 2):
                return False
            dc, dt, df = kids
            return (
                split_ok(ctx, d.split)
                and dc.ctx == d.split[0]
                and dt.ctx == d.split[1]
                and df.ctx == d.split[1]
                and (dc.expr, dt.expr, df.expr) == (e.cond, e.then, e.else_)
                and dc.ty == BOOL
                and dt.ty == ty
                and df.ty == ty
                and _valid(dc)
                and _valid(dt)
                and _valid(df)
            )
        case "Iter":
            if not (isinstance(e, Iter) and len(kids) == 3 and d.split and len(d.split) == 3):
                return False
            db, ds, dn = kids
            return (
                split_ok(ctx, d.split)
                and db.ctx == d.split[0]
                and e.binder not in d.split[1]
                and ds.ctx == d.split[1].extend(e.binder, ty)
                and dn.ctx == d.split[2]
                and (db.expr, ds.expr, dn.expr) == (e.base, e.step, e.count)
                and db.ty == ty
                and ds.ty == ty
                and dn.ty == NAT
                and _valid(db)
                and _valid(ds)
                and _valid(dn)
            )
    return False
