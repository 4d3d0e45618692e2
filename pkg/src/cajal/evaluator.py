"""Big-step call-by-value evaluation by substitution."""
from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    App,
    Expr,
    Ff,
    If,
    Iter,
    Lam,
    Succ,
    Tt,
    Var,
    Zero,
    as_numeral,
    is_value,
    pretty,
)

DEFAULT_BUDGET = 10**6


class EvalError(Exception):
    pass


class BudgetExceeded(EvalError):
    pass


class StuckTerm(EvalError):
    """Raised when no evaluation rule applies; unreachable for well-typed input."""

    def __init__(self, expr):
        super().__init__(f"stuck at {pretty(expr)}")
        self.expr = expr


@dataclass
class EvalBudget:
    max_steps: int = DEFAULT_BUDGET
    used: int = 0

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")

    def tick(self, n=1):
        self.used += n
        if self.used > self.max_steps:
            raise BudgetExceeded(f"evaluation exceeded {self.max_steps} steps")


def subst(e: Expr, name: str, v: Expr) -> Expr:
    """Replace free occurrences of ``name`` in ``e`` by the closed value ``v``."""
    match e:
        case Var(x):
            return v if x == name else e
        case Tt() | Ff() | Zero():
            return e
        case Succ(body):
            if as_numeral(e) is not None:
                return e
            return Succ(subst(body, name, v), pos=e.pos)
        case Lam(x, ty, body):
            if x == name:
                return e
            return Lam(x, ty, subst(body, name, v), pos=e.pos)
        case App(f, a):
            return App(subst(f, name, v), subst(a, name, v), pos=e.pos)
        case If(c, t, f):
            return If(subst(c, name, v), subst(t, name, v), subst(f, name, v), pos=e.pos)
        case Iter(base, y, step, count):
            step2 = step if y == name else subst(step, name, v)
            return Iter(subst(base, name, v), y, step2, subst(count, name, v), pos=e.pos)
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, budget: EvalBudget | None = None) -> Expr:
    budget = budget if budget is not None else EvalBudget()
    return _eval(e, budget)


def _eval(e: Expr, budget: EvalBudget) -> Expr:
    budget.tick()
    if is_value(e):
        return e
    match e:
        case Succ():
            # peel the successor chain so deep numerals do not recurse
            layers = 0
            while isinstance(e, Succ):
                e = e.body
                layers += 1
            v = _eval(e, budget)
            budget.tick(layers - 1)
            for _ in range(layers):
                v = Succ(v)
            return v
        case App(f, a):
            fv = _eval(f, budget)
            if not isinstance(fv, Lam):
                raise StuckTerm(e)
            av = _eval(a, budget)
            return _eval(subst(fv.body, fv.binder, av), budget)
        case If(c, t, f):
            cv = _eval(c, budget)
            if isinstance(cv, Tt):
                return _eval(t, budget)
            if isinstance(cv, Ff):
                return _eval(f, budget)
            raise StuckTerm(e)
        case Iter(base, y, step, count):
            n = as_numeral(_eval(count, budget))
            if n is None:
                raise StuckTerm(e)
            # one rule application per unrolling; the count value re-evaluates to itself
            budget.tick(n)
            v = _eval(base, budget)
            for _ in range(n):
                v = _eval(subst(step, y, v), budget)
            return v
        case Var():
            raise StuckTerm(e)
    raise TypeError(f"not an expression: {e!r}")
