"""Random well-typed program generation and the differential oracle.

The generator is type- and context-directed: every call receives the exact
set of variables it must consume, and split nodes partition that set at
random between their children.  Failed branches backtrack, bounded by a
per-program attempt budget.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import semval
from .compiler import Env, compile_expr, link
from .evaluator import BudgetExceeded, EvalBudget, StuckTerm, evaluate, subst
from .semval import Seq, Vec2, close, magnitude, matrix_map, sem_type
from .syntax import (
    BOOL,
    EMPTY,
    FALSE,
    NAT,
    TRUE,
    App,
    Ctx,
    Expr,
    Fn,
    If,
    Iter,
    Lam,
    Succ,
    Ty,
    Var,
    alpha_rename,
    as_numeral,
    binders,
    children,
    free_vars,
    is_base,
    numeral,
    pretty,
    type_order,
)
from .typecheck import RULES, CajalTypeError, typecheck

GEN_RULES = ("Var", "Const", "Succ", "Lam", "App", "If", "Iter")


class GenerationFailed(Exception):
    pass


@dataclass
class GenConfig:
    seed: int = 0
    max_depth: int = 6
    max_numeral: int = 5
    # relative weights for the result types of generated subterms
    type_weights: dict = field(
        default_factory=lambda: {"Bool": 3.0, "Nat": 3.0, "Bool -o Bool": 1.0,
                                 "Nat -o Nat": 1.0, "Bool -o Nat": 0.5, "Nat -o Bool": 0.5}
    )
    rule_weights: dict = field(
        default_factory=lambda: {"Var": 4.0, "Const": 3.0, "Succ": 1.0, "Lam": 2.0,
                                 "App": 2.0, "If": 2.0, "Iter": 2.0}
    )
    max_order: int = 2
    # whether an iterator step may consume variables other than its own binder
    step_captures: bool = True
    # an iterator inside another iterator's step gets a closed count and a
    # step over its own binder only.  Otherwise an outer state can set an
    # inner count or be applied count-many times per unrolling, and the
    # evaluation cost grows exponentially in the outer count.
    isolate_nested_iters: bool = True
    max_attempts: int = 2000


def _parse_ty(s):
    from .syntax import parse_type

    return parse_type(s)


class _Gen:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.attempts = 0
        self.fresh = 0
        self.in_step = 0
        self.types = [(_parse_ty(k), w) for k, w in cfg.type_weights.items() if w > 0]
        self.types = [(t, w) for t, w in self.types if type_order(t) < cfg.max_order]

    def name(self, prefix):
        self.fresh += 1
        return f"{prefix}{self.fresh}"

    def tick(self):
        self.attempts += 1
        if self.attempts > self.cfg.max_attempts:
            raise GenerationFailed("attempt budget exhausted")

    def pick_type(self) -> Ty:
        types, weights = zip(*self.types)
        return self.rng.choices(types, weights)[0]

    def constant(self, ty) -> Optional[Expr]:
        if ty == BOOL:
            return self.rng.choice((TRUE, FALSE))
        if ty == NAT:
            return numeral(self.rng.randint(0, self.cfg.max_numeral))
        return None

    def partition(self, avail, k):
        parts = [[] for _ in range(k)]
        for b in avail:
            parts[self.rng.randrange(k)].append(b)
        return parts

    def gen(self, avail: list, ty: Ty, depth: int) -> Expr:
        """``avail`` is the exact list of binders the result must consume."""
        self.tick()
        if depth <= 1:
            return self.leaf(avail, ty)
        w = self.cfg.rule_weights
        options = []
        if len(avail) == 1 and avail[0][1] == ty:
            options.append(("Var", w.get("Var", 0)))
        if not avail and is_base(ty):
            options.append(("Const", w.get("Const", 0)))
        if ty == NAT:
            options.append(("Succ", w.get("Succ", 0)))
        if isinstance(ty, Fn):
            options.append(("Lam", w.get("Lam", 0) * 3))
        if depth >= 3:
            options.append(("App", w.get("App", 0)))
            options.append(("If", w.get("If", 0)))
            options.append(("Iter", w.get("Iter", 0)))
        # a function-typed variable can only be consumed by applying it or passing it on
        heads = [b for b in avail if isinstance(b[1], Fn) and b[1].codomain == ty]
        if heads:
            options.append(("Head", w.get("App", 0) * 2))
        options = [(r, wt) for r, wt in options if wt > 0]
        order = []
        while options:
            i = self.rng.choices(range(len(options)), [wt for _, wt in options])[0]
            order.append(options.pop(i)[0])
        for rule in order:
            for _ in range(2 if rule in ("App", "If", "Iter") else 1):
                try:
                    return self.build(rule, avail, ty, depth, heads)
                except _Backtrack:
                    continue
        raise _Backtrack

    def leaf(self, avail, ty):
        if not avail:
            c = self.constant(ty)
            if c is not None:
                return c
        elif len(avail) == 1 and avail[0][1] == ty:
            return Var(avail[0][0])
        raise _Backtrack

    def build(self, rule, avail, ty, depth, heads) -> Expr:
        d = depth - 1
        match rule:
            case "Var":
                return Var(avail[0][0])
            case "Const":
                return self.constant(ty)
            case "Succ":
                return Succ(self.gen(avail, NAT, d))
            case "Lam":
                x = self.name("x")
                return Lam(x, ty.domain, self.gen(avail + [(x, ty.domain)], ty.codomain, d))
            case "Head":
                f = self.rng.choice(heads)
                rest = [b for b in avail if b != f]
                return App(Var(f[0]), self.gen(rest, f[1].domain, d))
            case "App":
                a = self.pick_type()
                p1, p2 = self.partition(avail, 2)
                fun = self.gen(p1, Fn(a, ty), d)
                return App(fun, self.gen(p2, a, d))
            case "If":
                p1, p2 = self.partition(avail, 2)
                c = self.gen(p1, BOOL, d)
                return If(c, self.gen(p2, ty, d), self.gen(p2, ty, d))
            case "Iter":
                nested = self.in_step > 0 and self.cfg.isolate_nested_iters
                if nested:
                    p1, p2, p3 = list(avail), [], []
                elif self.cfg.step_captures:
                    p1, p2, p3 = self.partition(avail, 3)
                else:
                    p1, p3 = self.partition(avail, 2)
                    p2 = []
                y = self.name("y")
                base = self.gen(p1, ty, d)
                self.in_step += 1
                try:
                    step = self.gen(p2 + [(y, ty)], ty, d)
                finally:
                    self.in_step -= 1
                # keep counts small: a step of depth d applied to large counts
                # is where evaluation cost grows
                count = self.gen(p3, NAT, min(d, 3))
                return Iter(base, y, step, count)
        raise ValueError(rule)


class _Backtrack(Exception):
    pass


def gen_typed(cfg: GenConfig, ctx: Ctx, ty: Ty, rng: random.Random | None = None) -> Expr:
    rng = rng if rng is not None else random.Random(cfg.seed)
    g = _Gen(cfg, rng)
    try:
        e = g.gen(list(ctx.binders), ty, cfg.max_depth)
    except _Backtrack:
        raise GenerationFailed(f"no program of type {ty} over ({ctx})") from None
    e = alpha_rename(e, avoid=ctx.names)
    typecheck(ctx, e)  # post-condition; raises on a generator bug
    return e


def trial_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"cajal:{seed}:{index}")


def gen_closed_base(cfg: GenConfig, rng: random.Random) -> Expr:
    """A closed program of type Bool or Nat, reseeding on generation failure."""
    for _ in range(100):
        ty = rng.choice((BOOL, NAT))
        try:
            return gen_typed(cfg, EMPTY, ty, rng)
        except GenerationFailed:
            continue
    raise GenerationFailed("could not generate a closed base-type program")


# ---------------------------------------------------------------- differential trial


@dataclass
class Verdict:
    passed: bool
    program: Expr
    value: Optional[Expr] = None
    denotation: object = None
    reason: str = ""
    minimized: Optional[Expr] = None
    rules: frozenset = frozenset()

    def to_json(self):
        out = {"passed": self.passed, "program": pretty(self.program)}
        if self.value is not None:
            out["value"] = pretty(self.value)
        if self.denotation is not None:
            from .jsonio import encode_value

            out["denotation"] = encode_value(self.denotation)
        if not self.passed:
            out["reason"] = self.reason
            if self.minimized is not None:
                out["minimized"] = pretty(self.minimized)
        return out


def _check_behavior(e: Expr, budget: int):
    """Return (value, denotation, failure reason or '')."""
    d = typecheck(EMPTY, e)
    if not is_base(d.ty):
        return None, None, f"result type {d.ty} is not a base type"
    v = evaluate(e, EvalBudget(budget))
    den = link(compile_expr(e))
    den_v = link(compile_expr(v))
    if not close(den, den_v):
        return v, den, f"denotation {den!r} differs from value denotation {den_v!r}"
    # adequacy: distinct base values must have distinct denotations
    if d.ty == BOOL:
        other = compile_expr(FALSE if v == TRUE else TRUE)
        if den == link(other):
            return v, den, "denotation equals that of the other boolean"
    else:
        k = as_numeral(v)
        if [n for n, _ in den.support] != [k]:
            return v, den, f"support {[n for n, _ in den.support]} is not {{{k}}}"
        for j in range(max(0, k - 3), k + 4):
            if j != k and close(den, Seq.one_hot(j)):
                return v, den, f"denotation indistinguishable from numeral {j}"
    return v, den, ""


def differential_trial(e: Expr, budget: int = 10**6, shrink_failures: bool = True) -> Verdict:
    rules = frozenset(typecheck(EMPTY, e).rules_used())
    try:
        v, den, reason = _check_behavior(e, budget)
    except (BudgetExceeded, StuckTerm, CajalTypeError, semval.ShapeMismatch) as exc:
        v, den, reason = None, None, f"{type(exc).__name__}: {exc}"
    if not reason:
        return Verdict(True, e, v, den, rules=rules)
    minimized = None
    if shrink_failures:
        minimized = shrink(e, lambda c: not differential_trial(c, budget, False).passed)
    return Verdict(False, e, v, den, reason, minimized, rules)


def _replace_at(e: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    i, rest = path[0], path[1:]
    kids = list(children(e))
    kids[i] = _replace_at(kids[i], rest, new)
    match e:
        case Succ():
            return Succ(kids[0])
        case Iter(_, y, _, _):
            return Iter(kids[0], y, kids[1], kids[2])
        case Lam(x, ty, _):
            return Lam(x, ty, kids[0])
        case App():
            return App(*kids)
        case If():
            return If(*kids)
    raise ValueError("path leads through a leaf")


def _positions(e: Expr, path=()):
    yield path, e
    for i, c in enumerate(children(e)):
        yield from _positions(c, path + (i,))


def shrink(e: Expr, still_fails: Callable[[Expr], bool], ctx: Ctx = EMPTY) -> Expr:
    """Greedy shrinking: replace a subterm by one of its own subterms or by a
    constant, keeping the program well-typed and the failure present."""
    from .syntax import size

    def typed(c):
        try:
            typecheck(ctx, c)
            return True
        except CajalTypeError:
            return False

    improved = True
    while improved:
        improved = False
        for path, sub in _positions(e):
            candidates = [s for s in _descendants(sub)]
            candidates.sort(key=size)
            candidates += [TRUE, FALSE, numeral(0)]
            for cand in candidates:
                if size(cand) >= size(sub):
                    continue
                new = _replace_at(e, path, cand)
                if typed(new) and still_fails(new):
                    e = new
                    improved = True
                    break
            if improved:
                break
    return e


def _descendants(e):
    for _, s in _positions(e):
        if s is not e:
            yield s


# ---------------------------------------------------------------- harness


@dataclass
class FuzzReport:
    trials: int
    verdicts: list
    coverage: dict
    budget_exceeded: int = 0
    stuck: int = 0

    @property
    def failures(self):
        return [v for v in self.verdicts if not v.passed]

    @property
    def ok(self):
        return not self.failures

    def to_json(self):
        return {
            "trials": self.trials,
            "passed": self.trials - len(self.failures),
            "failed": len(self.failures),
            "budget_exceeded": self.budget_exceeded,
            "stuck": self.stuck,
            "coverage": self.coverage,
            "counterexamples": [v.to_json() for v in self.failures],
        }


def _one_trial(args):
    cfg, index = args
    rng = trial_rng(cfg.seed, index)
    e = gen_closed_base(cfg, rng)
    return differential_trial(e)


def run_trials(cfg: GenConfig, trials: int, jobs: int = 1) -> FuzzReport:
    work = [(cfg, i) for i in range(trials)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            verdicts = list(pool.map(_one_trial, work, chunksize=16))
    else:
        verdicts = [_one_trial(w) for w in work]
    counts = {r: 0 for r in RULES}
    for v in verdicts:
        for r in v.rules:
            counts[r] += 1
    coverage = {r: counts[r] / max(trials, 1) for r in RULES}
    exceeded = sum("BudgetExceeded" in v.reason for v in verdicts)
    stuck = sum("StuckTerm" in v.reason for v in verdicts)
    return FuzzReport(trials, verdicts, coverage, exceeded, stuck)


# ---------------------------------------------------------------- open programs and lemmas


def random_value(st, rng: random.Random, trunc: int = 6) -> semval.SemValue:
    """Random element of a semantic space; maps are random matrices."""
    match st:
        case semval.VBool():
            return Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2))
        case semval.VNat():
            k = rng.randint(1, 4)
            return Seq((rng.randrange(trunc), rng.uniform(-2, 2)) for _ in range(k))
        case semval.VFn(a, b) if not isinstance(a, semval.VFn) and not isinstance(b, semval.VFn):
            rows, cols = semval.base_dim(b, trunc), semval.base_dim(a, trunc)
            m = [[rng.uniform(-1, 1) for _ in range(cols)] for _ in range(rows)]
            return matrix_map(a, b, m)
    raise ValueError(f"no random values for {st}")


def random_basis_value(st, rng: random.Random, trunc: int = 6) -> semval.SemValue:
    """A random basis vector (or elementary matrix); keeps magnitudes bounded."""
    match st:
        case semval.VBool() | semval.VNat():
            return rng.choice(semval.basis(st, trunc))
        case semval.VFn(a, b) if not isinstance(a, semval.VFn) and not isinstance(b, semval.VFn):
            rows, cols = semval.base_dim(b, trunc), semval.base_dim(a, trunc)
            m = [[0.0] * cols for _ in range(rows)]
            m[rng.randrange(rows)][rng.randrange(cols)] = 1.0
            return matrix_map(a, b, m)
    raise ValueError(f"no basis values for {st}")


def random_context(rng: random.Random, max_binders: int = 3, functions: bool = True) -> Ctx:
    pool = [BOOL, NAT]
    if functions:
        pool += [Fn(BOOL, BOOL), Fn(NAT, NAT), Fn(BOOL, NAT)]
    k = rng.randint(1, max_binders)
    return Ctx(tuple((f"v{i}", rng.choice(pool)) for i in range(k)))


@dataclass
class OpenProgram:
    ctx: Ctx
    expr: Expr
    ty: Ty


def gen_open(cfg: GenConfig, rng: random.Random, max_binders: int = 3) -> OpenProgram:
    """An open program of base result type over a random context."""
    for _ in range(200):
        ctx = random_context(rng, max_binders)
        ty = rng.choice((BOOL, NAT))
        try:
            e = gen_typed(cfg, ctx, ty, rng)
        except GenerationFailed:
            continue
        return OpenProgram(ctx, e, ty)
    raise GenerationFailed("could not generate an open program")


def _tol_ok(lhs, rhs, scale_hint, rel=1e-9):
    return close(lhs, rhs, rel=rel, scale_hint=scale_hint)


def check_multilinearity(prog: OpenProgram, rng: random.Random, rel=1e-9) -> list:
    """Additivity and homogeneity in every slot; returns a list of failures."""
    p = compile_expr(prog.expr, prog.ctx)
    base = [random_value(sem_type(t), rng) for _, t in prog.ctx]
    failures = []
    for i, (name, ty) in enumerate(prog.ctx):
        st = sem_type(ty)
        x1, x2 = random_value(st, rng), random_value(st, rng)
        a, b = rng.uniform(-2, 2), rng.uniform(-2, 2)

        def run_with(x):
            vals = list(base)
            vals[i] = x
            return p.run(tuple(vals))

        y1, y2 = run_with(x1), run_with(x2)
        mixed = semval.add(semval.scale(a, x1), semval.scale(b, x2))
        lhs = run_with(mixed)
        rhs = semval.add(semval.scale(a, y1), semval.scale(b, y2))
        hint = abs(a) * magnitude(y1) + abs(b) * magnitude(y2)
        if not _tol_ok(lhs, rhs, hint, rel):
            failures.append(f"additivity fails in slot {name}")
        c = rng.uniform(-2, 2)
        lhs = run_with(semval.scale(c, x1))
        rhs = semval.scale(c, y1)
        if not _tol_ok(lhs, rhs, abs(c) * magnitude(y1), rel):
            failures.append(f"homogeneity fails in slot {name}")
    return failures


def check_exchange(prog: OpenProgram, rng: random.Random, rel=1e-9, sampler=random_value) -> list:
    p = compile_expr(prog.expr, prog.ctx)
    vals = tuple(sampler(sem_type(t), rng) for _, t in prog.ctx)
    out = p.run(vals)
    order = list(range(len(prog.ctx)))
    rng.shuffle(order)
    ctx2 = prog.ctx.permute(order)
    p2 = compile_expr(prog.expr, ctx2)
    out2 = p2.run(tuple(vals[i] for i in order))
    via_link = link(p, Env(ctx2, tuple(vals[i] for i in order)))
    fails = []
    if not _tol_ok(out, out2, magnitude(out), rel):
        fails.append(f"permutation {order} changes the result")
    if not _tol_ok(out, via_link, magnitude(out), rel):
        fails.append("linking a permuted environment changes the result")
    return fails


def check_substitution(
    prog: OpenProgram, cfg: GenConfig, rng: random.Random, rel=1e-9, sampler=random_value
) -> list:
    """Substituting a closed value for the last binder vs. linking its denotation."""
    name, ty = prog.ctx.binders[-1]
    rest = Ctx(prog.ctx.binders[:-1])
    for _ in range(50):
        try:
            closed = gen_typed(GenConfig(**{**cfg.__dict__, "max_depth": 4}), EMPTY, ty, rng)
            break
        except GenerationFailed:
            continue
    else:
        raise GenerationFailed(f"no closed program of type {ty}")
    v = evaluate(closed)
    v = alpha_rename(v, avoid=set(binders(prog.expr)) | set(prog.ctx.names))
    substituted = alpha_rename(subst(prog.expr, name, v), avoid=rest.names)
    sigma = tuple(sampler(sem_type(t), rng) for _, t in rest)
    lhs = compile_expr(substituted, rest).run(sigma)
    rhs = compile_expr(prog.expr, prog.ctx).run(sigma + (link(compile_expr(v)),))
    if not _tol_ok(lhs, rhs, max(magnitude(lhs), magnitude(rhs)), rel):
        return [f"substituting {pretty(v)} for {name} changes the denotation"]
    return []


@dataclass
class LemmaReport:
    lemma: str
    programs: int = 0
    failures: list = field(default_factory=list)
    # environments redrawn from basis vectors after floating-point overflow
    resampled: int = 0

    @property
    def ok(self):
        return self.programs > 0 and not self.failures


LEMMAS = ("multilinearity", "substitution", "exchange")


def lemma_suite(lemma: str, count: int, seed: int, cfg: GenConfig | None = None) -> LemmaReport:
    """Check one lemma on ``count`` generated open programs.

    Multilinearity is only claimed for programs whose iteration steps use
    nothing but their own binder; the default configuration for that lemma
    generates exactly those.
    """
    if lemma not in LEMMAS:
        raise ValueError(f"unknown lemma {lemma!r}")
    if cfg is None:
        cfg = GenConfig(seed=seed, step_captures=lemma != "multilinearity")
    report = LemmaReport(lemma)
    for i in range(count):
        rng = random.Random(f"cajal-{lemma}:{seed}:{i}")
        prog = gen_open(cfg, rng)
        report.programs += 1
        for sampler in (random_value, random_basis_value):
            try:
                match lemma:
                    case "multilinearity":
                        fails = check_multilinearity(prog, rng)
                    case "substitution":
                        fails = check_substitution(prog, cfg, rng, sampler=sampler)
                    case "exchange":
                        fails = check_exchange(prog, rng, sampler=sampler)
                break
            except semval.NonFiniteError:
                if sampler is random_basis_value or lemma == "multilinearity":
                    raise
                report.resampled += 1
        report.failures += [(pretty(prog.expr), str(prog.ctx), f) for f in fails]
    return report


def termination_sweep(cfg: GenConfig, count: int, seed: int, budget: int = 10**6) -> dict:
    """Evaluate closed well-typed programs of assorted types; tally failures."""
    rng = random.Random(f"cajal-t1:{seed}")
    tally = {"programs": 0, "budget_exceeded": 0, "stuck": 0, "non_value": 0}
    types = [BOOL, NAT, Fn(BOOL, BOOL), Fn(NAT, NAT), Fn(NAT, BOOL)]
    from .syntax import is_value

    for _ in range(count):
        try:
            e = gen_typed(cfg, EMPTY, rng.choice(types), rng)
        except GenerationFailed:
            continue
        tally["programs"] += 1
        try:
            v = evaluate(e, EvalBudget(budget))
            if not is_value(v) or free_vars(v):
                tally["non_value"] += 1
        except BudgetExceeded:
            tally["budget_exceeded"] += 1
        except StuckTerm:
            tally["stuck"] += 1
    return tally


def gradient_suite(count: int, seed: int, h: float = 1e-5, trunc: int = 10) -> list:
    """Finite-difference checks of ``grad`` on generated programs.

    Each program has at least one base-type binder; one is designated at
    random.  Returns the max relative error per program.
    """
    from .diffcheck import fd_check

    cfg = GenConfig(seed=seed, step_captures=False)
    errors = []
    i = 0
    while len(errors) < count:
        rng = random.Random(f"cajal-grad:{seed}:{i}")
        i += 1
        prog = gen_open(cfg, rng)
        base = [name for name, t in prog.ctx if is_base(t)]
        if not base:
            continue
        p = compile_expr(prog.expr, prog.ctx)
        env = Env(prog.ctx, tuple(random_value(sem_type(t), rng) for _, t in prog.ctx))
        cot = random_value(p.result, rng)
        errors.append(fd_check(p, env, rng.choice(base), cot, trunc, h))
    return errors
