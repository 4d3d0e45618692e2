"""Command-line entry point: ``cajal check|run|compile|matrix|grad|fuzz|demo-train``."""
from __future__ import annotations

import functools
import json
import platform
import sys

import click
import numpy as np

from . import __version__
from .compiler import Env, NotASubcontext, UnsupportedSignature, compile_expr, link, matrix_of
from .diffcheck import UnsupportedBinder, fd_check, grad, toy_train
from .evaluator import EvalBudget, EvalError, evaluate
from .fuzz import GenConfig, run_trials
from .jsonio import ValueFormatError, decode_env, decode_value, encode_matrix, encode_value, load_json
from .semval import NonFiniteError, ShapeMismatch, sem_type
from .syntax import Ctx, ParseError, parse, parse_ctx, pretty
from .typecheck import CajalTypeError, typecheck

EXIT_ERROR = 1
EXIT_VERIFY = 2
FD_TOLERANCE = 1e-5


class VerificationFailed(click.ClickException):
    exit_code = EXIT_VERIFY


def _located(path, pos, msg):
    if pos is None:
        return f"{path}: {msg}"
    return f"{path}:{pos[0]}:{pos[1]}: {msg}"


def _fail(msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_ERROR)


def handles_errors(fn):
    """Render module errors on stderr with a location and exit 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        path = kwargs.get("file", "<input>")
        try:
            return fn(*args, **kwargs)
        except ParseError as exc:
            _fail(_located(path, (exc.line, exc.col), f"parse error: {exc.message}"))
        except CajalTypeError as exc:
            _fail(_located(path, exc.pos, f"{type(exc).__name__}: {exc}"))
        except (EvalError, ShapeMismatch, NotASubcontext, UnsupportedSignature,
                UnsupportedBinder, ValueFormatError, NonFiniteError) as exc:
            _fail(f"{path}: {type(exc).__name__}: {exc}")
        except (OSError, json.JSONDecodeError) as exc:
            _fail(str(exc))

    return wrapper


def _emit(obj):
    click.echo(json.dumps(obj))


def _tidy(x):
    """Integral floats print as integers in text output."""
    if isinstance(x, list):
        return [_tidy(v) for v in x]
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def _load_program(path, ctx_src):
    with open(path) as fh:
        source = fh.read()
    e = parse(source)
    ctx = parse_ctx(ctx_src) if ctx_src else Ctx()
    return e, ctx


def _program_with_env(file, env_path, ctx_src):
    e, ctx = _load_program(file, ctx_src)
    if env_path is None:
        env = Env(ctx) if len(ctx) == 0 else None
        return compile_expr(e, ctx), env
    raw = load_json(env_path)
    env = decode_env(raw, ctx if ctx_src else None)
    return compile_expr(e, env.ctx), env


ctx_option = click.option("--ctx", "ctx_src", default=None,
                          help='Typing context, e.g. "x:Bool, n:Nat".')
json_option = click.option("--json", "as_json", is_flag=True, help="Emit one JSON object.")


@click.group()
@click.version_option(
    __version__,
    message=f"cajal %(version)s (python {platform.python_version()}, numpy {np.__version__})",
)
def cli():
    """Typecheck, evaluate, and compile programs of a linear lambda calculus."""
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@ctx_option
@click.option("--emit-derivation", is_flag=True, help="Print the typing derivation.")
@json_option
@handles_errors
def check(file, ctx_src, emit_derivation, as_json):
    """Typecheck FILE and print its type."""
    e, ctx = _load_program(file, ctx_src)
    d = typecheck(ctx, e)
    if as_json:
        out = {"type": str(d.ty), "context": str(ctx), "rules": sorted(d.rules_used())}
        if emit_derivation:
            out["derivation"] = d.render()
        _emit(out)
        return
    click.echo(str(d.ty))
    if emit_derivation:
        click.echo(d.render())


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--budget", default=10**6, show_default=True, help="Evaluation step budget.")
@json_option
@handles_errors
def run(file, budget, as_json):
    """Evaluate the closed program FILE."""
    e, ctx = _load_program(file, None)
    d = typecheck(ctx, e)
    b = EvalBudget(budget)
    v = evaluate(e, b)
    if as_json:
        _emit({"value": pretty(v), "type": str(d.ty), "steps": b.used})
    else:
        click.echo(pretty(v))


@cli.command(name="compile")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--env", "env_path", type=click.Path(exists=True, dir_okay=False), default=None)
@ctx_option
@click.option("--trunc", default=10, show_default=True, type=click.IntRange(min=1),
              help="Truncation used when a function-typed result is printed as a matrix.")
@handles_errors
def compile_cmd(file, env_path, ctx_src, trunc):
    """Compile FILE, link it with an environment, and print the denotation as JSON."""
    p, env = _program_with_env(file, env_path, ctx_src)
    if env is None:
        raise ShapeMismatch(f"the program is open over ({p.signature}); pass --env")
    _emit(encode_value(link(p, env), trunc))


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--trunc", default=10, show_default=True, type=click.IntRange(min=1))
@ctx_option
@json_option
@handles_errors
def matrix(file, trunc, ctx_src, as_json):
    """Print the dense matrix of a base-to-base program."""
    e, ctx = _load_program(file, ctx_src)
    p = compile_expr(e, ctx)
    m = matrix_of(p, trunc)
    if as_json:
        if len(ctx):
            dom, cod = sem_type(ctx.binders[0][1]), p.result
        else:
            dom, cod = p.result.domain, p.result.codomain
        _emit(encode_matrix(m, dom, cod))
    else:
        click.echo(json.dumps(_tidy(m.tolist())))


@cli.command(name="grad")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--env", "env_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--wrt", required=True, help="Binder to differentiate with respect to.")
@click.option("--cotangent", "cot_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--trunc", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--h", default=1e-5, show_default=True, type=click.FloatRange(min=0, min_open=True))
@ctx_option
@json_option
@handles_errors
def grad_cmd(file, env_path, wrt, cot_path, trunc, h, ctx_src, as_json):
    """Gradient of <cotangent, program(env)> in one binder, checked by finite differences."""
    p, env = _program_with_env(file, env_path, ctx_src)
    cot = decode_value(load_json(cot_path), p.result)
    g = grad(p, env, wrt, cot, trunc)
    err = fd_check(p, env, wrt, cot, trunc, h)
    if as_json:
        _emit({"binder": wrt, "kind": g.kind, "gradient": g.values.tolist(), "fd_error": err})
    else:
        click.echo(json.dumps(g.values.tolist()))
        click.echo(f"finite-difference error {err:.3e}", err=True)
    if err > FD_TOLERANCE:
        raise VerificationFailed(f"finite-difference error {err:.3e} exceeds {FD_TOLERANCE}")


@cli.command()
@click.option("--trials", default=1000, show_default=True, type=click.IntRange(min=1))
@click.option("--depth", default=6, show_default=True, type=click.IntRange(min=1))
@click.option("--max-numeral", default=5, show_default=True, type=click.IntRange(min=0))
@click.option("--seed", default=0, show_default=True, envvar="CAJAL_SEED",
              help="Base seed (default from CAJAL_SEED).")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1))
@json_option
def fuzz(trials, depth, max_numeral, seed, jobs, as_json):
    """Differential test: evaluation vs. compiled denotation on random programs."""
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))
    cfg = GenConfig(seed=seed, max_depth=depth, max_numeral=max_numeral)
    report = run_trials(cfg, trials, jobs)
    if as_json:
        _emit(report.to_json())
    else:
        click.echo(f"{trials - len(report.failures)}/{trials} passed (seed {seed})")
        for rule, frac in report.coverage.items():
            click.echo(f"  {rule:<6} {frac:6.1%}")
        for v in report.failures:
            click.echo(f"FAIL {pretty(v.program)}: {v.reason}", err=True)
            if v.minimized is not None:
                click.echo(f"  minimized: {pretty(v.minimized)}", err=True)
    if not report.ok:
        sys.exit(EXIT_VERIFY)


@cli.command(name="demo-train")
@click.option("--steps", default=5000, show_default=True, type=click.IntRange(min=0))
@click.option("--lr", default=0.1, show_default=True, type=float)
@click.option("--target", "k", default=2, show_default=True, type=click.IntRange(min=0, max=9),
              help="Index k of the target state f(k).")
@click.option("--every", default=100, show_default=True, type=click.IntRange(min=1),
              help="Print every N-th step.")
def demo_train(steps, lr, k, every):
    """Fit the count vector of a compiled iteration; print the loss trace as CSV."""
    result = toy_train(k=k, steps=steps, lr=lr)
    click.echo("step,loss")
    for i, loss in enumerate(result.trace):
        if i % every == 0 or i == len(result.trace) - 1:
            click.echo(f"{i},{loss:.6e}")
    counts = ", ".join(f"{c:.4f}" for c in result.counts)
    click.echo(f"final loss {result.loss:.3e}; argmax {result.argmax}; counts [{counts}]", err=True)


def main(argv=None):
    return cli.main(args=argv, prog_name="cajal")


if __name__ == "__main__":
    main()
