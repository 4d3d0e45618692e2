"""A linear lambda calculus with booleans, naturals and iteration, compiled
to multilinear maps over real vector spaces."""

__version__ = "0.1.0"

from .compiler import Env, compile_expr, link, matrix_of, restrict
from .evaluator import evaluate
from .syntax import Ctx, parse, parse_ctx, parse_type, pretty
from .typecheck import typecheck, validate

__all__ = [
    "Ctx",
    "Env",
    "compile_expr",
    "evaluate",
    "link",
    "matrix_of",
    "parse",
    "parse_ctx",
    "parse_type",
    "pretty",
    "restrict",
    "typecheck",
    "validate",
]
