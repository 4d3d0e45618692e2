"""JSON encoding of semantic values and environments.

    {"kind": "bool", "vec": [a, b]}
    {"kind": "nat", "support": [[n, c], ...]}
    {"kind": "matrix", "rows": R, "cols": C, "data": [...]}   (row-major)

A matrix may also carry "dom" and "cod" type names; without them its
domain and codomain come from the binder's declared type, or from the
shape (dimension 2 is Bool, anything else Nat).
"""
from __future__ import annotations

import json

import numpy as np

from .compiler import Env
from .semval import (
    Map,
    Seq,
    ShapeMismatch,
    Vec2,
    VBool,
    VFn,
    VNat,
    matrix_map,
    sem_type,
    source_type,
)
from .syntax import Ctx, parse_type


class ValueFormatError(ValueError):
    pass


def encode_value(v, trunc: int = 10) -> dict:
    match v:
        case Vec2(a, b):
            return {"kind": "bool", "vec": [a, b]}
        case Seq():
            return {"kind": "nat", "support": [[n, c] for n, c in v.support]}
        case Map():
            m = getattr(v, "matrix", None)
            if m is None:
                from .compiler import CompiledProgram, matrix_of

                m = matrix_of(CompiledProgram(Ctx(), v.semty, lambda s: v), trunc)
            return encode_matrix(m, v.domain, v.codomain)
    raise ValueFormatError(f"cannot encode {v!r}")


def encode_matrix(m, dom=None, cod=None) -> dict:
    m = np.asarray(m, dtype=float)
    out = {"kind": "matrix", "rows": m.shape[0], "cols": m.shape[1], "data": m.ravel().tolist()}
    if dom is not None:
        out["dom"] = str(source_type(dom))
    if cod is not None:
        out["cod"] = str(source_type(cod))
    return out


def _need(obj, key):
    if key not in obj:
        raise ValueFormatError(f"value of kind {obj.get('kind')!r} needs field {key!r}")
    return obj[key]


def decode_value(obj, expected=None):
    """Decode one value; ``expected`` is the semantic type it must have."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueFormatError(f"expected an object with a 'kind' field, got {obj!r}")
    kind = obj["kind"]
    match kind:
        case "bool":
            vec = _need(obj, "vec")
            if not isinstance(vec, list) or len(vec) != 2:
                raise ValueFormatError("'vec' must be a list of two numbers")
            v = Vec2(*vec)
        case "nat":
            support = _need(obj, "support")
            try:
                v = Seq((n, c) for n, c in support)
            except (TypeError, ValueError) as exc:
                raise ValueFormatError(f"bad 'support': {exc}") from None
        case "matrix":
            rows, cols, data = _need(obj, "rows"), _need(obj, "cols"), _need(obj, "data")
            if len(data) != rows * cols:
                raise ValueFormatError(f"'data' has {len(data)} entries for a {rows}x{cols} matrix")
            m = np.array(data, dtype=float).reshape(rows, cols)
            if expected is not None:
                if not isinstance(expected, VFn):
                    raise ShapeMismatch(f"a matrix cannot supply a {expected} value")
                dom, cod = expected.domain, expected.codomain
            else:
                dom = sem_type(parse_type(obj["dom"])) if "dom" in obj else _guess(cols)
                cod = sem_type(parse_type(obj["cod"])) if "cod" in obj else _guess(rows)
            if isinstance(dom, VFn) or isinstance(cod, VFn):
                raise ShapeMismatch("matrices only supply maps between base types")
            v = matrix_map(dom, cod, m)
        case _:
            raise ValueFormatError(f"unknown value kind {kind!r}")
    if expected is not None and v.semty != expected:
        raise ShapeMismatch(f"expected a {expected} value, got {v.semty}")
    return v


def _guess(dim):
    return VBool() if dim == 2 else VNat()


def decode_env(obj, ctx: Ctx | None = None) -> Env:
    """An environment object maps binder names to values.  Without ``ctx``
    its key order fixes the context and the value kinds fix the types."""
    if not isinstance(obj, dict):
        raise ValueFormatError("an environment must be a JSON object")
    if ctx is None:
        binders = []
        values = []
        for name, raw in obj.items():
            v = decode_value(raw)
            binders.append((name, source_type(v.semty)))
            values.append(v)
        return Env(Ctx(tuple(binders)), tuple(values))
    missing = [n for n in ctx.names if n not in obj]
    extra = [n for n in obj if n not in ctx]
    if missing or extra:
        raise ShapeMismatch(f"environment keys {list(obj)} do not match context ({ctx})")
    return Env(ctx, tuple(decode_value(obj[n], sem_type(t)) for n, t in ctx))


def load_json(path):
    with open(path) as fh:
        return json.load(fh)

