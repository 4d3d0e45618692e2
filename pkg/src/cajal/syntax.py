"""Abstract syntax, concrete grammar and pretty-printer for Cajal.

Concrete grammar::

    e ::= x | tt | ff | 0 | 1 | ... | succ e | iter e {y -> e} e
        | \\x:T. e | e e | if e then e else e | (e)
    T ::= Bool | Nat | T -o T          (-o is right-associative)

``succ`` and ``iter`` take atomic arguments, application is left-associative,
and lambda / if bodies extend as far to the right as possible.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

Pos = Optional[tuple]


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class BoolTy:
    def __str__(self):
        return "Bool"


@dataclass(frozen=True)
class NatTy:
    def __str__(self):
        return "Nat"


@dataclass(frozen=True)
class Fn:
    domain: "Ty"
    codomain: "Ty"

    def __str__(self):
        dom = f"({self.domain})" if isinstance(self.domain, Fn) else str(self.domain)
        return f"{dom} -o {self.codomain}"


Ty = Union[BoolTy, NatTy, Fn]
BOOL = BoolTy()
NAT = NatTy()


def is_base(ty: Ty) -> bool:
    return isinstance(ty, (BoolTy, NatTy))


def type_order(ty: Ty) -> int:
    if isinstance(ty, Fn):
        return max(type_order(ty.domain) + 1, type_order(ty.codomain))
    return 0


# ---------------------------------------------------------------- expressions
# ``pos`` is (line, column) from the parser; it never takes part in equality.


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Tt:
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ff:
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Zero:
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Succ:
    body: "Expr"
    pos: Pos = field(default=None, compare=False, repr=False)

    # numerals can be far deeper than the recursion limit; each node keeps
    # its chain length and innermost non-successor, so equality, hashing and
    # numeral tests never walk the chain
    def __post_init__(self):
        b = self.body
        chain = (b._chain[0] + 1, b._chain[1]) if isinstance(b, Succ) else (1, b)
        object.__setattr__(self, "_chain", chain)

    def _peel(self):
        return self._chain

    def __eq__(self, other):
        if not isinstance(other, Succ):
            return NotImplemented
        return self._peel() == other._peel()

    def __hash__(self):
        return hash(("succ",) + self._peel())


@dataclass(frozen=True)
class Iter:
    base: "Expr"
    binder: str
    step: "Expr"
    count: "Expr"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lam:
    binder: str
    annotation: Ty
    body: "Expr"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class App:
    fun: "Expr"
    arg: "Expr"
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    else_: "Expr"
    pos: Pos = field(default=None, compare=False, repr=False)


Expr = Union[Var, Tt, Ff, Zero, Succ, Iter, Lam, App, If]

TRUE = Tt()
FALSE = Ff()
ZERO = Zero()


def numeral(n: int) -> Expr:
    e: Expr = ZERO
    for _ in range(n):
        e = Succ(e)
    return e


def as_numeral(e: Expr) -> Optional[int]:
    """Return n if ``e`` is ``succ^n 0``, else None."""
    n = 0
    if isinstance(e, Succ):
        n, e = e._peel()
    return n if isinstance(e, Zero) else None


def is_value(e: Expr) -> bool:
    if isinstance(e, Succ):
        e = e._peel()[1]
    return isinstance(e, (Tt, Ff, Zero, Lam))


def children(e: Expr) -> tuple:
    match e:
        case Succ(body):
            return (body,)
        case Iter(base, _, step, count):
            return (base, step, count)
        case Lam(_, _, body):
            return (body,)
        case App(f, a):
            return (f, a)
        case If(c, t, f):
            return (c, t, f)
    return ()


def subterms(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(children(cur)))


def depth(e: Expr) -> int:
    """AST depth; a numeral literal counts as a single leaf."""
    if as_numeral(e) is not None:
        return 1
    kids = children(e)
    return 1 + max(map(depth, kids)) if kids else 1


def size(e: Expr) -> int:
    return sum(1 for _ in subterms(e))


def free_occurrences(e: Expr) -> dict:
    """Map each free variable to the number of its free occurrences."""
    counts: dict = {}

    def go(e, bound):
        while isinstance(e, Succ):
            e = e.body
        match e:
            case Var(x):
                if x not in bound:
                    counts[x] = counts.get(x, 0) + 1
            case Lam(x, _, body):
                go(body, bound | {x})
            case Iter(base, y, step, count):
                go(base, bound)
                go(step, bound | {y})
                go(count, bound)
            case _:
                for c in children(e):
                    go(c, bound)

    go(e, frozenset())
    return counts


def free_vars(e: Expr) -> frozenset:
    """Free variable names.  Values built by substitution share subterms
    (a conditional's branches receive the same value), so results are
    cached per node object: the cost follows the DAG, not the tree."""
    memo: dict = {}

    def go(e):
        while isinstance(e, Succ):
            e = e.body
        key = id(e)
        if key in memo:
            return memo[key]
        match e:
            case Var(x):
                out = frozenset((x,))
            case Lam(x, _, body):
                out = go(body) - {x}
            case Iter(base, y, step, count):
                out = go(base) | (go(step) - {y}) | go(count)
            case _:
                out = frozenset().union(*map(go, children(e)))
        memo[key] = out
        return out

    return go(e)


def binders(e: Expr) -> list:
    out = []
    for s in subterms(e):
        if isinstance(s, Lam):
            out.append(s.binder)
        elif isinstance(s, Iter):
            out.append(s.binder)
    return out


# ---------------------------------------------------------------- contexts


@dataclass(frozen=True)
class Ctx:
    """Ordered typing context; positions are 1-based as in ``index_of``."""

    binders: tuple = ()

    def __post_init__(self):
        names = [n for n, _ in self.binders]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate binder in context: {names}")

    @classmethod
    def of(cls, *pairs) -> "Ctx":
        return cls(tuple(pairs))

    def __len__(self):
        return len(self.binders)

    def __iter__(self):
        return iter(self.binders)

    def __contains__(self, name):
        return any(n == name for n, _ in self.binders)

    def __str__(self):
        if not self.binders:
            return "∅"
        return ", ".join(f"{n}:{t}" for n, t in self.binders)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.binders)

    def type_of(self, name) -> Ty:
        for n, t in self.binders:
            if n == name:
                return t
        raise KeyError(name)

    def extend(self, name, ty) -> "Ctx":
        return Ctx(self.binders + ((name, ty),))

    def concat(self, other: "Ctx") -> "Ctx":
        return Ctx(self.binders + other.binders)

    def index_of(self, name) -> int:
        # rightmost binder has index len(ctx); 0 means absent
        for i in range(len(self.binders), 0, -1):
            if self.binders[i - 1][0] == name:
                return i
        return 0

    def index_set(self) -> set:
        return set(range(1, len(self.binders) + 1))

    def as_set(self) -> frozenset:
        return frozenset(self.binders)

    def restrict_to(self, names) -> "Ctx":
        keep = set(names)
        return Ctx(tuple(b for b in self.binders if b[0] in keep))

    def permute(self, order) -> "Ctx":
        return Ctx(tuple(self.binders[i] for i in order))


EMPTY = Ctx()


# ---------------------------------------------------------------- parsing


class ParseError(Exception):
    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|--[^\n]*|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+)
  | (?P<arrow>->)
  | (?P<lolli>-o(?![A-Za-z0-9_']))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[\\λ:.(){}])
    """,
    re.VERBOSE,
)

KEYWORDS = {"tt", "ff", "succ", "iter", "if", "then", "else", "Bool", "Nat"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(source):
        m = _TOKEN.match(source, i)
        if m is None:
            raise ParseError(f"unexpected character {source[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        col = i - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            text = m.group()
            if kind == "ident" and text in KEYWORDS:
                kind = text
            elif kind == "sym":
                kind = "\\" if text == "λ" else text
            tokens.append(Token(kind, text, line, col))
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


_ATOM_START = {"ident", "num", "tt", "ff", "("}


class _Parser:
    def __init__(self, source):
        self.toks = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind, what=None) -> Token:
        t = self.tok
        if t.kind != kind:
            found = t.text or "end of input"
            raise ParseError(f"expected {what or repr(kind)}, found {found!r}", t.line, t.col)
        return self.advance()

    def program(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            t = self.tok
            raise ParseError(f"expected end of input, found {t.text!r}", t.line, t.col)
        return e

    def expr(self) -> Expr:
        t = self.tok
        if t.kind == "\\":
            self.advance()
            x = self.expect("ident", "binder name").text
            self.expect(":", "':'")
            ty = self.type_()
            self.expect(".", "'.'")
            return Lam(x, ty, self.expr(), pos=(t.line, t.col))
        if t.kind == "if":
            self.advance()
            c = self.expr()
            self.expect("then", "'then'")
            a = self.expr()
            self.expect("else", "'else'")
            b = self.expr()
            return If(c, a, b, pos=(t.line, t.col))
        return self.application()

    def application(self) -> Expr:
        e = self.prefix()
        while self.tok.kind in _ATOM_START or self.tok.kind in ("succ", "iter", "\\", "if"):
            t = self.tok
            if t.kind in ("\\", "if"):
                raise ParseError(
                    f"{t.text!r} in argument position needs parentheses", t.line, t.col
                )
            e = App(e, self.prefix(), pos=e.pos)
        return e

    def prefix(self) -> Expr:
        t = self.tok
        if t.kind == "succ":
            self.advance()
            return Succ(self.prefix_arg(), pos=(t.line, t.col))
        if t.kind == "iter":
            self.advance()
            base = self.atom()
            self.expect("{", "'{'")
            y = self.expect("ident", "iterator binder").text
            self.expect("arrow", "'->'")
            step = self.expr()
            self.expect("}", "'}'")
            count = self.atom()
            return Iter(base, y, step, count, pos=(t.line, t.col))
        return self.atom()

    def prefix_arg(self) -> Expr:
        # allows `succ succ 0`
        if self.tok.kind == "succ":
            return self.prefix()
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "ident":
            self.advance()
            return Var(t.text, pos=pos)
        if t.kind == "tt":
            self.advance()
            return Tt(pos=pos)
        if t.kind == "ff":
            self.advance()
            return Ff(pos=pos)
        if t.kind == "num":
            self.advance()
            e: Expr = Zero(pos=pos)
            for _ in range(int(t.text)):
                e = Succ(e, pos=pos)
            return e
        if t.kind == "(":
            self.advance()
            e = self.expr()
            self.expect(")", "')'")
            return e
        found = t.text or "end of input"
        raise ParseError(f"expected an expression, found {found!r}", t.line, t.col)

    def type_(self) -> Ty:
        dom = self.type_atom()
        if self.tok.kind == "lolli":
            self.advance()
            return Fn(dom, self.type_())
        return dom

    def type_atom(self) -> Ty:
        t = self.tok
        if t.kind == "Bool":
            self.advance()
            return BOOL
        if t.kind == "Nat":
            self.advance()
            return NAT
        if t.kind == "(":
            self.advance()
            ty = self.type_()
            self.expect(")", "')'")
            return ty
        raise ParseError(f"expected a type, found {t.text or 'end of input'!r}", t.line, t.col)


def parse_raw(source: str) -> Expr:
    """Parse without alpha-renaming."""
    return _Parser(source).program()


def parse(source: str) -> Expr:
    return alpha_rename(parse_raw(source))


def parse_type(source: str) -> Ty:
    p = _Parser(source)
    ty = p.type_()
    p.expect("eof", "end of input")
    return ty


# the tokenizer has no comma token; contexts are split before tokenizing
def _split_ctx(source):
    return [part.strip() for part in source.split(",") if part.strip()]


def parse_ctx(source: str) -> Ctx:
    """Parse ``x:Bool, f:Bool -o Bool``; blank input is the empty context."""
    pairs = []
    for part in _split_ctx(source):
        name, sep, ty = part.partition(":")
        if not sep or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", name.strip()):
            raise ParseError(f"malformed context binder {part!r}", 1, 1)
        pairs.append((name.strip(), parse_type(ty)))
    return Ctx(tuple(pairs))


# ---------------------------------------------------------------- printing


def pretty(e: Expr) -> str:
    return _pp(e, 0)


def _pp(e: Expr, level: int) -> str:
    # level 0: anything; 1: application head; 2: atom
    n = as_numeral(e)
    if n is not None:
        return str(n)
    match e:
        case Var(x):
            return x
        case Tt():
            return "tt"
        case Ff():
            return "ff"
        case Succ(body):
            s = f"succ {_pp(body, 2)}"
            return s if level <= 1 else f"({s})"
        case Iter(base, y, step, count):
            s = f"iter {_pp(base, 2)} {{{y} -> {_pp(step, 0)}}} {_pp(count, 2)}"
            return s if level <= 1 else f"({s})"
        case App(f, a):
            s = f"{_pp(f, 1)} {_pp(a, 2)}"
            return s if level <= 1 else f"({s})"
        case Lam(x, ty, body):
            s = f"\\{x}:{ty}. {_pp(body, 0)}"
            return s if level == 0 else f"({s})"
        case If(c, a, b):
            s = f"if {_pp(c, 0)} then {_pp(a, 0)} else {_pp(b, 0)}"
            return s if level == 0 else f"({s})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------- renaming


def _fresh(name, used):
    if name not in used:
        return name
    base = name.rstrip("0123456789") or name
    i = 1
    while f"{base}{i}" in used:
        i += 1
    return f"{base}{i}"


def alpha_rename(e: Expr, avoid=()) -> Expr:
    """Rename binders so that every binder is distinct from every other binder
    and from every free variable (and from the names in ``avoid``)."""
    used = set(free_vars(e)) | set(avoid)

    def go(e, env):
        match e:
            case Var(x):
                return Var(env.get(x, x), pos=e.pos)
            case Lam(x, ty, body):
                x2 = _fresh(x, used)
                used.add(x2)
                return Lam(x2, ty, go(body, {**env, x: x2}), pos=e.pos)
            case Iter(base, y, step, count):
                base2 = go(base, env)
                y2 = _fresh(y, used)
                used.add(y2)
                step2 = go(step, {**env, y: y2})
                return Iter(base2, y2, step2, go(count, env), pos=e.pos)
            case Succ(body):
                if as_numeral(e) is not None:
                    return e
                return Succ(go(body, env), pos=e.pos)
            case App(f, a):
                return App(go(f, env), go(a, env), pos=e.pos)
            case If(c, a, b):
                return If(go(c, env), go(a, env), go(b, env), pos=e.pos)
        return e

    return go(e, {})


def alpha_eq(e1: Expr, e2: Expr) -> bool:
    def go(a, b, env_a, env_b, depth):
        match a, b:
            case Var(x), Var(y):
                ia, ib = env_a.get(x), env_b.get(y)
                if ia is None and ib is None:
                    return x == y
                return ia == ib
            case Lam(x, t1, b1), Lam(y, t2, b2):
                return t1 == t2 and go(b1, b2, {**env_a, x: depth}, {**env_b, y: depth}, depth + 1)
            case Iter(b1, x, s1, c1), Iter(b2, y, s2, c2):
                return (
                    go(b1, b2, env_a, env_b, depth)
                    and go(s1, s2, {**env_a, x: depth}, {**env_b, y: depth}, depth + 1)
                    and go(c1, c2, env_a, env_b, depth)
                )
            case (Tt(), Tt()) | (Ff(), Ff()) | (Zero(), Zero()):
                return True
            case Succ(), Succ():
                while isinstance(a, Succ) and isinstance(b, Succ):
                    a, b = a.body, b.body
                return go(a, b, env_a, env_b, depth)
            case App(f1, a1), App(f2, a2):
                return go(f1, f2, env_a, env_b, depth) and go(a1, a2, env_a, env_b, depth)
            case If(c1, t1, f1), If(c2, t2, f2):
                return all(go(p, q, env_a, env_b, depth) for p, q in ((c1, c2), (t1, t2), (f1, f2)))
        return False

    return go(e1, e2, {}, {}, 0)
