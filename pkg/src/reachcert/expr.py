"""Expression trees for smooth functions R^N -> R.

Formulas are parsed into immutable :class:`Expr` trees.  Constants are kept as
exact :class:`fractions.Fraction` values so that interval enclosures of decimal
literals like ``0.1`` stay sound, and so polynomial expressions can be evaluated
exactly when a sign must be decided.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-' | '+') factor | atom ('^' uint)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Identifiers are ``x1 .. xN`` (plus ``x, y, z`` when N <= 3) and the functions
``sin cos exp log sqrt``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
_ALIASES = {"x": 0, "y": 1, "z": 2}

CONST, VAR, ADD, MUL, POW, NEG, DIV = "const", "var", "add", "mul", "pow", "neg", "div"
KINDS = (CONST, VAR, ADD, MUL, POW, NEG, DIV) + FUNCTIONS


class ParseError(ValueError):
    """Invalid formula text.  ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Point evaluation left the domain of an operation."""


@dataclass(frozen=True, eq=False)
class Expr:
    """Node of an expression tree.

    ``data`` holds the constant value (Fraction) for ``const``, the variable
    index for ``var`` and the integer exponent for ``pow``; it is ``None``
    otherwise.
    """

    kind: str
    args: tuple[Expr, ...] = ()
    data: object = None
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.kind, self.data, self.args)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return self.kind == other.kind and self.data == other.data and self.args == other.args

    def __repr__(self) -> str:
        if self.kind == CONST:
            return f"const({self.data})"
        if self.kind == VAR:
            return f"var{self.data}"
        inner = ", ".join(map(repr, self.args))
        if self.kind == POW:
            return f"pow({inner}, {self.data})"
        return f"{self.kind}({inner})"

    def __str__(self) -> str:
        return to_string(self)

    @property
    def is_const(self) -> bool:
        return self.kind == CONST

    def variables(self) -> set[int]:
        out: set[int] = set()
        for node in walk(self):
            if node.kind == VAR:
                out.add(node.data)
        return out


def walk(e: Expr):
    """Yield every node of ``e`` (shared subtrees once), children before parents."""
    seen: set[int] = set()
    stack = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded or not node.args:
            seen.add(id(node))
            yield node
        else:
            stack.append((node, True))
            for a in reversed(node.args):
                stack.append((a, False))


# ---------------------------------------------------------------------------
# smart constructors (constant folding only)
# ---------------------------------------------------------------------------

ZERO = Expr(CONST, data=Fraction(0))
ONE = Expr(CONST, data=Fraction(1))


def const(value) -> Expr:
    return Expr(CONST, data=Fraction(value))


def var(i: int) -> Expr:
    return Expr(VAR, data=int(i))


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    c = Fraction(0)
    for t in terms:
        parts = t.args if t.kind == ADD else (t,)
        for p in parts:
            if p.kind == CONST:
                c += p.data
            else:
                flat.append(p)
    if c != 0 or not flat:
        flat.append(const(c))
    return flat[0] if len(flat) == 1 else Expr(ADD, tuple(flat))


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    c = Fraction(1)
    for f in factors:
        parts = f.args if f.kind == MUL else (f,)
        for p in parts:
            if p.kind == CONST:
                c *= p.data
            else:
                flat.append(p)
    if c == 0:
        return ZERO
    if not flat:
        return const(c)
    if c == -1:
        body = flat[0] if len(flat) == 1 else Expr(MUL, tuple(flat))
        return Expr(NEG, (body,))
    if c != 1:
        flat.insert(0, const(c))
    return flat[0] if len(flat) == 1 else Expr(MUL, tuple(flat))


def neg(a: Expr) -> Expr:
    if a.kind == CONST:
        return const(-a.data)
    if a.kind == NEG:
        return a.args[0]
    return Expr(NEG, (a,))


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def div(a: Expr, b: Expr) -> Expr:
    if b.kind == CONST:
        if b.data == 0:
            raise ZeroDivisionError("division by constant zero")
        return mul(a, const(1 / b.data))
    if a.kind == CONST and a.data == 0:
        return ZERO
    return Expr(DIV, (a, b))


def power(a: Expr, n: int) -> Expr:
    if n < 0:
        raise ValueError("negative exponents are not supported")
    if n == 0:
        return ONE
    if n == 1:
        return a
    if a.kind == CONST:
        return const(a.data ** n)
    if a.kind == POW:
        return Expr(POW, (a.args[0],), a.data * n)
    return Expr(POW, (a,), int(n))


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unsupported function {name!r}")
    if a.kind == CONST:
        v = a.data
        if name == "exp" and v == 0:
            return ONE
        if name == "log" and v == 1:
            return ZERO
        if name in ("sin", "sqrt") and v == 0:
            return ZERO
        if name == "cos" and v == 0:
            return ONE
        if name == "sqrt" and v > 0:
            r = _exact_sqrt(v)
            if r is not None:
                return const(r)
    return Expr(name, (a,))


def _exact_sqrt(q: Fraction) -> Fraction | None:
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:  # only trailing whitespace left
                break
            raw = m.group(0)
            start = m.start() + len(raw) - len(raw.lstrip())
            if m.group(1) is not None:
                self.tokens.append(("num", m.group(1) + (m.group(2) or ""), start))
            elif m.group(3) is not None:
                self.tokens.append(("ident", m.group(3), start))
            else:
                ch = m.group(4)
                if ch not in "+-*/^()":
                    raise ParseError(f"unexpected character {ch!r}", self._byte(start))
                self.tokens.append(("op", ch, start))
            pos = m.end()
        self.i = 0

    def _byte(self, char_offset: int) -> int:
        return len(self.text[:char_offset].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def fail(self, message: str, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, self._byte(tok[2]))

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value or tok[0] not in ("op",):
            self.fail(f"expected {value!r}", tok)

    def parse(self) -> Expr:
        if not self.tokens:
            raise ParseError("empty formula", 0)
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op_tok = self.take()
            rhs = self.factor()
            if op_tok[1] == "*":
                e = mul(e, rhs)
            else:
                try:
                    e = div(e, rhs)
                except ZeroDivisionError:
                    self.fail("division by zero", op_tok)
        return e

    def factor(self) -> Expr:
        tok = self.peek()
        if tok[:2] == ("op", "-"):
            self.take()
            return neg(self.factor())
        if tok[:2] == ("op", "+"):
            self.take()
            return self.factor()
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            ex = self.peek()
            if ex[0] == "num" and re.fullmatch(r"\d+", ex[1]):
                self.take()
                return power(base, int(ex[1]))
            if ex[0] == "num" or ex[:2] in (("op", "-"), ("op", "(")):
                self.fail("only unsigned integer exponents are allowed (use sqrt for roots)", ex)
            self.fail("expected an unsigned integer exponent", ex)
        return base

    def atom(self) -> Expr:
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return const(Fraction(text))
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            if text in FUNCTIONS:
                if self.peek()[:2] != ("op", "("):
                    self.fail(f"function `{text}` needs an argument in parentheses")
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(text, arg)
            idx = self._variable(text)
            if idx is None:
                self.fail(f"unknown identifier `{text}`", tok)
            if idx >= self.n:
                self.fail(f"variable `{text}` out of range for dimension {self.n}", tok)
            return var(idx)
        if kind == "end":
            self.fail("unexpected end of formula", tok)
        self.fail(f"unexpected token {text!r}", tok)

    def _variable(self, name: str) -> int | None:
        if self.n <= 3 and name in _ALIASES:
            return _ALIASES[name]
        m = re.fullmatch(r"x([1-9]\d*)", name)
        if m:
            return int(m.group(1)) - 1
        return None


def parse(text: str, n: int) -> Expr:
    """Parse ``text`` as a function of ``n`` variables."""
    if n < 1:
        raise ValueError("dimension must be positive")
    return _Parser(text, n).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def _const_str(q: Fraction) -> str:
    if q.denominator == 1:
        s = str(q.numerator)
    else:
        s = f"{q.numerator}/{q.denominator}"
    return s if q >= 0 and q.denominator == 1 else f"({s})"


def to_string(e: Expr) -> str:
    """Fully parenthesised text that :func:`parse` maps back to an equal tree value."""
    k = e.kind
    if k == CONST:
        return _const_str(e.data)
    if k == VAR:
        return f"x{e.data + 1}"
    if k == ADD:
        return "(" + " + ".join(to_string(a) for a in e.args) + ")"
    if k == MUL:
        return "(" + "*".join(to_string(a) for a in e.args) + ")"
    if k == POW:
        return f"{to_string(e.args[0])}^{e.data}"
    if k == NEG:
        return f"(-{to_string(e.args[0])})"
    if k == DIV:
        return f"({to_string(e.args[0])}/{to_string(e.args[1])})"
    return f"{k}({to_string(e.args[0])})"


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expr, i: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``i``."""
    cache: dict[Expr, Expr] = {}

    def d(node: Expr) -> Expr:
        hit = cache.get(node)
        if hit is not None:
            return hit
        if i not in _vars_of(node):
            out = ZERO
        else:
            out = _rule(node, d)
        cache[node] = out
        return out

    return d(e)


_VARS_CACHE: dict[Expr, frozenset[int]] = {}


def _vars_of(node: Expr) -> frozenset[int]:
    hit = _VARS_CACHE.get(node)
    if hit is None:
        if node.kind == VAR:
            hit = frozenset((node.data,))
        else:
            hit = frozenset().union(*(_vars_of(a) for a in node.args)) if node.args else frozenset()
        if len(_VARS_CACHE) > 200_000:
            _VARS_CACHE.clear()
        _VARS_CACHE[node] = hit
    return hit


def _rule(node: Expr, d: Callable[[Expr], Expr]) -> Expr:
    k, a = node.kind, node.args
    if k == VAR:
        return ONE
    if k == ADD:
        return add(*(d(t) for t in a))
    if k == MUL:
        terms = []
        for j, t in enumerate(a):
            dt = d(t)
            if dt == ZERO:
                continue
            terms.append(mul(*a[:j], dt, *a[j + 1:]))
        return add(*terms) if terms else ZERO
    if k == NEG:
        return neg(d(a[0]))
    if k == POW:
        n = node.data
        return mul(const(n), power(a[0], n - 1), d(a[0]))
    if k == DIV:
        num, den = a
        dn, dd = d(num), d(den)
        top = sub(mul(dn, den), mul(num, dd))
        return div(top, power(den, 2))
    inner = d(a[0])
    if k == "sin":
        return mul(func("cos", a[0]), inner)
    if k == "cos":
        return neg(mul(func("sin", a[0]), inner))
    if k == "exp":
        return mul(node, inner)
    if k == "log":
        return div(inner, a[0])
    if k == "sqrt":
        return div(inner, mul(const(2), node))
    raise ValueError(f"cannot differentiate node kind {k!r}")


# ---------------------------------------------------------------------------
# point evaluation
# ---------------------------------------------------------------------------

def _safe_log(v: float) -> float:
    if v <= 0:
        raise EvalDomainError(f"log of nonpositive value {v!r}")
    return math.log(v)


def _safe_sqrt(v: float) -> float:
    if v < 0:
        raise EvalDomainError(f"sqrt of negative value {v!r}")
    return math.sqrt(v)


_FLOAT_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": _safe_log, "sqrt": _safe_sqrt}


def evaluate(e: Expr, p: Sequence[float]) -> float:
    """Round-to-nearest evaluation of ``e`` at the point ``p``."""
    memo: dict[int, float] = {}
    for node in walk(e):
        k = node.kind
        if k == CONST:
            v = float(node.data)
        elif k == VAR:
            v = float(p[node.data])
        else:
            xs = [memo[id(a)] for a in node.args]
            if k == ADD:
                v = math.fsum(xs)
            elif k == MUL:
                v = math.prod(xs)
            elif k == NEG:
                v = -xs[0]
            elif k == POW:
                try:
                    v = xs[0] ** node.data
                except OverflowError:
                    v = math.inf if xs[0] > 0 or node.data % 2 == 0 else -math.inf
            elif k == DIV:
                if xs[1] == 0:
                    raise EvalDomainError("division by zero")
                v = xs[0] / xs[1]
            else:
                try:
                    v = _FLOAT_FUNCS[k](xs[0])
                except OverflowError:
                    v = math.inf
        memo[id(node)] = v
    return memo[id(e)]


def evaluate_exact(e: Expr, p: Sequence[Fraction]) -> Fraction:
    """Exact rational evaluation; only defined for expressions without transcendental nodes."""
    memo: dict[int, Fraction] = {}
    for node in walk(e):
        k = node.kind
        if k == CONST:
            v = node.data
        elif k == VAR:
            v = Fraction(p[node.data])
        else:
            xs = [memo[id(a)] for a in node.args]
            if k == ADD:
                v = sum(xs, Fraction(0))
            elif k == MUL:
                v = math.prod(xs, start=Fraction(1))
            elif k == NEG:
                v = -xs[0]
            elif k == POW:
                v = xs[0] ** node.data
            elif k == DIV:
                if xs[1] == 0:
                    raise EvalDomainError("division by zero")
                v = xs[0] / xs[1]
            else:
                raise ValueError(f"no exact evaluation for `{k}`")
        memo[id(node)] = v
    return memo[id(e)]


def is_rational(e: Expr) -> bool:
    """True when ``e`` uses only field operations (exact evaluation possible)."""
    return all(node.kind not in FUNCTIONS for node in walk(e))


# ---------------------------------------------------------------------------
# systems of functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionSystem:
    """``k`` functions of ``N`` variables with cached symbolic derivatives."""

    dimension: int
    functions: tuple[Expr, ...]
    gradients: tuple[tuple[Expr, ...], ...] = field(init=False, repr=False)
    hessians: tuple[tuple[tuple[Expr, ...], ...], ...] = field(init=False, repr=False)
    sources: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        n, fs = self.dimension, self.functions
        if n < 1:
            raise ValueError("dimension must be positive")
        if not fs:
            raise ValueError("a function system needs at least one function")
        if len(fs) > n:
            raise ValueError(f"{len(fs)} functions in dimension {n}: codimension exceeds dimension")
        for f in fs:
            bad = [i for i in f.variables() if i >= n]
            if bad:
                raise ValueError(f"variable index {bad[0]} out of range for dimension {n}")
        grads = tuple(tuple(differentiate(f, j) for j in range(n)) for f in fs)
        hess = []
        for g in grads:
            rows = [[None] * n for _ in range(n)]
            for j in range(n):
                for l in range(j, n):
                    h = differentiate(g[j], l)
                    rows[j][l] = rows[l][j] = h
            hess.append(tuple(tuple(r) for r in rows))
        object.__setattr__(self, "gradients", grads)
        object.__setattr__(self, "hessians", tuple(hess))

    @classmethod
    def from_strings(cls, texts: Sequence[str], dimension: int) -> FunctionSystem:
        exprs = tuple(parse(t, dimension) for t in texts)
        return cls(dimension, exprs, sources=tuple(texts))

    @property
    def k(self) -> int:
        return len(self.functions)

    def texts(self) -> tuple[str, ...]:
        return self.sources or tuple(to_string(f) for f in self.functions)
