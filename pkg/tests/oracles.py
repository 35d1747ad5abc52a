"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import math

import numpy as np
import sympy

CURVE = "(x^3 - x*y^2 + y + 1)^2*(x^2 + y^2 - 1) + y^2 - 5"
CIRCLE = "x^2+y^2-1"
TWO_CIRCLES = "((x-3)^2+y^2-1)*((x+3)^2+y^2-1)"

CORPUS_2D = [
    CIRCLE,
    CURVE,
    TWO_CIRCLES,
    "sin(x*y) + cos(x) - 0.5",
    "exp(x/3) - y^2 + log(2 + x^2)",
    "sqrt(1 + x^2 + y^2) - 2*x*y",
    "x^4 - 3*x^2*y + y^5 / 7",
    "(x - y)^3 * (x + 2*y) - 1/(3 + x^2)",
]


def sym_vars(n: int):
    return sympy.symbols(" ".join(f"x{i + 1}" for i in range(n)))


def to_sympy(text: str, n: int):
    """Parse with sympy, mapping the x/y/z aliases and ^ for power."""
    xs = sym_vars(n) if n > 1 else (sympy.Symbol("x1"),)
    names = {f"x{i + 1}": xs[i] for i in range(n)}
    for alias, i in (("x", 0), ("y", 1), ("z", 2)):
        if i < n:
            names[alias] = xs[i]
    names.update(sin=sympy.sin, cos=sympy.cos, exp=sympy.exp, log=sympy.log, sqrt=sympy.sqrt)
    return sympy.sympify(text.replace("^", "**"), locals=names), xs


def lambdify(text: str, n: int):
    e, xs = to_sympy(text, n)
    return sympy.lambdify(xs, e, "math")


def sym_gradient(text: str, n: int):
    e, xs = to_sympy(text, n)
    return [sympy.lambdify(xs, sympy.diff(e, v), "math") for v in xs]


def central_difference(fn, p, i: int, h: float = 1e-6) -> float:
    a = list(p)
    b = list(p)
    a[i] += h
    b[i] -= h
    return (fn(*a) - fn(*b)) / (2 * h)


# -- homology over Z/2 --------------------------------------------------------------

def _rank_gf2(rows: list[int]) -> int:
    """Rank of a GF(2) matrix given as integer bitmasks (one per row)."""
    pivots: dict[int, int] = {}
    rank = 0
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top in pivots:
                r ^= pivots[top]
            else:
                pivots[top] = r
                rank += 1
                break
    return rank


def betti_gf2(cells) -> tuple[int, int]:
    """(b0, b1) of a union of closed unit squares from boundary-matrix ranks over Z/2."""
    cells = [tuple(c) for c in cells]
    if not cells:
        return 0, 0
    verts = {}
    edges = {}
    for i, j in cells:
        for v in ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)):
            verts.setdefault(v, len(verts))
        for e in (("h", i, j), ("h", i, j + 1), ("v", i, j), ("v", i + 1, j)):
            edges.setdefault(e, len(edges))
    d1 = []
    for (kind, i, j) in edges:
        a = verts[(i, j)]
        b = verts[(i + 1, j)] if kind == "h" else verts[(i, j + 1)]
        d1.append((1 << a) | (1 << b))
    d2 = []
    for i, j in cells:
        mask = 0
        for e in (("h", i, j), ("h", i, j + 1), ("v", i, j), ("v", i + 1, j)):
            mask |= 1 << edges[e]
        d2.append(mask)
    r1 = _rank_gf2(d1)
    r2 = _rank_gf2(d2)
    b0 = len(verts) - r1
    b1 = len(edges) - r1 - r2
    return b0, b1


def random_spd(rng: np.random.Generator, k: int, cond: float = 50.0) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(k, k)))
    w = np.exp(rng.uniform(0, math.log(cond), size=k)) * rng.uniform(0.2, 3.0)
    return (q * w) @ q.T


def frame_with_gram(rng: np.random.Generator, g: np.ndarray, N: int) -> np.ndarray:
    """k vectors in R^N (rows) whose Gram matrix is g."""
    k = g.shape[0]
    L = np.linalg.cholesky(g)
    q, _ = np.linalg.qr(rng.normal(size=(N, k)))
    return (q @ L.T).T
