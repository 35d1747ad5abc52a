"""Betti numbers of a planar curve Z(f) from a sign-selected grid of squares.

A grid cell is *selected* when two of its corners carry values of f of
opposite (weak) signs.  When the cell side is small compared to the reach,
the union of the selected closed cells has the homology of the curve.

Selection is sparse: square blocks of cells are pruned by an interval
enclosure of f that excludes zero, so only cells near the curve are ever
visited.  Vertex signs are certified by interval evaluation at enclosures of
the exact rational grid points, with an exact rational fallback when f has
no transcendental nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import expr as ex
from .interval import IntervalDomainError, Tape
from .rounding import round_down, round_up

DELTA_FACTOR = Fraction(237, 100)
POS, NEG, ZERO, UNCERTAIN = 1, -1, 0, 2
GRID_SCHEMA = "reachcert.grid"


class UncertainSign(ArithmeticError):
    """Some grid vertex could not be given a certified sign."""

    def __init__(self, vertices: list[tuple[float, float]]):
        shown = ", ".join(f"({x!r}, {y!r})" for x, y in vertices[:8])
        more = f" and {len(vertices) - 8} more" if len(vertices) > 8 else ""
        super().__init__(f"uncertain sign at {len(vertices)} grid vertices: {shown}{more}")
        self.vertices = vertices


class BoundaryContact(ValueError):
    """The zero set may meet the boundary of the square."""


@dataclass
class SelectionGrid:
    L: float
    delta: float
    n: int
    selected: np.ndarray  # (S, 2) int64 cell indices (i, j), sorted
    vertex_index: np.ndarray  # (V, 2) vertices whose sign was evaluated
    vertex_sign: np.ndarray  # (V,) in {POS, NEG, ZERO, UNCERTAIN}
    certified: bool = True
    notes: list[str] = field(default_factory=list)

    def coord(self, i) -> float:
        return float(Fraction(-self.L) + Fraction(i) * Fraction(2 * self.L) / self.n)

    def is_selected(self, i: int, j: int) -> bool:
        if self.selected.shape[0] == 0:
            return False
        key = _encode(np.array([[i, j]]), self.n + 1)[0]
        keys = _encode(self.selected, self.n + 1)
        pos = np.searchsorted(keys, key)
        return bool(pos < keys.size and keys[pos] == key)

    def sign_at(self, i: int, j: int) -> int | None:
        hit = np.flatnonzero((self.vertex_index[:, 0] == i) & (self.vertex_index[:, 1] == j))
        return int(self.vertex_sign[hit[0]]) if hit.size else None


@dataclass(frozen=True)
class CubicalComplex:
    V: int
    E: int
    F: int
    components: int

    @property
    def euler(self) -> int:
        return self.V - self.E + self.F

    @property
    def betti(self) -> tuple[int, int]:
        return self.components, self.components - self.euler


def _encode(ij: np.ndarray, width: int) -> np.ndarray:
    return ij[:, 0].astype(np.int64) * width + ij[:, 1].astype(np.int64)


def snap_delta(L: float, delta: float) -> tuple[float, int]:
    """Largest grid side <= delta that divides 2L, and the cell count per axis."""
    if not (L > 0 and delta > 0 and math.isfinite(L) and math.isfinite(delta)):
        raise ValueError("L and delta must be positive and finite")
    n = math.ceil(Fraction(2 * L) / Fraction(delta))
    return round_down(Fraction(2 * L) / n), n


def delta_for_reach(L: float, tau: float) -> tuple[float, int]:
    """Grid side for a certified reach bound: tau/2.37 snapped down to divide 2L."""
    return snap_delta(L, round_down(Fraction(tau) / DELTA_FACTOR))


def _coords(L: float, n: int, idx: np.ndarray):
    """Outward float enclosures of the exact grid coordinates -L + idx*2L/n."""
    lo = np.empty(idx.shape, dtype=float)
    hi = np.empty(idx.shape, dtype=float)
    step = Fraction(2 * L) / n
    cache = {}
    flat_lo, flat_hi = lo.reshape(-1), hi.reshape(-1)
    for p, i in enumerate(idx.reshape(-1).tolist()):
        c = cache.get(i)
        if c is None:
            q = Fraction(-L) + i * step
            c = cache[i] = (round_down(q), round_up(q))
        flat_lo[p], flat_hi[p] = c
    return lo, hi


def _boundary_clear(tape: Tape, L: float, n: int, refine: int = 24) -> bool:
    """Certify f != 0 on the boundary of [-L, L]^2 by bisecting boundary segments."""
    i = np.arange(n)
    a_lo, _ = _coords(L, n, i)
    _, b_hi = _coords(L, n, i + 1)
    segs = []
    for fixed in (-L, L):
        f = np.full(n, float(fixed))
        segs.append(np.stack([a_lo, f, b_hi, f], axis=1))  # horizontal edges
        segs.append(np.stack([f, a_lo, f, b_hi], axis=1))  # vertical edges
    s = np.concatenate(segs)
    for _ in range(refine + 1):
        lo = np.stack([s[:, 0], s[:, 1]], axis=1)
        hi = np.stack([s[:, 2], s[:, 3]], axis=1)
        try:
            enc = tape.eval_interval(lo, hi)[0]
            bad = np.asarray(enc.contains_zero())
        except IntervalDomainError:
            bad = np.ones(s.shape[0], dtype=bool)
        s = s[bad]
        if s.shape[0] == 0:
            return True
        mx = (s[:, 0] + s[:, 2]) / 2
        my = (s[:, 1] + s[:, 3]) / 2
        horiz = s[:, 1] == s[:, 3]
        left = s.copy()
        right = s.copy()
        left[:, 2] = np.where(horiz, mx, s[:, 2])
        left[:, 3] = np.where(horiz, s[:, 3], my)
        right[:, 0] = np.where(horiz, mx, s[:, 0])
        right[:, 1] = np.where(horiz, s[:, 1], my)
        s = np.concatenate([left, right])
    return False


def select_boxes(f: ex.Expr, L: float, delta: float, tau_lower: float | None = None,
                 unsafe: bool = False, conservative: bool = False, leaf: int = 8) -> SelectionGrid:
    """Select the grid cells of side ~delta on [-L, L]^2 whose corners see both signs of f.

    ``delta`` is snapped down so that it divides 2L.  Unless ``unsafe`` is
    set, ``tau_lower`` must be given and ``delta <= tau_lower / 2.37``.  With
    ``conservative`` an uncertain vertex sign counts as zero and the result is
    marked non-certified instead of raising :class:`UncertainSign`.
    """
    if f.variables() - {0, 1}:
        raise ValueError("selection works for functions of (x, y) only")
    delta, n = snap_delta(L, delta)
    notes = []
    if tau_lower is not None and Fraction(delta) * DELTA_FACTOR > Fraction(tau_lower):
        if not unsafe:
            raise ValueError(f"delta={delta!r} exceeds tau/2.37 for tau={tau_lower!r}")
        notes.append("delta exceeds tau/2.37 (unsafe override)")
    if tau_lower is None:
        if not unsafe:
            raise ValueError("a certified reach bound is required to choose delta (or pass unsafe=True)")
        notes.append("no reach bound supplied (unsafe override)")
    tape = Tape([f])
    if not _boundary_clear(tape, L, n):
        raise BoundaryContact(f"the zero set may meet the boundary of [-{L}, {L}]^2")

    # blocks of cells: (i0, j0, size), pruned level by level
    size = 1
    while size < n:
        size *= 2
    blocks = np.zeros((1, 2), dtype=np.int64)
    while True:
        i1 = np.minimum(blocks + size, n)
        lo_x, _ = _coords(L, n, blocks[:, 0])
        lo_y, _ = _coords(L, n, blocks[:, 1])
        _, hi_x = _coords(L, n, i1[:, 0])
        _, hi_y = _coords(L, n, i1[:, 1])
        lo = np.stack([lo_x, lo_y], axis=1)
        hi = np.stack([hi_x, hi_y], axis=1)
        try:
            keep = np.asarray(tape.eval_interval(lo, hi)[0].contains_zero())
        except IntervalDomainError:
            keep = np.ones(blocks.shape[0], dtype=bool)
        blocks = blocks[keep]
        if size <= leaf or blocks.shape[0] == 0:
            break
        size //= 2
        kids = [blocks + np.array(o) * size for o in ((0, 0), (0, 1), (1, 0), (1, 1))]
        blocks = np.concatenate(kids)
        blocks = blocks[np.all(blocks < n, axis=1)]

    if blocks.shape[0] == 0:
        empty = np.zeros((0, 2), dtype=np.int64)
        return SelectionGrid(L, delta, n, empty, empty, np.zeros(0, dtype=np.int8), True, notes)

    # every cell of the surviving blocks, and its four corners
    r = np.arange(size)
    ci, cj = np.meshgrid(r, r, indexing="ij")
    cells = (blocks[:, None, :] + np.stack([ci.ravel(), cj.ravel()], axis=1)[None, :, :]).reshape(-1, 2)
    cells = cells[np.all(cells < n, axis=1)]
    corners = np.concatenate([cells + o for o in ((0, 0), (1, 0), (0, 1), (1, 1))])
    vkeys, inverse = np.unique(_encode(corners, n + 1), return_inverse=True)
    verts = np.stack([vkeys // (n + 1), vkeys % (n + 1)], axis=1)
    signs = _vertex_signs(f, tape, L, n, verts)
    uncertain = np.flatnonzero(signs == UNCERTAIN)
    certified = True
    if uncertain.size:
        if not conservative:
            raise UncertainSign([(float(Fraction(-L) + int(i) * Fraction(2 * L) / n),
                                  float(Fraction(-L) + int(j) * Fraction(2 * L) / n))
                                 for i, j in verts[uncertain].tolist()])
        certified = False
        notes.append(f"NON-CERTIFIED: {uncertain.size} uncertain vertex signs treated as zero")
    eff = np.where(signs == UNCERTAIN, ZERO, signs)
    corner_sign = eff[inverse].reshape(4, -1)
    sel = (corner_sign.max(axis=0) >= 0) & (corner_sign.min(axis=0) <= 0)
    chosen = cells[sel]
    chosen = chosen[np.argsort(_encode(chosen, n + 1), kind="stable")]
    return SelectionGrid(L, delta, n, chosen, verts, signs.astype(np.int8), certified, notes)


def _vertex_signs(f: ex.Expr, tape: Tape, L: float, n: int, verts: np.ndarray) -> np.ndarray:
    lo_x, hi_x = _coords(L, n, verts[:, 0])
    lo_y, hi_y = _coords(L, n, verts[:, 1])
    lo = np.stack([lo_x, lo_y], axis=1)
    hi = np.stack([hi_x, hi_y], axis=1)
    try:
        enc = tape.eval_interval(lo, hi)[0]
        elo, ehi = np.asarray(enc.lo), np.asarray(enc.hi)
    except IntervalDomainError:
        elo = np.full(verts.shape[0], -np.inf)
        ehi = np.full(verts.shape[0], np.inf)
    signs = np.where(elo > 0, POS, np.where(ehi < 0, NEG, UNCERTAIN)).astype(np.int64)
    todo = np.flatnonzero(signs == UNCERTAIN)
    if todo.size and ex.is_rational(f):
        step = Fraction(2 * L) / n
        for t in todo.tolist():
            i, j = verts[t].tolist()
            p = (Fraction(-L) + i * step, Fraction(-L) + j * step)
            try:
                v = ex.evaluate_exact(f, p)
            except (ZeroDivisionError, ex.EvalDomainError):
                continue
            signs[t] = POS if v > 0 else NEG if v < 0 else ZERO
    return signs


# -- homology -----------------------------------------------------------------------

def complex_of(grid: SelectionGrid) -> CubicalComplex:
    cells = grid.selected
    F = int(cells.shape[0])
    if F == 0:
        return CubicalComplex(0, 0, 0, 0)
    w = grid.n + 2
    corners = np.concatenate([cells + o for o in ((0, 0), (1, 0), (0, 1), (1, 1))])
    V = np.unique(_encode(corners, w)).size
    horiz = np.concatenate([cells, cells + (0, 1)])  # edge from (i, j) to (i+1, j)
    vert = np.concatenate([cells, cells + (1, 0)])  # edge from (i, j) to (i, j+1)
    E = np.unique(_encode(horiz, w)).size + np.unique(_encode(vert, w)).size
    return CubicalComplex(V, E, F, _components(cells, w))


def _components(cells: np.ndarray, w: int) -> int:
    """Connected components of closed cells; cells sharing an edge or a corner touch."""
    keys = _encode(cells, w)
    order = np.argsort(keys)
    skeys = keys[order]
    rows, cols = [], []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if (di, dj) <= (0, 0):
                continue
            nb = _encode(cells + (di, dj), w)
            pos = np.clip(np.searchsorted(skeys, nb), 0, skeys.size - 1)
            hit = (skeys[pos] == nb) & np.all(cells + (di, dj) >= 0, axis=1)
            rows.append(np.flatnonzero(hit))
            cols.append(order[pos[hit]])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    m = coo_matrix((np.ones(r.size), (r, c)), shape=(cells.shape[0],) * 2)
    count, _ = connected_components(m, directed=False)
    return int(count)


def euler_characteristic(grid: SelectionGrid) -> int:
    return complex_of(grid).euler


def betti(grid: SelectionGrid) -> tuple[int, int]:
    """(b0, b1) of the union of the selected closed cells."""
    b0, b1 = complex_of(grid).betti
    if b1 < 0:  # impossible for a planar 2-complex
        raise AssertionError(f"negative b1 ({b1}); complex bookkeeping is broken")
    return b0, b1


# -- export ---------------------------------------------------------------------------

def grid_to_dict(grid: SelectionGrid) -> dict:
    return {
        "schema": GRID_SCHEMA,
        "version": 1,
        "L": grid.L,
        "delta": grid.delta,
        "n": grid.n,
        "certified": grid.certified,
        "notes": list(grid.notes),
        "selected": grid.selected.tolist(),
    }


def grid_dumps(grid: SelectionGrid) -> str:
    return json.dumps(grid_to_dict(grid), separators=(",", ":")) + "\n"


def grid_from_dict(d: dict) -> SelectionGrid:
    if d.get("schema") != GRID_SCHEMA:
        raise ValueError("not a grid export")
    sel = np.array(d["selected"], dtype=np.int64).reshape(-1, 2)
    empty = np.zeros((0, 2), dtype=np.int64)
    return SelectionGrid(float(d["L"]), float(d["delta"]), int(d["n"]), sel, empty,
                         np.zeros(0, dtype=np.int8), bool(d["certified"]), list(d.get("notes", [])))
