"""Box-subdivision engine for certifying that a zero set is well conditioned.

Boxes live on a dyadic lattice over ``[-M1, M1]^N``: a box is stored as an
integer index and a depth per axis, so that its corner is
``-M1 + idx * 2*M1 / 2**depth`` and its side is ``2*M1 / 2**depth``.  As long as
the mantissa of ``M1`` plus the depth cap fits in a double, every corner,
side and midpoint is an exact float.

The worklist is processed in bulk-synchronous rounds: the whole frontier is
classified (optionally split across threads in contiguous chunks), and the
children of split boxes form the next frontier in order.  This is FIFO order
and yields results independent of the worker count.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np

from . import expr as ex
from .interval import (
    BoxDomain,
    Interval,
    IntervalDomainError,
    Tape,
    frobenius_bounds,
    grad_norm_bounds,
    interval_det,
    upper_triangle,
)
from .rounding import mul_down, sqrt_down, sqrt_up

log = logging.getLogger(__name__)

UNCLASSIFIED, CASE_ONE, CASE_TWO = 0, 1, 2
SPLIT = 3
CLASS_NAMES = {UNCLASSIFIED: "Unclassified", CASE_ONE: "CaseOne", CASE_TWO: "CaseTwo", SPLIT: "Split"}
CLASS_CODES = {v: k for k, v in CLASS_NAMES.items()}

Strategy = Literal["full", "bisect"]
BoundMode = Literal["global", "per-box"]


class SubdivisionLimitExceeded(RuntimeError):
    """The worklist did not empty within the configured limits."""

    def __init__(self, message: str, steps: int, deepest: list[BoxDomain] | None = None):
        super().__init__(message)
        self.steps = steps
        self.deepest = deepest or []


class DepthCapExceeded(SubdivisionLimitExceeded):
    """A box would have to be split beyond the depth cap (singular or nearly singular zero set)."""


@dataclass(frozen=True)
class SubdivisionConfig:
    depth_cap: int = 40
    step_cap: int = 5_000_000
    bound_mode: BoundMode = "global"
    strategy: Strategy = "full"
    workers: int = 1
    M2: float | None = None
    M3: float | None = None
    chunk_size: int = 4096

    def __post_init__(self):
        if self.bound_mode not in ("global", "per-box"):
            raise ValueError(f"unknown bound mode {self.bound_mode!r}")
        if self.strategy not in ("full", "bisect"):
            raise ValueError(f"unknown split strategy {self.strategy!r}")
        if self.depth_cap < 0 or self.step_cap < 1 or self.workers < 1:
            raise ValueError("depth cap, step cap and workers must be positive")
        for name in ("M2", "M3"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} override must be finite and nonnegative")


@dataclass(frozen=True)
class BoxRegion:
    domain: BoxDomain
    depth: int
    classification: str = "Unclassified"

    @property
    def side(self) -> float:
        return max(self.domain.sides)


# -- lattice geometry ---------------------------------------------------------

def _check_lattice(M1: float, depth_cap: int) -> None:
    if not (math.isfinite(M1) and M1 > 0):
        raise ValueError("M1 must be positive and finite")
    num, _ = Fraction(M1).as_integer_ratio()
    # corner/midpoint numerators need depth_cap + 2 bits on top of the mantissa
    if num.bit_length() + depth_cap + 2 > 53:
        raise ValueError(
            f"M1={M1!r} has {num.bit_length()} mantissa bits; with depth cap {depth_cap} "
            "box corners would not be exact floats (use a shorter M1 or smaller cap)"
        )


def lattice_coords(M1: float, idx: np.ndarray, depth: np.ndarray):
    """Exact float corners, sides and midpoints of lattice boxes."""
    scale = np.ldexp(1.0, -depth)
    side = np.ldexp(2.0 * M1, -depth)
    lo = M1 * (2.0 * idx - np.ldexp(1.0, depth)) * scale
    mid = M1 * (2.0 * idx + 1.0 - np.ldexp(1.0, depth)) * scale
    return lo, lo + side, mid, side


# -- certified per-box quantities --------------------------------------------

class _Kernels:
    """Compiled tapes for one function system."""

    def __init__(self, fs: ex.FunctionSystem):
        n = fs.dimension
        self.fs = fs
        self.point = Tape(list(fs.functions) + [g for grad in fs.gradients for g in grad])
        self.grads = [Tape(list(g)) for g in fs.gradients]
        self.hess = [Tape(upper_triangle(fs, i)) for i in range(fs.k)]
        self.n = n

    def at_points(self, m: np.ndarray):
        out = self.point.eval_interval(m, m)
        k, n = self.fs.k, self.n
        values = out[:k]
        grads = [out[k + i * n: k + (i + 1) * n] for i in range(k)]
        return values, grads

    def box_bounds(self, lo: np.ndarray, hi: np.ndarray):
        """Per-box M2 (max over functions of gradient 2-norm) and M3 (max Hessian bound)."""
        m2 = np.zeros(lo.shape[0])
        m3 = np.zeros(lo.shape[0])
        for i in range(self.fs.k):
            m2 = np.maximum(m2, grad_norm_bounds(self.grads[i].eval_interval(lo, hi)))
            m3 = np.maximum(m3, frobenius_bounds(self.hess[i].eval_interval(lo, hi), self.n))
        return m2, m3


def _up(x):
    return np.nextafter(x, np.inf)


def _down(x):
    return np.nextafter(x, -np.inf)


def _mul_up(*xs):
    out = np.asarray(xs[0], dtype=float)
    with np.errstate(over="ignore"):
        for x in xs[1:]:
            out = _up(out * x)
    return out


def _sum_down(xs):
    out = np.zeros_like(np.asarray(xs[0], dtype=float))
    for x in xs:
        out = np.maximum(_down(out + x), 0.0)
    return out


def gram_det(grads: list[list[Interval]]) -> Interval:
    """Enclosure of det g with g_ij = <grad f_i, grad f_j>."""
    k = len(grads)
    g = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            s = grads[i][0] * grads[j][0] if i != j else grads[i][0].sqr()
            for a in range(1, len(grads[i])):
                s = s + (grads[i][a] * grads[j][a] if i != j else grads[i][a].sqr())
            g[i][j] = g[j][i] = s
    return interval_det(g)


def classify_batch(kern: _Kernels, mid: np.ndarray, eps: np.ndarray, M2: np.ndarray, M3: np.ndarray) -> np.ndarray:
    """Classify boxes with midpoints ``mid`` and longest sides ``eps`` (shape (B,))."""
    n, k = kern.n, kern.fs.k
    values, grads = kern.at_points(mid)
    sqrt_n = sqrt_up(n)
    one_rhs = _mul_up(sqrt_n, eps, M2)
    fmag = values[0].mig()
    for v in values[1:]:
        fmag = np.maximum(fmag, v.mig())
    cls = np.full(mid.shape[0], SPLIT, dtype=np.int8)
    cls[np.asarray(fmag) > one_rhs] = CASE_ONE
    rest = cls == SPLIT
    if not np.any(rest):
        return cls
    if k == 1:
        l1 = _sum_down([g.mig() for g in grads[0]])
        rhs = _mul_up(n, sqrt_n, eps, M3)
        ok = np.asarray(l1) > rhs
    else:
        det = gram_det(grads)
        rhs = _mul_up(2 * n * math.factorial(k), eps, _pow_up(M2, 2 * k - 1), M3)
        ok = np.asarray(det.mig()) > rhs
    cls[rest & ok] = CASE_TWO
    return cls


def _pow_up(x, p: int):
    out = np.ones_like(np.asarray(x, dtype=float))
    for _ in range(p):
        out = _mul_up(out, x)
    return out


# -- certificate ----------------------------------------------------------------

@dataclass
class SubdivisionCertificate:
    mode: Literal["single", "system"]
    k: int
    N: int
    M1: float
    M2: float
    M3: float
    functions: tuple[str, ...]
    bound_mode: str
    strategy: str
    # terminal boxes in canonical order: integer lattice data plus class codes
    idx: np.ndarray
    depth: np.ndarray
    classes: np.ndarray
    epsilon_min: float
    grad_l1_lower: float | None
    det_g_lower: float | None
    off_zero_lower: float
    empty_B: bool
    steps: int
    max_depth: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def n_boxes(self) -> int:
        return int(self.classes.shape[0])

    def geometry(self):
        return lattice_coords(self.M1, self.idx, self.depth)

    def boxes(self, which: int | None = None) -> list[BoxRegion]:
        lo, hi, _, _ = self.geometry()
        out = []
        for b in range(self.n_boxes):
            c = int(self.classes[b])
            if which is not None and c != which:
                continue
            out.append(BoxRegion(BoxDomain(tuple(lo[b]), tuple(hi[b])), int(self.depth[b].min()), CLASS_NAMES[c]))
        return out

    @property
    def case_one_boxes(self) -> list[BoxRegion]:
        return self.boxes(CASE_ONE)

    @property
    def case_two_boxes(self) -> list[BoxRegion]:
        return self.boxes(CASE_TWO)


def canonical_order(idx: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Permutation sorting boxes lexicographically by lower corner, then by side."""
    top = int(depth.max()) if depth.size else 0
    corner = idx.astype(np.int64) << (top - depth).astype(np.int64)
    keys = [depth[:, a] for a in reversed(range(idx.shape[1]))]
    keys += [corner[:, a] for a in reversed(range(idx.shape[1]))]
    return np.lexsort(keys)


def single_bounds(M2: float, M3: float, N: int, eps: float):
    """(gradient 1-norm lower bound, |f| lower bound) from one box side, rounded down."""
    half = Fraction(eps) / 2
    g = mul_down(M3, N, sqrt_down(N), half)
    o = mul_down(sqrt_down(N), half, M2)
    return g, o


def system_det_bound(M2: float, M3: float, N: int, k: int, eps: float) -> float:
    return mul_down(N, eps, math.factorial(k), Fraction(M2) ** (2 * k - 1), M3)


def global_bounds(fs: ex.FunctionSystem, M1: float, config: SubdivisionConfig) -> tuple[float, float]:
    kern = _Kernels(fs)
    lo = np.full((1, fs.dimension), -M1)
    hi = np.full((1, fs.dimension), M1)
    try:
        m2, m3 = kern.box_bounds(lo, hi)
    except IntervalDomainError as err:
        raise IntervalDomainError(f"{err} (box lower={tuple(lo[0].tolist())}, upper={tuple(hi[0].tolist())})", 0) from err
    # user overrides are taken verbatim: they are the user's (possibly analytic) bounds
    M2 = float(m2[0]) if config.M2 is None else float(config.M2)
    M3 = float(m3[0]) if config.M3 is None else float(config.M3)
    return M2, M3


def _children(idx: np.ndarray, depth: np.ndarray, strategy: str):
    n = idx.shape[1]
    if strategy == "full":
        offs = np.array([[(c >> a) & 1 for a in reversed(range(n))] for c in range(1 << n)], dtype=np.int64)
        cidx = (2 * idx[:, None, :] + offs[None, :, :]).reshape(-1, n)
        cdep = np.repeat(depth + 1, 1 << n, axis=0)
        return cidx, cdep
    axis = np.argmin(depth, axis=1)
    rows = np.arange(idx.shape[0])
    out_idx = np.repeat(idx, 2, axis=0)
    out_dep = np.repeat(depth, 2, axis=0)
    r2 = np.repeat(rows, 2) * 2 + np.tile([0, 1], rows.size)
    ax2 = np.repeat(axis, 2)
    out_idx[r2, ax2] = 2 * out_idx[r2, ax2] + np.tile([0, 1], rows.size)
    out_dep[r2, ax2] += 1
    return out_idx, out_dep


def _workers(config: SubdivisionConfig) -> int:
    env = os.environ.get("WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"WORKERS must be an integer, got {env!r}") from None
    return config.workers


def run(fs: ex.FunctionSystem, M1: float, config: SubdivisionConfig | None = None,
        workers: int | None = None) -> SubdivisionCertificate:
    """Subdivide ``[-M1, M1]^N`` until every box is CaseOne or CaseTwo.

    The certificate is relative to the hypothesis that the zero set lies in
    the box; this is not checked.
    """
    config = config or SubdivisionConfig()
    _check_lattice(M1, config.depth_cap)
    n, k = fs.dimension, fs.k
    t0 = time.perf_counter()
    kern = _Kernels(fs)
    M2g, M3g = global_bounds(fs, M1, config)
    per_box = config.bound_mode == "per-box"
    nworkers = workers if workers is not None else _workers(config)

    def classify(idx, depth):
        lo, hi, mid, side = lattice_coords(M1, idx, depth)
        eps = side.max(axis=1)
        if per_box:
            m2, m3 = kern.box_bounds(lo, hi)
            m2 = np.minimum(m2, M2g)
            m3 = np.minimum(m3, M3g)
        else:
            m2 = np.full(idx.shape[0], M2g)
            m3 = np.full(idx.shape[0], M3g)
        try:
            cls = classify_batch(kern, mid, eps, m2, m3)
        except IntervalDomainError as err:
            b = err.index if err.index is not None else 0
            b = min(b, idx.shape[0] - 1)
            raise IntervalDomainError(
                f"{err} (box lower={tuple(lo[b].tolist())}, upper={tuple(hi[b].tolist())})", b
            ) from err
        return cls, m2, m3

    frontier_idx = np.zeros((1, n), dtype=np.int64)
    frontier_dep = np.zeros((1, n), dtype=np.int64)
    done_idx, done_dep, done_cls, done_m2, done_m3 = [], [], [], [], []
    steps = 0
    pool = ThreadPoolExecutor(nworkers) if nworkers > 1 else None
    try:
        while frontier_idx.shape[0]:
            count = frontier_idx.shape[0]
            if steps + count > config.step_cap:
                raise SubdivisionLimitExceeded(
                    f"step cap {config.step_cap} reached with {count} boxes pending", steps
                )
            bounds = range(0, count, config.chunk_size)
            chunks = [(frontier_idx[s:s + config.chunk_size], frontier_dep[s:s + config.chunk_size]) for s in bounds]
            if pool is not None and len(chunks) > 1:
                results = list(pool.map(lambda c: classify(*c), chunks))
            else:
                results = [classify(*c) for c in chunks]
            cls = np.concatenate([r[0] for r in results])
            m2 = np.concatenate([r[1] for r in results])
            m3 = np.concatenate([r[2] for r in results])
            before = steps
            steps += count
            if steps // 10_000 > before // 10_000:
                log.info("subdivision: %d boxes classified, frontier %d", steps, count)
            term = cls != SPLIT
            done_idx.append(frontier_idx[term])
            done_dep.append(frontier_dep[term])
            done_cls.append(cls[term])
            done_m2.append(m2[term])
            done_m3.append(m3[term])
            sidx, sdep = frontier_idx[~term], frontier_dep[~term]
            if sidx.shape[0] == 0:
                break
            if config.strategy == "full":
                too_deep = sdep[:, 0] >= config.depth_cap
            else:
                too_deep = sdep.max(axis=1) >= config.depth_cap
            if np.any(too_deep):
                lo, hi, _, _ = lattice_coords(M1, sidx[too_deep], sdep[too_deep])
                deepest = [BoxDomain(tuple(a), tuple(b)) for a, b in zip(lo[:10], hi[:10])]
                raise DepthCapExceeded(
                    f"depth cap {config.depth_cap} reached with {int(too_deep.sum())} unresolved boxes; "
                    "the zero set may be singular inside the box",
                    steps,
                    deepest,
                )
            frontier_idx, frontier_dep = _children(sidx, sdep, config.strategy)
    finally:
        if pool is not None:
            pool.shutdown()

    idx = np.concatenate(done_idx)
    depth = np.concatenate(done_dep)
    classes = np.concatenate(done_cls)
    m2 = np.concatenate(done_m2)
    m3 = np.concatenate(done_m3)
    order = canonical_order(idx, depth)
    idx, depth, classes, m2, m3 = idx[order], depth[order], classes[order], m2[order], m3[order]
    cert = _assemble(fs, M1, config, M2g, M3g, idx, depth, classes, m2, m3, steps)
    cert.wall_time = time.perf_counter() - t0
    return cert


def _assemble(fs, M1, config, M2g, M3g, idx, depth, classes, m2, m3, steps) -> SubdivisionCertificate:
    n, k = fs.dimension, fs.k
    sides = [mul_down(2 * M1, Fraction(1, 2 ** int(d))) for d in depth.min(axis=1)]
    eps_min = min(sides)
    two = classes == CASE_TWO
    one = classes == CASE_ONE
    empty = not bool(np.any(two))
    grad = det = None
    if config.bound_mode == "global":
        if k == 1:
            grad, off = single_bounds(M2g, M3g, n, eps_min)
        else:
            off = single_bounds(M2g, M3g, n, eps_min)[1]
            det = system_det_bound(M2g, M3g, n, k, eps_min)
        if empty:
            grad = math.inf if k == 1 else None
            det = math.inf if k > 1 else None
    else:
        per_two = [(sides[b], m2[b], m3[b]) for b in np.flatnonzero(two)]
        per_one = [(sides[b], m2[b], m3[b]) for b in np.flatnonzero(one)]
        if k == 1:
            grad = min((single_bounds(M2, M3, n, e)[0] for e, M2, M3 in per_two), default=math.inf)
        else:
            det = min((system_det_bound(M2, M3, n, k, e) for e, M2, M3 in per_two), default=math.inf)
        off = min((single_bounds(M2, M3, n, e)[1] for e, M2, M3 in per_one), default=math.inf)
    return SubdivisionCertificate(
        mode="single" if k == 1 else "system",
        k=k,
        N=n,
        M1=M1,
        M2=M2g,
        M3=M3g,
        functions=fs.texts(),
        bound_mode=config.bound_mode,
        strategy=config.strategy,
        idx=idx,
        depth=depth,
        classes=classes,
        epsilon_min=eps_min,
        grad_l1_lower=grad,
        det_g_lower=det,
        off_zero_lower=off,
        empty_B=empty,
        steps=steps,
        max_depth=int(depth.max()),
    )


# -- single-box API ------------------------------------------------------------

def _box_bounds_for(fs: ex.FunctionSystem, b: BoxRegion, bounds) -> tuple[float, float]:
    if bounds in (None, "per-box"):
        kern = _Kernels(fs)
        lo = np.array([b.domain.lower])
        hi = np.array([b.domain.upper])
        m2, m3 = kern.box_bounds(lo, hi)
        return float(m2[0]), float(m3[0])
    M2, M3 = bounds
    return float(M2), float(M3)


def _classify_one(fs: ex.FunctionSystem, b: BoxRegion, bounds) -> str:
    M2, M3 = _box_bounds_for(fs, b, bounds)
    kern = _Kernels(fs)
    mid = np.array([b.domain.midpoint()])
    eps = np.array([b.side])
    cls = classify_batch(kern, mid, eps, np.array([M2]), np.array([M3]))
    return CLASS_NAMES[int(cls[0])]


def classify_single(fs: ex.FunctionSystem, b: BoxRegion, bounds=None) -> str:
    """One step of the single-function test on ``b``: "CaseOne", "CaseTwo" or "Split".

    ``bounds`` is a pair ``(M2, M3)`` of global bounds, or ``None``/"per-box"
    to compute them over ``b`` itself.
    """
    if fs.k != 1:
        raise ValueError("classify_single needs exactly one function")
    return _classify_one(fs, b, bounds)


def classify_system(fs: ex.FunctionSystem, b: BoxRegion, bounds=None) -> str:
    """Like :func:`classify_single`, with the max-|f_j| and Gram-determinant tests.

    Uses the determinant test even when k = 1.
    """
    M2, M3 = _box_bounds_for(fs, b, bounds)
    kern = _Kernels(fs)
    values, grads = kern.at_points(np.array([b.domain.midpoint()]))
    n, k = fs.dimension, fs.k
    eps = np.array([b.side])
    fmag = max(float(np.asarray(v.mig())[0]) for v in values)
    if fmag > float(_mul_up(sqrt_up(n), eps, M2)[0]):
        return "CaseOne"
    det = gram_det(grads)
    rhs = float(_mul_up(2 * n * math.factorial(k), eps, _pow_up(np.array(M2), 2 * k - 1), M3)[0])
    if float(np.asarray(det.mig())[0]) > rhs:
        return "CaseTwo"
    return "Split"


# -- diagnostics -----------------------------------------------------------------

def locate(cert: SubdivisionCertificate, pts: np.ndarray) -> np.ndarray:
    """Index of a terminal box containing each point (-1 if outside the root box)."""
    pts = np.asarray(pts, dtype=float)
    out = np.full(pts.shape[0], -1, dtype=np.int64)
    table = {}
    for b in range(cert.n_boxes):
        table[(tuple(cert.depth[b].tolist()), tuple(cert.idx[b].tolist()))] = b
    inside = np.all(np.abs(pts) <= cert.M1, axis=1)
    unit = (pts + cert.M1) / (2 * cert.M1)
    for dep in {tuple(d) for d in cert.depth.tolist()}:
        scale = np.ldexp(1.0, np.array(dep))
        cell = np.minimum(np.floor(unit * scale), scale - 1).astype(np.int64)
        for p in np.flatnonzero(inside & (out < 0)):
            hit = table.get((dep, tuple(cell[p].tolist())))
            if hit is not None:
                out[p] = hit
    return out


@dataclass
class SampleReport:
    requested: int
    sampled: int
    quantity: str
    sampled_min: float
    certified: float | None
    violations: int
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.violations == 0


def sanity_check_sample(fs: ex.FunctionSystem, cert: SubdivisionCertificate, n: int = 10_000,
                        seed: int = 0) -> SampleReport:
    """Non-certified cross-check of the certificate against points sampled on Z(fs).

    Every sampled point must lie in a CaseTwo box and the sampled minimum of
    |grad f|_1 (or det g) must not fall below the certified bound.
    """
    from . import sampling

    quantity = "grad_l1" if cert.mode == "single" else "det_g"
    bound = cert.grad_l1_lower if cert.mode == "single" else cert.det_g_lower
    if cert.empty_B:
        return SampleReport(n, 0, quantity, math.inf, bound, 0, "empty B: nothing to sample")
    pts = sampling.sample_zero_set(fs, cert.M1, n, seed=seed)
    if pts.shape[0] == 0:
        return SampleReport(n, 0, quantity, math.inf, bound, 0, "sampling failed to reach the zero set")
    vals = sampling.grad_l1(fs, pts) if cert.mode == "single" else sampling.gram_det(fs, pts)
    where = locate(cert, pts)
    outside = int(np.sum((where < 0) | (cert.classes[np.maximum(where, 0)] != CASE_TWO)))
    below = int(np.sum(vals < bound)) if bound is not None and math.isfinite(bound) else 0
    note = "" if pts.shape[0] == n else f"only {pts.shape[0]} of {n} samples converged"
    return SampleReport(n, int(pts.shape[0]), quantity, float(vals.min()), bound, outside + below, note)
