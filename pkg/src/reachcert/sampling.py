"""Non-certified point sampling on a zero set by Newton projection."""

from __future__ import annotations

import numpy as np

from . import expr as ex
from .interval import Tape


class _FloatSystem:
    def __init__(self, fs: ex.FunctionSystem):
        self.fs = fs
        self.tape = Tape(list(fs.functions) + [g for grad in fs.gradients for g in grad])

    def __call__(self, pts: np.ndarray):
        k, n = self.fs.k, self.fs.dimension
        out = self.tape.eval_float(pts)
        F = np.stack(out[:k], axis=-1)
        J = np.stack(out[k:], axis=-1).reshape(pts.shape[0], k, n)
        return F, J


def project(fs: ex.FunctionSystem, pts: np.ndarray, iters: int = 60, tol: float = 1e-10):
    """Gauss-Newton projection of ``pts`` onto Z(fs).

    Returns ``(points, ok)`` where ``ok`` flags points whose residual
    ``max_i |f_i|`` is at most ``tol``.
    """
    system = _FloatSystem(fs)
    x = np.array(pts, dtype=float)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            F, J = system(x)
            JJt = J @ np.swapaxes(J, 1, 2)
            # pinv keeps the batch going when a start point hits a critical point
            bad = ~np.all(np.isfinite(JJt), axis=(1, 2))
            JJt[bad] = np.eye(fs.k)
            step = np.linalg.pinv(JJt) @ np.where(np.isfinite(F), F, 0.0)[..., None]
            dx = (np.swapaxes(J, 1, 2) @ step)[..., 0]
            dx = np.where(np.isfinite(dx), dx, 0.0)
            x = x - dx
            if np.all(np.abs(F) <= tol * 1e-3):
                break
        F, _ = system(x)
    res = np.max(np.abs(F), axis=1)
    ok = np.isfinite(res) & (res <= tol) & np.all(np.isfinite(x), axis=1)
    return x, ok


def sample_zero_set(fs: ex.FunctionSystem, M1: float, count: int, seed: int = 0,
                    max_rounds: int = 50, tol: float = 1e-10) -> np.ndarray:
    """About ``count`` points of Z(fs) inside ``[-M1, M1]^N`` (may return fewer)."""
    rng = np.random.default_rng(seed)
    found = []
    total = 0
    n = fs.dimension
    for _ in range(max_rounds):
        starts = rng.uniform(-M1, M1, size=(max(2 * (count - total), 64), n))
        x, ok = project(fs, starts, tol=tol)
        ok &= np.all(np.abs(x) <= M1, axis=1)
        good = x[ok]
        found.append(good)
        total += good.shape[0]
        if total >= count:
            break
    pts = np.concatenate(found) if found else np.zeros((0, n))
    return pts[:count]


def grad_l1(fs: ex.FunctionSystem, pts: np.ndarray) -> np.ndarray:
    _, J = _FloatSystem(fs)(pts)
    return np.abs(J[:, 0, :]).sum(axis=1)


def gram_det(fs: ex.FunctionSystem, pts: np.ndarray) -> np.ndarray:
    _, J = _FloatSystem(fs)(pts)
    return np.linalg.det(J @ np.swapaxes(J, 1, 2))
