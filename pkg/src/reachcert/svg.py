"""Deterministic SVG drawings of certificates and selection grids."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import expr as ex
from . import subdivide as sd
from .interval import Tape

GREEN = "#2e9e44"
RED = "#d62728"
FILL = {sd.CASE_ONE: "#e6f4e9", sd.CASE_TWO: "#fbe3e3"}
STROKE = {sd.CASE_ONE: GREEN, sd.CASE_TWO: RED}


def _num(x: float) -> str:
    # shortest round-trip text; integers without a trailing .0
    x = float(x)
    return str(int(x)) if x == int(x) and abs(x) < 1e15 else repr(x)


def _header(lo: float, hi: float, px: int = 800) -> list[str]:
    w = hi - lo
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{px}" height="{px}" '
        f'viewBox="{_num(lo)} {_num(lo)} {_num(w)} {_num(w)}">',
        # flip y so that the picture has the usual orientation
        f'<g transform="translate(0 {_num(lo + hi)}) scale(1 -1)">',
    ]


def render_certificate(cert: sd.SubdivisionCertificate) -> str:
    """One rectangle per terminal box: green border for CaseOne, red for CaseTwo."""
    if cert.N != 2:
        raise ValueError(f"only planar certificates can be drawn (N={cert.N})")
    lo, _, _, side = cert.geometry()
    stroke = _num(2 * cert.M1 / 800)
    out = _header(-cert.M1, cert.M1)
    for c in (sd.CASE_ONE, sd.CASE_TWO):
        out.append(f'<g fill="{FILL[c]}" stroke="{STROKE[c]}" stroke-width="{stroke}">')
        for b in np.flatnonzero(cert.classes == c):
            out.append(
                f'<rect x="{_num(lo[b, 0])}" y="{_num(lo[b, 1])}" '
                f'width="{_num(side[b, 0])}" height="{_num(side[b, 1])}"/>'
            )
        out.append("</g>")
    out += ["</g>", "</svg>", ""]
    return "\n".join(out)


def marching_squares(values: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> list[tuple[float, float, float, float]]:
    """Line segments of the zero contour of ``values[i, j]`` sampled at ``(xs[i], ys[j])``."""
    v = values
    segs = []
    a, b = v[:-1, :-1], v[1:, :-1]
    c, d = v[1:, 1:], v[:-1, 1:]

    def cross(p, q, x0, y0, x1, y1):
        t = p / (p - q)
        return x0 + t * (x1 - x0), y0 + t * (y1 - y0)

    ii, jj = np.nonzero((np.minimum(np.minimum(a, b), np.minimum(c, d)) < 0)
                        & (np.maximum(np.maximum(a, b), np.maximum(c, d)) > 0))
    for i, j in zip(ii.tolist(), jj.tolist()):
        x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]
        corners = [(a[i, j], x0, y0), (b[i, j], x1, y0), (c[i, j], x1, y1), (d[i, j], x0, y1)]
        pts = []
        for k in range(4):
            p, px, py = corners[k]
            q, qx, qy = corners[(k + 1) % 4]
            if (p < 0) != (q < 0) and np.isfinite(p) and np.isfinite(q):
                pts.append(cross(p, q, px, py, qx, qy))
        for k in range(0, len(pts) - 1, 2):
            segs.append((*pts[k], *pts[k + 1]))
    return segs


def render_grid(grid, f: ex.Expr | None = None, samples: int = 400) -> str:
    """Selected cells in green with the (sampled, non-certified) curve in red."""
    L, n = grid.L, grid.n
    step = Fraction(2 * L) / n
    out = _header(-L, L)
    out.append(f'<g fill="#b7e4c0" stroke="{GREEN}" stroke-width="{_num(2 * L / 1600)}">')
    w = _num(float(step))
    for i, j in grid.selected.tolist():
        out.append(f'<rect x="{_num(float(-L + i * step))}" y="{_num(float(-L + j * step))}" width="{w}" height="{w}"/>')
    out.append("</g>")
    if f is not None:
        xs = np.linspace(-L, L, samples + 1)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        vals = Tape([f]).eval_float(np.stack([X.ravel(), Y.ravel()], axis=1))[0].reshape(X.shape)
        segs = marching_squares(vals, xs, xs)
        path = " ".join(f"M{x0:.6g} {y0:.6g}L{x1:.6g} {y1:.6g}" for x0, y0, x1, y1 in segs)
        out.append(f'<path d="{path}" fill="none" stroke="{RED}" stroke-width="{_num(2 * L / 400)}"/>')
    out += ["</g>", "</svg>", ""]
    return "\n".join(out)
