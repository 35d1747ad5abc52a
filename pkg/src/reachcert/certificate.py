"""Certificate files and their independent re-verification.

A certificate is a JSON document with a schema name and version, the
constants, and the terminal boxes as ``[corner, sides, class]`` triples in
canonical order.  Floats are written by ``json`` using ``repr`` (shortest
round-trip decimal); infinities are written as the strings ``"inf"`` and
``"-inf"``.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Any

import numpy as np

from . import expr as ex
from . import subdivide as sd

SCHEMA = "reachcert.certificate"
VERSION = 1


class CertificateError(ValueError):
    pass


def encode_float(x: float | None):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        raise CertificateError("NaN has no place in a certificate")
    return float(x)


def decode_float(x) -> float | None:
    if x is None:
        return None
    if isinstance(x, str):
        if x in ("inf", "-inf"):
            return float(x)
        raise CertificateError(f"bad float literal {x!r}")
    return float(x)


def to_dict(cert: sd.SubdivisionCertificate) -> dict[str, Any]:
    lo, _, _, side = cert.geometry()
    boxes = [
        [lo[b].tolist(), side[b].tolist(), sd.CLASS_NAMES[int(cert.classes[b])]]
        for b in range(cert.n_boxes)
    ]
    return {
        "schema": SCHEMA,
        "version": VERSION,
        "mode": cert.mode,
        "k": cert.k,
        "N": cert.N,
        "functions": list(cert.functions),
        "M1": cert.M1,
        "M2": cert.M2,
        "M3": cert.M3,
        "bound_mode": cert.bound_mode,
        "strategy": cert.strategy,
        "epsilon_min": cert.epsilon_min,
        "grad_l1_lower": encode_float(cert.grad_l1_lower),
        "det_g_lower": encode_float(cert.det_g_lower),
        "off_zero_lower": encode_float(cert.off_zero_lower),
        "empty_B": cert.empty_B,
        "stats": {"steps": cert.steps, "max_depth": cert.max_depth, "boxes": cert.n_boxes},
        "boxes": boxes,
    }


def dumps(cert: sd.SubdivisionCertificate) -> str:
    # one box per line keeps large certificates diffable
    d = to_dict(cert)
    boxes = d.pop("boxes")
    head = json.dumps(d, indent=1)
    lines = ",\n".join("  " + json.dumps(b, separators=(",", ":")) for b in boxes)
    return head[:-2] + ',\n "boxes": [\n' + lines + "\n ]\n}\n"


def _lattice(M1: float, corner: list[float], sides: list[float]):
    """Integer (idx, depth) of a box, or raise if it is not a dyadic sub-box of the root."""
    m1 = Fraction(M1)
    idx, dep = [], []
    for c, s in zip(corner, sides):
        ratio = 2 * m1 / Fraction(s)
        if ratio.denominator != 1 or ratio.numerator & (ratio.numerator - 1):
            raise CertificateError(f"side {s!r} is not 2*M1/2^d")
        d = ratio.numerator.bit_length() - 1
        j = (Fraction(c) + m1) / Fraction(s)
        if j.denominator != 1 or not 0 <= j.numerator < 2 ** d:
            raise CertificateError(f"corner {c!r} is not on the depth-{d} lattice inside the root box")
        idx.append(j.numerator)
        dep.append(d)
    return idx, dep


def from_dict(d: dict[str, Any]) -> sd.SubdivisionCertificate:
    if not isinstance(d, dict):
        raise CertificateError("not a certificate (expected a JSON object)")
    if d.get("schema") != SCHEMA:
        raise CertificateError(f"not a certificate (schema {d.get('schema')!r})")
    if d.get("version") != VERSION:
        raise CertificateError(f"unsupported certificate version {d.get('version')!r}")
    try:
        M1 = float(d["M1"])
        n = int(d["N"])
        idx, dep, cls = [], [], []
        for corner, sides, name in d["boxes"]:
            if len(corner) != n or len(sides) != n:
                raise CertificateError("box of the wrong dimension")
            i, p = _lattice(M1, corner, sides)
            idx.append(i)
            dep.append(p)
            if name not in ("CaseOne", "CaseTwo"):
                raise CertificateError(f"terminal box with class {name!r}")
            cls.append(sd.CLASS_CODES[name])
        stats = d["stats"]
        return sd.SubdivisionCertificate(
            mode=d["mode"],
            k=int(d["k"]),
            N=n,
            M1=M1,
            M2=float(d["M2"]),
            M3=float(d["M3"]),
            functions=tuple(d["functions"]),
            bound_mode=d["bound_mode"],
            strategy=d["strategy"],
            idx=np.array(idx, dtype=np.int64).reshape(-1, n),
            depth=np.array(dep, dtype=np.int64).reshape(-1, n),
            classes=np.array(cls, dtype=np.int8),
            epsilon_min=float(d["epsilon_min"]),
            grad_l1_lower=decode_float(d["grad_l1_lower"]),
            det_g_lower=decode_float(d["det_g_lower"]),
            off_zero_lower=decode_float(d["off_zero_lower"]),
            empty_B=bool(d["empty_B"]),
            steps=int(stats["steps"]),
            max_depth=int(stats["max_depth"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, CertificateError):
            raise
        raise CertificateError(f"malformed certificate: {err}") from err


def loads(text: str) -> sd.SubdivisionCertificate:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as err:
        raise CertificateError(f"not JSON: {err}") from err
    return from_dict(d)


def save(cert: sd.SubdivisionCertificate, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cert))


def load(path) -> sd.SubdivisionCertificate:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


# -- verification -------------------------------------------------------------------

def verify_tiling(idx: np.ndarray, depth: np.ndarray) -> str | None:
    """Check that dyadic boxes partition the root box; return a message on failure.

    The root is halved recursively along the first axis on which some box is
    finer than the current region; boxes coarser than the region along that
    axis are cut in two.  Every region must end up covered by exactly one box.
    """
    n = idx.shape[1]
    if np.all(depth == depth[:, :1]):
        return _verify_cubes(idx, depth[:, 0])
    stack = [((0,) * n, (0,) * n, idx.astype(np.int64), depth.astype(np.int64))]
    while stack:
        ridx, rdep, pi, pd = stack.pop()
        if pi.shape[0] == 0:
            return f"gap: region index {ridx} at depths {rdep} is not covered"
        same = np.all(pd == np.array(rdep), axis=1)
        if np.any(same):
            if pi.shape[0] > 1:
                return f"overlap: region index {ridx} at depths {rdep} is covered more than once"
            continue
        if np.all(pd == pd[0]):
            # uniform depth: a tiling iff the indices are distinct and fill the region
            need = 1 << int(np.sum(pd[0] - np.array(rdep)))
            distinct = np.unique(pi, axis=0).shape[0]
            if distinct < pi.shape[0]:
                return f"overlap: duplicate boxes inside region index {ridx} at depths {rdep}"
            if distinct != need:
                return f"gap: region index {ridx} at depths {rdep} is not covered"
            continue
        finer = pd > np.array(rdep)
        axis = int(np.argmax(np.any(finer, axis=0)))
        shift = pd[:, axis] - rdep[axis] - 1
        cut = shift < 0
        bit = np.where(cut, 0, (pi[:, axis] >> np.maximum(shift, 0)) & 1)
        for half in (1, 0):
            sel = ~cut & (bit == half)
            ci, cd = pi[sel], pd[sel]
            if np.any(cut):
                extra_i = pi[cut].copy()
                extra_d = pd[cut].copy()
                extra_i[:, axis] = 2 * extra_i[:, axis] + half
                extra_d[:, axis] += 1
                ci = np.concatenate([ci, extra_i])
                cd = np.concatenate([cd, extra_d])
            child_i = list(ridx)
            child_d = list(rdep)
            child_i[axis] = 2 * ridx[axis] + half
            child_d[axis] = rdep[axis] + 1
            stack.append((tuple(child_i), tuple(child_d), ci, cd))
    return None


def _verify_cubes(idx: np.ndarray, depth: np.ndarray) -> str | None:
    # dyadic cubes either nest or have disjoint interiors, so a tiling is a
    # nesting-free family whose volumes add up to the root's
    keys = {(int(d), *map(int, i)) for i, d in zip(idx.tolist(), depth.tolist())}
    if len(keys) != idx.shape[0]:
        return "overlap: a box is listed twice"
    for lvl in range(int(depth.max())):
        deeper = depth > lvl
        anc = idx[deeper] >> (depth[deeper] - lvl)[:, None]
        for a in {tuple(r) for r in anc.tolist()}:
            if (lvl, *a) in keys:
                return f"overlap: box index {a} at depth {lvl} contains another box"
    n = idx.shape[1]
    total = sum(Fraction(1, 1 << (n * int(d))) for d in depth.tolist())
    if total != 1:
        return "gap: boxes do not cover the root box" if total < 1 else "overlap: boxes exceed the root box"
    return None


def total_volume(cert: sd.SubdivisionCertificate) -> Fraction:
    side = 2 * Fraction(cert.M1)
    vol = Fraction(0)
    for d in cert.depth.tolist():
        vol += side ** cert.N / Fraction(2 ** sum(d))
    return vol


def expected_bounds(cert: sd.SubdivisionCertificate, m2=None, m3=None):
    """Recompute the certified constants from the boxes (per-box mode needs m2/m3 per box)."""
    n, k = cert.N, cert.k
    eps = [sd.mul_down(2 * cert.M1, Fraction(1, 2 ** int(d))) for d in cert.depth.min(axis=1)]
    eps_min = min(eps)
    two = np.flatnonzero(cert.classes == sd.CASE_TWO)
    one = np.flatnonzero(cert.classes == sd.CASE_ONE)
    out = {"epsilon_min": eps_min}
    if cert.bound_mode == "global":
        g, o = sd.single_bounds(cert.M2, cert.M3, n, eps_min)
        out["off_zero_lower"] = o
        if k == 1:
            out["grad_l1_lower"] = math.inf if two.size == 0 else g
        else:
            out["det_g_lower"] = math.inf if two.size == 0 else sd.system_det_bound(cert.M2, cert.M3, n, k, eps_min)
    else:
        if k == 1:
            out["grad_l1_lower"] = min((sd.single_bounds(m2[b], m3[b], n, eps[b])[0] for b in two), default=math.inf)
        else:
            out["det_g_lower"] = min((sd.system_det_bound(m2[b], m3[b], n, k, eps[b]) for b in two),
                                     default=math.inf)
        out["off_zero_lower"] = min((sd.single_bounds(m2[b], m3[b], n, eps[b])[1] for b in one), default=math.inf)
    return out


def check(cert: sd.SubdivisionCertificate) -> list[str]:
    """Re-verify a certificate from scratch; returns a list of problems (empty if valid).

    Checks the tiling, the total volume, every box's classification under the
    stated constants (recomputing per-box constants where applicable), and the
    reported bounds against their formulas.
    """
    problems = []
    if cert.n_boxes == 0:
        return ["certificate lists no boxes"]
    msg = verify_tiling(cert.idx, cert.depth)
    if msg:
        problems.append("tiling: " + msg)
    if total_volume(cert) != (2 * Fraction(cert.M1)) ** cert.N:
        problems.append("tiling: total volume differs from the root box volume")
    try:
        fs = ex.FunctionSystem.from_strings(list(cert.functions), cert.N)
    except (ex.ParseError, ValueError) as err:
        return problems + [f"functions: {err}"]
    if fs.k != cert.k:
        problems.append("functions: k does not match")
    kern = sd._Kernels(fs)
    lo, hi, mid, side = cert.geometry()
    eps = side.max(axis=1)
    if cert.bound_mode == "per-box":
        m2, m3 = kern.box_bounds(lo, hi)
        m2 = np.minimum(m2, cert.M2)
        m3 = np.minimum(m3, cert.M3)
    else:
        m2 = np.full(cert.n_boxes, cert.M2)
        m3 = np.full(cert.n_boxes, cert.M3)
    cls = sd.classify_batch(kern, mid, eps, m2, m3)
    wrong = np.flatnonzero(cls != cert.classes)
    if wrong.size:
        b = int(wrong[0])
        problems.append(
            f"classification: {wrong.size} boxes fail their test, first at corner {lo[b].tolist()} "
            f"(claimed {sd.CLASS_NAMES[int(cert.classes[b])]}, got {sd.CLASS_NAMES[int(cls[b])]})"
        )
    if cert.empty_B != (not np.any(cert.classes == sd.CASE_TWO)):
        problems.append("bounds: empty_B flag is wrong")
    want = expected_bounds(cert, m2, m3)
    for key, value in want.items():
        have = getattr(cert, key if key != "epsilon_min" else "epsilon_min")
        if have != value:
            problems.append(f"bounds: {key} is {have!r}, formula gives {value!r}")
    return problems
