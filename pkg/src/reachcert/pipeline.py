"""Run a configured chain: subdivision, reach, homology, eigenvalue, deformation.

The report is a JSON document with a schema name and version.  Values that
are infinite are written as ``"inf"``, and an unbounded reach component as
``"unbounded"``; :func:`parse_report` inverts :func:`emit_report` exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

from . import apps, homology, reach
from . import certificate as ce
from . import expr as ex
from . import subdivide as sd
from .config import ProblemConfig

REPORT_SCHEMA = "reachcert.report"
REPORT_VERSION = 1


def _enc(v):
    if v is reach.Unbounded:
        return "unbounded"
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, dict):
        return {k: _enc(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_enc(x) for x in v]
    return v


def _dec(v):
    if v == "unbounded":
        return reach.Unbounded
    if v in ("inf", "-inf"):
        return float(v)
    if isinstance(v, dict):
        return {k: _dec(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_dec(x) for x in v]
    return v


def emit_report(report: dict) -> str:
    return json.dumps(_enc(report), indent=1, sort_keys=True) + "\n"


def parse_report(text: str) -> dict:
    d = json.loads(text)
    if not isinstance(d, dict) or d.get("schema") != REPORT_SCHEMA:
        raise ValueError("not a report")
    if d.get("version") != REPORT_VERSION:
        raise ValueError(f"unsupported report version {d.get('version')!r}")
    return _dec(d)


def report_text(report: dict) -> str:
    """Flat ``section.key: value`` lines for terminals."""
    lines = []

    def walk(prefix, v):
        if isinstance(v, dict):
            for k in sorted(v):
                walk(f"{prefix}.{k}" if prefix else k, v[k])
        else:
            lines.append(f"{prefix}: {_enc(v)}")

    walk("", report)
    return "\n".join(lines) + "\n"


@dataclass
class PipelineResult:
    report: dict
    certificate: sd.SubdivisionCertificate | None = None
    grid: homology.SelectionGrid | None = None
    system: ex.FunctionSystem | None = None


def run_pipeline(cfg: ProblemConfig, workers: int | None = None, depth_cap: int | None = None) -> PipelineResult:
    fs = ex.FunctionSystem.from_strings(cfg.functions, cfg.dimension)
    scfg = sd.SubdivisionConfig(
        depth_cap=cfg.depth_cap if depth_cap is None else depth_cap,
        step_cap=cfg.step_cap,
        bound_mode=cfg.bound_mode,
        strategy=cfg.strategy,
        workers=cfg.workers,
        M2=cfg.M2,
        M3=cfg.M3,
    )
    report: dict[str, Any] = {
        "schema": REPORT_SCHEMA,
        "version": REPORT_VERSION,
        "problem": {
            "functions": list(cfg.functions),
            "dimension": cfg.dimension,
            "M1": cfg.M1,
            "pipeline": list(cfg.pipeline),
            "hypothesis": "the zero set lies inside [-M1, M1]^N (asserted, not checked)",
        },
    }
    result = PipelineResult(report, system=fs)
    cert = sd.run(fs, cfg.M1, scfg, workers=workers)
    result.certificate = cert
    report["subdivision"] = {
        "mode": cert.mode,
        "bound_mode": cert.bound_mode,
        "strategy": cert.strategy,
        "M2": cert.M2,
        "M3": cert.M3,
        "epsilon_min": cert.epsilon_min,
        "grad_l1_lower": cert.grad_l1_lower,
        "det_g_lower": cert.det_g_lower,
        "off_zero_lower": cert.off_zero_lower,
        "empty_B": cert.empty_B,
        "steps": cert.steps,
        "max_depth": cert.max_depth,
        "boxes": cert.n_boxes,
        "case_two_boxes": int((cert.classes == sd.CASE_TWO).sum()),
        "wall_time_s": round(cert.wall_time, 6),
        "note": "B is the union of CaseTwo boxes; the gradient bound holds on B and the |f| bound off B",
    }
    if cfg.sample_check:
        s = sd.sanity_check_sample(fs, cert, cfg.sample_check)
        report["sample_check"] = {
            "certified": False,
            "requested": s.requested,
            "sampled": s.sampled,
            "quantity": s.quantity,
            "sampled_min": s.sampled_min,
            "violations": s.violations,
            "note": s.note,
        }
    if "reach" in cfg.pipeline:
        if cert.empty_B:
            report["reach"] = {"skipped": "empty B: no manifold"}
        else:
            r = reach.reach_from_certificate(cert)
            report["reach"] = {
                "tau_lower": r.tau_lower,
                "curvature_radius_lower": r.curvature_radius_lower,
                "bottleneck_half_lower": r.bottleneck_half_lower,
                "inputs": dict(r.inputs),
                "path": r.provenance,
            }
    tau = report.get("reach", {}).get("tau_lower")
    usable_tau = tau is not None and tau is not reach.Unbounded and tau > 0
    if "homology" in cfg.pipeline:
        L = cfg.homology_L
        if cfg.homology_delta is None:
            if not usable_tau:
                raise ValueError("automatic delta needs a finite positive reach bound")
            delta, n = homology.delta_for_reach(L, tau)
        else:
            delta = cfg.homology_delta
        grid = homology.select_boxes(
            fs.functions[0], L, delta, tau_lower=tau if usable_tau else None, unsafe=not usable_tau
        )
        result.grid = grid
        cx = homology.complex_of(grid)
        b0, b1 = cx.betti
        report["homology"] = {
            "L": L,
            "delta": grid.delta,
            "cells_per_axis": grid.n,
            "selected": int(grid.selected.shape[0]),
            "V": cx.V,
            "E": cx.E,
            "F": cx.F,
            "euler": cx.euler,
            "b0": b0,
            "b1": b1,
            "certified": grid.certified and usable_tau,
            "notes": list(grid.notes),
        }
    if "eigenvalue" in cfg.pipeline and usable_tau:
        e = apps.eigenvalue_report(cfg.eigen_n, cfg.dimension, cfg.eigen_K, tau)
        report["eigenvalue"] = e.to_dict()
    if "deform" in cfg.pipeline:
        if cert.empty_B:
            report["deform"] = {"skipped": "empty B: no manifold to deform"}
        else:
            m = apps.deformation_margin(cert)
            report["deform"] = {"deltaMin": m.deltaMin, "xiMin": m.xiMin}
    return result


def certificate_text(cert: sd.SubdivisionCertificate) -> str:
    return ce.dumps(cert)
