"""Command line: ``reachcert run|render|check``.

Exit codes: 0 success, 1 configuration/input error, 2 subdivision limit
(depth or step cap), 3 uncertain vertex sign in homology, 4 certificate
check failed.  Errors go to stderr as ``error[<kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import certificate as ce
from . import expr as ex
from . import homology, svg
from . import subdivide as sd
from .config import ConfigError, load_config
from .interval import IntervalDomainError
from .pipeline import emit_report, report_text, run_pipeline

EXIT_OK, EXIT_INPUT, EXIT_LIMIT, EXIT_UNCERTAIN, EXIT_CHECK = 0, 1, 2, 3, 4


def _error(kind: str, message: str) -> None:
    print(f"error[{kind}]: {message}", file=sys.stderr)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reachcert", description="Certified reach bounds for implicit manifolds.")
    ap.add_argument("--workers", type=int, default=None, help="threads for box classification (env WORKERS)")
    ap.add_argument("--depth-cap", type=int, default=None, help="maximum subdivision depth")
    ap.add_argument("--format", choices=("text", "structured"), default="text", help="stdout format")
    ap.add_argument("-v", "--verbose", action="store_true", help="progress heartbeat on stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a problem config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--no-svg", action="store_true")
    d = sub.add_parser("render", help="draw a certificate as SVG")
    d.add_argument("certificate")
    d.add_argument("svg")
    c = sub.add_parser("check", help="re-verify a certificate")
    c.add_argument("certificate")
    return ap


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        _error("config", str(err))
        return EXIT_INPUT
    if args.workers is not None and args.workers < 1:
        _error("config", "--workers must be positive")
        return EXIT_INPUT
    out = Path(os.path.normpath(args.out if args.out else cfg.out_dir))
    try:
        res = run_pipeline(cfg, workers=args.workers, depth_cap=args.depth_cap)
    except ex.ParseError as err:
        _error("parse", str(err))
        return EXIT_INPUT
    except sd.SubdivisionLimitExceeded as err:
        kind = "depth-cap" if isinstance(err, sd.DepthCapExceeded) else "step-cap"
        _error(kind, f"{err}; after {err.steps} steps")
        for b in err.deepest[:5]:
            print(f"  unresolved box lower={b.lower} upper={b.upper}", file=sys.stderr)
        return EXIT_LIMIT
    except homology.UncertainSign as err:
        _error("uncertain-sign", str(err))
        return EXIT_UNCERTAIN
    except homology.BoundaryContact as err:
        _error("boundary", str(err))
        return EXIT_INPUT
    except IntervalDomainError as err:
        _error("domain", str(err))
        return EXIT_INPUT
    except ValueError as err:
        _error("input", str(err))
        return EXIT_INPUT
    out.mkdir(parents=True, exist_ok=True)
    stem = out / cfg.name
    files = {"report": f"{stem}.report.json", "certificate": f"{stem}.cert.json"}
    ce.save(res.certificate, files["certificate"])
    if cfg.dimension == 2 and not args.no_svg:
        files["svg"] = f"{stem}.boxes.svg"
        Path(files["svg"]).write_text(svg.render_certificate(res.certificate), encoding="utf-8")
    if res.grid is not None:
        files["grid"] = f"{stem}.grid.json"
        Path(files["grid"]).write_text(homology.grid_dumps(res.grid), encoding="utf-8")
        if not args.no_svg:
            files["grid_svg"] = f"{stem}.grid.svg"
            Path(files["grid_svg"]).write_text(
                svg.render_grid(res.grid, res.system.functions[0]), encoding="utf-8"
            )
    res.report["files"] = files
    text = emit_report(res.report)
    Path(files["report"]).write_text(text, encoding="utf-8")
    sys.stdout.write(text if args.format == "structured" else report_text(res.report))
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        cert = ce.load(args.certificate)
        Path(args.svg).write_text(svg.render_certificate(cert), encoding="utf-8")
    except (OSError, ce.CertificateError, ValueError) as err:
        _error("certificate", str(err))
        return EXIT_INPUT
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        cert = ce.load(args.certificate)
    except (OSError, ce.CertificateError) as err:
        _error("certificate", str(err))
        return EXIT_INPUT
    problems = ce.check(cert)
    if args.format == "structured":
        print(json.dumps({"valid": not problems, "problems": problems, "boxes": cert.n_boxes}, indent=1))
    else:
        for p in problems:
            print(f"FAIL {p}")
        print(f"{'valid' if not problems else 'INVALID'}: {cert.n_boxes} boxes checked")
    if problems:
        _error("check", f"{len(problems)} problem(s) found")
        return EXIT_CHECK
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.depth_cap is not None and args.depth_cap < 0:
        _error("config", "--depth-cap must be nonnegative")
        return EXIT_INPUT
    return {"run": cmd_run, "render": cmd_render, "check": cmd_check}[args.command](args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
