"""Problem configuration files.

An INI-style file (read with :mod:`configparser`); see the README for the
full list of keys.  Example::

    [problem]
    functions = x^2 + y^2 - 1
    dimension = 2
    M1 = 2
    M2 = 5.66
    M3 = 2

    [subdivision]
    strategy = full
    bound_mode = global

    [pipeline]
    steps = grad-bound, reach, homology, eigenvalue, deform

    [homology]
    L = 2
    delta = 0.025

    [eigenvalue]
    K = 2
    n = 2
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

STEPS = ("grad-bound", "reach", "homology", "eigenvalue", "deform")
REQUIRES = {"reach": "grad-bound", "homology": "reach", "eigenvalue": "reach", "deform": "grad-bound"}


KEYS = {
    "problem": {"functions", "dimension", "M1", "M2", "M3"},
    "subdivision": {"strategy", "bound_mode", "depth_cap", "step_cap", "workers"},
    "pipeline": {"steps", "sample_check"},
    "homology": {"L", "delta"},
    "eigenvalue": {"K", "n"},
    "output": {"dir", "name"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ProblemConfig:
    functions: list[str]
    dimension: int
    M1: float
    M2: float | None = None
    M3: float | None = None
    strategy: str = "full"
    bound_mode: str = "global"
    depth_cap: int = 40
    step_cap: int = 5_000_000
    workers: int = 1
    pipeline: list[str] = field(default_factory=lambda: ["grad-bound"])
    homology_L: float | None = None
    homology_delta: float | None = None  # None means "auto"
    eigen_K: float | None = None
    eigen_n: int | None = None
    sample_check: int = 0
    name: str = "problem"
    out_dir: Path = Path(".")

    def validate(self) -> None:
        if not self.functions:
            raise ConfigError("[problem] functions: at least one formula is required")
        if self.dimension < 1:
            raise ConfigError("[problem] dimension must be positive")
        if len(self.functions) > self.dimension:
            raise ConfigError("[problem] more functions than dimensions")
        _positive("[problem] M1", self.M1)
        for key in ("M2", "M3"):
            v = getattr(self, key)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"[problem] {key} must be finite and nonnegative")
        if self.strategy not in ("full", "bisect"):
            raise ConfigError(f"[subdivision] strategy must be full or bisect, not {self.strategy!r}")
        if self.bound_mode not in ("global", "per-box"):
            raise ConfigError(f"[subdivision] bound_mode must be global or per-box, not {self.bound_mode!r}")
        if self.depth_cap < 0 or self.workers < 1 or self.step_cap < 1:
            raise ConfigError("[subdivision] depth_cap, step_cap and workers must be positive")
        for step in self.pipeline:
            if step not in STEPS:
                raise ConfigError(f"[pipeline] unknown step {step!r} (known: {', '.join(STEPS)})")
            need = REQUIRES.get(step)
            if need and need not in self.pipeline:
                raise ConfigError(f"[pipeline] step {step!r} requires {need!r}")
        if "homology" in self.pipeline:
            if self.dimension != 2 or len(self.functions) != 1:
                raise ConfigError("[homology] needs one function of two variables")
            if self.homology_L is None:
                raise ConfigError("[homology] L is required")
            _positive("[homology] L", self.homology_L)
            if self.homology_delta is not None:
                _positive("[homology] delta", self.homology_delta)
        if "eigenvalue" in self.pipeline:
            if self.eigen_K is None or self.eigen_n is None:
                raise ConfigError("[eigenvalue] K and n are required")
            _positive("[eigenvalue] K", self.eigen_K)
            if self.eigen_n < 2:
                raise ConfigError("[eigenvalue] n must be at least 2 for the eigenvalue bound")
        if "deform" in self.pipeline and len(self.functions) != 1:
            raise ConfigError("[pipeline] deform needs a single function")


def _positive(name: str, v: float) -> None:
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"{name} must be positive and finite")


def _float(sec, key: str, default=None):
    raw = sec.get(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected a number, got {raw!r}") from None


def _int(sec, key: str, default=None):
    raw = sec.get(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected an integer, got {raw!r}") from None


def parse_config(text: str, base: Path = Path("."), name: str = "problem") -> ProblemConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep M1/M2/M3 capitalised
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"config syntax: {err}") from None
    extra = set(cp.sections()) - set(KEYS)
    if extra:
        raise ConfigError(f"unknown section [{sorted(extra)[0]}]")
    if not cp.has_section("problem"):
        raise ConfigError("missing [problem] section")
    for sec, keys in KEYS.items():
        if cp.has_section(sec):
            bad = set(cp[sec]) - keys
            if bad:
                raise ConfigError(f"[{sec}] unknown key {sorted(bad)[0]!r}")
    p = cp["problem"]
    funcs = [line.strip() for line in p.get("functions", "").splitlines() if line.strip()]
    dim = _int(p, "dimension")
    if dim is None:
        raise ConfigError("[problem] dimension is required")
    M1 = _float(p, "M1")
    if M1 is None:
        raise ConfigError("[problem] M1 is required")
    sub, pipe, hom, eig, out = (
        cp[s] if cp.has_section(s) else _Empty(s)
        for s in ("subdivision", "pipeline", "homology", "eigenvalue", "output")
    )
    steps_raw = pipe.get("steps", "grad-bound")
    steps = list(STEPS) if steps_raw.strip() == "all" else [s.strip() for s in steps_raw.split(",") if s.strip()]
    delta_raw = hom.get("delta", "auto").strip()
    cfg = ProblemConfig(
        functions=funcs,
        dimension=dim,
        M1=M1,
        M2=_float(p, "M2"),
        M3=_float(p, "M3"),
        strategy=sub.get("strategy", "full").strip(),
        bound_mode=sub.get("bound_mode", "global").strip(),
        depth_cap=_int(sub, "depth_cap", 40),
        step_cap=_int(sub, "step_cap", 5_000_000),
        workers=_int(sub, "workers", 1),
        pipeline=steps,
        homology_L=_float(hom, "L"),
        homology_delta=None if delta_raw == "auto" else _float(hom, "delta"),
        eigen_K=_float(eig, "K"),
        eigen_n=_int(eig, "n"),
        sample_check=_int(pipe, "sample_check", 0),
        name=out.get("name", name).strip(),
        out_dir=(base / out.get("dir", ".").strip()),
    )
    cfg.validate()
    return cfg


class _Empty(dict):
    def __init__(self, name: str):
        super().__init__()
        self.name = name


def load_config(path) -> ProblemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    return parse_config(text, path.parent, path.stem)
