"""Benchmark configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .errors import FormatError, ParameterError
from .signalgen import DEFAULT_FM_DEPTH, DEFAULT_SIGMA, target_grid


@dataclass(frozen=True)
class BenchConfig:
    """Everything that determines a sweep's outputs.

    ``seed`` selects the three CAPRICEP seeds ``seed, seed + 1, seed + 2``.
    ``grid`` is ``(f_lo_hz, f_hi_hz, step_octaves)``.
    """

    seed: int = 1
    fm_depth: float = DEFAULT_FM_DEPTH
    grid: tuple = (80.0, 400.0, 1.0 / 48.0)
    gaussian_sigma: float = DEFAULT_SIGMA
    shape: str = "vowel_a"
    adapters: tuple = ("identity",)
    out: str = "results"
    jobs: int = 1
    band_cap: float = 100.0
    failure_quota: float = 0.25
    registry: str | None = None
    workdir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        adapters = (self.adapters,) if isinstance(self.adapters, str) else self.adapters
        object.__setattr__(self, "adapters", tuple(adapters))
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")
        if self.fm_depth < 0:
            raise ParameterError(f"fm_depth must be non-negative, got {self.fm_depth}")
        if len(self.grid) != 3:
            raise ParameterError(f"grid must be (f_lo, f_hi, step), got {self.grid}")
        if self.gaussian_sigma <= 0:
            raise ParameterError("gaussian_sigma must be positive")
        if self.jobs < 1:
            raise ParameterError(f"jobs must be >= 1, got {self.jobs}")
        if not 0.0 <= self.failure_quota <= 1.0:
            raise ParameterError("failure_quota must lie in [0, 1]")
        if self.band_cap <= 0:
            raise ParameterError("band_cap must be positive")

    @property
    def seeds(self):
        return (self.seed, self.seed + 1, self.seed + 2)

    def targets(self):
        return target_grid(*self.grid)

    def as_dict(self):
        d = asdict(self)
        d["grid"] = list(self.grid)
        d["adapters"] = list(self.adapters)
        return d

    def signal_key(self):
        """Fields that affect the generated signals (and nothing else)."""
        return {"seed": self.seed, "fm_depth": self.fm_depth,
                "gaussian_sigma": self.gaussian_sigma, "shape": self.shape}

    def merged(self, overrides):
        names = {f.name for f in fields(self)}
        bad = set(overrides) - names
        if bad:
            raise ParameterError(f"unknown config keys: {sorted(bad)}")
        return replace(self, **overrides)


def parse_grid(text):
    """``"80,400,1/48"`` to ``(80.0, 400.0, 0.0208...)``."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3:
        raise ParameterError(f"grid must be 'f_lo,f_hi,step', got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]), float(Fraction(parts[2])))
    except (ValueError, ZeroDivisionError):
        raise ParameterError(f"cannot parse grid {text!r}") from None


def load_config_file(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be an object")
    if isinstance(doc.get("grid"), str):
        doc["grid"] = parse_grid(doc["grid"])
    return doc


def resolve(flags=None, config_path=None, base=None) -> BenchConfig:
    """Defaults, then explicit flags, then the config file (highest precedence)."""
    cfg = base or BenchConfig()
    if flags:
        cfg = cfg.merged({k: v for k, v in flags.items() if v is not None})
    if config_path:
        cfg = cfg.merged(load_config_file(config_path))
    return cfg


def save_config(cfg: BenchConfig, path):
    Path(path).write_text(json.dumps(cfg.as_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
