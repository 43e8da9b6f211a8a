"""Run configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigurationError
from .grid import MIN_NODES

__all__ = ["ProblemConfig", "RunConfig", "parse_config", "load_config"]


@dataclass
class ProblemConfig:
    """Domain, exponent, epsilon schedule and solver tolerances.

    ``eps_min = 0`` selects the automatic floor
    ``max(eps_min_cells * h, 0.003)``.
    """

    shape: str = "disk"
    extent: float = 1.0
    n: int = 129
    p: float = 4.0
    eps0: float = 0.2
    factor: float = 0.5
    eps_min: float = 0.0
    eps_min_cells: float = 4.0
    tol: float = 1e-8
    max_outer: int = 500
    attempt_outer: int = 40
    max_insertions: int = 12
    level_spread_tol: float = 0.2

    def validate(self) -> None:
        if self.shape not in ("disk", "square"):
            raise ConfigurationError(f"shape must be 'disk' or 'square', got {self.shape!r}")
        if not (math.isfinite(self.extent) and self.extent > 0):
            raise ConfigurationError(f"extent must be positive, got {self.extent}")
        if self.n < MIN_NODES or self.n % 2 == 0:
            raise ConfigurationError(f"n must be odd and >= {MIN_NODES}, got {self.n}")
        if not (math.isfinite(self.p) and self.p > 2.0):
            raise ConfigurationError(f"p > 2 required, got {self.p}")
        if self.eps_min_cells < 2.0:
            raise ConfigurationError("eps_min_cells must be >= 2")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")
        for name in ("max_outer", "attempt_outer"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")

    @property
    def h(self) -> float:
        side = 2.0 * self.extent if self.shape == "disk" else self.extent
        return side / (self.n - 1)

    def schedule(self, h: float | None = None):
        from .solver import ContinuationSchedule

        h = self.h if h is None else h
        floor = self.eps_min if self.eps_min > 0 else max(self.eps_min_cells * h, 0.003)
        if floor < 2.0 * h * (1.0 - 1e-12):
            raise ConfigurationError(f"eps_min = {floor:.4g} is below 2h = {2 * h:.4g}")
        return ContinuationSchedule(self.eps0, self.factor, floor)


@dataclass
class RunConfig(ProblemConfig):
    """Problem settings plus verification and plotting options."""

    c_slack: float = 5.0
    weiss_vertices: int = 3
    blowup_m: int = 65
    blowup_r: float = 0.0
    slope_band: float = 0.0
    oracle_tol: float = 1e-10

    def validate(self) -> None:
        super().validate()
        if self.c_slack < 0:
            raise ConfigurationError("c_slack must be nonnegative")
        if self.weiss_vertices < 1:
            raise ConfigurationError("weiss_vertices must be >= 1")
        if self.blowup_m < 5:
            raise ConfigurationError("blowup_m must be >= 5")

    def problem(self) -> ProblemConfig:
        names = {f.name for f in fields(ProblemConfig)}
        return ProblemConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _convert(kind, raw: str, key: str):
    try:
        if kind in (int, "int"):
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, **overrides) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, unknown keys fail."""
    kinds = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(kinds[key], raw, key)
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    if path is None:
        return parse_config("", **overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)
