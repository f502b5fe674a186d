"""Run configuration read from ``key = value`` text files and CLI overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from wlseno.reconstruction import ReconstructionConfig

__all__ = ["RunConfig", "parse_config_text", "read_config"]


@dataclass(frozen=True)
class RunConfig:
    """Settings for one preset run. ``None`` means "use the preset's default"."""

    degree: int | None = None
    cfl: float | None = None
    t_final: float | None = None
    epsilon: float = 1e-2
    alpha_boost: float = 1.5
    multiplier: float = 1.5
    max_depth: float = 4.0
    rank_tol: float = 1e-10
    rebalance: bool | None = None
    characteristic: bool | None = None
    local_lf: bool = False
    match_time_order: bool | None = None
    stencil_size_1d: int | None = None
    quad_degree: int | None = None
    char_frame: str = "face"
    perturb: float | None = None
    seed: int = 2016
    fine_n: int = 4000
    l1_bound: float | None = None

    def with_overrides(self, **kw) -> RunConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw)

    def recon(self, degree: int, **defaults) -> ReconstructionConfig:
        rebalance = self.rebalance if self.rebalance is not None else defaults.get("rebalance", False)
        return ReconstructionConfig(
            degree=degree,
            epsilon=self.epsilon,
            alpha_boost=self.alpha_boost,
            multiplier=self.multiplier,
            max_depth=Fraction(self.max_depth).limit_denominator(6),
            rank_tol=self.rank_tol,
            rebalance=rebalance,
            stencil_size_1d=self.stencil_size_1d or defaults.get("stencil_size_1d"),
            quad_degree=self.quad_degree,
            char_frame=self.char_frame,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, raw: str):
    kind = _FIELDS[key].type
    if raw.lower() in ("none", ""):
        return None
    if "bool" in kind:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if "int" in kind and "float" not in kind:
        return int(raw)
    if "float" in kind:
        return float(Fraction(raw)) if "/" in raw else float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, raw)
    return out


def read_config(path: str | Path | None, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    if path is None:
        return base
    return dataclasses.replace(base, **parse_config_text(Path(path).read_text()))
