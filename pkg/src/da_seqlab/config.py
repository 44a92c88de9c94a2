"""Pipeline configuration: one JSON document; defaults are the standard analysis settings."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .scoring import DEFAULT_ORIENTATION
from .seqmine import MiningParams


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    corpus: str | None = None
    proficiency: str | None = None
    groups: str | None = None
    annotations: str | None = None
    ratings: str | None = None
    patterns: str | None = None
    out: str = "out"

    min_len: int = 2
    max_len: int = 4
    max_gap: int = 1
    min_support: int | float = 0.20
    gap_semantics: str = "delta"
    closed_only: bool = False

    diff_threshold: int = 10

    perm_mode: str = "auto"  # auto | exact | mc
    perm_n: int = 10_000
    seed: int = 0
    exact_cap: int = 1_000_000
    perm_statistic: str = "diff"  # diff | proportion
    # how raw permutation p accounts for the support-difference filter
    perm_selection: str = "max"  # none | conditional | max

    alpha: float = 0.05
    marginal: float = 0.10
    chisq_correction: bool = True

    orientation: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_ORIENTATION))
    standardize: str = "within"
    kappa_by_label: bool = False

    format: str = "both"

    def mining_params(self) -> MiningParams:
        return MiningParams(
            min_len=self.min_len,
            max_len=self.max_len,
            max_gap=self.max_gap,
            min_support=self.min_support,
            gap_semantics=self.gap_semantics,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls(**data)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def check(self) -> None:
        try:
            self.mining_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.perm_mode not in ("auto", "exact", "mc"):
            raise ConfigError(f"perm_mode must be auto, exact or mc, got {self.perm_mode!r}")
        if self.perm_selection not in ("none", "conditional", "max"):
            raise ConfigError(f"unknown perm_selection {self.perm_selection!r}")
        if self.perm_statistic not in ("diff", "proportion"):
            raise ConfigError(f"unknown perm_statistic {self.perm_statistic!r}")
        if self.format not in ("csv", "md", "both"):
            raise ConfigError(f"format must be csv, md or both, got {self.format!r}")
        if not 0 < self.alpha < self.marginal <= 1:
            raise ConfigError("need 0 < alpha < marginal <= 1")
        if self.diff_threshold < 0:
            raise ConfigError("diff_threshold must be >= 0")
