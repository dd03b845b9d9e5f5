"""Experiment configuration mirrored one-to-one by the JSON config file."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig

log = logging.getLogger(__name__)

# variant -> (masking strategy, contrastive learning on)
VARIANTS = {
    "STSM": ("selective", True),
    "STSM-NC": ("selective", False),
    "STSM-R": ("random", True),
    "STSM-RNC": ("random", False),
}


@dataclass
class SplitConfig:
    method: str = "vertical"
    unobserved_ratio: float = 0.5
    side: str | None = None  # "low"/"high" for axis splits, [x, y] center for ring
    train_fraction: float = 0.7


@dataclass
class DataConfig:
    data_dir: str | None = None  # directory with locations/observations/poi/roads CSVs
    n_locations: int = 60  # synthetic fallback when data_dir is None
    days: int = 14
    interval_minutes: int = 5
    synth_seed: int = 7
    noise: float = 1.0


@dataclass
class ExperimentConfig:
    variant: str = "STSM"
    masking: str | None = None
    learning_rate: float = 0.01
    lr_decay: float = 0.97
    batch_size: int = 32
    epochs: int = 100
    patience: int = 15
    lam: float = 0.5
    tau: float = 0.5
    delta_m: float = 0.5
    epsilon_s: float = 0.05
    epsilon_sg: float = 0.5
    q_kk: int = 1
    q_ku: int = 1
    K: int = 35
    r_poi: float = 500.0
    seed: int = 0
    train_stride: int = 1
    valid_stride: int = 12
    eval_stride: int = 1
    idw_k_nearest: int | None = None
    mape_floor: float = 0.1
    dtype: str = "float32"
    split: SplitConfig = field(default_factory=SplitConfig)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        strategy, contrastive = VARIANTS[self.variant]
        if self.masking is None:
            self.masking = strategy
        elif self.masking != strategy:
            raise ConfigError(f"variant {self.variant} uses {strategy} masking, config says {self.masking!r}")
        if not contrastive and self.lam != 0:
            log.info("variant %s disables contrastive learning; forcing lambda = 0", self.variant)
            self.lam = 0.0
        if contrastive and self.lam <= 0:
            raise ConfigError(f"variant {self.variant} needs lambda > 0; use an -NC variant instead")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if contrastive and self.batch_size < 2:
            raise ConfigError("contrastive learning needs batch_size >= 2")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if not 0 < self.delta_m < 1:
            raise ConfigError("delta_m must lie in (0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def contrastive(self) -> bool:
        return self.lam > 0

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        if "variant" in kw and "masking" not in kw:
            d["masking"] = None
            if VARIANTS[kw["variant"]][1] and d["lambda"] == 0:
                d["lambda"] = ExperimentConfig.lam
        for k, v in kw.items():
            d["lambda" if k == "lam" else k] = v
        return ExperimentConfig.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        nested = {"split": SplitConfig, "data": DataConfig, "model": ModelConfig}
        for key, typ in nested.items():
            if key in d and isinstance(d[key], dict):
                sub_known = {f.name for f in dataclasses.fields(typ)}
                bad = set(d[key]) - sub_known
                if bad:
                    raise ConfigError(f"unknown {key} fields {sorted(bad)}")
                d[key] = typ(**d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
