"""Experiment configuration.

The on-disk format is TOML: top-level scalars plus one table per section, e.g.::

    seed = 3
    batch_size = 160

    [gan]
    lr = 0.0002

Every omitted key falls back to the defaults below.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from ..errors import InvalidValue, IOFailure, MalformedConfig


@dataclass(frozen=True)
class LossWeights:
    eta1: float = 10.0
    eta2: float = 10.0
    eta3: float = 5.0
    eta4: float = 5.0
    lambda_a: float = 1.0
    lambda_b: float = 1.0
    lambda_c: float = 1.0
    lambda_ce: float = 0.5

    def validate(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise InvalidValue(f"loss.{f.name} must be >= 0")


@dataclass(frozen=True)
class GanConfig:
    lr: float = 2e-4
    lr_late: float = 1e-4
    lr_decay_epoch: int = 50
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 100
    disc_update_period: int = 5
    pool_size: int = 50
    adversarial: str = "logistic"
    lambda_ce_late: float = 2.5
    lambda_ce_switch_epoch: int = 20
    grad_clip: float = 0.0


@dataclass(frozen=True)
class ClassifierConfig:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    pretrain_epochs: int = 40
    finetune_epochs: int = 10
    finetune_lr: float = 5e-4


@dataclass(frozen=True)
class ModelConfig:
    gen_filters: int = 64
    gen_res_blocks: int = 6
    disc_filters: int = 64
    disc_layers: int = 3
    clf_width: int = 64
    clf_stem_stride: int = 1
    init_std: float = 0.02


@dataclass(frozen=True)
class PathsConfig:
    data: str = "data"
    checkpoints: str = "checkpoints"
    reports: str = "reports"


@dataclass(frozen=True)
class ExperimentConfig:
    num_classes: int = 10
    chip_size: int = 68
    canonical_distance_m: float = 2000.0
    seed: int = 0
    batch_size: int = 160
    loss: LossWeights = field(default_factory=LossWeights)
    gan: GanConfig = field(default_factory=GanConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def validate(self) -> "ExperimentConfig":
        if self.num_classes < 1:
            raise InvalidValue("num_classes must be a positive int")
        if self.chip_size < 1:
            raise InvalidValue("chip_size must be a positive int")
        if not self.canonical_distance_m > 0:
            raise InvalidValue("canonical_distance_m must be > 0")
        if self.batch_size < 1:
            raise InvalidValue("batch_size must be >= 1")
        self.loss.validate()
        for section, prefix in ((self.gan, "gan"), (self.classifier, "classifier")):
            for name in ("lr", "lr_late", "finetune_lr"):
                if hasattr(section, name) and not getattr(section, name) > 0:
                    raise InvalidValue(f"{prefix}.{name} must be > 0")
            for name in ("beta1", "beta2"):
                if not 0.0 < getattr(section, name) < 1.0:
                    raise InvalidValue(f"{prefix}.{name} must lie in (0, 1)")
        for key, value in (
            ("gan.epochs", self.gan.epochs),
            ("gan.lr_decay_epoch", self.gan.lr_decay_epoch),
            ("gan.lambda_ce_switch_epoch", self.gan.lambda_ce_switch_epoch),
            ("classifier.pretrain_epochs", self.classifier.pretrain_epochs),
            ("classifier.finetune_epochs", self.classifier.finetune_epochs),
        ):
            if value < 0:
                raise InvalidValue(f"{key} must be >= 0")
        if self.gan.disc_update_period < 1:
            raise InvalidValue("gan.disc_update_period must be >= 1")
        if self.gan.pool_size < 0:
            raise InvalidValue("gan.pool_size must be >= 0")
        if self.gan.adversarial not in ("logistic", "lsgan"):
            raise InvalidValue("gan.adversarial must be 'logistic' or 'lsgan'")
        if self.gan.lambda_ce_late < 0 or self.gan.grad_clip < 0:
            raise InvalidValue("gan.lambda_ce_late and gan.grad_clip must be >= 0")
        m = self.model
        for name in ("gen_filters", "disc_filters", "disc_layers", "clf_width", "clf_stem_stride"):
            if getattr(m, name) < 1:
                raise InvalidValue(f"model.{name} must be >= 1")
        if m.gen_res_blocks < 0 or not m.init_std > 0:
            raise InvalidValue("model.gen_res_blocks must be >= 0 and model.init_std > 0")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **overrides: Any) -> "ExperimentConfig":
        """Return a copy with dotted-key overrides applied, e.g. ``{"gan.lr": 1e-3}``."""
        data = self.to_dict()
        for key, value in overrides.items():
            _assign(data, key, value)
        return from_dict(data)


_SECTIONS = {
    "loss": LossWeights,
    "gan": GanConfig,
    "classifier": ClassifierConfig,
    "model": ModelConfig,
    "paths": PathsConfig,
}


def _assign(data: dict, dotted: str, value: Any):
    parts = dotted.split(".")
    node = data
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise InvalidValue(f"unknown config key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise InvalidValue(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def _coerce(key: str, value: Any, default: Any) -> Any:
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    raise InvalidValue(f"{key}: expected {type(default).__name__}, got {value!r}")


def _build(cls, data: Mapping[str, Any], prefix: str):
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        full = f"{prefix}{key}"
        if key not in known:
            raise InvalidValue(f"unknown config key {full!r}")
        default = getattr(defaults, key)
        if dataclasses.is_dataclass(default):
            if not isinstance(value, Mapping):
                raise InvalidValue(f"{full} must be a table")
            kwargs[key] = _build(type(default), value, f"{full}.")
        else:
            kwargs[key] = _coerce(full, value, default)
    return cls(**kwargs)


def from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "").validate()


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise MalformedConfig(str(exc)) from exc
    return from_dict(data)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise MalformedConfig(f"{path} is not UTF-8") from exc
    return loads_config(text)


def dumps_config(config: ExperimentConfig) -> str:
    return tomli_w.dumps(config.to_dict())


def save_config(config: ExperimentConfig, path: str | Path):
    Path(path).write_text(dumps_config(config), encoding="utf-8")
