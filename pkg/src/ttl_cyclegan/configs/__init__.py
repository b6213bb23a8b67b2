"""Bundled experiment presets."""
from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path

from ..core import ExperimentConfig, load_config
from ..datasets import SyntheticSpec, load_spec

PRESETS = ("desk", "desk_synthetic")


def preset_path(name: str) -> Path:
    """Filesystem path of a bundled preset such as ``"desk"``."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")
    return Path(str(resources.files(__package__).joinpath(f"{name}.toml")))


def desk_benchmark(seed: int = 0) -> tuple[ExperimentConfig, SyntheticSpec]:
    """Desk experiment config and matching synthetic spec, both seeded with ``seed``."""
    config = load_config(preset_path("desk")).replace(seed=seed)
    spec = dataclasses.replace(load_spec(preset_path("desk_synthetic")), seed=seed)
    return config, spec


__all__ = ["PRESETS", "desk_benchmark", "preset_path"]
