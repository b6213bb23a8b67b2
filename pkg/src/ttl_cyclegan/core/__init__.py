from .checkpoint import read_checkpoint, save_checkpoint, state_digest
from .config import (
    ClassifierConfig,
    ExperimentConfig,
    GanConfig,
    LossWeights,
    ModelConfig,
    PathsConfig,
    dumps_config,
    load_config,
    loads_config,
    save_config,
)
from .rng import RngStreams, seed_all
from .types import Domain, ImageChip, TensorBatch, chips_to_tensor, tensor_to_chips

__all__ = [
    "ClassifierConfig",
    "Domain",
    "ExperimentConfig",
    "GanConfig",
    "ImageChip",
    "LossWeights",
    "ModelConfig",
    "PathsConfig",
    "RngStreams",
    "TensorBatch",
    "chips_to_tensor",
    "dumps_config",
    "load_config",
    "loads_config",
    "read_checkpoint",
    "save_checkpoint",
    "save_config",
    "seed_all",
    "state_digest",
    "tensor_to_chips",
]
