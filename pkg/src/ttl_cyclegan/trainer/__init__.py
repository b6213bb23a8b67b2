from .objective import Translations, discriminator_objective, generator_objective
from .optim import Adam, step_optimizer
from .phases import (
    TrainState,
    TransductiveTrainer,
    finetune_target,
    pretrain_source_classifier,
    stratified_fraction,
    train_transductive,
)
from .pipeline import BenchmarkResult, build_splits, run_benchmark
from .pool import ImagePool
from .schedule import discriminator_updates, gan_lr, lambda_ce

__all__ = [
    "Adam",
    "BenchmarkResult",
    "ImagePool",
    "TrainState",
    "TransductiveTrainer",
    "Translations",
    "build_splits",
    "discriminator_objective",
    "discriminator_updates",
    "finetune_target",
    "gan_lr",
    "generator_objective",
    "lambda_ce",
    "pretrain_source_classifier",
    "run_benchmark",
    "step_optimizer",
    "stratified_fraction",
    "train_transductive",
]
