"""Piecewise-constant schedules. Epochs are 1-based; steps are 0-based."""
from ..core.config import ExperimentConfig


def gan_lr(config: ExperimentConfig, epoch: int) -> float:
    g = config.gan
    return g.lr if epoch <= g.lr_decay_epoch else g.lr_late


def lambda_ce(config: ExperimentConfig, epoch: int) -> float:
    g = config.gan
    return config.loss.lambda_ce if epoch <= g.lambda_ce_switch_epoch else g.lambda_ce_late


def discriminator_updates(config: ExperimentConfig, global_step: int) -> bool:
    """True on every ``disc_update_period``-th generator step (steps 4, 9, 14, ... for period 5)."""
    return (global_step + 1) % config.gan.disc_update_period == 0
