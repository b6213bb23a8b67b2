"""Transductive CycleGAN transfer learning: train a target-domain classifier
with no target labels by coupling unpaired translation with a frozen
source-domain classifier."""

__version__ = "0.1.0"
