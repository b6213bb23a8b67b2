"""Seeded randomness split into named, independent streams.

Each consumer (weight init, shuffling, image pool, ...) asks for its own stream
by name, so adding a new consumer never shifts the numbers another one sees.
"""
from __future__ import annotations

import random
import zlib

import numpy as np
import torch


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class RngStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)

    def _seq(self, name: str, keys) -> np.random.SeedSequence:
        spawn_key = (_name_key(name),) + tuple(int(k) for k in keys)
        return np.random.SeedSequence(entropy=self.seed % 2**64, spawn_key=spawn_key)

    def numpy(self, name: str, *keys: int) -> np.random.Generator:
        return np.random.default_rng(self._seq(name, keys))

    def int_seed(self, name: str, *keys: int) -> int:
        return int(self._seq(name, keys).generate_state(1, dtype=np.uint64)[0] >> 1)

    def torch(self, name: str, *keys: int) -> torch.Generator:
        g = torch.Generator()
        g.manual_seed(self.int_seed(name, *keys))
        return g


def seed_all(seed: int) -> RngStreams:
    """Seed the global generators and return the named-stream handle for ``seed``."""
    streams = RngStreams(seed)
    random.seed(streams.int_seed("python"))
    np.random.seed(streams.int_seed("numpy-global") % (2**32))
    torch.manual_seed(streams.int_seed("torch-global"))
    torch.use_deterministic_algorithms(True, warn_only=True)
    return streams
