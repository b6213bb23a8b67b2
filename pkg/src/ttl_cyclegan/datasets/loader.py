from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
import torch

from ..core.types import Domain, ImageChip, TensorBatch, chips_to_tensor
from ..errors import DataEmpty, InvalidValue
from .projection import project_to_canonical
from .records import ChipRecord


@dataclass
class ChipSet:
    """Projected chips held in memory as one ``N x C x H x W`` tensor."""

    images: torch.Tensor
    labels: Optional[torch.Tensor]
    distances: torch.Tensor
    domain: Domain

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, index) -> "ChipSet":
        index = torch.as_tensor(index, dtype=torch.long)
        return ChipSet(
            self.images[index],
            None if self.labels is None else self.labels[index],
            self.distances[index],
            self.domain,
        )

    def without_labels(self) -> "ChipSet":
        return ChipSet(self.images, None, self.distances, self.domain)


def load_chipset(
    records: Sequence[ChipRecord],
    chip_size: int,
    canonical_distance_m: float,
    root: Optional[Path] = None,
    keep_labels: bool = True,
) -> ChipSet:
    if not records:
        raise DataEmpty("no records")
    domains = {r.domain for r in records}
    if len(domains) != 1:
        raise InvalidValue("a chip set must hold a single domain")
    imgs = np.empty((len(records), chip_size, chip_size, 3), dtype=np.float32)
    for i, r in enumerate(records):
        px = r.load(root)
        if r.distance_m is None:
            if px.shape[:2] != (chip_size, chip_size):
                raise InvalidValue(f"record {r.path} has no distance and is not {chip_size}x{chip_size}")
            imgs[i] = px
            continue
        chip = ImageChip(px, r.domain, None, r.distance_m)
        imgs[i] = project_to_canonical(chip, canonical_distance_m, chip_size).pixels
    labels = None
    if keep_labels and all(r.label is not None for r in records):
        labels = torch.tensor([r.label for r in records], dtype=torch.long)
    distances = torch.tensor(
        [np.nan if r.distance_m is None else r.distance_m for r in records], dtype=torch.float64
    )
    return ChipSet(chips_to_tensor(imgs), labels, distances, domains.pop())


def epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(0xBA7C, int(epoch)))
    return np.random.default_rng(ss).permutation(n)


def iterate_batches(
    data: ChipSet,
    batch_size: int,
    seed: Optional[int] = None,
    epoch: int = 0,
    shuffle: bool = True,
) -> Iterator[TensorBatch]:
    """Yield every chip exactly once; the last batch may be short.

    The order is a permutation keyed on ``(seed, epoch)``, so each epoch gets a
    fresh shuffle that is reproducible across runs.
    """
    if batch_size < 1:
        raise InvalidValue("batch_size must be >= 1")
    n = len(data)
    order = epoch_permutation(n, seed or 0, epoch) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        idx = torch.from_numpy(order[start : start + batch_size].astype(np.int64))
        yield TensorBatch(
            data.images[idx],
            None if data.labels is None else data.labels[idx],
            data.domain,
            data.distances[idx],
        )
