from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DataEmpty, EmptyClass
from .records import ChipRecord

RATIOS = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    val: list
    test: list


def _apportion(ideal: dict, total: int, caps: dict) -> dict:
    """Largest-remainder rounding of ``ideal`` shares to integers summing to ``total``."""
    alloc = {k: min(math.floor(v), caps[k]) for k, v in ideal.items()}
    order = sorted(ideal, key=lambda k: (-(ideal[k] - math.floor(ideal[k])), k))
    short = total - sum(alloc.values())
    while short > 0:
        progressed = False
        for k in order:
            if short == 0:
                break
            if alloc[k] < caps[k]:
                alloc[k] += 1
                short -= 1
                progressed = True
        if not progressed:
            break
    return alloc


def split_dataset(
    records: Sequence[ChipRecord],
    seed: int,
    num_classes: Optional[int] = None,
    ratios: tuple[float, float, float] = RATIOS,
) -> DatasetSplit:
    """Class-stratified random 70/15/15 split.

    Global part sizes are rounded once, then handed out to classes by largest
    remainder, so every part is within one record of its exact share. A class
    with fewer than three records goes wholly to train.
    """
    if not records:
        raise DataEmpty("no records to split")
    by_class: dict[int, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        by_class[-1 if r.label is None else r.label].append(i)
    if num_classes is not None:
        missing = [c for c in range(num_classes) if not by_class.get(c)]
        if missing:
            raise EmptyClass(f"classes with zero records: {missing}")

    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(0x5B1,)))
    train, val, test = [], [], []
    shuffled = {}
    for c in sorted(by_class):
        idx = list(by_class[c])
        rng.shuffle(idx)
        shuffled[c] = idx
    small = [c for c in shuffled if len(shuffled[c]) < 3]
    big = [c for c in shuffled if len(shuffled[c]) >= 3]
    for c in small:
        train.extend(shuffled[c])

    n = sum(len(shuffled[c]) for c in big)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    sizes = {c: len(shuffled[c]) for c in big}
    tr = _apportion({c: ratios[0] * sizes[c] for c in big}, n_train, sizes)
    va = _apportion({c: ratios[1] * sizes[c] for c in big}, n_val, {c: sizes[c] - tr[c] for c in big})
    for c in big:
        idx = shuffled[c]
        train.extend(idx[: tr[c]])
        val.extend(idx[tr[c] : tr[c] + va[c]])
        test.extend(idx[tr[c] + va[c] :])

    return DatasetSplit(*([records[i] for i in sorted(part)] for part in (train, val, test)))
