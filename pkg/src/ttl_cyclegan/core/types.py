from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..errors import InvalidValue, ShapeMismatch


class Domain(str, enum.Enum):
    SOURCE = "source"
    TARGET = "target"

    @classmethod
    def parse(cls, value: "Domain | str") -> "Domain":
        if isinstance(value, Domain):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidValue(f"unknown domain {value!r}") from None


@dataclass(frozen=True)
class ImageChip:
    """One H x W x C image in [-1, 1] with its domain and optional metadata."""

    pixels: np.ndarray
    domain: Domain
    label: Optional[int] = None
    capture_distance_m: Optional[float] = None
    num_classes: Optional[int] = None

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3:
            raise ShapeMismatch(f"chip pixels must be HxWxC, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < -1.0 or px.max() > 1.0:
            raise InvalidValue("chip pixels must lie in [-1, 1]")
        if self.label is not None:
            if self.label < 0 or (self.num_classes is not None and self.label >= self.num_classes):
                raise InvalidValue(f"label {self.label} outside [0, {self.num_classes})")
        if self.capture_distance_m is not None and not self.capture_distance_m > 0:
            raise InvalidValue(f"capture_distance_m must be > 0, got {self.capture_distance_m}")


@dataclass(frozen=True)
class TensorBatch:
    """A batch of images as an ``N x C x H x W`` float tensor (torch layout)."""

    images: torch.Tensor
    labels: Optional[torch.Tensor] = None
    domain: Domain = Domain.SOURCE
    distances: Optional[torch.Tensor] = None

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[0] < 1:
            raise ShapeMismatch(f"batch images must be BxCxHxW with B >= 1, got {tuple(self.images.shape)}")
        if self.labels is not None and self.labels.shape[0] != self.images.shape[0]:
            raise ShapeMismatch("labels length must equal batch size")

    def __len__(self) -> int:
        return self.images.shape[0]

    def without_labels(self) -> "TensorBatch":
        return TensorBatch(self.images, None, self.domain, self.distances)


def chips_to_tensor(pixels: np.ndarray) -> torch.Tensor:
    """``B x H x W x C`` numpy array -> ``B x C x H x W`` float32 tensor."""
    return torch.from_numpy(np.ascontiguousarray(pixels.transpose(0, 3, 1, 2), dtype=np.float32))


def tensor_to_chips(images: torch.Tensor) -> np.ndarray:
    return images.detach().cpu().numpy().transpose(0, 2, 3, 1)
