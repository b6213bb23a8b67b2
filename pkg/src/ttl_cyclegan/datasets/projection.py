"""Rescale chips to the apparent size they would have at a reference distance.

Under a pinhole camera the apparent size of a target scales as 1/distance,
so a chip captured at ``d`` metres is resized by ``d / canonical``: near
captures shrink, far captures grow.
"""
from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from ..core.types import ImageChip
from ..errors import MissingDistance, NonPositiveDistance


def scale_factor(capture_distance_m: Optional[float], canonical_distance_m: float) -> float:
    if capture_distance_m is None:
        raise MissingDistance("chip has no capture distance")
    if not capture_distance_m > 0 or not canonical_distance_m > 0:
        raise NonPositiveDistance(f"distances must be > 0, got {capture_distance_m} / {canonical_distance_m}")
    return float(capture_distance_m) / float(canonical_distance_m)


def resize_bicubic(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Antialiased bicubic resize of an ``H x W x C`` array, clipped to [-1, 1]."""
    if pixels.shape[:2] == (height, width):
        return pixels.copy()
    t = torch.from_numpy(np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float32))[None]
    out = F.interpolate(t, size=(height, width), mode="bicubic", align_corners=False, antialias=True)
    return out[0].numpy().transpose(1, 2, 0).clip(-1.0, 1.0)


def fit_canvas(pixels: np.ndarray, side: int) -> np.ndarray:
    """Center-crop or pad to ``side x side``; padding uses the per-channel border mean."""
    h, w, c = pixels.shape
    if h > side:
        top = (h - side) // 2
        pixels = pixels[top : top + side]
    if w > side:
        left = (w - side) // 2
        pixels = pixels[:, left : left + side]
    h, w = pixels.shape[:2]
    if h == side and w == side:
        return np.ascontiguousarray(pixels)
    border = np.concatenate(
        [pixels[0], pixels[-1], pixels[:, 0], pixels[:, -1]], axis=0
    ).reshape(-1, c).mean(axis=0)
    canvas = np.empty((side, side, c), dtype=pixels.dtype)
    canvas[...] = border
    top, left = (side - h) // 2, (side - w) // 2
    canvas[top : top + h, left : left + w] = pixels
    return canvas


def project_to_canonical(chip: ImageChip, canonical_distance_m: float = 2000.0, chip_size: int = 68) -> ImageChip:
    s = scale_factor(chip.capture_distance_m, canonical_distance_m)
    h, w = chip.pixels.shape[:2]
    resized = resize_bicubic(chip.pixels, max(1, int(round(h * s))), max(1, int(round(w * s))))
    out = fit_canvas(resized, chip_size).astype(np.float32, copy=False)
    return dataclasses.replace(chip, pixels=out, capture_distance_m=float(canonical_distance_m))
