"""Procedural two-domain benchmark.

Class identity is a shape family plus a number of small satellite blobs
("ornaments"); both domains use the same class->shape mapping, so labels
carry across domains by construction. The SOURCE domain renders a bright
object on a dark, smoothly varying background in grey (infrared-like). The
TARGET domain blends toward an inverted colour palette, adds striped
background texture, blur and sensor noise, each controlled by one knob.
With every knob at zero the two domains are identically distributed.

Chips are rendered at the size the object would have at the sampled capture
distance (side ~ chip_size * canonical / distance), so they must go through
canonical projection before batching.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..core.rng import RngStreams
from ..core.types import Domain
from ..errors import InvalidSpec, IOFailure
from .records import ChipRecord, to_uint8, to_unit_range

SHAPE_FAMILIES = ("disk", "square", "triangle", "cross", "ring", "hexagon", "bar")
SUPERSAMPLE = 4


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 10
    samples_per_class: int = 200
    chip_size: int = 68
    canonical_distance_m: float = 2000.0
    distances: tuple = (2000.0,)
    palette_shift: float = 1.0
    texture_shift: float = 0.5
    blur_sigma: float = 0.6
    noise_std: float = 0.03
    source_texture: str = "smooth"
    target_texture: str = "stripes"
    seed: int = 0

    def validate(self) -> "SyntheticSpec":
        if self.num_classes < 1 or self.samples_per_class < 1 or self.chip_size < 4:
            raise InvalidSpec("num_classes and samples_per_class must be >= 1, chip_size >= 4")
        if self.blur_sigma < 0 or self.noise_std < 0 or self.texture_shift < 0:
            raise InvalidSpec("blur_sigma, noise_std and texture_shift must be >= 0")
        if not 0.0 <= self.palette_shift <= 1.0:
            raise InvalidSpec("palette_shift must lie in [0, 1]")
        if not self.distances or any(not d > 0 for d in self.distances) or not self.canonical_distance_m > 0:
            raise InvalidSpec("distances must be a non-empty list of positive reals")
        for t in (self.source_texture, self.target_texture):
            if t not in ("smooth", "stripes"):
                raise InvalidSpec(f"unknown texture family {t!r}")
        return self

    @property
    def n_families(self) -> int:
        return min(5, self.num_classes)

    def class_layout(self, label: int) -> tuple[str, int]:
        """(shape family, ornament count) for a class index."""
        return SHAPE_FAMILIES[label % self.n_families], label // self.n_families


def load_spec(path: str | Path) -> SyntheticSpec:
    try:
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IOFailure(f"cannot read spec {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InvalidSpec(f"{path}: {exc}") from exc
    data = data.get("synthetic", data)
    known = {f.name for f in dataclasses.fields(SyntheticSpec)}
    unknown = set(data) - known
    if unknown:
        raise InvalidSpec(f"unknown spec keys: {sorted(unknown)}")
    if "distances" in data:
        data["distances"] = tuple(float(d) for d in data["distances"])
    try:
        return SyntheticSpec(**data).validate()
    except TypeError as exc:
        raise InvalidSpec(str(exc)) from exc


def _shape_mask(family: str, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Indicator of a unit-scale shape in rotated, radius-normalised coordinates."""
    au, av = np.abs(u), np.abs(v)
    rho = np.hypot(u, v)
    if family == "disk":
        return rho <= 1.0
    if family == "square":
        return np.maximum(au, av) <= 0.8
    if family == "triangle":
        return (v >= -0.55) & (np.sqrt(3) * u + v <= 1.0) & (-np.sqrt(3) * u + v <= 1.0)
    if family == "cross":
        return ((au <= 0.3) & (av <= 1.0)) | ((av <= 0.3) & (au <= 1.0))
    if family == "ring":
        return (rho <= 1.0) & (rho >= 0.55)
    if family == "hexagon":
        return (av <= 0.87) & (np.sqrt(3) * au + av <= np.sqrt(3))
    if family == "bar":
        return (au <= 1.0) & (av <= 0.35)
    raise InvalidSpec(f"unknown shape family {family!r}")


def _render_intensity(spec: SyntheticSpec, label: int, side: int, rng: np.random.Generator):
    """Return (intensity in [0,1], object coverage in [0,1]) at ``side`` x ``side``."""
    family, n_orn = spec.class_layout(label)
    n = side * SUPERSAMPLE
    coords = (np.arange(n) + 0.5) / SUPERSAMPLE - side / 2.0
    yy, xx = np.meshgrid(coords, coords, indexing="ij")

    radius = 0.2 * side * rng.uniform(0.9, 1.1)
    cx, cy = rng.uniform(-0.06, 0.06, size=2) * side
    theta = rng.uniform(0.0, 2 * np.pi)
    c, s = np.cos(theta), np.sin(theta)
    dx, dy = xx - cx, yy - cy
    u = (c * dx + s * dy) / radius
    v = (-s * dx + c * dy) / radius
    mask = _shape_mask(family, u, v)
    for j in range(n_orn):
        ang = theta + np.pi / 4 + 2 * np.pi * j / max(n_orn, 1)
        ox, oy = 1.45 * np.cos(ang), 1.45 * np.sin(ang)
        mask |= np.hypot(u - ox, v - oy) <= 0.28

    cover = mask.reshape(side, SUPERSAMPLE, side, SUPERSAMPLE).mean(axis=(1, 3))
    gx = np.linspace(-1, 1, side)
    gy, gxx = np.meshgrid(gx, gx, indexing="ij")
    bg = rng.uniform(0.15, 0.3) + 0.05 * np.cos(rng.uniform(1, 3) * gxx + rng.uniform(0, 6.3)) * np.cos(
        rng.uniform(1, 3) * gy + rng.uniform(0, 6.3)
    )
    obj = rng.uniform(0.75, 0.95) - 0.06 * (u.reshape(side, SUPERSAMPLE, side, SUPERSAMPLE).mean(axis=(1, 3)) * 0.5)
    intensity = bg * (1 - cover) + obj * cover
    return np.clip(intensity, 0.0, 1.0), cover


def _stripes(side: int, rng: np.random.Generator) -> np.ndarray:
    ang = rng.uniform(0, np.pi)
    period = side / rng.uniform(4.0, 7.0)
    g = np.arange(side) - side / 2.0
    yy, xx = np.meshgrid(g, g, indexing="ij")
    return np.sin(2 * np.pi * (np.cos(ang) * xx + np.sin(ang) * yy) / period + rng.uniform(0, 2 * np.pi))


def render_chip(spec: SyntheticSpec, label: int, domain: Domain, distance_m: float, rng: np.random.Generator) -> np.ndarray:
    """Render one chip as an ``S x S x 3`` array in [-1, 1] (uint8-quantised)."""
    side = max(4, int(round(spec.chip_size * spec.canonical_distance_m / distance_m)))
    scale = side / spec.chip_size
    intensity, cover = _render_intensity(spec, label, side, rng)
    gray = np.repeat(intensity[..., None], 3, axis=-1)
    texture = spec.source_texture
    rgb = gray
    if domain is Domain.TARGET:
        texture = spec.target_texture
        lo = np.array([0.85, 0.88, 0.95]) + rng.uniform(-0.05, 0.05, 3)
        hi = np.array([0.10, 0.18, 0.05]) + rng.uniform(-0.05, 0.05, 3)
        palette = lo + (hi - lo) * intensity[..., None]
        p = spec.palette_shift
        rgb = (1 - p) * gray + p * palette
        if texture == "stripes" and spec.texture_shift > 0:
            rgb = rgb + (spec.texture_shift * 0.15 * _stripes(side, rng) * (1 - cover))[..., None]
        if spec.blur_sigma > 0:
            rgb = gaussian_filter(rgb, sigma=(spec.blur_sigma * scale, spec.blur_sigma * scale, 0), mode="nearest")
        if spec.noise_std > 0:
            rgb = rgb + rng.normal(0.0, spec.noise_std, size=rgb.shape)
    elif texture == "stripes" and spec.texture_shift > 0:
        rgb = rgb + (spec.texture_shift * 0.15 * _stripes(side, rng) * (1 - cover))[..., None]
    # shared sensor noise, identical in both domains
    rgb = rgb + rng.normal(0.0, 0.01, size=rgb.shape)
    return to_unit_range(to_uint8(np.clip(rgb, 0.0, 1.0) * 2.0 - 1.0))


def make_synthetic_domains(spec: SyntheticSpec) -> tuple[list[ChipRecord], list[ChipRecord]]:
    """Render ``samples_per_class`` chips per class for each domain (unpaired)."""
    spec.validate()
    streams = RngStreams(spec.seed)
    out = {}
    for d_idx, domain in enumerate((Domain.SOURCE, Domain.TARGET)):
        records = []
        for label in range(spec.num_classes):
            for i in range(spec.samples_per_class):
                rng = streams.numpy("synthetic", d_idx, label, i)
                distance = float(spec.distances[int(rng.integers(len(spec.distances)))])
                pixels = render_chip(spec, label, domain, distance, rng)
                records.append(ChipRecord(None, label, domain, distance, pixels=pixels))
        out[domain] = records
    return out[Domain.SOURCE], out[Domain.TARGET]
