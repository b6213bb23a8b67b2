"""Chip records and the CSV manifest (``path,label,domain,distance_m``)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image

from ..core.types import Domain
from ..errors import InvalidValue, IOFailure

MANIFEST_COLUMNS = ("path", "label", "domain", "distance_m")
DSIAC_DISTANCES = tuple(float(d) for d in range(1000, 5001, 500))


@dataclass(frozen=True)
class ChipRecord:
    path: Optional[str]
    label: Optional[int]
    domain: Domain
    distance_m: Optional[float]
    pixels: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def load(self, root: Optional[Path] = None) -> np.ndarray:
        if self.pixels is not None:
            return self.pixels
        if self.path is None:
            raise IOFailure("record has neither pixels nor a path")
        p = Path(self.path)
        if root is not None and not p.is_absolute():
            p = Path(root) / p
        return read_png(p)

    def strip_label(self) -> "ChipRecord":
        return replace(self, label=None)


def to_unit_range(u8: np.ndarray) -> np.ndarray:
    return (u8.astype(np.float32) / 127.5 - 1.0).astype(np.float32)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint((np.asarray(pixels) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def read_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except OSError as exc:
        raise IOFailure(f"cannot read image {path}: {exc}") from exc
    return to_unit_range(arr)


def write_png(pixels: np.ndarray, path: Path):
    arr = to_uint8(pixels)
    if arr.shape[-1] == 1:
        arr = np.repeat(arr, 3, axis=-1)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG", optimize=False)


def read_manifest(path: str | Path, strict_distances: bool = False) -> list[ChipRecord]:
    """Parse an ingestion manifest. ``strict_distances`` enforces the 1-5 km / 500 m grid."""
    path = Path(path)
    root = path.parent
    records = []
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(MANIFEST_COLUMNS) - set(reader.fieldnames):
                raise InvalidValue(f"manifest {path} must have columns {','.join(MANIFEST_COLUMNS)}")
            for i, row in enumerate(reader, start=2):
                label = row["label"].strip()
                dist = row["distance_m"].strip()
                rec_path = row["path"].strip()
                if not Path(rec_path).is_absolute():
                    rec_path = str(root / rec_path)
                try:
                    distance = float(dist) if dist else None
                    rec = ChipRecord(
                        path=rec_path,
                        label=int(label) if label else None,
                        domain=Domain.parse(row["domain"]),
                        distance_m=distance,
                    )
                except ValueError as exc:
                    raise InvalidValue(f"{path}:{i}: {exc}") from exc
                if distance is not None and distance <= 0:
                    raise InvalidValue(f"{path}:{i}: distance_m must be > 0")
                if strict_distances and distance not in DSIAC_DISTANCES:
                    raise InvalidValue(f"{path}:{i}: distance {distance} not on the 500 m grid 1000..5000")
                records.append(rec)
    except OSError as exc:
        raise IOFailure(f"cannot read manifest {path}: {exc}") from exc
    return records


def write_manifest(records: Iterable[ChipRecord], path: str | Path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in records:
            rel = r.path
            if rel is not None:
                try:
                    rel = str(Path(rel).relative_to(path.parent))
                except ValueError:
                    pass
            w.writerow([
                rel or "",
                "" if r.label is None else r.label,
                r.domain.value,
                "" if r.distance_m is None else f"{r.distance_m:g}",
            ])


def write_dataset(records: list[ChipRecord], out_dir: str | Path, manifest_name: str = "manifest.csv") -> list[ChipRecord]:
    """Write every in-memory record as a PNG and return path-backed records."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        counters: dict[tuple, int] = {}
        for r in records:
            key = (r.domain.value, r.label)
            idx = counters.get(key, 0)
            counters[key] = idx + 1
            sub = out / r.domain.value / f"class_{r.label:02d}"
            sub.mkdir(parents=True, exist_ok=True)
            p = sub / f"{idx:05d}.png"
            write_png(r.load(), p)
            written.append(replace(r, path=str(p), pixels=None))
        write_manifest(written, out / manifest_name)
    except OSError as exc:
        raise IOFailure(f"cannot write dataset to {out}: {exc}") from exc
    return written
