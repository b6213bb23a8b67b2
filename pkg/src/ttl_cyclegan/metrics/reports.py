"""Serialisation of metrics: JSON lines, CSV tables, heatmaps and image grids."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .classification import ConfusionMatrix, DistanceRow


class JsonlWriter:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")

    def write(self, record: dict):
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def write_confusion_csv(cm: ConfusionMatrix, path: str | Path, class_names: Sequence[str] | None = None):
    names = list(class_names or [str(i) for i in range(cm.num_classes)])
    norm = cm.normalized
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred", *names, "support", "empty_row"])
        for i, name in enumerate(names):
            w.writerow([name, *(f"{v:.6f}" for v in norm[i]), int(cm.counts[i].sum()), int(cm.empty_rows[i])])


def write_confusion_png(cm: ConfusionMatrix, path: str | Path, title: str = ""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(cm.normalized, vmin=0, vmax=1, cmap="Blues")
    n = cm.num_classes
    for i in range(n):
        for j in range(n):
            v = cm.normalized[i, j]
            if v > 0:
                ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=6, color="white" if v > 0.5 else "black")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def write_distance_csv(rows: Sequence[DistanceRow], path: str | Path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["distance_m", "accuracy_pct", "samples"])
        for r in rows:
            w.writerow([f"{r.distance_m:g}", f"{100 * r.accuracy:.2f}", r.samples])


def write_summary_csv(summary: dict, path: str | Path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k in sorted(summary):
            v = summary[k]
            w.writerow([k, f"{v:.6f}" if isinstance(v, float) else v])


def image_grid(rows: Sequence[np.ndarray], pad: int = 2) -> np.ndarray:
    """Tile rows of ``N x H x W x C`` images (values in [-1, 1]) into one array."""
    h, w, c = rows[0].shape[1:]
    n = max(r.shape[0] for r in rows)
    grid = np.ones(((h + pad) * len(rows) + pad, (w + pad) * n + pad, c), dtype=np.float32)
    for i, row in enumerate(rows):
        for j, img in enumerate(row):
            top, left = pad + i * (h + pad), pad + j * (w + pad)
            grid[top : top + h, left : left + w] = img
    return grid
