from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..datasets.loader import ChipSet, iterate_batches
from ..errors import DataEmpty, MissingDistance


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def empty_rows(self) -> np.ndarray:
        return self.counts.sum(axis=1) == 0

    @property
    def normalized(self) -> np.ndarray:
        """Row-stochastic matrix; rows with no samples stay all-zero (see ``empty_rows``)."""
        support = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(self.counts, support, out=np.zeros(self.counts.shape), where=support > 0)

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else 0.0


def confusion_from_predictions(y_true, y_pred, num_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


@torch.no_grad()
def predict(classifier: torch.nn.Module, data: ChipSet, batch_size: int = 256) -> np.ndarray:
    was_training = classifier.training
    classifier.eval()
    try:
        preds = [classifier(b.images).argmax(dim=1) for b in iterate_batches(data, batch_size, shuffle=False)]
    finally:
        classifier.train(was_training)
    return torch.cat(preds).numpy()


def evaluate_classifier(classifier, data: ChipSet, batch_size: int = 256) -> tuple[float, ConfusionMatrix]:
    if len(data) == 0 or data.labels is None:
        raise DataEmpty("evaluation needs a non-empty labelled set")
    pred = predict(classifier, data, batch_size)
    cm = confusion_from_predictions(data.labels.numpy(), pred, classifier.num_classes)
    return cm.accuracy, cm


@dataclass(frozen=True)
class DistanceRow:
    distance_m: float
    accuracy: float
    samples: int


def accuracy_by_distance(classifier, data: ChipSet, batch_size: int = 256) -> list[DistanceRow]:
    if data.labels is None or len(data) == 0:
        raise DataEmpty("evaluation needs a non-empty labelled set")
    dist = data.distances.numpy()
    if np.isnan(dist).any():
        raise MissingDistance("every record needs a capture distance")
    correct = predict(classifier, data, batch_size) == data.labels.numpy()
    rows = []
    for d in np.unique(dist):
        sel = dist == d
        rows.append(DistanceRow(float(d), float(correct[sel].mean()), int(sel.sum())))
    return rows
