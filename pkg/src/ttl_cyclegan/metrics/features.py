"""Feature extractors for FID."""
from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import IOFailure, UnknownExtractor

Extractor = Callable[[torch.Tensor], torch.Tensor]


def classifier_penultimate(classifier) -> Extractor:
    """Pooled pre-head activations of a classifier (``classifier.feature_dim`` wide)."""

    @torch.no_grad()
    def fn(images: torch.Tensor) -> torch.Tensor:
        was = classifier.training
        classifier.eval()
        try:
            return classifier.features(images)
        finally:
            classifier.train(was)

    return fn


def external_inception(weights_path: str | Path) -> Extractor:
    """torchvision Inception-v3 pool features from a local weights file (never downloads)."""
    from torchvision.models import inception_v3

    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError) as exc:
        raise IOFailure(f"cannot load inception weights {weights_path}: {exc}") from exc
    net = inception_v3(weights=None, aux_logits=True, init_weights=False)
    net.load_state_dict(state)
    net.fc = torch.nn.Identity()
    net.eval()

    @torch.no_grad()
    def fn(images: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(images, size=(299, 299), mode="bilinear", align_corners=False)
        return net(x)

    return fn


EXTRACTORS = {
    "classifier-penultimate": classifier_penultimate,
    "external-inception": external_inception,
}


def get_extractor(name: str, *args, **kwargs) -> Extractor:
    try:
        factory = EXTRACTORS[name]
    except KeyError:
        raise UnknownExtractor(f"unknown extractor {name!r}; known: {sorted(EXTRACTORS)}") from None
    return factory(*args, **kwargs)


def extract_features(extractor: Extractor, images: torch.Tensor, batch_size: int = 256) -> np.ndarray:
    rows = [extractor(images[i : i + batch_size]) for i in range(0, images.shape[0], batch_size)]
    return torch.cat(rows).double().numpy()
