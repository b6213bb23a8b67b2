import json

import numpy as np
import torch


class ImagePool:
    """History buffer of generated images fed to the discriminators.

    Until full, every query image is stored and returned. Afterwards each
    image is, with probability 1/2, swapped for a random stored one (which
    is returned) or passed through unchanged.
    """

    def __init__(self, size: int, rng: np.random.Generator):
        self.size = size
        self.rng = rng
        self.images: list[torch.Tensor] = []

    def query(self, images: torch.Tensor) -> torch.Tensor:
        if self.size == 0:
            return images.detach()
        out = []
        for img in images.detach():
            img = img.clone()
            if len(self.images) < self.size:
                self.images.append(img)
                out.append(img)
            elif self.rng.random() < 0.5:
                k = int(self.rng.integers(self.size))
                out.append(self.images[k].clone())
                self.images[k] = img
            else:
                out.append(img)
        return torch.stack(out)

    def state_dict(self) -> dict:
        return {
            "rng": json.dumps(self.rng.bit_generator.state),
            "images": torch.stack(self.images) if self.images else torch.empty(0),
        }

    def load_state_dict(self, sd: dict):
        self.rng.bit_generator.state = json.loads(sd["rng"])
        imgs = sd["images"]
        self.images = [t.clone() for t in imgs] if imgs.numel() else []
