import torch
import torch.nn as nn

from ..errors import ShapeMismatch

KERNEL = 4


class PatchDiscriminator(nn.Module):
    """Fully convolutional realness scorer.

    ``n_layers`` stride-2 4x4 convolutions (instance norm after all but the
    first, LeakyReLU 0.2) followed by a stride-1 4x4 convolution to one
    channel. Each output logit scores one overlapping input patch; with the
    defaults a 68x68 input gives a 7x7 map and each logit sees a 46x46 patch.
    """

    def __init__(self, channels: int = 3, filters: int = 64, n_layers: int = 3):
        super().__init__()
        layers = [nn.Conv2d(channels, filters, KERNEL, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True)]
        f = filters
        for i in range(1, n_layers):
            nf = filters * min(2**i, 8)
            layers += [
                nn.Conv2d(f, nf, KERNEL, stride=2, padding=1),
                nn.InstanceNorm2d(nf, affine=True),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            f = nf
        layers.append(nn.Conv2d(f, 1, KERNEL, stride=1, padding=1))
        self.channels = channels
        self.n_layers = n_layers
        self.model = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(f"discriminator expects Bx{self.channels}xHxW, got {tuple(x.shape)}")
        if min(score_map_side(x.shape[-2], self.n_layers), score_map_side(x.shape[-1], self.n_layers)) < 1:
            raise ShapeMismatch(f"input {tuple(x.shape[-2:])} too small for {self.n_layers} stride-2 stages")
        return self.model(x)


def score_map_side(side: int, n_layers: int = 3) -> int:
    """Output side length for an input side, from the conv arithmetic
    ``out = floor((in + 2*pad - kernel) / stride) + 1``."""
    for _ in range(n_layers):
        side = (side + 2 - KERNEL) // 2 + 1
    return side + 2 - KERNEL + 1


def receptive_field(n_layers: int = 3) -> int:
    rf = KERNEL
    for _ in range(n_layers):
        rf = (rf - 1) * 2 + KERNEL
    return rf
