import torch
import torch.nn as nn

from ..errors import ShapeMismatch


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.InstanceNorm2d(channels, affine=True),
        )

    def forward(self, x):
        return x + self.block(x)


class Generator(nn.Module):
    """ResNet-style translation network.

    7x7 stem, two stride-2 downsampling convolutions, ``n_blocks`` residual
    blocks, two fractionally-strided (transposed) convolutions back to the
    input resolution, and a 7x7 projection to ``channels`` squashed by tanh.
    Input height and width must be multiples of 4.
    """

    downsampling = 4

    def __init__(self, channels: int = 3, filters: int = 64, n_blocks: int = 6):
        super().__init__()
        f = filters
        layers = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(channels, f, 7),
            nn.InstanceNorm2d(f, affine=True),
            nn.ReLU(inplace=True),
        ]
        for mult in (1, 2):
            layers += [
                nn.Conv2d(f * mult, f * mult * 2, 3, stride=2, padding=1),
                nn.InstanceNorm2d(f * mult * 2, affine=True),
                nn.ReLU(inplace=True),
            ]
        layers += [ResidualBlock(f * 4) for _ in range(n_blocks)]
        for mult in (4, 2):
            layers += [
                nn.ConvTranspose2d(f * mult, f * mult // 2, 3, stride=2, padding=1, output_padding=1),
                nn.InstanceNorm2d(f * mult // 2, affine=True),
                nn.ReLU(inplace=True),
            ]
        layers += [nn.ReflectionPad2d(3), nn.Conv2d(f, channels, 7), nn.Tanh()]
        self.channels = channels
        self.model = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(f"generator expects Bx{self.channels}xHxW, got {tuple(x.shape)}")
        h, w = x.shape[-2:]
        if h % self.downsampling or w % self.downsampling:
            raise ShapeMismatch(f"generator input sides must be multiples of 4, got {h}x{w}")
        return self.model(x)
