"""18-layer residual classifier adapted to small chips.

The ImageNet stem (7x7 stride-2 conv plus max-pool) would shrink a 68x68
chip to 17x17 before the first residual stage; here the stem is a single
3x3 convolution with configurable stride and no pooling.
"""
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ShapeMismatch


class BasicBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class ResNet18(nn.Module):
    def __init__(self, num_classes: int = 10, channels: int = 3, width: int = 64, stem_stride: int = 1):
        super().__init__()
        self.num_classes = num_classes
        self.channels = channels
        self.stem = nn.Sequential(
            nn.Conv2d(channels, width, 3, stride=stem_stride, padding=1, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(inplace=True),
        )
        stages = []
        in_ch = width
        for i, stride in enumerate((1, 2, 2, 2)):
            out_ch = width * 2**i
            stages.append(nn.Sequential(BasicBlock(in_ch, out_ch, stride), BasicBlock(out_ch, out_ch)))
            in_ch = out_ch
        self.stages = nn.Sequential(*stages)
        self.feature_dim = in_ch
        self.fc = nn.Linear(in_ch, num_classes)
        self.trainable = True

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Globally pooled penultimate activations, ``B x feature_dim``."""
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(f"classifier expects Bx{self.channels}xHxW, got {tuple(x.shape)}")
        out = self.stages(self.stem(x))
        return torch.flatten(F.adaptive_avg_pool2d(out, 1), 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(self.features(x))

    def freeze(self) -> "ResNet18":
        """Stop parameter updates. Gradients still flow *through* the network."""
        self.trainable = False
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()
        return self

    def train(self, mode: bool = True):
        # a frozen classifier keeps its BatchNorm statistics fixed
        return super().train(mode and self.trainable)
