from __future__ import annotations

import copy
from dataclasses import dataclass

import torch
import torch.nn as nn

from ..core.checkpoint import state_digest
from ..core.config import ExperimentConfig
from ..core.rng import RngStreams
from .classifier import ResNet18
from .discriminator import PatchDiscriminator
from .generator import Generator

NETWORK_NAMES = ("G", "F", "D_x", "D_y", "source_clf", "target_clf")


def init_parameters(net: nn.Module, generator: torch.Generator | int, std: float = 0.02) -> nn.Module:
    """Conv/linear weights ~ N(0, std), biases 0, norm layers start as identity."""
    if isinstance(generator, int):
        seed, generator = generator, torch.Generator()
        generator.manual_seed(seed)
    with torch.no_grad():
        for m in net.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                m.weight.normal_(0.0, std, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)):
                if m.weight is not None:
                    m.weight.fill_(1.0)
                    m.bias.zero_()
                if getattr(m, "running_mean", None) is not None:
                    m.reset_running_stats()
    return net


def build_classifier(config: ExperimentConfig) -> ResNet18:
    m = config.model
    return ResNet18(config.num_classes, 3, m.clf_width, m.clf_stem_stride)


def init_target_from_source(source: ResNet18) -> ResNet18:
    """Copy ``source`` into a new trainable classifier and freeze ``source``."""
    target = copy.deepcopy(source)
    target.trainable = True
    for p in target.parameters():
        p.requires_grad_(True)
    target.train()
    source.freeze()
    return target


@dataclass
class ModelBundle:
    G: Generator
    F: Generator
    D_x: PatchDiscriminator
    D_y: PatchDiscriminator
    source_clf: ResNet18
    target_clf: ResNet18
    num_classes: int

    @classmethod
    def build(cls, config: ExperimentConfig, streams: RngStreams) -> "ModelBundle":
        m = config.model
        nets = {
            "G": Generator(3, m.gen_filters, m.gen_res_blocks),
            "F": Generator(3, m.gen_filters, m.gen_res_blocks),
            "D_x": PatchDiscriminator(3, m.disc_filters, m.disc_layers),
            "D_y": PatchDiscriminator(3, m.disc_filters, m.disc_layers),
            "source_clf": build_classifier(config),
            "target_clf": build_classifier(config),
        }
        for name, net in nets.items():
            init_parameters(net, streams.torch("init", NETWORK_NAMES.index(name)), m.init_std)
        return cls(**nets, num_classes=config.num_classes)

    def networks(self) -> dict[str, nn.Module]:
        return {name: getattr(self, name) for name in NETWORK_NAMES}

    def state_dicts(self) -> dict[str, dict[str, torch.Tensor]]:
        out = {name: net.state_dict() for name, net in self.networks().items()}
        out["_flags"] = {
            "source_trainable": torch.tensor(self.source_clf.trainable),
            "target_trainable": torch.tensor(self.target_clf.trainable),
        }
        return out

    def load_state_dicts(self, states: dict) -> "ModelBundle":
        for name, net in self.networks().items():
            if name in states:
                net.load_state_dict(states[name])
        flags = states.get("_flags", {})
        if "source_trainable" in flags and not bool(flags["source_trainable"]):
            self.source_clf.freeze()
        return self

    def digest(self, name: str) -> str:
        return state_digest(getattr(self, name).state_dict())
