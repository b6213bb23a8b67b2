"""Plain-text layer table (output shape and parameter count per leaf module)."""
from __future__ import annotations

import torch
import torch.nn as nn


def architecture_table(net: nn.Module, input_shape: tuple[int, ...], title: str = "") -> str:
    rows = []
    hooks = []

    def hook(name):
        def fn(module, _inp, out):
            n = sum(p.numel() for p in module.parameters(recurse=False))
            rows.append((name, type(module).__name__, tuple(out.shape), n))

        return fn

    for name, module in net.named_modules():
        if len(list(module.children())) == 0:
            hooks.append(module.register_forward_hook(hook(name)))
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            net(torch.zeros(input_shape))
    finally:
        for h in hooks:
            h.remove()
        net.train(was_training)

    lines = [title] if title else []
    lines.append(f"{'layer':<32} {'type':<18} {'output':<22} {'params':>10}")
    for name, kind, shape, n in rows:
        lines.append(f"{name:<32} {kind:<18} {str(shape):<22} {n:>10,}")
    total = sum(p.numel() for p in net.parameters())
    lines.append(f"{'total':<74} {total:>10,}")
    return "\n".join(lines)


def bundle_summary(bundle, chip_size: int) -> str:
    shape = (1, 3, chip_size, chip_size)
    parts = [architecture_table(net, shape, f"== {name}") for name, net in bundle.networks().items()]
    return "\n\n".join(parts) + "\n"
