"""Adam with bias correction, written out so its state is plain tensors."""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import torch

from ..errors import NonFiniteGradient, ShapeMismatch

EPS = 1e-8


def step_optimizer(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    state: dict,
    lr: float,
    betas: tuple[float, float],
    eps: float = EPS,
) -> None:
    """One in-place Adam update of ``params``.

    ``state`` holds ``step`` and the per-parameter moment lists ``m`` / ``v``;
    it is created on first use.
    """
    if len(params) != len(grads):
        raise ShapeMismatch("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param {tuple(p.shape)} vs grad {tuple(g.shape)}")
        if not bool(torch.isfinite(g).all()):
            raise NonFiniteGradient("gradient contains NaN or Inf")
    if "m" not in state:
        state["step"] = 0
        state["m"] = [torch.zeros_like(p) for p in params]
        state["v"] = [torch.zeros_like(p) for p in params]
    b1, b2 = betas
    state["step"] += 1
    t = state["step"]
    bc1 = 1 - b1**t
    bc2 = 1 - b2**t
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state["m"], state["v"]):
            m.mul_(b1).add_(g, alpha=1 - b1)
            v.mul_(b2).addcmul_(g, g, value=1 - b2)
            denom = (v / bc2).sqrt_().add_(eps)
            p.addcdiv_(m, denom, value=-lr / bc1)


class Adam:
    """Stateful wrapper over :func:`step_optimizer` for a fixed parameter list."""

    def __init__(self, params: Iterable[torch.nn.Parameter], lr: float, betas=(0.9, 0.999), eps: float = EPS):
        self.params = [p for p in params]
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.state: dict = {}

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, clip_norm: float = 0.0):
        live = [p for p in self.params if p.grad is not None]
        if len(live) != len(self.params):
            # parameters without a gradient this step get a zero gradient so moments stay aligned
            grads = [p.grad if p.grad is not None else torch.zeros_like(p) for p in self.params]
        else:
            grads = [p.grad for p in self.params]
        if clip_norm > 0:
            total = torch.sqrt(sum((g.double() ** 2).sum() for g in grads))
            if math.isfinite(float(total)) and float(total) > clip_norm:
                scale = clip_norm / (float(total) + 1e-12)
                grads = [g * scale for g in grads]
        step_optimizer(self.params, grads, self.state, self.lr, self.betas, self.eps)

    def state_dict(self) -> dict:
        out = {"lr": self.lr, "betas": list(self.betas), "eps": self.eps}
        if "m" in self.state:
            out["step"] = self.state["step"]
            out["m"] = [t.clone() for t in self.state["m"]]
            out["v"] = [t.clone() for t in self.state["v"]]
        return out

    def load_state_dict(self, sd: dict):
        self.lr = sd["lr"]
        self.betas = tuple(sd["betas"])
        self.eps = sd["eps"]
        self.state = {}
        if "m" in sd:
            if len(sd["m"]) != len(self.params):
                raise ShapeMismatch("optimizer state does not match parameter list")
            self.state = {"step": int(sd["step"]), "m": [t.clone() for t in sd["m"]], "v": [t.clone() for t in sd["v"]]}
