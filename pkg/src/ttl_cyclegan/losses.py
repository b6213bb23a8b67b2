"""Objective terms of the transductive CycleGAN.

Every reduction is a mean (over pixels, patches and batch), so values do not
depend on image resolution or batch size.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Optional

import torch
import torch.nn.functional as F

from .errors import LabelOutOfRange, NonFiniteInput, ShapeMismatch


class Side(str, enum.Enum):
    GENERATOR = "generator"
    DISCRIMINATOR = "discriminator"


def _check_finite(*tensors: Optional[torch.Tensor]):
    for t in tensors:
        if t is not None and not bool(torch.isfinite(t).all()):
            raise NonFiniteInput("score map contains NaN or Inf")


def adversarial_loss(
    real_scores: Optional[torch.Tensor],
    fake_scores: torch.Tensor,
    side: Side | str,
    mode: str = "logistic",
) -> torch.Tensor:
    """Patch-averaged GAN loss on raw discriminator logits.

    logistic, discriminator: mean(-log sigmoid(real)) + mean(-log(1 - sigmoid(fake)))
    logistic, generator:     mean(-log sigmoid(fake))   (non-saturating)
    lsgan swaps in squared errors against targets 1 (real) and 0 (fake).
    ``real_scores`` is ignored on the generator side.
    """
    side = Side(side)
    if side is Side.DISCRIMINATOR:
        if real_scores is None:
            raise ShapeMismatch("discriminator loss needs real scores")
        _check_finite(real_scores, fake_scores)
        if mode == "lsgan":
            return ((real_scores - 1) ** 2).mean() + (fake_scores**2).mean()
        # softplus(-s) = -log sigmoid(s); softplus(s) = -log(1 - sigmoid(s))
        return F.softplus(-real_scores).mean() + F.softplus(fake_scores).mean()
    _check_finite(fake_scores)
    if mode == "lsgan":
        return ((fake_scores - 1) ** 2).mean()
    return F.softplus(-fake_scores).mean()


def _l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def cycle_loss(x, x_rec, y, y_rec, eta1: float, eta2: float) -> torch.Tensor:
    """``eta1 * |F(G(x)) - x| + eta2 * |G(F(y)) - y|`` (mean absolute error)."""
    return eta1 * _l1(x_rec, x) + eta2 * _l1(y_rec, y)


def identity_loss(y, g_of_y, x, f_of_x, eta3: float, eta4: float) -> torch.Tensor:
    """``eta3 * |G(y) - y| + eta4 * |F(x) - x|``."""
    return eta3 * _l1(g_of_y, y) + eta4 * _l1(f_of_x, x)


def cyclegan_total(adversarial, cycle, identity, lambda_a: float = 1.0, lambda_b: float = 1.0, lambda_c: float = 1.0):
    return lambda_a * adversarial + lambda_b * cycle + lambda_c * identity


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Batch mean of ``-log softmax(logits)[label]``."""
    if logits.ndim != 2 or labels.shape != logits.shape[:1]:
        raise ShapeMismatch(f"logits {tuple(logits.shape)} vs labels {tuple(labels.shape)}")
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= logits.shape[1]):
        raise LabelOutOfRange(f"labels must lie in [0, {logits.shape[1]})")
    if not bool(torch.isfinite(logits).all()):
        raise NonFiniteInput("logits contain NaN or Inf")
    return F.cross_entropy(logits, labels.long())


@dataclass
class LossBreakdown:
    adv_G: torch.Tensor
    adv_F: torch.Tensor
    cycle: torch.Tensor
    identity: torch.Tensor
    cyclegan: torch.Tensor
    ce_source: torch.Tensor
    ce_target: torch.Tensor
    total: torch.Tensor
    lambda_ce: float = 0.0
    adv_Dx: Optional[torch.Tensor] = None
    adv_Dy: Optional[torch.Tensor] = None

    def as_floats(self) -> dict[str, float]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = float(v.detach()) if torch.is_tensor(v) else float(v)
        return out


def transductive_total(
    cyclegan: torch.Tensor,
    ce_source: torch.Tensor,
    ce_target: torch.Tensor,
    lambda_ce: float,
    *,
    adv_G=None,
    adv_F=None,
    cycle=None,
    identity=None,
) -> LossBreakdown:
    """``L_CycleGAN + lambda_ce * L_CE-source + lambda_ce * L_CE-target``."""
    zero = torch.zeros((), dtype=cyclegan.dtype)
    total = cyclegan + lambda_ce * ce_source + lambda_ce * ce_target
    return LossBreakdown(
        adv_G=zero if adv_G is None else adv_G,
        adv_F=zero if adv_F is None else adv_F,
        cycle=zero if cycle is None else cycle,
        identity=zero if identity is None else identity,
        cyclegan=cyclegan,
        ce_source=ce_source,
        ce_target=ce_target,
        total=total,
        lambda_ce=lambda_ce,
    )
