"""Forward graphs of one transductive step."""
from __future__ import annotations

from dataclasses import dataclass

import torch

from ..core.config import LossWeights
from ..losses import (
    LossBreakdown,
    Side,
    adversarial_loss,
    cross_entropy,
    cycle_loss,
    cyclegan_total,
    identity_loss,
    transductive_total,
)


@dataclass
class Translations:
    fake_y: torch.Tensor  # G(x)
    rec_x: torch.Tensor  # F(G(x))
    fake_x: torch.Tensor  # F(y)
    rec_y: torch.Tensor  # G(F(y))


def generator_objective(
    bundle,
    x: torch.Tensor,
    y: torch.Tensor,
    labels: torch.Tensor,
    weights: LossWeights,
    lambda_ce: float,
    mode: str = "logistic",
) -> tuple[LossBreakdown, Translations]:
    """Total loss for G, F and the target classifier on one (source, target) batch pair.

    Only source labels enter: the target classifier is scored on G(x) and
    the frozen source classifier on the reconstruction F(G(x)).
    """
    G, F = bundle.G, bundle.F
    fake_y = G(x)
    rec_x = F(fake_y)
    fake_x = F(y)
    rec_y = G(fake_x)

    adv_G = adversarial_loss(None, bundle.D_y(fake_y), Side.GENERATOR, mode)
    adv_F = adversarial_loss(None, bundle.D_x(fake_x), Side.GENERATOR, mode)
    cyc = cycle_loss(x, rec_x, y, rec_y, weights.eta1, weights.eta2)
    if weights.lambda_c > 0 and (weights.eta3 > 0 or weights.eta4 > 0):
        idt = identity_loss(y, G(y), x, F(x), weights.eta3, weights.eta4)
    else:
        idt = torch.zeros((), dtype=x.dtype)
    cg = cyclegan_total(adv_G + adv_F, cyc, idt, weights.lambda_a, weights.lambda_b, weights.lambda_c)

    ce_target = cross_entropy(bundle.target_clf(fake_y), labels)
    ce_source = cross_entropy(bundle.source_clf(rec_x), labels)
    breakdown = transductive_total(cg, ce_source, ce_target, lambda_ce, adv_G=adv_G, adv_F=adv_F, cycle=cyc, identity=idt)
    return breakdown, Translations(fake_y, rec_x, fake_x, rec_y)


def discriminator_objective(bundle, x, y, fake_x, fake_y, mode: str = "logistic") -> tuple[torch.Tensor, torch.Tensor]:
    """(D_x loss, D_y loss) on real images and (pooled, detached) translations."""
    loss_dx = adversarial_loss(bundle.D_x(x), bundle.D_x(fake_x.detach()), Side.DISCRIMINATOR, mode)
    loss_dy = adversarial_loss(bundle.D_y(y), bundle.D_y(fake_y.detach()), Side.DISCRIMINATOR, mode)
    return loss_dx, loss_dy
