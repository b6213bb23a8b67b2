import hashlib

import numpy as np
import pytest
import torch

from oracles import central_difference
from ttl_cyclegan.core import ExperimentConfig, seed_all, state_digest
from ttl_cyclegan.errors import ShapeMismatch
from ttl_cyclegan.losses import cross_entropy
from ttl_cyclegan.models import (
    Generator,
    ModelBundle,
    PatchDiscriminator,
    ResNet18,
    architecture_table,
    bundle_summary,
    init_parameters,
    init_target_from_source,
    receptive_field,
    score_map_side,
)


def rel_err(a, n):
    return abs(a - n) / max(abs(a), abs(n), 1e-6)


def gradient_check(net, fn, n_params=6, seed=0, h=1e-5):
    """Worst relative error between autograd and central differences over sampled entries."""
    params = [p for p in net.parameters() if p.requires_grad]
    net.zero_grad()
    fn().backward()
    g = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_params):
        p = params[int(g.integers(len(params)))]
        idx = tuple(int(g.integers(s)) for s in p.shape)
        analytic = p.grad[idx].item()
        numeric = central_difference(fn, p.data, idx, h)
        worst = max(worst, rel_err(analytic, numeric))
    return worst


def _img(*shape, seed=0, dtype=torch.float32):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(*shape, generator=g, dtype=dtype) * 2 - 1


class TestGenerator:
    def test_chip_shape_and_range(self):
        net = init_parameters(Generator(3, 4, 2), 0)
        out = net(_img(2, 3, 68, 68))
        assert out.shape == (2, 3, 68, 68)
        assert out.min() >= -1 and out.max() <= 1

    @pytest.mark.parametrize("side", [64, 68, 96])
    def test_shape_preserved(self, side):
        assert Generator(3, 2, 1)(_img(1, 3, side, side)).shape == (1, 3, side, side)

    def test_untrained_output_in_range(self):
        net = init_parameters(Generator(3, 8, 2), 5)
        out = net(_img(3, 3, 32, 32) * 1.0)
        assert float(out.detach().abs().max()) <= 1.0

    @pytest.mark.parametrize("shape", [(1, 3, 66, 66), (1, 1, 68, 68), (3, 68, 68)])
    def test_shape_mismatch(self, shape):
        with pytest.raises(ShapeMismatch):
            Generator(3, 2, 1)(torch.zeros(shape))

    def test_gradient_check(self):
        net = init_parameters(Generator(3, 2, 1), 1).double()
        x = _img(2, 3, 8, 8, dtype=torch.float64)
        assert gradient_check(net, lambda: net(x).mean()) < 1e-4


def conv_out(n, k, s, p):
    return (n + 2 * p - k) // s + 1


class TestDiscriminator:
    def test_score_map_shape_oracle(self):
        side = 68
        for _ in range(3):
            side = conv_out(side, 4, 2, 1)
        side = conv_out(side, 4, 1, 1)
        assert side == 7
        out = PatchDiscriminator(3, 4, 3)(_img(2, 3, 68, 68))
        assert out.shape == (2, 1, 7, 7)
        assert score_map_side(68, 3) == 7
        assert score_map_side(32, 3) == 3

    def test_receptive_field(self):
        # final 4x4 conv at stride 8 on top of three stride-2 4x4 convs
        rf, jump = 1, 1
        for k, s in [(4, 2), (4, 2), (4, 2), (4, 1)]:
            rf += (k - 1) * jump
            jump *= s
        assert receptive_field(3) == rf == 46

    def test_duplicate_rows_identical(self):
        net = init_parameters(PatchDiscriminator(3, 4, 3), 2)
        x = _img(1, 3, 32, 32)
        out = net(torch.cat([x, x]))
        assert torch.equal(out[0], out[1])

    def test_finite_logits(self):
        assert torch.isfinite(PatchDiscriminator(3, 4, 3)(_img(2, 3, 32, 32))).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            PatchDiscriminator(3, 4, 3)(torch.zeros(1, 2, 32, 32))
        with pytest.raises(ShapeMismatch):
            PatchDiscriminator(3, 4, 3)(torch.zeros(1, 3, 4, 4))

    def test_gradient_check(self):
        net = init_parameters(PatchDiscriminator(3, 2, 2), 3).double()
        x = _img(2, 3, 16, 16, dtype=torch.float64)
        assert gradient_check(net, lambda: net(x).mean()) < 1e-4


class TestClassifier:
    def test_logits_shape(self):
        net = ResNet18(10, 3, 2).eval()
        assert net(_img(160, 3, 68, 68)).shape == (160, 10)

    def test_softmax_sums_to_one(self):
        net = init_parameters(ResNet18(10, 3, 4), 0).eval()
        p = torch.softmax(net(_img(5, 3, 32, 32)).double(), dim=1)
        assert torch.allclose(p.sum(dim=1), torch.ones(5, dtype=torch.float64), atol=1e-6)

    def test_permutation_equivariant(self):
        net = init_parameters(ResNet18(10, 3, 4), 0).eval()
        x = _img(6, 3, 32, 32)
        perm = torch.tensor([3, 0, 5, 1, 4, 2])
        assert torch.allclose(net(x)[perm], net(x[perm]), atol=1e-6)

    def test_feature_dim(self):
        net = ResNet18(10, 3, 4).eval()
        assert net.features(_img(2, 3, 32, 32)).shape == (2, 32) and net.feature_dim == 32

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            ResNet18(10, 3, 2)(torch.zeros(1, 1, 32, 32))

    def test_gradient_check(self):
        net = init_parameters(ResNet18(3, 3, 2), 4).double()
        x = _img(4, 3, 16, 16, dtype=torch.float64)
        y = torch.tensor([0, 1, 2, 1])
        assert gradient_check(net, lambda: cross_entropy(net(x), y)) < 1e-4


def test_init_parameters_deterministic_and_centered():
    a = init_parameters(Generator(3, 8, 2), 7)
    b = init_parameters(Generator(3, 8, 2), 7)
    assert state_digest(a.state_dict()) == state_digest(b.state_dict())
    c = init_parameters(Generator(3, 8, 2), 8)
    assert state_digest(a.state_dict()) != state_digest(c.state_dict())
    for m in a.modules():
        if isinstance(m, torch.nn.Conv2d):
            w = m.weight.detach().double()
            assert abs(float(w.mean())) < 3 * 0.02 / np.sqrt(w.numel())
        if isinstance(m, torch.nn.InstanceNorm2d):
            assert torch.all(m.weight == 1) and torch.all(m.bias == 0)


def test_init_target_from_source_copies_then_diverges():
    src = init_parameters(ResNet18(10, 3, 4), 0)
    digest = state_digest(src.state_dict())
    tgt = init_target_from_source(src)
    x = _img(4, 3, 32, 32)
    tgt.eval()
    assert torch.equal(src(x), tgt(x))
    assert tgt.trainable and not src.trainable
    assert not any(p.requires_grad for p in src.parameters())

    tgt.train()
    opt = torch.optim.SGD(tgt.parameters(), lr=0.1)
    loss = cross_entropy(tgt(x), torch.tensor([0, 1, 2, 3])) + cross_entropy(src(x), torch.tensor([0, 1, 2, 3]))
    loss.backward()
    opt.step()
    assert state_digest(src.state_dict()) == digest
    assert state_digest(tgt.state_dict()) != digest


def test_frozen_classifier_ignores_train_mode():
    src = init_parameters(ResNet18(10, 3, 4), 0).freeze()
    src.train()
    assert not src.training
    digest = state_digest(src.state_dict())
    src(_img(4, 3, 32, 32))
    assert state_digest(src.state_dict()) == digest  # running stats untouched


def _toy_bundle(dtype=torch.float32):
    cfg = ExperimentConfig(chip_size=16).replace(
        **{"model.gen_filters": 2, "model.gen_res_blocks": 1, "model.disc_filters": 2, "model.disc_layers": 2, "model.clf_width": 2}
    )
    b = ModelBundle.build(cfg, seed_all(0))
    for net in b.networks().values():
        net.to(dtype)
    return cfg, b


def test_forward_passes_pure_in_eval_mode():
    _, b = _toy_bundle()
    x = _img(3, 3, 16, 16)
    for net in b.networks().values():
        net.eval()
        assert torch.equal(net(x), net(x))


def test_source_ce_gradient_reaches_generator():
    _, b = _toy_bundle(torch.float64)
    b.target_clf = init_target_from_source(b.source_clf)
    x = _img(4, 3, 16, 16, dtype=torch.float64)
    labels = torch.tensor([0, 1, 2, 3])
    loss = cross_entropy(b.source_clf(b.F(b.G(x))), labels)
    loss.backward()
    g_norm = sum(float(p.grad.abs().sum()) for p in b.G.parameters() if p.grad is not None)
    assert g_norm > 0
    assert all(p.grad is None for p in b.source_clf.parameters())


def test_architecture_summary_lists_layers():
    _, b = _toy_bundle()
    text = bundle_summary(b, 16)
    for name in ("== G", "== F", "== D_x", "== D_y", "== source_clf", "== target_clf"):
        assert name in text
    table = architecture_table(PatchDiscriminator(3, 2, 3), (1, 3, 68, 68))
    assert "(1, 1, 7, 7)" in table
