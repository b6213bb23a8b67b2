"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest
import torch

import conftest
from oracles import central_difference, cross_entropy_loop, disc_loss_loop, gaussian_frechet, gen_loss_loop, mean_abs_loop
from ttl_cyclegan.configs import desk_benchmark
from ttl_cyclegan.core import Domain, ExperimentConfig, ImageChip, seed_all
from ttl_cyclegan.datasets import ChipRecord, project_to_canonical, split_dataset
from ttl_cyclegan.datasets.loader import ChipSet
from ttl_cyclegan.losses import Side, adversarial_loss, cross_entropy, cycle_loss, identity_loss
from ttl_cyclegan.metrics import confusion_from_predictions, fid, frechet_distance
from ttl_cyclegan.models import ModelBundle, init_parameters, init_target_from_source
from ttl_cyclegan.trainer import (
    TransductiveTrainer,
    discriminator_updates,
    gan_lr,
    generator_objective,
    lambda_ce,
    run_benchmark,
)


def report(number: int, title: str, ok: bool, seconds: float, detail: str = ""):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title} ({seconds:.1f}s){': ' + detail if detail else ''}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


T = lambda a: torch.as_tensor(np.asarray(a, dtype=np.float64))  # noqa: E731


# -- 1. loss unit suite ---------------------------------------------------------


def test_criterion_1_loss_units():
    t0 = time.time()
    g = np.random.default_rng(1)
    errors = []
    for _ in range(20):
        real, fake = g.normal(size=(2, 2, 1)) * 3, g.normal(size=(2, 2, 1)) * 3
        errors.append(abs(float(adversarial_loss(T(real), T(fake), Side.DISCRIMINATOR)) - disc_loss_loop(real, fake)))
        errors.append(abs(float(adversarial_loss(None, T(fake), Side.GENERATOR)) - gen_loss_loop(fake)))
        a, b, c, d = (g.normal(size=(2, 2, 1)) for _ in range(4))
        e1, e2 = g.uniform(0, 10, size=2)
        cyc = float(cycle_loss(T(a), T(b), T(c), T(d), e1, e2))
        errors.append(abs(cyc - (e1 * mean_abs_loop(a, b) + e2 * mean_abs_loop(c, d))))
        idt = float(identity_loss(T(a), T(b), T(c), T(d), e1, e2))
        errors.append(abs(idt - (e1 * mean_abs_loop(a, b) + e2 * mean_abs_loop(c, d))))
        logits, labels = g.normal(size=(2, 2)) * 2, g.integers(0, 2, size=2)
        errors.append(abs(float(cross_entropy(T(logits), torch.as_tensor(labels))) - cross_entropy_loop(logits, labels)))
    oracle_ok = max(errors) <= 1e-9

    zeros = torch.zeros(2, 2, 1, dtype=torch.float64)
    zero22 = torch.zeros(2, 2, dtype=torch.float64)
    closed = {
        "ln10": (float(cross_entropy(torch.zeros(1, 10, dtype=torch.float64), torch.tensor([3]))), math.log(10)),
        "2ln2": (float(adversarial_loss(zeros, zeros, Side.DISCRIMINATOR)), 2 * math.log(2)),
        "ln2": (float(adversarial_loss(None, zeros, Side.GENERATOR)), math.log(2)),
        "5.0": (float(cycle_loss(zero22, torch.full((2, 2), 0.5, dtype=torch.float64), zero22, zero22, 10.0, 10.0)), 5.0),
        "2.0": (float(identity_loss(zero22, torch.full((2, 2), 0.2, dtype=torch.float64), zero22,
                                    torch.full((2, 2), -0.2, dtype=torch.float64), 5.0, 5.0)), 2.0),
    }
    bad = [k for k, (got, want) in closed.items() if abs(got - want) > 1e-12 * max(1.0, abs(want))]
    seconds = time.time() - t0
    report(1, "loss unit suite", oracle_ok and not bad and seconds < 10, seconds,
           f"max oracle error {max(errors):.2e}, closed-form mismatches {bad or 'none'}")


# -- 2. gradient verification -----------------------------------------------------


def _toy_bundle():
    cfg = ExperimentConfig(num_classes=3, chip_size=16).replace(**{
        "model.gen_filters": 2, "model.gen_res_blocks": 1, "model.disc_filters": 2,
        "model.disc_layers": 2, "model.clf_width": 2,
    })
    b = ModelBundle.build(cfg, seed_all(0))
    # a wider init keeps normalised activations well above the norm epsilon, so h=1e-5
    # central differences stay in the locally quadratic regime
    for i, net in enumerate(b.networks().values()):
        init_parameters(net, i, 0.3)
    b.target_clf = init_target_from_source(b.source_clf)
    for net in b.networks().values():
        net.double()
    # the two classifiers start identical; separate them so both CE terms are generic
    with torch.no_grad():
        for p in b.target_clf.parameters():
            p.add_(0.05 * torch.randn(p.shape, generator=torch.Generator().manual_seed(p.numel()), dtype=p.dtype))
    return cfg, b


def test_criterion_2_gradient_verification():
    t0 = time.time()
    cfg, b = _toy_bundle()
    g = torch.Generator().manual_seed(0)
    x = torch.rand(2, 3, 16, 16, generator=g, dtype=torch.float64) * 2 - 1
    y = torch.rand(2, 3, 16, 16, generator=g, dtype=torch.float64) * 2 - 1
    labels = torch.tensor([0, 2])
    x.requires_grad_(True)

    # batch-statistics layers are deterministic functions of the batch, so train mode is a fixed function
    def total():
        return generator_objective(b, x, y, labels, cfg.loss, 2.5)[0].total

    nets = {name: net for name, net in b.networks().items() if name != "source_clf"}
    for net in nets.values():
        net.zero_grad()
    total().backward()
    rng = np.random.default_rng(0)
    per_net, zero_abs = {}, 0.0

    def probe(tensor, grad, name, wanted=4):
        # entries whose gradient vanishes identically (biases feeding a mean-subtracting
        # norm) carry no relative information; they are held to an absolute bound instead
        nonlocal zero_abs
        found, tries = 0, 0
        while found < wanted and tries < 200:
            tries += 1
            idx = tuple(int(rng.integers(s)) for s in tensor.shape)
            analytic = grad[idx].item()
            numeric = central_difference(total, tensor, idx, 1e-5)
            if abs(analytic) < 1e-8:
                zero_abs = max(zero_abs, abs(numeric - analytic))
                continue
            per_net[name] = max(per_net.get(name, 0.0), abs(analytic - numeric) / max(abs(analytic), abs(numeric)))
            found += 1

    for name, net in nets.items():
        params = [p for p in net.parameters() if p.requires_grad]
        for _ in range(4):
            p = params[int(rng.integers(len(params)))]
            probe(p.data, p.grad, name, wanted=1)
    # the frozen source classifier is exercised through the input gradient
    probe(x.data, x.grad, "input", wanted=8)
    worst = max(per_net.values())
    seconds = time.time() - t0
    report(2, "gradient verification", worst < 1e-4 and zero_abs < 1e-6 and seconds < 120, seconds,
           "max rel err " + ", ".join(f"{k} {v:.1e}" for k, v in per_net.items())
           + f"; structurally-zero entries max abs err {zero_abs:.1e}")


# -- 3. FID oracle ------------------------------------------------------------------


def test_criterion_3_fid_oracle():
    t0 = time.time()
    g = np.random.default_rng(3)
    a = g.normal(size=(300, 5))
    identical = fid(a, a.copy()).value
    displaced, _ = frechet_distance(np.zeros(2), np.eye(2), np.array([3.0, 4.0]), np.eye(2))
    oracle_err = 0.0
    for _ in range(10):
        m1, m2 = g.normal(size=5), g.normal(size=5)
        a1, a2 = g.normal(size=(5, 5)), g.normal(size=(5, 5))
        s1, s2 = a1 @ a1.T + 0.1 * np.eye(5), a2 @ a2.T + 0.1 * np.eye(5)
        oracle_err = max(oracle_err, abs(frechet_distance(m1, s1, m2, s2)[0] - gaussian_frechet(m1, s1, m2, s2)))
        fa, fb = g.normal(m1, 1.0, size=(200, 5)), g.normal(m2, 2.0, size=(150, 5))
        moments = gaussian_frechet(fa.mean(0), np.cov(fa, rowvar=False), fb.mean(0), np.cov(fb, rowvar=False))
        oracle_err = max(oracle_err, abs(fid(fa, fb).value - moments))
    b = g.normal(1.0, 1.5, size=(250, 5))
    asym = abs(fid(a, b).value - fid(b, a).value)
    ok = abs(identical) <= 1e-6 and abs(displaced - 25.0) <= 1e-6 and oracle_err <= 1e-6 and asym <= 1e-9
    seconds = time.time() - t0
    report(3, "FID oracle", ok and seconds < 10, seconds,
           f"identical {identical:.1e}, displaced {displaced:.9f}, oracle err {oracle_err:.1e}, asymmetry {asym:.1e}")


# -- 4. frozen source and no label leak --------------------------------------------


def _smoke_setup(seed=0):
    cfg = ExperimentConfig(num_classes=3, chip_size=8, batch_size=4, seed=seed).replace(**{
        "model.gen_filters": 2, "model.gen_res_blocks": 1, "model.disc_filters": 2, "model.disc_layers": 2,
        "model.clf_width": 2, "gan.epochs": 5, "gan.pool_size": 4,
    })
    g = torch.Generator().manual_seed(seed)
    labels = torch.arange(12) % 3
    dist = torch.full((12,), 2000.0, dtype=torch.float64)
    src = ChipSet(torch.rand(12, 3, 8, 8, generator=g) * 2 - 1, labels, dist, Domain.SOURCE)
    tgt = ChipSet(torch.rand(12, 3, 8, 8, generator=g) * 2 - 1, labels.clone(), dist.clone(), Domain.TARGET)
    return cfg, src, tgt


def _trajectory(with_labels: bool):
    cfg, src, tgt = _smoke_setup()
    streams = seed_all(cfg.seed)
    bundle = ModelBundle.build(cfg, streams)
    bundle.source_clf.freeze()
    frozen = bundle.digest("source_clf")
    target_train = tgt if with_labels else tgt.without_labels()
    trainer = TransductiveTrainer(cfg, bundle, src, target_train, streams, target_eval=tgt if with_labels else None)
    digests = []
    for _ in range(cfg.gan.epochs):
        trainer.train_epoch()
        digests.append({name: bundle.digest(name) for name in bundle.networks()})
    return frozen, digests


def test_criterion_4_frozen_source_and_no_label_leak():
    t0 = time.time()
    frozen, with_labels = _trajectory(True)
    _, without = _trajectory(False)
    source_fixed = all(d["source_clf"] == frozen for d in with_labels + without)
    identical = with_labels == without
    seconds = time.time() - t0
    report(4, "frozen source and no label leak", source_fixed and identical and seconds < 300, seconds,
           f"source digest unchanged={source_fixed}, trajectories bit-identical={identical} over {len(without)} epochs")


# -- 5. schedule conformance -----------------------------------------------------------


def test_criterion_5_schedule_conformance():
    t0 = time.time()
    cfg = ExperimentConfig()
    checks = {
        "lr@50": gan_lr(cfg, 50) == 2e-4,
        "lr@51": gan_lr(cfg, 51) == 1e-4,
        "lambda@20": lambda_ce(cfg, 20) == 0.5,
        "lambda@21": lambda_ce(cfg, 21) == 2.5,
        "disc 20/100": sum(discriminator_updates(cfg, s) for s in range(100)) == 20,
    }
    # the trainer records the same values: run 100 generator steps on a tiny problem
    tiny, src, tgt = _smoke_setup()
    tiny = tiny.replace(**{"gan.epochs": 1, "batch_size": 2})
    src = ChipSet(src.images.repeat(17, 1, 1, 1)[:200], src.labels.repeat(17)[:200], src.distances.repeat(17)[:200], Domain.SOURCE)
    streams = seed_all(0)
    bundle = ModelBundle.build(tiny, streams)
    bundle.source_clf.freeze()
    record = TransductiveTrainer(tiny, bundle, src, tgt, streams).train_epoch()
    checks["trainer 100 steps"] = record["steps"] == 100 and record["disc_updates"] == 20
    seconds = time.time() - t0
    failed = [k for k, v in checks.items() if not v]
    report(5, "schedule conformance", not failed, seconds, f"failed checks {failed or 'none'}")


# -- 6 and 7. desk-scale transfer and fine-tuning -------------------------------

DESK_SEEDS = (0, 1, 2)
FRACTIONS = (0.01, 0.05, 0.10)


@pytest.fixture(scope="module")
def desk_runs():
    return {seed: run_benchmark(*desk_benchmark(seed), FRACTIONS) for seed in DESK_SEEDS}


def test_criterion_6_desk_transfer(desk_runs):
    rows, ok = [], True
    minutes = sum(r.seconds["total"] - r.seconds["finetune"] for r in desk_runs.values()) / 60
    for seed, r in desk_runs.items():
        seed_ok = (
            r.source_test_acc >= 0.95
            and r.ttl_target_acc - r.baseline_target_acc >= 0.15
            and r.ttl_target_acc - 0.10 >= 0.40
        )
        ok &= seed_ok
        rows.append(
            f"seed {seed} source {r.source_test_acc:.3f} baseline {r.baseline_target_acc:.3f} "
            f"transductive {r.ttl_target_acc:.3f} (epoch {r.best_epoch})"
        )
    ok &= minutes <= 60
    report(6, "desk-scale zero-label transfer", ok, minutes * 60, "; ".join(rows) + f"; {minutes:.1f} min")


def test_criterion_7_finetune_ordering(desk_runs):
    rows, ok = [], True
    minutes = sum(r.seconds["finetune"] for r in desk_runs.values()) / 60
    for seed, r in desk_runs.items():
        accs = [r.finetune_acc[f] for f in FRACTIONS]
        seed_ok = all(b >= a - 0.01 for a, b in zip(accs, accs[1:])) and accs[0] > r.ttl_target_acc
        ok &= seed_ok
        rows.append(f"seed {seed} zero-label {r.ttl_target_acc:.3f} -> " + "/".join(f"{a:.3f}" for a in accs))
    ok &= minutes <= 15
    report(7, "fine-tuning ordering", ok, minutes * 60, "; ".join(rows) + f"; {minutes:.1f} min")


# -- 8. data pipeline -----------------------------------------------------------


def _disk(side, diameter, distance):
    c = np.arange(side) - (side - 1) / 2
    yy, xx = np.meshgrid(c, c, indexing="ij")
    px = np.where(np.hypot(xx, yy) <= diameter / 2, 0.9, -0.9).astype(np.float32)
    return ImageChip(np.repeat(px[..., None], 3, -1), Domain.SOURCE, 0, distance)


def _diameter(px):
    mask = px[..., 0] > 0
    rows, cols = np.flatnonzero(mask.any(1)), np.flatnonzero(mask.any(0))
    return ((rows[-1] - rows[0] + 1) + (cols[-1] - cols[0] + 1)) / 2


def test_criterion_8_data_pipeline():
    t0 = time.time()
    g = np.random.default_rng(8)
    idem = True
    for d in (1000, 1500, 2500, 4000, 5000):
        px = g.uniform(-1, 1, size=(50, 50, 3)).astype(np.float32)
        once = project_to_canonical(ImageChip(px, Domain.TARGET, None, d), 2000, 68)
        idem &= np.array_equal(once.pixels, project_to_canonical(once, 2000, 68).pixels)

    worst_px = 0.0
    for d, diameter in ((1000, 40), (1500, 36), (2000, 30), (2500, 24), (3000, 20), (4000, 14), (5000, 12)):
        out = project_to_canonical(_disk(68, diameter, d), 2000, 68)
        worst_px = max(worst_px, abs(_diameter(out.pixels) - diameter * d / 2000))

    partition = True
    for _ in range(100):
        counts = g.integers(3, 40, size=int(g.integers(1, 11)))
        recs = [ChipRecord(f"{c}/{i}", int(c), Domain.SOURCE, 2000.0) for c, n in enumerate(counts) for i in range(n)]
        s = split_dataset(recs, int(g.integers(2**31)))
        parts = [set(s.train), set(s.val), set(s.test)]
        disjoint = not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
        covers = parts[0] | parts[1] | parts[2] == set(recs) and sum(map(len, parts)) == len(recs)
        partition &= disjoint and covers

    row_err = 0.0
    for _ in range(100):
        k = int(g.integers(2, 12))
        cm = confusion_from_predictions(g.integers(0, k, 300), g.integers(0, k, 300), k)
        sums = cm.normalized.sum(1)[~cm.empty_rows]
        row_err = max(row_err, float(np.abs(sums - 1).max()))
    seconds = time.time() - t0
    ok = idem and worst_px <= 2.0 and partition and row_err <= 1e-9
    report(8, "data pipeline", ok and seconds < 30, seconds,
           f"idempotent={idem}, disk diameter max dev {worst_px:.2f}px, partition={partition}, row-sum err {row_err:.1e}")
