from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import torch

from ..core.checkpoint import read_checkpoint, save_checkpoint
from ..core.config import ExperimentConfig
from ..core.rng import RngStreams
from ..datasets.loader import ChipSet, iterate_batches
from ..errors import DataEmpty, Diverged, FractionOutOfRange, FrozenViolation, LabelLeak
from ..losses import cross_entropy
from ..metrics.classification import evaluate_classifier
from ..models.bundle import ModelBundle, build_classifier, init_parameters, init_target_from_source
from ..models.classifier import ResNet18
from .objective import discriminator_objective, generator_objective
from .optim import Adam
from .pool import ImagePool
from .schedule import discriminator_updates, gan_lr, lambda_ce

log = logging.getLogger(__name__)

EpochHook = Callable[[dict], None]


def _check_finite(value: torch.Tensor, what: str):
    if not math.isfinite(float(value.detach())):
        raise Diverged(f"{what} became non-finite")


def _train_classifier_epoch(clf, opt, data: ChipSet, batch_size, seed, epoch, max_batches=None) -> float:
    clf.train()
    losses = []
    for i, batch in enumerate(iterate_batches(data, batch_size, seed, epoch)):
        if max_batches is not None and i >= max_batches:
            break
        opt.zero_grad()
        loss = cross_entropy(clf(batch.images), batch.labels)
        _check_finite(loss, "classifier loss")
        loss.backward()
        opt.step()
        losses.append(float(loss.detach()))
    return float(np.mean(losses)) if losses else float("nan")


def pretrain_source_classifier(
    config: ExperimentConfig,
    train: ChipSet,
    val: ChipSet,
    streams: RngStreams,
    *,
    epochs: Optional[int] = None,
    max_batches: Optional[int] = None,
    on_epoch: Optional[EpochHook] = None,
) -> ResNet18:
    """Supervised training on labelled source chips; returns the best-validation model, frozen."""
    if len(train) == 0 or train.labels is None:
        raise DataEmpty("source training set is empty or unlabelled")
    cc = config.classifier
    clf = build_classifier(config)
    init_parameters(clf, streams.torch("init", 4), config.model.init_std)
    opt = Adam(clf.parameters(), cc.lr, (cc.beta1, cc.beta2))
    shuffle_seed = streams.int_seed("batches-pretrain")
    best_acc, best_state = -1.0, copy.deepcopy(clf.state_dict())
    n_epochs = cc.pretrain_epochs if epochs is None else epochs
    for epoch in range(1, n_epochs + 1):
        loss = _train_classifier_epoch(clf, opt, train, config.batch_size, shuffle_seed, epoch, max_batches)
        acc = evaluate_classifier(clf, val)[0] if len(val) and val.labels is not None else float("nan")
        if acc > best_acc or best_acc < 0:
            best_acc, best_state = acc, copy.deepcopy(clf.state_dict())
        record = {"phase": "pretrain", "epoch": epoch, "loss": loss, "val_acc": acc, "lr": cc.lr}
        log.info("pretrain epoch %d loss %.4f val_acc %.4f", epoch, loss, acc)
        if on_epoch:
            on_epoch(record)
    clf.load_state_dict(best_state)
    return clf.freeze()


@dataclass
class TrainState:
    epoch: int = 0
    global_step: int = 0
    disc_updates: int = 0
    best_metric: float = float("inf")
    best_epoch: int = 0
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "global_step": self.global_step,
            "disc_updates": self.disc_updates,
            "best_metric": self.best_metric,
            "best_epoch": self.best_epoch,
        }


class TransductiveTrainer:
    """Joint training of G, F, D_x, D_y and the target classifier against a frozen source classifier.

    Every generator step updates G, F and the target classifier from one
    backward pass of the transductive total; every ``disc_update_period``-th
    step also updates both discriminators. Target chips enter only as
    unlabelled images. ``target_eval`` (optionally labelled) is used solely
    for the per-epoch report.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        bundle: ModelBundle,
        source_train: ChipSet,
        target_train: ChipSet,
        streams: RngStreams,
        *,
        target_eval: Optional[ChipSet] = None,
        max_batches: Optional[int] = None,
        on_epoch: Optional[EpochHook] = None,
        fresh: bool = True,
    ):
        if source_train.labels is None or len(source_train) == 0:
            raise DataEmpty("transductive training needs labelled source chips")
        if len(target_train) == 0:
            raise DataEmpty("transductive training needs target chips")
        self.config = config
        self.bundle = bundle
        self.source_train = source_train
        self.target_train = target_train.without_labels()
        self.target_eval = target_eval
        self.streams = streams
        self.max_batches = max_batches
        self.on_epoch = on_epoch
        if fresh:
            bundle.target_clf = init_target_from_source(bundle.source_clf)
        else:
            bundle.source_clf.freeze()
        self.source_digest = bundle.digest("source_clf")

        g, c = config.gan, config.classifier
        self.gen_opt = Adam(list(bundle.G.parameters()) + list(bundle.F.parameters()), g.lr, (g.beta1, g.beta2))
        self.clf_opt = Adam(bundle.target_clf.parameters(), c.lr, (c.beta1, c.beta2))
        self.disc_opt = Adam(list(bundle.D_x.parameters()) + list(bundle.D_y.parameters()), g.lr, (g.beta1, g.beta2))
        self.pool_x = ImagePool(g.pool_size, streams.numpy("pool", 0))
        self.pool_y = ImagePool(g.pool_size, streams.numpy("pool", 1))
        self.state = TrainState()
        self.best_states: Optional[dict] = None

    # -- persistence -------------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "train": self.state.as_dict(),
            "history": list(self.state.history),
            "gen_opt": self.gen_opt.state_dict(),
            "clf_opt": self.clf_opt.state_dict(),
            "disc_opt": self.disc_opt.state_dict(),
            "pool_x": self.pool_x.state_dict(),
            "pool_y": self.pool_y.state_dict(),
            "best_states": self.best_states,
            "source_digest": self.source_digest,
        }

    def load_state_dict(self, sd: dict):
        self.state = TrainState(**sd["train"], history=list(sd.get("history", [])))
        self.gen_opt.load_state_dict(sd["gen_opt"])
        self.clf_opt.load_state_dict(sd["clf_opt"])
        self.disc_opt.load_state_dict(sd["disc_opt"])
        self.pool_x.load_state_dict(sd["pool_x"])
        self.pool_y.load_state_dict(sd["pool_y"])
        self.best_states = sd.get("best_states")
        if sd.get("source_digest") != self.source_digest:
            raise FrozenViolation("source classifier differs from the one training started with")

    def save(self, path):
        save_checkpoint(self.bundle, {"trainer": self.state_dict(), "config": self.config.to_dict()}, path)

    @classmethod
    def resume(cls, path, config: ExperimentConfig, source_train, target_train, streams, **kwargs) -> "TransductiveTrainer":
        models, state = read_checkpoint(path, expected_num_classes=config.num_classes)
        bundle = ModelBundle.build(config, streams).load_state_dicts(models)
        trainer = cls(config, bundle, source_train, target_train, streams, fresh=False, **kwargs)
        trainer.load_state_dict(state["trainer"])
        return trainer

    # -- training ----------------------------------------------------------
    def _set_disc_grad(self, flag: bool):
        for net in (self.bundle.D_x, self.bundle.D_y):
            for p in net.parameters():
                p.requires_grad_(flag)

    def selection_metric(self, means: dict) -> float:
        """Epoch-mean total re-weighted with the final lambda_CE, so epochs on either
        side of the lambda switch are comparable."""
        lam = lambda_ce(self.config, max(self.config.gan.epochs, 1))
        return means["cyclegan"] + lam * (means["ce_source"] + means["ce_target"])

    def train_epoch(self) -> dict:
        cfg, b = self.config, self.bundle
        epoch = self.state.epoch + 1
        lr = gan_lr(cfg, epoch)
        lam = lambda_ce(cfg, epoch)
        self.gen_opt.lr = lr
        self.disc_opt.lr = lr
        mode = cfg.gan.adversarial
        for net in (b.G, b.F, b.D_x, b.D_y, b.target_clf):
            net.train()
        b.source_clf.eval()

        src_seed = self.streams.int_seed("batches-source")
        tgt_seed = self.streams.int_seed("batches-target")
        sums: dict[str, float] = {}
        n_steps = 0
        disc_sums = {"adv_Dx": 0.0, "adv_Dy": 0.0}
        n_disc = 0
        target_iter = iterate_batches(self.target_train, cfg.batch_size, tgt_seed, epoch)
        for i, src in enumerate(iterate_batches(self.source_train, cfg.batch_size, src_seed, epoch)):
            if self.max_batches is not None and i >= self.max_batches:
                break
            tgt = next(target_iter, None)
            if tgt is None:
                target_iter = iterate_batches(self.target_train, cfg.batch_size, tgt_seed, epoch + 100_000 * (i + 1))
                tgt = next(target_iter)
            if tgt.labels is not None:
                raise LabelLeak("target labels reached the training loop")
            x, y = src.images, tgt.images

            self._set_disc_grad(False)
            breakdown, tr = generator_objective(b, x, y, src.labels, cfg.loss, lam, mode)
            _check_finite(breakdown.total, "transductive total")
            self.gen_opt.zero_grad()
            self.clf_opt.zero_grad()
            breakdown.total.backward()
            self.gen_opt.step(cfg.gan.grad_clip)
            self.clf_opt.step(cfg.gan.grad_clip)
            self._set_disc_grad(True)

            if discriminator_updates(cfg, self.state.global_step):
                fake_x = self.pool_x.query(tr.fake_x)
                fake_y = self.pool_y.query(tr.fake_y)
                loss_dx, loss_dy = discriminator_objective(b, x, y, fake_x, fake_y, mode)
                _check_finite(loss_dx + loss_dy, "discriminator loss")
                self.disc_opt.zero_grad()
                (loss_dx + loss_dy).backward()
                self.disc_opt.step(cfg.gan.grad_clip)
                self.state.disc_updates += 1
                disc_sums["adv_Dx"] += float(loss_dx.detach())
                disc_sums["adv_Dy"] += float(loss_dy.detach())
                n_disc += 1

            for k, v in breakdown.as_floats().items():
                sums[k] = sums.get(k, 0.0) + v
            n_steps += 1
            self.state.global_step += 1

        if b.digest("source_clf") != self.source_digest:
            raise FrozenViolation(f"source classifier parameters changed during epoch {epoch}")

        means = {k: v / max(n_steps, 1) for k, v in sums.items()}
        means["lambda_ce"] = lam
        if n_disc:
            means.update({k: v / n_disc for k, v in disc_sums.items()})
        record = {
            "phase": "transductive",
            "epoch": epoch,
            "gan_lr": lr,
            "lambda_ce": lam,
            "steps": n_steps,
            "global_step": self.state.global_step,
            "disc_updates": self.state.disc_updates,
            "losses": means,
            "selection_metric": self.selection_metric(means),
        }
        if self.target_eval is not None and self.target_eval.labels is not None:
            record["target_acc"] = evaluate_classifier(b.target_clf, self.target_eval)[0]

        self.state.epoch = epoch
        if record["selection_metric"] < self.state.best_metric:
            self.state.best_metric = record["selection_metric"]
            self.state.best_epoch = epoch
            self.best_states = {
                name: copy.deepcopy(getattr(b, name).state_dict()) for name in ("G", "F", "target_clf")
            }
        self.state.history.append(record)
        log.info(
            "ttl epoch %d lr %.2g lambda_ce %.2g total %.4f cycle %.4f%s",
            epoch, lr, lam, means.get("total", float("nan")), means.get("cycle", float("nan")),
            f" target_acc {record['target_acc']:.4f}" if "target_acc" in record else "",
        )
        if self.on_epoch:
            self.on_epoch(record)
        return record

    def run(self, until_epoch: Optional[int] = None) -> list[dict]:
        stop = self.config.gan.epochs if until_epoch is None else min(until_epoch, self.config.gan.epochs)
        out = []
        while self.state.epoch < stop:
            out.append(self.train_epoch())
        return out

    def select_best(self) -> int:
        """Load the minimum-selection-metric epoch's G, F and target classifier; return that epoch."""
        if self.best_states is not None:
            for name, sd in self.best_states.items():
                getattr(self.bundle, name).load_state_dict(sd)
        return self.state.best_epoch


def train_transductive(
    config: ExperimentConfig,
    bundle: ModelBundle,
    source_train: ChipSet,
    target_train: ChipSet,
    streams: RngStreams,
    **kwargs,
) -> tuple[ModelBundle, list[dict]]:
    trainer = TransductiveTrainer(config, bundle, source_train, target_train, streams, **kwargs)
    history = trainer.run()
    trainer.select_best()
    return bundle, history


def stratified_fraction(data: ChipSet, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Indices of a per-class ``fraction`` subsample (at least one chip per present class).

    Each class is ordered by one permutation of ``rng`` and the first chips are
    kept, so for equally seeded generators a smaller fraction is a subset of a
    larger one.
    """
    labels = data.labels.numpy()
    picked = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        k = min(len(idx), max(1, int(round(fraction * len(idx)))))
        picked.append(rng.permutation(idx)[:k])
    return np.sort(np.concatenate(picked))


def finetune_target(
    config: ExperimentConfig,
    target_clf: ResNet18,
    target_train: ChipSet,
    fraction: float,
    streams: RngStreams,
    *,
    epochs: Optional[int] = None,
    max_batches: Optional[int] = None,
    on_epoch: Optional[EpochHook] = None,
) -> ResNet18:
    """Supervised fine-tuning of a copy of ``target_clf`` on a labelled ``fraction`` of target chips."""
    if not (isinstance(fraction, (int, float)) and 0.0 < fraction <= 1.0):
        raise FractionOutOfRange(f"fraction must lie in (0, 1], got {fraction}")
    if target_train.labels is None or len(target_train) == 0:
        raise DataEmpty("fine-tuning needs labelled target chips")
    cc = config.classifier
    clf = copy.deepcopy(target_clf)
    clf.trainable = True
    for p in clf.parameters():
        p.requires_grad_(True)
    key = int(round(fraction * 1_000_000))
    subset = target_train.subset(stratified_fraction(target_train, fraction, streams.numpy("finetune-subset")))
    opt = Adam(clf.parameters(), cc.finetune_lr, (cc.beta1, cc.beta2))
    seed = streams.int_seed("batches-finetune", key)
    n_epochs = cc.finetune_epochs if epochs is None else epochs
    for epoch in range(1, n_epochs + 1):
        loss = _train_classifier_epoch(clf, opt, subset, config.batch_size, seed, epoch, max_batches)
        if on_epoch:
            on_epoch({"phase": "finetune", "epoch": epoch, "fraction": fraction, "loss": loss, "labelled": len(subset)})
    clf.eval()
    return clf
