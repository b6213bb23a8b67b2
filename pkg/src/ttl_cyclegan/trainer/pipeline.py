"""End-to-end desk benchmark: data, source pretraining, transductive training, fine-tuning."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..core import ExperimentConfig, seed_all
from ..datasets import SyntheticSpec, load_chipset, make_synthetic_domains, split_dataset
from ..metrics import evaluate_classifier
from ..models import ModelBundle
from .phases import TransductiveTrainer, finetune_target, pretrain_source_classifier

log = logging.getLogger(__name__)


@dataclass
class BenchmarkResult:
    seed: int
    source_test_acc: float
    baseline_target_acc: float
    ttl_target_acc: float
    best_epoch: int
    finetune_acc: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    seconds: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "source_test_acc": self.source_test_acc,
            "baseline_target_acc": self.baseline_target_acc,
            "ttl_target_acc": self.ttl_target_acc,
            "best_epoch": self.best_epoch,
            "finetune_acc": {f"{k:g}": v for k, v in self.finetune_acc.items()},
            "seconds": self.seconds,
        }


def build_splits(config: ExperimentConfig, spec: SyntheticSpec):
    """Render both domains and return projected (train, val, test) chip sets per domain."""
    src, tgt = make_synthetic_domains(spec)
    out = []
    for offset, records in enumerate((src, tgt)):
        parts = split_dataset(records, config.seed + offset, config.num_classes)
        out.append(tuple(
            load_chipset(getattr(parts, name), config.chip_size, config.canonical_distance_m)
            for name in ("train", "val", "test")
        ))
    return out[0], out[1]


def run_benchmark(
    config: ExperimentConfig,
    spec: SyntheticSpec,
    fractions: Sequence[float] = (),
    *,
    on_epoch: Optional[Callable[[dict], None]] = None,
    bundle_hook: Optional[Callable[[ModelBundle, int], None]] = None,
) -> BenchmarkResult:
    """Run every phase for ``config.seed``. Target labels are used only for reporting."""
    t0 = time.time()
    streams = seed_all(config.seed)
    (s_tr, s_va, s_te), (t_tr, _t_va, t_te) = build_splits(config, spec)
    t_data = time.time()

    clf = pretrain_source_classifier(config, s_tr, s_va, streams, on_epoch=on_epoch)
    source_acc = evaluate_classifier(clf, s_te)[0]
    baseline = evaluate_classifier(clf, t_te)[0]
    t_pre = time.time()
    log.info("seed %d: source test %.4f, direct transfer %.4f", config.seed, source_acc, baseline)

    bundle = ModelBundle.build(config, streams)
    bundle.source_clf = clf

    def epoch_hook(record):
        if on_epoch:
            on_epoch(record)
        if bundle_hook:
            bundle_hook(bundle, record["epoch"])

    trainer = TransductiveTrainer(config, bundle, s_tr, t_tr.without_labels(), streams, on_epoch=epoch_hook)
    history = trainer.run()
    best = trainer.select_best()
    ttl_acc = evaluate_classifier(bundle.target_clf, t_te)[0]
    t_ttl = time.time()
    log.info("seed %d: transductive target %.4f (epoch %d)", config.seed, ttl_acc, best)

    tuned = {}
    for fraction in fractions:
        ft = finetune_target(config, bundle.target_clf, t_tr, fraction, streams, on_epoch=on_epoch)
        tuned[fraction] = evaluate_classifier(ft, t_te)[0]
        log.info("seed %d: fine-tuned %.2f -> %.4f", config.seed, fraction, tuned[fraction])
    t_end = time.time()
    return BenchmarkResult(
        config.seed, source_acc, baseline, ttl_acc, best, tuned, history,
        {"data": t_data - t0, "pretrain": t_pre - t_data, "transductive": t_ttl - t_pre,
         "finetune": t_end - t_ttl, "total": t_end - t0},
    )
