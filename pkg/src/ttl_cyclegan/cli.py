"""Command-line entry point: ``ttl-cyclegan <command> [flags]``.

Every training or evaluation command creates a timestamped run directory
holding ``manifest.json``, ``metrics.jsonl``, ``summary.csv``,
``summary.json`` and ``architecture.txt`` next to its artifacts.

Exit codes: 0 ok, 1 other failure, 2 invalid flags/config/spec,
3 IO failure, 4 missing or unreadable checkpoint, 5 training diverged.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from . import __version__
from .configs import PRESETS, preset_path
from .core import ExperimentConfig, load_config, seed_all
from .core.checkpoint import read_checkpoint, save_checkpoint
from .core.config import from_dict
from .datasets import SyntheticSpec, load_chipset, load_spec, make_synthetic_domains, read_manifest, split_dataset, write_dataset
from .datasets.loader import ChipSet
from .errors import (
    CorruptCheckpoint,
    Diverged,
    FractionOutOfRange,
    InvalidSpec,
    InvalidValue,
    IOFailure,
    MalformedConfig,
    MissingCheckpoint,
    NonFiniteGradient,
    NonFiniteInput,
    TTLError,
    UnknownExtractor,
    VersionMismatch,
)
from .metrics import (
    JsonlWriter,
    accuracy_by_distance,
    classifier_penultimate,
    evaluate_classifier,
    extract_features,
    fid,
    image_grid,
    write_confusion_csv,
    write_confusion_png,
    write_distance_csv,
    write_summary_csv,
)
from .models import ModelBundle, bundle_summary
from .trainer import TransductiveTrainer, finetune_target, pretrain_source_classifier

log = logging.getLogger("ttl_cyclegan")

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_IO, EXIT_CHECKPOINT, EXIT_DIVERGED = 0, 1, 2, 3, 4, 5


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (NonFiniteGradient, NonFiniteInput, Diverged)):
        return EXIT_DIVERGED
    if isinstance(exc, (MissingCheckpoint, CorruptCheckpoint, VersionMismatch)):
        return EXIT_CHECKPOINT
    if isinstance(exc, IOFailure):
        return EXIT_IO
    if isinstance(exc, (MalformedConfig, InvalidValue, InvalidSpec, FractionOutOfRange, UnknownExtractor)):
        return EXIT_INVALID
    return EXIT_FAIL


# -- run bookkeeping -----------------------------------------------------------


def code_digest() -> str:
    """SHA-256 over the package's source files, in path order."""
    root = Path(__file__).resolve().parent
    h = hashlib.sha256()
    for p in sorted(root.rglob("*.py")):
        h.update(str(p.relative_to(root)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass
class RunManifest:
    command: str
    argv: list
    config: dict
    seed: int
    overrides: dict
    started: str = field(default_factory=_now)
    finished: Optional[str] = None
    code_digest: str = field(default_factory=code_digest)
    version: str = __version__
    artifacts: dict = field(default_factory=dict)

    def write(self, run_dir: Path):
        (run_dir / "manifest.json").write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Run:
    """A run directory plus its manifest, metrics stream and summary."""

    def __init__(self, root: Path, command: str, config: ExperimentConfig, args, overrides: dict):
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        base = f"{stamp}-{command}-seed{config.seed}"
        self.dir = Path(root) / base
        n = 1
        while self.dir.exists():
            n += 1
            self.dir = Path(root) / f"{base}-{n}"
        try:
            self.dir.mkdir(parents=True)
        except OSError as exc:
            raise IOFailure(f"cannot create run directory {self.dir}: {exc}") from exc
        self.manifest = RunManifest(command, list(args.argv), config.to_dict(), config.seed, overrides)
        self.manifest.write(self.dir)
        self.metrics = JsonlWriter(self.dir / "metrics.jsonl")
        self.summary: dict = {}

    def path(self, name: str, kind: Optional[str] = None) -> Path:
        p = self.dir / name
        self.manifest.artifacts[kind or name] = str(p)
        return p

    def finish(self):
        write_summary_csv(self.summary, self.path("summary.csv"))
        self.path("summary.json").write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.manifest.finished = _now()
        self.manifest.write(self.dir)
        print(f"run directory: {self.dir}")


# -- configuration -------------------------------------------------------------


def parse_overrides(pairs: Sequence[str]) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        if not sep or not key.strip():
            raise InvalidValue(f"--set expects KEY=VALUE, got {pair!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out[key.strip()] = value
    return out


SMOKE_OVERRIDES = {
    "classifier.pretrain_epochs": 1,
    "classifier.finetune_epochs": 1,
    "gan.epochs": 2,
    "gan.lr_decay_epoch": 1,
    "gan.lambda_ce_switch_epoch": 1,
    "batch_size": 4,
}
SMOKE_MAX_BATCHES = 2


def resolve_config(args, checkpoint_config: Optional[dict] = None) -> tuple[ExperimentConfig, dict]:
    """Defaults < checkpoint's recorded config < --config file < flags."""
    if args.config:
        config = load_config(_preset_or_path(args.config))
    elif checkpoint_config is not None:
        config = from_dict(checkpoint_config)
    else:
        config = ExperimentConfig()
    overrides = parse_overrides(args.set)
    if args.smoke:
        overrides = {**SMOKE_OVERRIDES, **overrides}
    if args.seed is not None:
        overrides["seed"] = args.seed
    return config.replace(**overrides), overrides


def load_checkpoint_file(path: Optional[str], num_classes: Optional[int] = None):
    if not path:
        raise MissingCheckpoint("this command needs --checkpoint")
    if not Path(path).is_file():
        raise MissingCheckpoint(f"checkpoint {path} does not exist")
    return read_checkpoint(path, num_classes)


def bundle_from_checkpoint(config: ExperimentConfig, models: dict, streams) -> ModelBundle:
    bundle = ModelBundle.build(config, streams)
    try:
        return bundle.load_state_dicts(models)
    except RuntimeError as exc:
        raise VersionMismatch(f"checkpoint does not match the configured architecture: {exc}") from exc


# -- data ----------------------------------------------------------------------


@dataclass
class Splits:
    source: dict
    target: dict


def load_splits(data_dir: Optional[str], config: ExperimentConfig) -> Splits:
    """Read ``<data>/manifest.csv`` and split each domain 70/15/15 by seed."""
    if not data_dir:
        raise InvalidValue("this command needs --data")
    records = read_manifest(Path(data_dir) / "manifest.csv")
    out = {}
    for offset, domain in enumerate(("source", "target")):
        recs = [r for r in records if r.domain.value == domain]
        parts = split_dataset(recs, config.seed + offset, config.num_classes)
        out[domain] = {
            name: load_chipset(getattr(parts, name), config.chip_size, config.canonical_distance_m)
            for name in ("train", "val", "test")
        }
    return Splits(out["source"], out["target"])


def sextuplet_grid(bundle: ModelBundle, x: torch.Tensor, y: torch.Tensor) -> np.ndarray:
    """Rows of (x, G(x), F(G(x)), y, F(y), G(F(y)))."""
    with torch.no_grad():
        G, F = bundle.G.eval(), bundle.F.eval()
        gx = G(x)
        fy = F(y)
        cols = [x, gx, F(gx), y, fy, G(fy)]
    n = min(len(x), len(y))
    rows = [np.stack([c[i].permute(1, 2, 0).numpy() for c in cols]) for i in range(n)]
    return image_grid(rows)


def save_grid(grid: np.ndarray, path: Path):
    from PIL import Image

    u8 = ((np.clip(grid, -1, 1) + 1) * 127.5).round().astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path, format="PNG")


def _preset_or_path(value: str):
    return preset_path(value) if value in PRESETS else value


# -- commands ------------------------------------------------------------------


def cmd_make_data(args) -> int:
    spec = load_spec(_preset_or_path(args.spec)) if args.spec else SyntheticSpec()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    spec.validate()
    out = Path(args.out)
    src, tgt = make_synthetic_domains(spec)
    written = write_dataset(src + tgt, out)
    try:
        import tomli_w

        spec_dict = {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(spec).items()}
        (out / "spec.toml").write_text(tomli_w.dumps({"synthetic": spec_dict}), encoding="utf-8")
        digest = hashlib.sha256((out / "manifest.csv").read_bytes()).hexdigest()
        info = {"command": "make-data", "argv": list(args.argv), "spec": spec_dict, "images": len(written),
                "manifest_sha256": digest, "code_digest": code_digest(), "version": __version__}
        (out / "manifest.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write to {out}: {exc}") from exc
    print(f"wrote {len(written)} chips to {out} (manifest sha256 {digest[:12]})")
    return EXIT_OK


def _max_batches(args) -> Optional[int]:
    return SMOKE_MAX_BATCHES if args.smoke else args.max_batches


def cmd_pretrain_source(args) -> int:
    config, overrides = resolve_config(args)
    streams = seed_all(config.seed)
    splits = load_splits(args.data, config)
    run = Run(args.out or config.paths.reports, "pretrain-source", config, args, overrides)
    clf = pretrain_source_classifier(
        config, splits.source["train"], splits.source["val"], streams,
        max_batches=_max_batches(args), on_epoch=run.metrics.write,
    )
    bundle = ModelBundle.build(config, streams)
    bundle.source_clf = clf
    bundle.target_clf.load_state_dict(clf.state_dict())
    run.path("architecture.txt").write_text(bundle_summary(bundle, config.chip_size), encoding="utf-8")
    save_checkpoint(bundle, {"stage": "pretrain-source", "config": config.to_dict()}, run.path("source.ckpt", "checkpoint"))
    acc, cm = evaluate_classifier(clf, splits.source["test"])
    base, base_cm = evaluate_classifier(clf, splits.target["test"])
    write_confusion_csv(cm, run.path("confusion_source_test.csv"))
    write_confusion_csv(base_cm, run.path("confusion_target_test_direct.csv"))
    run.summary.update({"source_test_acc": acc, "target_test_acc_direct": base})
    print(f"source test accuracy {acc:.4f}; direct transfer to target {base:.4f}")
    run.finish()
    return EXIT_OK


def cmd_train_ttl(args) -> int:
    models, state = load_checkpoint_file(args.checkpoint)
    config, overrides = resolve_config(args, state.get("config"))
    streams = seed_all(config.seed)
    splits = load_splits(args.data, config)
    run = Run(args.out or config.paths.reports, "train-ttl", config, args, overrides)
    probe_x = splits.source["test"].images[:6]
    probe_y = splits.target["test"].images[:6]

    def on_epoch(record):
        run.metrics.write(record)
        save_grid(sextuplet_grid(trainer.bundle, probe_x, probe_y), run.path(f"grid_epoch{record['epoch']:03d}.png"))
        trainer.bundle.G.train()
        trainer.bundle.F.train()

    kwargs = dict(target_eval=None, max_batches=_max_batches(args), on_epoch=on_epoch)
    if "trainer" in state:
        bundle = bundle_from_checkpoint(config, models, streams)
        trainer = TransductiveTrainer(config, bundle, splits.source["train"], splits.target["train"], streams, fresh=False, **kwargs)
        trainer.load_state_dict(state["trainer"])
        log.info("resuming after epoch %d", trainer.state.epoch)
    else:
        if "source_clf" not in models:
            raise CorruptCheckpoint("checkpoint holds no source classifier")
        bundle = ModelBundle.build(config, streams)
        bundle.source_clf.load_state_dict(models["source_clf"])
        bundle.source_clf.freeze()
        trainer = TransductiveTrainer(config, bundle, splits.source["train"], splits.target["train"], streams, **kwargs)
    run.path("architecture.txt").write_text(bundle_summary(trainer.bundle, config.chip_size), encoding="utf-8")
    trainer.run()
    trainer.save(run.path("ttl_last.ckpt", "resume_checkpoint"))
    best = trainer.select_best()
    save_checkpoint(trainer.bundle, {"stage": "train-ttl", "best_epoch": best, "config": config.to_dict()},
                    run.path("ttl.ckpt", "checkpoint"))
    run.summary.update({"epochs": trainer.state.epoch, "best_epoch": best, "global_step": trainer.state.global_step,
                        "disc_updates": trainer.state.disc_updates})
    print(f"transductive training done; selected epoch {best}")
    run.finish()
    return EXIT_OK


def cmd_finetune(args) -> int:
    models, state = load_checkpoint_file(args.checkpoint)
    config, overrides = resolve_config(args, state.get("config"))
    streams = seed_all(config.seed)
    splits = load_splits(args.data, config)
    bundle = bundle_from_checkpoint(config, models, streams)
    run = Run(args.out or config.paths.reports, "finetune", config, args, overrides)
    run.path("architecture.txt").write_text(bundle_summary(bundle, config.chip_size), encoding="utf-8")
    fraction = args.fraction

    def on_epoch(record):
        run.metrics.write(record)

    tuned = finetune_target(config, bundle.target_clf, splits.target["train"], fraction, streams,
                            max_batches=_max_batches(args), on_epoch=on_epoch)
    acc_before = evaluate_classifier(bundle.target_clf, splits.target["test"])[0]
    acc, cm = evaluate_classifier(tuned, splits.target["test"])
    bundle.target_clf = tuned
    save_checkpoint(bundle, {"stage": "finetune", "fraction": fraction, "config": config.to_dict()},
                    run.path("finetuned.ckpt", "checkpoint"))
    write_confusion_csv(cm, run.path("confusion_target_test.csv"))
    write_confusion_png(cm, run.path("confusion_target_test.png"), f"fine-tuned, fraction={fraction:g}")
    run.summary.update({"fraction": fraction, "target_test_acc": acc, "target_test_acc_before": acc_before})
    print(f"fraction={fraction:g} target test accuracy {acc:.4f} (before {acc_before:.4f})")
    run.finish()
    return EXIT_OK


def cmd_eval(args) -> int:
    models, state = load_checkpoint_file(args.checkpoint)
    config, overrides = resolve_config(args, state.get("config"))
    streams = seed_all(config.seed)
    splits = load_splits(args.data, config)
    bundle = bundle_from_checkpoint(config, models, streams)
    network = args.network or ("source_clf" if state.get("stage") == "pretrain-source" else "target_clf")
    data: ChipSet = getattr(splits, args.domain)[args.split]
    clf = getattr(bundle, network)
    run = Run(args.out or config.paths.reports, "eval", config, args, overrides)
    run.path("architecture.txt").write_text(bundle_summary(bundle, config.chip_size), encoding="utf-8")
    acc, cm = evaluate_classifier(clf, data)
    tag = f"{network}_{args.domain}_{args.split}"
    write_confusion_csv(cm, run.path(f"confusion_{tag}.csv"))
    write_confusion_png(cm, run.path(f"confusion_{tag}.png"), tag)
    rows = accuracy_by_distance(clf, data)
    write_distance_csv(rows, run.path(f"distance_{tag}.csv"))
    for r in rows:
        run.metrics.write({"distance_m": r.distance_m, "accuracy": r.accuracy, "samples": r.samples})
    run.summary.update({"network": network, "domain": args.domain, "split": args.split, "accuracy": acc,
                        "samples": int(cm.counts.sum())})
    print(f"accuracy {acc:.4f} ({network} on {args.domain}/{args.split}, {int(cm.counts.sum())} chips)")
    run.finish()
    return EXIT_OK


def cmd_generate(args) -> int:
    models, state = load_checkpoint_file(args.checkpoint)
    config, overrides = resolve_config(args, state.get("config"))
    streams = seed_all(config.seed)
    splits = load_splits(args.data, config)
    bundle = bundle_from_checkpoint(config, models, streams)
    run = Run(args.out or config.paths.reports, "generate", config, args, overrides)
    run.path("architecture.txt").write_text(bundle_summary(bundle, config.chip_size), encoding="utf-8")
    x_all, y_all = splits.source["test"].images, splits.target["test"].images
    n = args.count
    for start in range(0, min(len(x_all), len(y_all)), n):
        grid = sextuplet_grid(bundle, x_all[start : start + n], y_all[start : start + n])
        save_grid(grid, run.path(f"sextuplets_{start // n:03d}.png"))
        if start // n + 1 >= args.pages:
            break
    with torch.no_grad():
        fake_y = torch.cat([bundle.G.eval()(x_all[i : i + 64]) for i in range(0, len(x_all), 64)])
    extractor = classifier_penultimate(bundle.source_clf)
    result = fid(extract_features(extractor, fake_y), extract_features(extractor, y_all))
    run.metrics.write({"fid": result.value, "dim": result.dim, "n_fake": result.n_a, "n_real": result.n_b})
    run.summary.update({"fid_G_x_vs_target": result.value, "fid_dim": result.dim, "fid_extractor": "classifier-penultimate"})
    print(f"FID(G(x), y) = {result.value:.4f} (classifier-penultimate, dim {result.dim})")
    run.finish()
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction must lie in (0, 1], got {value}")
    return value


class _Parser(argparse.ArgumentParser):
    """Reports flag errors as one tagged stderr line and exit code 2."""

    def error(self, message):
        self.exit(EXIT_INVALID, f"error: INVALID_FLAGS: {' '.join(message.split())}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttl-cyclegan", description="Transductive CycleGAN transfer learning.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="render the synthetic two-domain benchmark")
    p.add_argument("--spec", help="TOML file with a [synthetic] table, or a bundled preset name (desk_synthetic)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_make_data)

    def common(p, checkpoint_required=False):
        p.add_argument("--config", help="experiment TOML file, or a bundled preset name (desk)")
        p.add_argument("--data", required=True, help="dataset directory containing manifest.csv")
        p.add_argument("--checkpoint", help="input checkpoint")
        p.add_argument("--out", help="root under which the run directory is created")
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted config override")
        p.add_argument("--smoke", action="store_true", help="tiny epochs and batches for CI")
        p.add_argument("--max-batches", type=int, help="cap batches per epoch")

    p = sub.add_parser("pretrain-source", help="train the source classifier")
    common(p)
    p.set_defaults(func=cmd_pretrain_source)

    p = sub.add_parser("train-ttl", help="transductive CycleGAN training from a source checkpoint")
    common(p)
    p.set_defaults(func=cmd_train_ttl)

    p = sub.add_parser("finetune", help="fine-tune the target classifier on a labelled fraction")
    common(p)
    p.add_argument("--fraction", type=_fraction, required=True)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="accuracy, confusion matrix and per-distance table")
    common(p)
    p.add_argument("--network", choices=("source_clf", "target_clf"))
    p.add_argument("--domain", choices=("source", "target"), default="target")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate", help="translation grids and FID of G(x) against target chips")
    common(p)
    p.add_argument("--count", type=int, default=8, help="sextuplets per grid")
    p.add_argument("--pages", type=int, default=1, help="number of grids")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    t0 = time.time()
    try:
        code = args.func(args)
    except TTLError as exc:
        print(f"error: {exc.tag()}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"error: IO_FAILURE: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_IO
    log.info("%s finished in %.1fs", args.command, time.time() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
