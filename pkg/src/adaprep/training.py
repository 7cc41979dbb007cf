"""Training: Adam, per-clip steps with gradient accumulation, one checkpoint per epoch."""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .detections import DEFAULT_SCORE_THRESHOLD, NUM_CLASSES
from .encoder import cross_entropy_loss
from .frames import default_palette
from .metrics import METRIC_NAMES, compute_metrics, confusion_matrix
from .model import AdaptiveClassifier, PreparedClip, RawClip, check_variant, prepare_clip

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.10


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 1
    accumulation_steps: int = 32
    epochs: int = 15
    frames_per_clip: int = 32
    sampling_rate: int = 3
    resize: Tuple[int, int] = (224, 224)
    seed: int = 0
    variant: str = "full"
    num_labels: int = 6
    num_classes: int = NUM_CLASSES
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    hidden: int = 128
    encoder: str = "toy"
    feature_dim: int = 64
    encoder_channels: Tuple[int, int] = (8, 16)
    encoder_pooled: int = 4
    palette_seed: int = 0
    selection_metric: str = "accuracy"
    selection_split: str = "unseen"

    def __post_init__(self):
        self.resize = tuple(int(v) for v in self.resize)
        self.encoder_channels = tuple(int(v) for v in self.encoder_channels)
        for name in ("learning_rate", "batch_size", "accumulation_steps", "epochs",
                     "frames_per_clip", "sampling_rate", "num_labels", "num_classes",
                     "hidden", "feature_dim", "encoder_pooled"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if len(self.resize) != 2 or min(self.resize) < 1:
            raise ValueError(f"invalid resize {self.resize}")
        if self.selection_metric not in METRIC_NAMES:
            raise ValueError(f"unknown selection metric {self.selection_metric!r}")
        check_variant(self.variant)

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        """The default protocol on 64x64 frames."""
        return cls(**{"resize": (64, 64), **overrides})

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Laptop-scale run for the toy encoder trained from scratch.

        Short clips at 32x32, and more frequent, larger Adam steps than the
        default settings, which assume a pretrained backbone.
        """
        return cls(**{"resize": (32, 32), "frames_per_clip": 16, "sampling_rate": 3,
                      "learning_rate": 3e-3, "accumulation_steps": 4, **overrides})

    @classmethod
    def tiny(cls, **overrides) -> "TrainConfig":
        """Smallest sensible model, for smoke tests."""
        return cls(**{"resize": (16, 16), "frames_per_clip": 4, "sampling_rate": 3,
                      "learning_rate": 3e-3, "accumulation_steps": 4, "epochs": 2,
                      "hidden": 8, "feature_dim": 8, "encoder_channels": (2, 4),
                      "encoder_pooled": 2, **overrides})

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def model_kwargs(self) -> dict:
        return dict(num_classes=self.num_classes, hidden=self.hidden, encoder=self.encoder,
                    feature_dim=self.feature_dim,
                    encoder_kwargs=dict(channels=self.encoder_channels,
                                        pooled=self.encoder_pooled)
                    if self.encoder == "toy" else None)


# -- flat key = value config files ---------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, tuple):
        return "x".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(raw: str, default):
    if isinstance(default, tuple):
        return tuple(int(x) for x in raw.lower().replace(",", "x").split("x"))
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    return type(default)(raw) if not isinstance(default, float) else float(raw)


def config_to_text(config: TrainConfig) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(config, f.name))}\n"
                   for f in dataclasses.fields(config))


def parse_config(text: str, base: Optional[TrainConfig] = None) -> TrainConfig:
    base = base or TrainConfig()
    known = {f.name for f in dataclasses.fields(base)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        changes[key] = _parse_value(value, getattr(base, key))
    return base.replace(**changes)


def write_config(path, config: TrainConfig) -> None:
    Path(path).write_text(config_to_text(config))


def read_config(path, base: Optional[TrainConfig] = None) -> TrainConfig:
    return parse_config(Path(path).read_text(), base)


# -- checkpoints ---------------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    optimizer_steps: int
    metrics: Dict[str, Dict[str, float]] = field(default_factory=dict)
    confusion: Dict[str, list] = field(default_factory=dict)
    seconds: float = 0.0

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "EpochRecord":
        return cls(**d)


@dataclass
class CheckpointSet:
    """One parameter snapshot and one metric record per completed epoch.

    Snapshots are ``state_dict`` copies held in memory, or ``.pt`` files when
    the set was written to a directory.
    """

    records: List[EpochRecord] = field(default_factory=list)
    snapshots: List[Union[dict, Path]] = field(default_factory=list)
    directory: Optional[Path] = None

    def __len__(self):
        return len(self.records)

    def state_dict(self, epoch: int) -> dict:
        snap = self.snapshots[epoch]
        if isinstance(snap, dict):
            return snap
        return torch.load(snap, map_location="cpu", weights_only=True)

    def add(self, record: EpochRecord, state: dict) -> None:
        self.records.append(record)
        if self.directory is None:
            self.snapshots.append(copy.deepcopy(state))
            return
        path = self.directory / checkpoint_name(record.epoch)
        torch.save(state, path)
        self.snapshots.append(path)
        with open(self.directory / "metrics.jsonl", "a") as fh:
            fh.write(json.dumps(record.to_json()) + "\n")

    @classmethod
    def load(cls, directory) -> "CheckpointSet":
        directory = Path(directory)
        with open(directory / "metrics.jsonl") as fh:
            records = [EpochRecord.from_json(json.loads(l)) for l in fh if l.strip()]
        snaps = [directory / checkpoint_name(r.epoch) for r in records]
        missing = [p for p in snaps if not p.exists()]
        if missing:
            raise FileNotFoundError(f"missing checkpoints: {missing}")
        return cls(records, snaps, directory)


def checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:03d}.pt"


def select_best_epoch(ckpts: CheckpointSet, metric: str = "accuracy", split: str = "unseen") -> int:
    """Index of the epoch with the highest ``metric`` on ``split``; earliest on ties."""
    if metric not in METRIC_NAMES:
        raise KeyError(f"unknown metric {metric!r}")
    if not ckpts.records:
        raise ValueError("no epochs recorded")
    values = []
    for rec in ckpts.records:
        if split not in rec.metrics:
            raise KeyError(f"split {split!r} not recorded for epoch {rec.epoch}")
        values.append(rec.metrics[split][metric])
    return int(np.argmax(values))


# -- data preparation ----------------------------------------------------------

ClipLike = Union[RawClip, PreparedClip, Callable[[], RawClip]]


def prepare_clips(clips: Sequence[ClipLike], config: TrainConfig) -> Tuple[List[PreparedClip], int]:
    """Prepare every clip, skipping (and logging) failures.

    Raises :class:`TrainingAborted` when more than 10% of clips fail.
    """
    palette = default_palette(config.num_classes, config.palette_seed)
    prepared, failed = [], 0
    for item in clips:
        if isinstance(item, PreparedClip):
            prepared.append(item)
            continue
        try:
            raw = item() if callable(item) else item
            prepared.append(prepare_clip(
                raw, n=config.frames_per_clip, rate=config.sampling_rate, size=config.resize,
                palette=palette, score_threshold=config.score_threshold,
                num_classes=config.num_classes, variant=config.variant))
        except Exception as exc:  # noqa: BLE001 - any per-clip failure is skipped
            failed += 1
            log.warning("skipping clip %s: %s", getattr(item, "clip_id", item), exc)
    if clips and failed > MAX_FAILURE_FRACTION * len(clips):
        raise TrainingAborted(f"{failed} of {len(clips)} clips failed preprocessing")
    return prepared, failed


# -- training loop -------------------------------------------------------------

def build_model(config: TrainConfig, dtype=torch.float32) -> AdaptiveClassifier:
    torch.manual_seed(config.seed)
    model = AdaptiveClassifier(config.variant, config.num_labels, **config.model_kwargs())
    return model.to(dtype)


@torch.no_grad()
def predict(model: AdaptiveClassifier, clips: Sequence[PreparedClip]) -> np.ndarray:
    model.eval()
    return np.array([int(torch.argmax(model(c))) for c in clips], dtype=int)


def evaluate(model: AdaptiveClassifier, clips: Sequence[PreparedClip], num_labels: int):
    y_pred = predict(model, clips)
    y_true = [c.label for c in clips]
    cm = confusion_matrix(y_true, y_pred, num_labels)
    return cm, compute_metrics(cm)


def make_optimizer(params, lr: float) -> torch.optim.Optimizer:
    """Plain Adam: betas (0.9, 0.999), eps 1e-8, no weight decay."""
    return torch.optim.Adam(params, lr=lr, betas=(0.9, 0.999), eps=1e-8)


def accumulate_step(model, clips: Sequence[PreparedClip]) -> float:
    """Backpropagate the summed loss of ``clips`` into ``.grad`` (no optimizer step)."""
    total = 0.0
    for clip in clips:
        loss = cross_entropy_loss(model(clip), clip.label)
        loss.backward()
        total += loss.item()
    return total


def train(config: TrainConfig, train_set: Sequence[ClipLike],
          eval_sets: Optional[Mapping[str, Sequence[ClipLike]]] = None,
          checkpoint_dir=None, dtype=torch.float32,
          model: Optional[AdaptiveClassifier] = None) -> CheckpointSet:
    """Train ``config.variant`` and snapshot it after every epoch.

    Each clip's loss gradient is added into the parameters' ``.grad``; Adam
    steps once every ``accumulation_steps`` micro-batches of ``batch_size``
    clips (gradients are summed, not averaged), plus once for any remainder
    at the end of an epoch.
    """
    if not train_set:
        raise ValueError("empty training set")
    torch.set_num_threads(1)
    train_clips, _ = prepare_clips(train_set, config)
    evals = {name: prepare_clips(clips, config)[0] for name, clips in (eval_sets or {}).items()}

    if model is None:
        model = build_model(config, dtype)
    opt = make_optimizer(model.parameters(), config.learning_rate)
    rng = np.random.default_rng(config.seed)

    ckpts = CheckpointSet()
    if checkpoint_dir is not None:
        ckpts.directory = Path(checkpoint_dir)
        ckpts.directory.mkdir(parents=True, exist_ok=True)
        (ckpts.directory / "metrics.jsonl").unlink(missing_ok=True)

    b = config.batch_size
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        model.train()
        order = rng.permutation(len(train_clips))
        opt.zero_grad()
        pending = steps = 0
        loss_sum = 0.0
        for start in range(0, len(order), b):
            loss_sum += accumulate_step(model, [train_clips[i] for i in order[start:start + b]])
            pending += 1
            if pending == config.accumulation_steps:
                opt.step()
                opt.zero_grad()
                steps += 1
                pending = 0
        if pending:
            opt.step()
            opt.zero_grad()
            steps += 1

        record = EpochRecord(epoch, loss_sum / len(train_clips), steps)
        for name, clips in evals.items():
            if not clips:
                continue
            cm, m = evaluate(model, clips, config.num_labels)
            record.metrics[name] = m._asdict()
            record.confusion[name] = cm.tolist()
        record.seconds = time.perf_counter() - t0
        log.info("epoch %d loss %.4f steps %d %s", epoch, record.train_loss, steps,
                 {k: round(v["accuracy"], 4) for k, v in record.metrics.items()})
        ckpts.add(record, model.state_dict())
    return ckpts
