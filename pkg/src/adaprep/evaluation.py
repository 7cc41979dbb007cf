"""Seen/unseen evaluation and the four-variant ablation harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .metrics import METRIC_NAMES, Metrics
from .model import VARIANT_FLAGS, VARIANT_LABELS, VARIANTS, AdaptiveClassifier, PreparedClip
from .synthetic import SEEN, TRAIN, UNSEEN, ClipDataset
from .training import TrainConfig, build_model, select_best_epoch, train

EVAL_SPLITS = (SEEN, UNSEEN)


@dataclass
class ExperimentReport:
    """Metrics per (split, variant), plus the epoch each variant was taken from."""

    results: Dict[Tuple[str, str], Metrics] = field(default_factory=dict)
    best_epochs: Dict[str, int] = field(default_factory=dict)

    def add(self, split: str, variant: str, metrics) -> None:
        if not isinstance(metrics, Metrics):
            metrics = Metrics(**metrics)
        self.results[(split, variant)] = metrics

    @property
    def variants(self) -> List[str]:
        present = {v for _, v in self.results}
        return [v for v in VARIANTS if v in present]

    @property
    def splits(self) -> List[str]:
        present = {s for s, _ in self.results}
        return [s for s in EVAL_SPLITS if s in present] + sorted(present - set(EVAL_SPLITS))

    def get(self, split: str, variant: str) -> Metrics:
        return self.results[(split, variant)]

    def to_records(self) -> List[dict]:
        return [{"split": s, "variant": v, "metric": name, "value": float(getattr(m, name))}
                for (s, v), m in self.results.items() for name in METRIC_NAMES]

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "ExperimentReport":
        values: Dict[Tuple[str, str], dict] = {}
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    r = json.loads(line)
                    values.setdefault((r["split"], r["variant"]), {})[r["metric"]] = r["value"]
        report = cls()
        for key, vals in values.items():
            report.add(*key, vals)
        return report

    def table(self) -> str:
        """Aligned text table: check marks per component, then P/R/Acc/F1 per split."""
        split_cols = [f"{s[:6]} {m}" for s in self.splits for m in ("P", "R", "Acc", "F1")]
        header = ["RD", "MD", "DE", "FA"] + split_cols
        rows = []
        for v in self.variants:
            marks = ["x" if f else "-" for f in VARIANT_FLAGS[v]]
            vals = []
            for s in self.splits:
                m = self.results.get((s, v))
                vals += [""] * 4 if m is None else [
                    f"{x:.4f}" for x in (m.precision, m.recall, m.accuracy, m.f1)]
            rows.append(marks + vals)
        widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
        fmt = "  ".join(f"{{:>{w}}}" for w in widths)
        lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
        lines += [fmt.format(*r) for r in rows]
        return "\n".join(lines)


def degradation_report(report: ExperimentReport, metric: str = "accuracy") -> Dict[str, float]:
    """Seen-minus-unseen gap in ``metric`` for every variant."""
    gaps = {}
    for v in report.variants:
        try:
            seen, unseen = report.get(SEEN, v), report.get(UNSEEN, v)
        except KeyError:
            raise KeyError(f"variant {v!r} lacks a seen or unseen result") from None
        gaps[v] = getattr(seen, metric) - getattr(unseen, metric)
    if not gaps:
        raise KeyError("report has no variants")
    return gaps


def mean_report(reports: Sequence[ExperimentReport]) -> ExperimentReport:
    """Element-wise mean over reports, e.g. one per seed."""
    out = ExperimentReport()
    for key in reports[0].results:
        stacked = np.array([r.results[key] for r in reports])
        out.add(*key, Metrics(*stacked.mean(axis=0).tolist()))
    return out


def run_ablation(config: TrainConfig, dataset: ClipDataset, variants: Sequence[str] = VARIANTS,
                 checkpoint_root=None, eval_splits: Sequence[str] = EVAL_SPLITS) -> ExperimentReport:
    """Train each variant with the same config and seed; report its best epoch.

    The best epoch is picked by ``config.selection_metric`` on
    ``config.selection_split`` and all splits are reported at that epoch.
    """
    report = ExperimentReport()
    train_set = dataset.loaders(TRAIN)
    evals = {s: dataset.loaders(s) for s in eval_splits}
    for v in variants:
        cfg = config.replace(variant=v)
        ckdir = None if checkpoint_root is None else Path(checkpoint_root) / v
        ckpts = train(cfg, train_set, evals, checkpoint_dir=ckdir)
        best = select_best_epoch(ckpts, cfg.selection_metric, cfg.selection_split)
        report.best_epochs[v] = best
        for s, m in ckpts.records[best].metrics.items():
            report.add(s, v, m)
    return report


# -- attention traces ------------------------------------------------------------

@torch.no_grad()
def attention_traces(model: AdaptiveClassifier, clips: Sequence[PreparedClip],
                     object_class: Optional[int] = None) -> List[dict]:
    """Per-clip frame weights, gate choice and (optionally) per-frame object counts."""
    model.eval()
    out = []
    for clip in clips:
        _, choice, a = model.select_input(clip)
        n = clip.frame_tensor.shape[0]
        weights = [1.0] * n if a is None else a.tolist()
        rec = {"clip_id": clip.clip_id, "label": clip.label, "choice": choice, "weights": weights}
        if object_class is not None:
            rec["object_counts"] = clip.frame_tensor[:, object_class].astype(int).tolist()
        out.append(rec)
    return out


def write_traces(path, traces: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for t in traces:
            fh.write(json.dumps(t) + "\n")


def read_traces(path) -> List[dict]:
    with open(path) as fh:
        return [json.loads(l) for l in fh if l.strip()]


def object_attention_contrast(traces: Sequence[dict]) -> Tuple[float, float]:
    """Mean weight on frames with the object vs frames without it."""
    with_obj, without = [], []
    for t in traces:
        for w, c in zip(t["weights"], t["object_counts"]):
            (with_obj if c > 0 else without).append(w)
    if not with_obj or not without:
        raise ValueError("need frames both with and without the object")
    return float(np.mean(with_obj)), float(np.mean(without))
