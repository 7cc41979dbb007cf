"""Command line: gen-data, train, eval, ablate, plot.

Variants map to the ablation rows: rd = raw frames, md = masked frames,
de = raw + masked with the decision embedding, full = de + frame attention.
Relative --run paths resolve under $ADAPREP_RUN_ROOT when it is set.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import torch

from . import __version__
from .evaluation import (EVAL_SPLITS, ExperimentReport, attention_traces, degradation_report,
                         mean_report, read_traces, run_ablation, write_traces)
from .model import VARIANTS
from .synthetic import DEFAULT_ACTIVITIES, ClipDataset, DatasetManifest, generate_dataset
from .training import (CheckpointSet, TrainConfig, build_model, config_to_text, evaluate,
                       prepare_clips, read_config, select_best_epoch, train, write_config)

log = logging.getLogger("adaprep")

PRESETS = {"standard": TrainConfig, "toy": TrainConfig.toy, "desk": TrainConfig.desk,
           "tiny": TrainConfig.tiny}
RUN_ROOT_ENV = "ADAPREP_RUN_ROOT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _run_dir(path: str) -> Path:
    p = Path(path)
    root = os.environ.get(RUN_ROOT_ENV)
    return p if p.is_absolute() or not root else Path(root) / p


def _load_config(args, variant=None) -> TrainConfig:
    cfg = PRESETS[args.preset]()
    if args.config:
        cfg = read_config(args.config, cfg)
    changes = {}
    if args.epochs is not None:
        changes["epochs"] = args.epochs
    if args.seed is not None:
        changes["seed"] = args.seed
    if variant is not None:
        changes["variant"] = variant
    try:
        return cfg.replace(**changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _open_data(path) -> ClipDataset:
    path = Path(path)
    if not (path / "manifest.json").exists():
        raise FileNotFoundError(f"no dataset manifest in {path}")
    return ClipDataset.open(path)


def _check_labels(cfg: TrainConfig, ds: ClipDataset) -> TrainConfig:
    return cfg.replace(num_labels=len(ds.manifest.activities))


def _object_counts(traces, clips):
    objects = {a.activity_id: a.object_class for a in DEFAULT_ACTIVITIES}
    for t, c in zip(traces, clips):
        cls = objects[c.label]
        t["object_class"] = cls
        t["object_counts"] = c.frame_tensor[:, cls].astype(int).tolist()
    return traces


def _write_report(run: Path, name: str, report: ExperimentReport) -> None:
    report.write_jsonl(run / f"{name}.jsonl")
    (run / f"{name}.txt").write_text(report.table() + "\n")


# -- commands --------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    if args.domains < 2:
        raise UsageError("--domains must be at least 2")
    if not 1 <= args.activities <= len(DEFAULT_ACTIVITIES):
        raise UsageError(f"--activities must be in 1..{len(DEFAULT_ACTIVITIES)}")
    if args.clips < 1:
        raise UsageError("--clips must be positive")
    domains = list(range(args.domains))
    unseen = domains[-1] if args.unseen is None else args.unseen
    if unseen not in domains:
        raise UsageError(f"--unseen must be one of {domains}")
    out = Path(args.out)
    if (out / "manifest.json").exists() and not args.force:
        old = DatasetManifest.read(out / "manifest.json")
        wanted = (args.seed, domains, unseen, args.frames, args.size, args.activities,
                  args.domains * args.activities * args.clips)
        have = (old.seed, old.domains, old.unseen_domain, old.n_frames, old.size,
                len(old.activities), len(old.clips))
        if wanted == have:
            print(f"{out}: dataset up to date")
            return 0
        raise UsageError(f"{out} holds a different dataset; pass --force to overwrite")
    ds = generate_dataset(domains, DEFAULT_ACTIVITIES[:args.activities], args.clips, unseen,
                          args.seed, n_frames=args.frames, size=args.size, out=out)
    counts = {s: len(ds.records(s)) for s in ("train", "seen", "unseen")}
    print(f"wrote {len(ds.manifest.clips)} clips to {out} {counts}")
    return 0


def cmd_train(args) -> int:
    ds = _open_data(args.data)
    cfg = _check_labels(_load_config(args, args.variant), ds)
    run = _run_dir(args.run)
    meta_path = run / "run.json"
    if meta_path.exists() and not args.force:
        meta = json.loads(meta_path.read_text())
        same_config = (run / "config.txt").read_text() == config_to_text(cfg)
        if same_config and meta.get("data") == str(Path(args.data).resolve()):
            print(f"{run}: up to date (use --force to retrain)")
            return 0
        raise UsageError(f"{run} holds a different run; pass --force to overwrite")
    run.mkdir(parents=True, exist_ok=True)
    write_config(run / "config.txt", cfg)
    evals = {s: ds.loaders(s) for s in EVAL_SPLITS if ds.records(s)}
    ckpts = train(cfg, ds.loaders("train"), evals, checkpoint_dir=run / "checkpoints")
    best = select_best_epoch(ckpts, cfg.selection_metric, cfg.selection_split)
    report = ExperimentReport(best_epochs={cfg.variant: best})
    for split, m in ckpts.records[best].metrics.items():
        report.add(split, cfg.variant, m)
    _write_report(run, "report", report)
    _write_attention(run, cfg, ds, ckpts.state_dict(best))
    meta = {"config": "config.txt", "data": str(Path(args.data).resolve()),
            "seed": cfg.seed, "best_epoch": best, "epochs": len(ckpts),
            "metrics": "checkpoints/metrics.jsonl", "version": __version__}
    meta_path.write_text(json.dumps(meta, indent=1))
    print(report.table())
    print(f"best epoch {best}; run written to {run}")
    return 0


def _write_attention(run: Path, cfg: TrainConfig, ds: ClipDataset, state) -> None:
    model = build_model(cfg)
    model.load_state_dict(state)
    clips, _ = prepare_clips(ds.loaders("unseen") + ds.loaders("seen"), cfg)
    traces = _object_counts(attention_traces(model, clips), clips)
    write_traces(run / "attention.jsonl", traces)


def cmd_eval(args) -> int:
    run = _run_dir(args.run)
    if not (run / "run.json").exists():
        raise FileNotFoundError(f"no run in {run}")
    meta = json.loads((run / "run.json").read_text())
    cfg = read_config(run / "config.txt")
    ds = _open_data(args.data or meta["data"])
    ckpts = CheckpointSet.load(run / "checkpoints")
    epoch = meta["best_epoch"] if args.epoch is None else args.epoch
    if not 0 <= epoch < len(ckpts):
        raise UsageError(f"--epoch must be in 0..{len(ckpts) - 1}")
    model = build_model(cfg)
    model.load_state_dict(ckpts.state_dict(epoch))
    report = ExperimentReport(best_epochs={cfg.variant: epoch})
    for split in EVAL_SPLITS:
        clips, _ = prepare_clips(ds.loaders(split), cfg)
        if clips:
            cm, m = evaluate(model, clips, cfg.num_labels)
            report.add(split, cfg.variant, m)
    _write_report(run, "eval", report)
    _write_attention(run, cfg, ds, ckpts.state_dict(epoch))
    print(report.table())
    return 0


def cmd_ablate(args) -> int:
    ds = _open_data(args.data)
    cfg = _check_labels(_load_config(args), ds)
    run = _run_dir(args.run)
    if (run / "ablation.jsonl").exists() and not args.force:
        print(f"{run}: ablation already present (use --force to rerun)")
        return 0
    run.mkdir(parents=True, exist_ok=True)
    write_config(run / "config.txt", cfg)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.seed]
    reports = []
    for seed in seeds:
        r = run_ablation(cfg.replace(seed=seed), ds, args.variants,
                         checkpoint_root=run / f"seed_{seed}")
        _write_report(run, f"ablation_seed_{seed}", r)
        reports.append(r)
    report = mean_report(reports)
    _write_report(run, "ablation", report)
    gaps = degradation_report(report)
    (run / "degradation.json").write_text(json.dumps(gaps, indent=1))
    print(report.table())
    return 0


def cmd_plot(args) -> int:
    from .plotting import plot_attention, plot_degradation, plot_metric_bars
    run = _run_dir(args.run)
    if not run.is_dir():
        raise FileNotFoundError(f"no run directory {run}")
    written = []
    for name in ("ablation", "eval", "report"):
        if (run / f"{name}.jsonl").exists():
            report = ExperimentReport.read_jsonl(run / f"{name}.jsonl")
            plot_metric_bars(report, run / "metrics.png")
            written.append("metrics.png")
            if set(EVAL_SPLITS) <= set(report.splits):
                plot_degradation(degradation_report(report), run / "degradation.png")
                written.append("degradation.png")
            break
    if (run / "attention.jsonl").exists():
        traces = read_traces(run / "attention.jsonl")
        if args.label is not None:
            traces = [t for t in traces if t["label"] == args.label]
        plot_attention(traces, run / "attention.png")
        written.append("attention.png")
    if not written:
        raise FileNotFoundError(f"nothing to plot in {run}")
    print("wrote " + ", ".join(str(run / w) for w in written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adaprep", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate the synthetic multi-domain dataset")
    g.add_argument("--domains", type=int, default=3, help="number of domains (>= 2)")
    g.add_argument("--activities", type=int, default=6)
    g.add_argument("--clips", type=int, default=10, help="clips per (domain, activity)")
    g.add_argument("--unseen", type=int, default=None, help="held-out domain (default: last)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--frames", type=int, default=96, help="frames per generated video")
    g.add_argument("--size", type=int, default=64, help="frame side in pixels")
    g.add_argument("--out", required=True)
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_gen_data)

    def training_flags(sp):
        sp.add_argument("--data", required=True, help="dataset directory from gen-data")
        sp.add_argument("--run", required=True, help="run directory")
        sp.add_argument("--preset", choices=sorted(PRESETS), default="toy")
        sp.add_argument("--config", help="key = value file overriding the preset")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--force", action="store_true")

    t = sub.add_parser("train", help="train one variant",
                       description="variants: rd (RD), md (MD), de (RD+MD+DE), full (RD+MD+DE+FA)")
    training_flags(t)
    t.add_argument("--variant", choices=VARIANTS, default="full")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a trained run on the seen and unseen splits")
    e.add_argument("--run", required=True)
    e.add_argument("--data", help="dataset directory (default: the one used for training)")
    e.add_argument("--epoch", type=int, help="checkpoint to evaluate (default: best)")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="train and compare all four variants")
    training_flags(a)
    a.add_argument("--seeds", help="comma-separated seeds; metrics are averaged")
    a.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    a.set_defaults(func=cmd_ablate)

    pl = sub.add_parser("plot", help="write metric, gap and attention figures for a run")
    pl.add_argument("--run", required=True)
    pl.add_argument("--label", type=int, help="only plot attention traces of this activity")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"adaprep {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"adaprep {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
