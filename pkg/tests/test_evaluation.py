import numpy as np
import pytest

from adaprep.evaluation import (ExperimentReport, attention_traces, degradation_report,
                                mean_report, object_attention_contrast, read_traces, run_ablation,
                                write_traces)
from adaprep.metrics import METRIC_NAMES, Metrics
from adaprep.model import VARIANTS
from adaprep.synthetic import generate_dataset
from adaprep.training import TrainConfig, build_model, prepare_clips


def full_report(rng):
    r = ExperimentReport()
    for s in ("seen", "unseen"):
        for v in VARIANTS:
            r.add(s, v, Metrics(*rng.random(4).tolist()))
    return r


def test_report_has_32_numbers_and_roundtrips(tmp_path, rng):
    r = full_report(rng)
    recs = r.to_records()
    assert len(recs) == 32
    assert {x["metric"] for x in recs} == set(METRIC_NAMES)
    r.write_jsonl(tmp_path / "r.jsonl")
    back = ExperimentReport.read_jsonl(tmp_path / "r.jsonl")
    assert back.results == r.results
    assert back.variants == list(VARIANTS)


def test_table_layout(rng):
    lines = full_report(rng).table().splitlines()
    assert lines[0].split()[:4] == ["RD", "MD", "DE", "FA"]
    marks = [l.split()[:4] for l in lines[2:]]
    assert marks == [["x", "-", "-", "-"], ["-", "x", "-", "-"], ["x", "x", "x", "-"], ["x", "x", "x", "x"]]


def test_degradation():
    r = ExperimentReport()
    r.add("seen", "rd", Metrics(0.8, 0, 0, 0))
    r.add("unseen", "rd", Metrics(0.6, 0, 0, 0))
    r.add("seen", "full", Metrics(0.7, 0, 0, 0))
    r.add("unseen", "full", Metrics(0.7, 0, 0, 0))
    gaps = degradation_report(r)
    assert gaps["rd"] == pytest.approx(0.2)
    assert gaps["full"] == 0.0
    r.add("seen", "md", Metrics(0.5, 0, 0, 0))
    with pytest.raises(KeyError):
        degradation_report(r)


def test_degradation_matches_raw_records(rng):
    r = full_report(rng)
    acc = {(x["split"], x["variant"]): x["value"] for x in r.to_records() if x["metric"] == "accuracy"}
    for v, gap in degradation_report(r).items():
        assert gap == acc[("seen", v)] - acc[("unseen", v)]


def test_mean_report(rng):
    a, b = full_report(rng), full_report(rng)
    m = mean_report([a, b])
    for key in a.results:
        np.testing.assert_allclose(m.results[key], (np.array(a.results[key]) + np.array(b.results[key])) / 2)


def test_run_ablation_tiny(monkeypatch):
    import adaprep.model as model_mod
    calls = []
    real = model_mod.render_masked_stack

    def spy(*a):
        calls.append(1)
        return real(*a)
    monkeypatch.setattr(model_mod, "render_masked_stack", spy)
    ds = generate_dataset((0, 1, 2), clips_per_cell=2, seed=0, n_frames=12, size=16, seen_test_fraction=0.5)
    r = run_ablation(TrainConfig.tiny(epochs=1), ds, variants=["rd"])
    assert calls == []
    assert r.variants == ["rd"] and set(r.splits) == {"seen", "unseen"}
    r = run_ablation(TrainConfig.tiny(epochs=1), ds)
    assert calls
    assert r.variants == list(VARIANTS)
    assert len(r.to_records()) == 32
    assert set(r.best_epochs) == set(VARIANTS)


def test_attention_traces(tmp_path):
    ds = generate_dataset((0, 1), clips_per_cell=1, seed=0, n_frames=12, size=16)
    cfg = TrainConfig.tiny()
    clips, _ = prepare_clips(ds.loaders("unseen"), cfg)
    traces = attention_traces(build_model(cfg), clips, object_class=79)
    assert len(traces) == 6
    for t in traces:
        assert len(t["weights"]) == cfg.frames_per_clip
        assert all(w == 0.5 for w in t["weights"])  # untrained gate MLP outputs exactly 0.5
        assert t["choice"] == "raw"
    write_traces(tmp_path / "t.jsonl", traces)
    assert read_traces(tmp_path / "t.jsonl") == traces
    rd = attention_traces(build_model(cfg.replace(variant="rd")), prepare_clips(ds.loaders("unseen"), cfg.replace(variant="rd"))[0])
    assert all(t["weights"] == [1.0] * 4 for t in rd)


def test_object_attention_contrast():
    traces = [{"weights": [0.9, 0.1, 0.8], "object_counts": [1, 0, 2]}]
    assert object_attention_contrast(traces) == (pytest.approx(0.85), pytest.approx(0.1))
    with pytest.raises(ValueError):
        object_attention_contrast([{"weights": [0.5], "object_counts": [1]}])
