"""Frame attention on a drinking clip after training the full model.

Trains the full variant on synthetic data, then plots the attention weight
of each frame of one held-out drinking clip next to whether the cup is
visible in that frame.
"""
import sys
from pathlib import Path

import torch

from adaprep import (CUP, TrainConfig, attention_traces, build_model, generate_dataset,
                     object_attention_contrast, plot_attention, prepare_clips,
                     select_best_epoch, train)

torch.set_num_threads(1)
out = Path(sys.argv[1] if len(sys.argv) > 1 else ".") / "attention.png"

ds = generate_dataset(clips_per_cell=8, seed=0, n_frames=48)
config = TrainConfig.desk(epochs=15, variant="full")
evals = {s: ds.loaders(s) for s in ("seen", "unseen")}
ckpts = train(config, ds.loaders("train"), evals)
best = select_best_epoch(ckpts)

model = build_model(config)
model.load_state_dict(ckpts.state_dict(best))
clips, _ = prepare_clips(evals["unseen"], config)
drink = [c for c in clips if c.label == 0]
traces = attention_traces(model, drink, object_class=CUP)

with_cup, without = object_attention_contrast(traces)
print(f"mean attention with cup {with_cup:.3f}, without {without:.3f}")
for a, c in zip(traces[0]["weights"], traces[0]["object_counts"]):
    print(f"{a:.3f} {'cup' if c else ''}")
plot_attention(traces[:1], out)
print("wrote", out)
