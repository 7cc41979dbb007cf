"""Counting detections and deciding between raw and masked frames.

Run with ``python3 demos/01_features_and_gate.py``.
"""
import numpy as np
import torch

from adaprep import (CUP, KEYBOARD, PERSON, ClipDetections, Detection, GateModule,
                     build_class_array, build_frame_tensor, gate_decision)

# Four frames: a person throughout, a cup in two of them, one weak keyboard.
dets = ClipDetections([
    [Detection(PERSON, 0.9), Detection(CUP, 0.8)],
    [Detection(PERSON, 0.95)],
    [Detection(PERSON, 0.9), Detection(CUP, 0.7), Detection(KEYBOARD, 0.1)],
    [Detection(PERSON, 0.85)],
])

ft = build_frame_tensor(dets)
ca = build_class_array(dets)
print("per-frame person/cup/keyboard counts:\n", ft[:, [PERSON, CUP, KEYBOARD]])
print("class array (person, cup):", ca[PERSON], ca[CUP])   # 1.0 0.5

# A fresh gate has W = 0 so it always keeps the raw frames.
gate = GateModule(generator=torch.Generator().manual_seed(0))
out = gate_decision(ca, gate)
print(f"fresh gate: d1={out.d1.item():.3f} d2={out.d2.item():.3f} -> {out.choice}")

# Weighting the cup heavily tips the decision over to the masked stack.
with torch.no_grad():
    gate.W[CUP] = 5.0
out = gate_decision(ca, gate)
print(f"cup-weighted gate: d1={out.d1.item():.3f} d2={out.d2.item():.3f} -> {out.choice}")

# Random clips: how often does a moderately trained-looking W pick masked?
rng = np.random.default_rng(0)
with torch.no_grad():
    gate.W.copy_(torch.as_tensor(rng.normal(0.5, 0.3, 80)))
choices = [gate_decision(rng.poisson(0.05, 80).astype(float), gate).choice for _ in range(1000)]
print("masked fraction over 1000 random class arrays:", choices.count("masked") / 1000)
