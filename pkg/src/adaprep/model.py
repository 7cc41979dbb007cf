"""Clip preparation and the end-to-end classifier for each ablation variant.

Variants, in ablation-table order:

* ``rd``   raw frames only
* ``md``   masked frames only
* ``de``   raw + masked with the decision embedding gate
* ``full`` ``de`` plus frame-wise attention
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .attention import apply_attention, attention_vector
from .detections import ClipDetections, build_class_array, build_frame_tensor
from .encoder import ClassifierHead, build_encoder
from .frames import (MASKED, RAW, FrameStack, Palette, render_masked_stack,
                     resize_stack, subsample_indices, to_unit)
from .gate import GateModule, gate_coupling, gate_decision, select_stream

VARIANTS = ("rd", "md", "de", "full")
VARIANT_LABELS = {"rd": "RD", "md": "MD", "de": "RD+MD+DE", "full": "RD+MD+DE+FA"}
# (RD, MD, DE, FA) flags per variant
VARIANT_FLAGS = {
    "rd": (True, False, False, False),
    "md": (False, True, False, False),
    "de": (True, True, True, False),
    "full": (True, True, True, True),
}


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return variant


def needs_mask(variant: str) -> bool:
    return VARIANT_FLAGS[check_variant(variant)][1]


@dataclass
class RawClip:
    clip_id: str
    frames: np.ndarray  # (T, H, W, 3) uint8, full-length video
    dets: ClipDetections  # aligned with ``frames``
    label: int
    domain: int = -1


@dataclass
class PreparedClip:
    clip_id: str
    label: int
    raw: Optional[FrameStack]
    masked: Optional[FrameStack]
    class_array: np.ndarray
    frame_tensor: np.ndarray
    domain: int = -1


def prepare_clip(clip: RawClip, *, n: int, rate: int, size, palette: Palette,
                 score_threshold: float, num_classes: int, variant: str) -> PreparedClip:
    """Sub-sample, featurize, render and resize one clip.

    Counting and rendering use the sub-sampled frames at native resolution;
    both stacks are resized afterwards.
    """
    if len(clip.dets) != len(clip.frames):
        raise ValueError(f"{clip.clip_id}: {len(clip.dets)} detection frames "
                         f"for {len(clip.frames)} video frames")
    idx = subsample_indices(len(clip.frames), n, rate)
    dets = clip.dets.select(idx)
    raw = FrameStack(np.asarray(clip.frames)[idx], RAW)
    c_arr = build_class_array(dets, score_threshold, num_classes)
    ft = build_frame_tensor(dets, score_threshold, num_classes)
    masked = render_masked_stack(raw, dets, palette) if needs_mask(variant) else None
    h, w = size
    use_raw = VARIANT_FLAGS[variant][0]
    return PreparedClip(
        clip.clip_id, int(clip.label),
        resize_stack(raw, h, w) if use_raw else None,
        resize_stack(masked, h, w) if masked is not None else None,
        c_arr, ft, clip.domain,
    )


class AdaptiveClassifier(nn.Module):
    def __init__(self, variant: str, num_labels: int, *, num_classes: int = 80,
                 hidden: int = 128, encoder: str = "toy", feature_dim: int = 64,
                 encoder_kwargs: Optional[dict] = None):
        super().__init__()
        self.variant = check_variant(variant)
        self.gate = GateModule(num_classes, hidden) if VARIANT_FLAGS[variant][2] else None
        self.encoder = build_encoder(encoder, feature_dim=feature_dim, **(encoder_kwargs or {}))
        self.head = ClassifierHead(feature_dim, num_labels)

    @property
    def dtype(self):
        return self.head.weight.dtype

    def select_input(self, clip: PreparedClip):
        """The stack entering the encoder, plus the gate choice and attention weights."""
        dtype = self.dtype
        if self.variant == "rd":
            return FrameStack(to_unit(clip.raw, dtype), RAW), RAW, None
        if self.variant == "md":
            return FrameStack(to_unit(clip.masked, dtype), MASKED), MASKED, None
        out = gate_decision(torch.as_tensor(clip.class_array, dtype=dtype), self.gate)
        raw = FrameStack(to_unit(clip.raw, dtype), RAW)
        masked = FrameStack(to_unit(clip.masked, dtype), MASKED)
        x = gate_coupling(select_stream(out, raw, masked), out)
        a = None
        if self.variant == "full":
            a = attention_vector(torch.as_tensor(clip.frame_tensor, dtype=dtype), self.gate)
            x = apply_attention(x, a)
        return x, out.choice, a

    def forward(self, clip: PreparedClip) -> torch.Tensor:
        x, _, _ = self.select_input(clip)
        return self.head(self.encoder(x.frames))
