"""Frame-wise attention: one sigmoid weight per frame from its object counts."""

from __future__ import annotations

import torch

from .frames import FrameStack
from .gate import GateError, GateModule, mlp_forward


def attention_vector(ft, gate: GateModule) -> torch.Tensor:
    """Weights in (0, 1), one per frame-tensor row, from the gate's shared MLP."""
    ft = torch.as_tensor(ft)
    if ft.ndim != 2:
        raise GateError(f"frame tensor must be 2-D, got shape {tuple(ft.shape)}")
    return mlp_forward(ft, gate)


def apply_attention(stack: FrameStack, a: torch.Tensor) -> FrameStack:
    """Scale frame ``j`` by ``a[j]``. No normalization across frames."""
    if a.ndim != 1 or a.shape[0] != stack.n:
        raise GateError(f"{tuple(a.shape)} attention weights for {stack.n} frames")
    frames = stack.frames
    return FrameStack(frames * a.to(frames.dtype).reshape(-1, *([1] * (frames.ndim - 1))), stack.kind)
