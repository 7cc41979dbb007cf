"""Adaptive stream selection: choose the raw or the masked frame stack per clip.

A shared single-hidden-layer MLP scores the class array (``d1``, in (0, 1)),
a learnable decision embedding ``W`` gives ``d2 = class_array . W``, and
``d_hat = relu(d1 - d2)``. A positive ``d_hat`` keeps the raw stack, zero
picks the masked one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .detections import NUM_CLASSES
from .frames import MASKED, RAW, FrameStack


class GateError(ValueError):
    pass


class GateModule(nn.Module):
    """Decision embedding ``W`` plus the MLP shared with frame attention."""

    def __init__(self, num_classes: int = NUM_CLASSES, hidden: int = 128,
                 generator: torch.Generator | None = None):
        super().__init__()
        self.num_classes = num_classes
        self.W = nn.Parameter(torch.zeros(num_classes))
        self.hidden = nn.Linear(num_classes, hidden)
        self.out = nn.Linear(hidden, 1)
        with torch.no_grad():
            self.hidden.weight.normal_(0.0, math.sqrt(2.0 / num_classes), generator=generator)
            self.hidden.bias.zero_()
            self.out.weight.zero_()
            self.out.bias.zero_()

    def xi(self, v: torch.Tensor) -> torch.Tensor:
        """Pre-sigmoid MLP score; works on a single vector or a batch of rows."""
        return self.out(torch.relu(self.hidden(v))).squeeze(-1)

    def forward(self, v: torch.Tensor) -> torch.Tensor:
        # keep the output strictly inside (0, 1) where the sigmoid saturates
        fi = torch.finfo(v.dtype)
        return torch.sigmoid(self.xi(v)).clamp(fi.tiny, 1.0 - fi.eps / 2)


def _as_tensor(v, like: torch.Tensor) -> torch.Tensor:
    if not isinstance(v, torch.Tensor):
        v = torch.as_tensor(np.asarray(v))
    return v.to(dtype=like.dtype)


def mlp_forward(v, gate: GateModule) -> torch.Tensor:
    """``sigmoid(xi(v))`` for a length-c vector or an ``(n, c)`` batch of rows."""
    v = _as_tensor(v, gate.W)
    if v.shape[-1] != gate.num_classes:
        raise GateError(f"expected last dimension {gate.num_classes}, got {tuple(v.shape)}")
    if not torch.isfinite(v).all():
        raise GateError("non-finite input to the gate MLP")
    return gate(v)


@dataclass
class GateOutput:
    d1: torch.Tensor
    d2: torch.Tensor
    d: torch.Tensor
    d_hat: torch.Tensor

    @property
    def choice(self) -> str:
        # relu of a non-positive float is exactly 0.0, no tolerance needed
        return MASKED if float(self.d_hat.detach()) == 0.0 else RAW


def gate_decision(c_arr, gate: GateModule) -> GateOutput:
    c_arr = _as_tensor(c_arr, gate.W)
    if c_arr.shape != (gate.num_classes,):
        raise GateError(f"class array must have shape ({gate.num_classes},), got {tuple(c_arr.shape)}")
    d1 = mlp_forward(c_arr, gate)
    d2 = c_arr @ gate.W
    d = d1 - d2
    return GateOutput(d1, d2, d, torch.relu(d))


def select_stream(out: GateOutput, raw: FrameStack, masked: FrameStack) -> FrameStack:
    if tuple(raw.shape) != tuple(masked.shape):
        raise GateError(f"stack shapes differ: {tuple(raw.shape)} vs {tuple(masked.shape)}")
    return masked if out.choice == MASKED else raw


def gate_coupling(selected: FrameStack, out: GateOutput) -> FrameStack:
    """Route gradients from the selected stack back into the gate.

    The stack is multiplied by ``1 + (d_hat - d_hat.detach())``, which is
    exactly 1 in the forward pass. Its derivative is that of ``d_hat``: equal
    to ``d`` while the raw stack is chosen, zero once the masked one is.
    """
    s = 1 + (out.d_hat - out.d_hat.detach())
    return FrameStack(selected.frames * s, selected.kind)
