"""Video feature encoders, the classification head and the loss.

Any ``nn.Module`` mapping an ``(n, H, W, 3)`` stack in ``[0, 1]`` to a
``feature_dim`` vector can serve as an encoder. Register it under a name so
configs can refer to it.
"""

from __future__ import annotations

from typing import Callable, Dict

import torch
from torch import nn

from .frames import FrameStack

ENCODERS: Dict[str, Callable[..., nn.Module]] = {}


class EncoderError(ValueError):
    pass


def register_encoder(name: str):
    def deco(factory):
        ENCODERS[name] = factory
        return factory
    return deco


def build_encoder(name: str, **kwargs) -> nn.Module:
    try:
        factory = ENCODERS[name]
    except KeyError:
        raise EncoderError(f"unknown encoder {name!r}; registered: {sorted(ENCODERS)}") from None
    return factory(**kwargs)


def _external(name):
    def factory(**kwargs):
        raise NotImplementedError(
            f"{name!r} is a pretrained video backbone; register an adapter with "
            f"register_encoder({name!r}) to use it")
    return factory


for _name in ("mvit", "csn", "i3d", "c2d", "r3d", "mc3d", "r2plus1d"):
    register_encoder(_name)(_external(_name))


@register_encoder("toy")
class ToyEncoder(nn.Module):
    """Two conv+pool stages per frame, then a mean over frames.

    No batch-dependent normalization anywhere: training runs one clip at a
    time. The temporal mean makes the output invariant to frame order, so
    per-frame scaling upstream is the only thing that weights frames.
    """

    def __init__(self, feature_dim: int = 64, channels=(8, 16), pooled: int = 4):
        super().__init__()
        c1, c2 = channels
        self.feature_dim = feature_dim
        self.stem = nn.Sequential(
            nn.Conv2d(3, c1, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
            nn.Conv2d(c1, c2, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
            nn.AdaptiveAvgPool2d(pooled),
        )
        self.proj = nn.Linear(c2 * pooled * pooled, feature_dim)

    def embed_frames(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[-1] != 3:
            raise EncoderError(f"expected (n, H, W, 3) input, got {tuple(x.shape)}")
        h = self.stem(x.permute(0, 3, 1, 2))
        return torch.relu(self.proj(h.flatten(1)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.embed_frames(x).mean(dim=0)


def encode(stack, encoder: nn.Module) -> torch.Tensor:
    frames = stack.frames if isinstance(stack, FrameStack) else stack
    return encoder(frames)


class ClassifierHead(nn.Linear):
    def __init__(self, feature_dim: int, num_labels: int):
        super().__init__(feature_dim, num_labels)


def classify(features: torch.Tensor, head: nn.Module) -> torch.Tensor:
    return head(features)


def cross_entropy_loss(logits: torch.Tensor, label: int) -> torch.Tensor:
    """``-log softmax(logits)[label]`` via log-sum-exp."""
    k = logits.shape[-1]
    if not 0 <= int(label) < k:
        raise EncoderError(f"label {label} out of range for {k} classes")
    return torch.logsumexp(logits, dim=-1) - logits[..., int(label)]
