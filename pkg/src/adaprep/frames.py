"""Raw and masked frame stacks.

Frames are stored as ``(n, H, W, 3)`` arrays. ``uint8`` is the storage form;
model input is ``float`` in ``[0, 1]`` (see :func:`to_unit`).
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .detections import ClipDetections, Detection

RAW, MASKED = "raw", "masked"
BACKGROUND_INDEX = 255


class FrameError(ValueError):
    pass


@dataclass
class FrameStack:
    frames: np.ndarray
    kind: str = RAW

    def __post_init__(self):
        if self.kind not in (RAW, MASKED):
            raise FrameError(f"unknown stack kind {self.kind!r}")
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise FrameError(f"expected (n, H, W, 3) frames, got {self.frames.shape}")

    @property
    def n(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self):
        return self.frames.shape

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class Palette:
    colors: np.ndarray  # (c, 3) uint8

    def __len__(self):
        return len(self.colors)

    def __getitem__(self, class_index):
        return self.colors[class_index]


def default_palette(c: int = 80, seed: int = 0) -> Palette:
    """``c`` evenly spaced hues at full saturation and value, shuffled by ``seed``."""
    if c < 1:
        raise FrameError("palette needs at least one color")
    rgb = [colorsys.hsv_to_rgb(i / c, 1.0, 1.0) for i in range(c)]
    colors = np.rint(np.array(rgb) * 255).astype(np.uint8)
    order = np.random.default_rng(seed).permutation(c)
    return Palette(colors[order])


def subsample_indices(length: int, n: int, rate: int) -> np.ndarray:
    if length < 1:
        raise FrameError("empty video")
    if n < 1 or rate < 1:
        raise FrameError(f"n and rate must be positive, got n={n}, rate={rate}")
    return (np.arange(n) * rate) % length


def subsample_frames(video, n: int = 32, rate: int = 3) -> FrameStack:
    """Take every ``rate``-th frame, ``n`` of them, looping short videos."""
    video = np.asarray(video)
    idx = subsample_indices(len(video), n, rate)
    return FrameStack(video[idx], RAW)


def resize_stack(stack: FrameStack, h: int, w: int) -> FrameStack:
    """Bilinear resize of every frame (half-pixel centers, no antialiasing)."""
    if h < 1 or w < 1:
        raise FrameError(f"invalid target size {h}x{w}")
    frames = stack.frames
    if frames.shape[1:3] == (h, w):
        return FrameStack(frames.copy(), stack.kind)
    x = torch.from_numpy(np.ascontiguousarray(frames, dtype=np.float64)).permute(0, 3, 1, 2)
    y = F.interpolate(x, size=(h, w), mode="bilinear", align_corners=False)
    out = y.permute(0, 2, 3, 1).numpy()
    if frames.dtype == np.uint8:
        out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    else:
        out = out.astype(frames.dtype)
    return FrameStack(out, stack.kind)


def _paint_order(frame_dets: Sequence[Detection]):
    # painted last wins: highest score, then lowest class index
    return sorted(frame_dets, key=lambda d: (d.score, -d.class_index))


def class_index_map(frame_dets: Sequence[Detection], shape) -> np.ndarray:
    """Front-most class index per pixel, ``BACKGROUND_INDEX`` where nothing is detected."""
    out = np.full(shape, BACKGROUND_INDEX, dtype=np.uint8)
    for det in _paint_order(frame_dets):
        if det.mask is None:
            raise FrameError("mask required for rendering")
        out[det.mask] = det.class_index
    return out


def render_masked_stack(raw: FrameStack, dets: ClipDetections, palette: Palette) -> FrameStack:
    """Blend detected objects half-and-half with their class color, black elsewhere."""
    if raw.kind != RAW:
        raise FrameError("render_masked_stack expects a raw stack")
    if dets.n != raw.n:
        raise FrameError(f"{dets.n} detection frames for {raw.n} image frames")
    frames = np.asarray(raw.frames)
    if frames.dtype != np.uint8:
        raise FrameError("render_masked_stack expects uint8 frames")
    h, w = frames.shape[1:3]
    out = np.zeros_like(frames)
    colors = palette.colors.astype(np.int32)
    for j in range(raw.n):
        cmap = class_index_map(dets[j], (h, w))
        fg = cmap != BACKGROUND_INDEX
        if not fg.any():
            continue
        out[j][fg] = ((frames[j][fg].astype(np.int32) + colors[cmap[fg]]) // 2).astype(np.uint8)
    return FrameStack(out, MASKED)


def to_unit(stack: FrameStack, dtype=torch.float32) -> torch.Tensor:
    """uint8 frames as a ``[0, 1]`` tensor of shape ``(n, H, W, 3)``."""
    x = torch.from_numpy(np.ascontiguousarray(stack.frames)).to(dtype)
    if stack.frames.dtype == np.uint8:
        x = x / 255.0
    return x


# -- class-index map images ----------------------------------------------------

def write_class_map(path, cmap: np.ndarray) -> None:
    Image.fromarray(np.asarray(cmap, dtype=np.uint8), mode="L").save(path)


def read_class_map(path) -> np.ndarray:
    return np.asarray(Image.open(Path(path)))


def write_frames(directory, frames: np.ndarray) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, frame in enumerate(frames):
        p = directory / f"{j:05d}.png"
        Image.fromarray(frame, mode="RGB").save(p)
        paths.append(p)
    return paths


def read_frames(directory) -> np.ndarray:
    paths = sorted(Path(directory).glob("*.png"))
    if not paths:
        raise FrameError(f"no frames in {directory}")
    return np.stack([np.asarray(Image.open(p).convert("RGB")) for p in paths])
