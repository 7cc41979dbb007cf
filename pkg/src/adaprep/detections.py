"""Object detections for a clip and the count features built from them.

The class array is the per-class instance count summed over the clip's
frames and divided by the number of frames. The frame tensor keeps the raw
per-frame counts, one row per frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence

import numpy as np

NUM_CLASSES = 80
DEFAULT_SCORE_THRESHOLD = 0.25

# Class indices used throughout the synthetic data and examples.
PERSON, TV, KEYBOARD, HANDBAG, CELL_PHONE, MOUSE, CUP = 0, 4, 15, 45, 60, 78, 79


class DetectionError(ValueError):
    pass


@dataclass
class Detection:
    class_index: int
    score: float = 1.0
    mask: Optional[np.ndarray] = None  # (H, W) bool instance mask

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DetectionError(f"score {self.score} outside [0, 1]")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)


@dataclass
class ClipDetections:
    frames: List[List[Detection]] = field(default_factory=list)
    clip_id: str = ""

    @property
    def n(self) -> int:
        return len(self.frames)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, j):
        return self.frames[j]

    def select(self, indices: Sequence[int]) -> "ClipDetections":
        """Detections for a sub-sampled frame index sequence."""
        return ClipDetections([list(self.frames[i]) for i in indices], self.clip_id)


def _counts(dets: ClipDetections, score_threshold: float, num_classes: int) -> np.ndarray:
    if dets.n == 0:
        raise DetectionError("empty clip")
    if not 0.0 <= score_threshold <= 1.0:
        raise DetectionError(f"score_threshold {score_threshold} outside [0, 1]")
    counts = np.zeros((dets.n, num_classes), dtype=np.int64)
    for j, frame in enumerate(dets.frames):
        for det in frame:
            if not 0 <= det.class_index < num_classes:
                raise DetectionError(f"invalid class index {det.class_index}")
            if det.score >= score_threshold:
                counts[j, det.class_index] += 1
    return counts


def build_frame_tensor(
    dets: ClipDetections,
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
    num_classes: int = NUM_CLASSES,
) -> np.ndarray:
    """Per-frame instance counts, shape ``(n, num_classes)``, not normalized."""
    return _counts(dets, score_threshold, num_classes).astype(np.float64)


def build_class_array(
    dets: ClipDetections,
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
    num_classes: int = NUM_CLASSES,
) -> np.ndarray:
    """Instance counts summed over frames and divided by the frame count.

    Every detection record counts, including repeats of the same class in one
    frame; detections scoring below ``score_threshold`` are dropped.
    """
    counts = _counts(dets, score_threshold, num_classes)
    return counts.sum(axis=0) / dets.n


# -- run-length encoded masks ------------------------------------------------

def encode_rle(mask: np.ndarray) -> dict:
    """Row-major run lengths, alternating background/foreground, background first."""
    flat = np.asarray(mask, dtype=bool).ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return {"size": list(mask.shape), "counts": runs}


def decode_rle(rle: dict) -> np.ndarray:
    h, w = rle["size"]
    counts = rle["counts"]
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    if flat.size != h * w:
        raise DetectionError(f"RLE covers {flat.size} pixels, expected {h * w}")
    return flat.reshape(h, w)


# -- detection file (JSON lines, one clip per line) ----------------------------

def clip_to_record(dets: ClipDetections) -> dict:
    frames = []
    for frame in dets.frames:
        frames.append([
            {
                "class_index": int(d.class_index),
                "score": float(d.score),
                "mask": None if d.mask is None else encode_rle(d.mask),
            }
            for d in frame
        ])
    return {"clip_id": dets.clip_id, "n": dets.n, "frames": frames}


def clip_from_record(record: dict) -> ClipDetections:
    frames = [
        [
            Detection(
                int(d["class_index"]),
                float(d["score"]),
                None if d.get("mask") is None else decode_rle(d["mask"]),
            )
            for d in frame
        ]
        for frame in record["frames"]
    ]
    if len(frames) != record["n"]:
        raise DetectionError(
            f"clip {record['clip_id']!r}: n={record['n']} but {len(frames)} frames")
    return ClipDetections(frames, record["clip_id"])


def write_detections(path, clips: Iterable[ClipDetections]) -> None:
    with open(path, "w") as fh:
        for dets in clips:
            fh.write(json.dumps(clip_to_record(dets), separators=(",", ":")))
            fh.write("\n")


def iter_detections(path) -> Iterator[ClipDetections]:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield clip_from_record(json.loads(line))


def read_detections(path) -> dict:
    """Map clip id to ClipDetections for every record in a detection file."""
    return {d.clip_id: d for d in iter_detections(Path(path))}
