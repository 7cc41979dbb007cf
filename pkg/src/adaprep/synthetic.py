"""Synthetic office-activity videos with controlled domain shift.

Each activity is a scripted object (a cup raised now and then, a keyboard
under the hands, ...) in front of an actor. Scripts depend only on the clip
seed. Domains change appearance only: background color and texture, actor
and object colors, pixel noise and background camera shake.
"""

from __future__ import annotations

import colorsys
import json
import zlib
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .detections import (CELL_PHONE, CUP, HANDBAG, KEYBOARD, MOUSE, PERSON, TV,
                         ClipDetections, Detection, iter_detections, write_detections)
from .frames import read_frames, write_frames
from .model import RawClip

TRAIN, SEEN, UNSEEN = "train", "seen", "unseen"
SPLITS = (TRAIN, SEEN, UNSEEN)
OBJECT_CLASSES = (PERSON, TV, KEYBOARD, HANDBAG, CELL_PHONE, MOUSE, CUP)
_GOLDEN = 0.3819660112501051


@dataclass(frozen=True)
class DomainSpec:
    domain_id: int
    background: tuple  # mean RGB
    background_spread: float  # per-clip std of the background mean
    texture_amplitude: float
    texture_period: float
    texture_angle: float
    actor_color: tuple
    object_colors: Dict[int, tuple]
    noise: float  # per-pixel gaussian std
    jitter: int  # max background shift in pixels

    @classmethod
    def create(cls, domain_id: int, seed: int = 0) -> "DomainSpec":
        rng = np.random.default_rng([seed, domain_id, 0xD0])
        # hues spaced by the golden ratio keep background means well apart
        hue = (rng.uniform(0, 0.1) + domain_id * _GOLDEN) % 1.0
        bg = np.array(colorsys.hsv_to_rgb(hue, rng.uniform(0.35, 0.6), rng.uniform(0.55, 0.8))) * 255
        def color():
            return tuple(float(x) for x in rng.uniform(25, 230, 3))
        return cls(
            domain_id=domain_id,
            background=tuple(float(x) for x in bg),
            background_spread=6.0,
            texture_amplitude=float(rng.uniform(10, 30)),
            texture_period=float(rng.uniform(6, 16)),
            texture_angle=float(rng.uniform(0, np.pi)),
            actor_color=color(),
            object_colors={c: color() for c in OBJECT_CLASSES if c != PERSON},
            noise=float(rng.uniform(3, 10)),
            jitter=int(rng.integers(1, 4)),
        )


@dataclass(frozen=True)
class ActivitySpec:
    activity_id: int
    name: str
    object_class: int
    motion: str


DEFAULT_ACTIVITIES = (
    ActivitySpec(0, "drink", CUP, "raise"),
    ActivitySpec(1, "typeset", KEYBOARD, "jitter"),
    ActivitySpec(2, "phone", CELL_PHONE, "bob"),
    ActivitySpec(3, "mouse", MOUSE, "circle"),
    ActivitySpec(4, "watch", TV, "static"),
    ActivitySpec(5, "carry", HANDBAG, "sweep"),
)

# (height, width) of each object shape at 64x64; scaled with frame size
_SHAPES = {CUP: (10, 7), KEYBOARD: (7, 34), CELL_PHONE: (11, 6), MOUSE: (6, 8),
           TV: (18, 28), HANDBAG: (12, 12)}


def _ellipse(h, w, cy, cx, ry, rx):
    yy, xx = np.mgrid[0:h, 0:w]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def _rect(h, w, top, left, rh, rw):
    m = np.zeros((h, w), dtype=bool)
    t, l = int(round(top)), int(round(left))
    m[max(t, 0):max(t + rh, 0), max(l, 0):max(l + rw, 0)] = True
    return m


def script_masks(activity: ActivitySpec, seed, n_frames: int, size: int) -> List[Dict[int, np.ndarray]]:
    """Per-frame full (un-occluded) masks of the actor and the activity object.

    Depends only on the activity and the seed, never on the domain.
    """
    rng = np.random.default_rng([_seed_int(seed), 1])
    s = size / 64.0
    period = int(rng.integers(18, 30))
    phase = int(rng.integers(0, period))
    sway = rng.uniform(0.5, 1.5)
    oh, ow = (max(1, int(round(v * s))) for v in _SHAPES[activity.object_class])
    # the object drifts in and out of view (camera turns away, hands occlude it)
    vis_period = int(rng.integers(20, 36))
    vis_phase = int(rng.integers(0, vis_period))
    vis_duty = rng.uniform(0.45, 0.7)
    out = []
    for t in range(n_frames):
        masks = {}
        cx = size / 2 + sway * s * np.sin(2 * np.pi * t / 40.0)
        masks[PERSON] = _ellipse(size, size, size * 0.95, cx, size * 0.32, size * 0.24)
        m = activity.motion
        if m == "raise":
            # cup lifted from the right edge up to the face, then put away off-frame
            p = ((t + phase) % period) / period
            if p < 0.55:
                u = np.sin(np.pi * p / 0.55)
                top = size * 0.55 - u * size * 0.35
                left = size * 0.9 - u * size * 0.4
                obj = _rect(size, size, top, left, oh, ow)
            else:
                obj = None
        elif m == "jitter":
            obj = _rect(size, size, size * 0.62 + rng.integers(-1, 2), (size - ow) / 2 + rng.integers(-1, 2), oh, ow)
        elif m == "bob":
            top = size * 0.35 + s * 6 * np.sin(2 * np.pi * (t + phase) / period)
            obj = _rect(size, size, top, size * 0.62, oh, ow)
        elif m == "circle":
            a = 2 * np.pi * (t + phase) / period
            obj = _rect(size, size, size * 0.6 + s * 4 * np.sin(a), size * 0.75 + s * 4 * np.cos(a), oh, ow)
        elif m == "static":
            obj = _rect(size, size, size * 0.06, (size - ow) / 2, oh, ow)
        elif m == "sweep":
            span = size + ow
            left = ((t * 1.5 * s + phase * 3) % span) - ow
            obj = _rect(size, size, size * 0.4, left, oh, ow)
        else:
            raise ValueError(f"unknown motion {m!r}")
        in_view = ((t + vis_phase) % vis_period) / vis_period < vis_duty
        if m in ("raise", "sweep"):
            in_view = True  # these scripts already leave the frame on their own
        if in_view and obj is not None and obj.any():
            masks[activity.object_class] = obj
        out.append(masks)
    return out


def _seed_int(seed) -> int:
    return int(seed) & 0xFFFFFFFF


def generate_clip(domain: DomainSpec, activity: ActivitySpec, seed, n_frames: int = 96,
                  size: int = 64):
    """Render one clip; returns ``(frames, detections, label)``.

    Detections carry the visible part of each instance as its mask and
    score 1.0.
    """
    scripts = script_masks(activity, seed, n_frames, size)
    rng = np.random.default_rng([_seed_int(seed), domain.domain_id, 2])
    bg = np.array(domain.background) + rng.normal(0, domain.background_spread, 3)
    yy, xx = np.mgrid[0:size + 2 * domain.jitter, 0:size + 2 * domain.jitter]
    proj = xx * np.cos(domain.texture_angle) + yy * np.sin(domain.texture_angle)
    texture = domain.texture_amplitude * np.sin(2 * np.pi * proj / domain.texture_period)
    colors = {PERSON: np.array(domain.actor_color)}
    colors.update({k: np.array(v) for k, v in domain.object_colors.items()})

    frames = np.empty((n_frames, size, size, 3), dtype=np.uint8)
    dets = []
    for t, masks in enumerate(scripts):
        dy, dx = rng.integers(0, 2 * domain.jitter + 1, 2)
        img = bg + texture[dy:dy + size, dx:dx + size, None]
        visible = {}
        # actor at the back, the activity object on top
        for cls in sorted(masks, key=lambda c: c != PERSON):
            m = masks[cls]
            img[m] = colors[cls]
            for other in visible:
                visible[other] &= ~m
            visible[cls] = m.copy()
        img = img + rng.normal(0, domain.noise, img.shape)
        frames[t] = np.clip(np.rint(img), 0, 255).astype(np.uint8)
        dets.append([Detection(cls, 1.0, m) for cls, m in sorted(visible.items()) if m.any()])
    return frames, ClipDetections(dets), activity.activity_id


# -- datasets ------------------------------------------------------------------

@dataclass
class ClipRecord:
    clip_id: str
    domain: int
    activity: int
    label: int
    split: str
    seed: int
    frames_dir: Optional[str] = None


@dataclass
class DatasetManifest:
    seed: int
    domains: List[int]
    activities: List[str]
    unseen_domain: int
    n_frames: int
    size: int
    clips: List[ClipRecord] = field(default_factory=list)
    detections: Optional[str] = None

    def split(self, name: str) -> List[ClipRecord]:
        if name not in SPLITS:
            raise KeyError(f"unknown split {name!r}")
        return [c for c in self.clips if c.split == name]

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "clips"}
        d["clips"] = [c.__dict__ for c in self.clips]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "DatasetManifest":
        d = dict(d)
        clips = [ClipRecord(**c) for c in d.pop("clips")]
        return cls(clips=clips, **d)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        return cls.from_json(json.loads(Path(path).read_text()))


def clip_seed(dataset_seed: int, clip_id: str) -> int:
    return int(np.random.SeedSequence([dataset_seed, zlib.crc32(clip_id.encode())]).generate_state(1)[0])


def generate_dataset(domains: Sequence[int] = (0, 1, 2), activities: Sequence[ActivitySpec] = DEFAULT_ACTIVITIES,
                     clips_per_cell: int = 10, unseen_domain: Optional[int] = None, seed: int = 0,
                     seen_test_fraction: float = 0.25, n_frames: int = 96, size: int = 64,
                     out=None) -> "ClipDataset":
    """Balanced clips per (domain, activity); the unseen domain never enters training.

    Seen-domain cells put ``seen_test_fraction`` of their clips in the seen
    test split. With ``out`` the frames (PNG), detections (JSON lines) and
    manifest are written to disk.
    """
    domains = list(domains)
    if len(domains) < 2:
        raise ValueError("need at least 2 domains")
    if unseen_domain is None:
        unseen_domain = domains[-1]
    if unseen_domain not in domains:
        raise ValueError(f"unseen domain {unseen_domain} not among {domains}")
    if clips_per_cell < 1:
        raise ValueError("clips_per_cell must be positive")
    n_seen_test = int(round(clips_per_cell * seen_test_fraction))
    manifest = DatasetManifest(seed, domains, [a.name for a in activities], unseen_domain,
                               n_frames, size)
    for d in domains:
        for a in activities:
            for k in range(clips_per_cell):
                cid = f"d{d}_a{a.activity_id}_{k:03d}"
                if d == unseen_domain:
                    split = UNSEEN
                else:
                    split = SEEN if k >= clips_per_cell - n_seen_test else TRAIN
                manifest.clips.append(ClipRecord(cid, d, a.activity_id, a.activity_id, split,
                                                 clip_seed(seed, cid)))
    ds = ClipDataset(manifest, activities=activities)
    if out is not None:
        ds.write(out)
    return ds


class ClipDataset:
    """Clips listed in a manifest, read from disk or regenerated on demand."""

    def __init__(self, manifest: DatasetManifest, root=None,
                 activities: Sequence[ActivitySpec] = DEFAULT_ACTIVITIES):
        self.manifest = manifest
        self.root = Path(root) if root is not None else None
        self.activities = {a.activity_id: a for a in activities}
        self._domains = {d: DomainSpec.create(d, manifest.seed) for d in manifest.domains}
        self._dets = None

    @classmethod
    def open(cls, root) -> "ClipDataset":
        root = Path(root)
        return cls(DatasetManifest.read(root / "manifest.json"), root)

    def records(self, split: str) -> List[ClipRecord]:
        return self.manifest.split(split)

    def generate(self, rec: ClipRecord) -> RawClip:
        frames, dets, label = generate_clip(self._domains[rec.domain], self.activities[rec.activity],
                                            rec.seed, self.manifest.n_frames, self.manifest.size)
        dets.clip_id = rec.clip_id
        return RawClip(rec.clip_id, frames, dets, label, rec.domain)

    def load(self, rec: ClipRecord) -> RawClip:
        if self.root is None or rec.frames_dir is None:
            return self.generate(rec)
        if self._dets is None:
            self._dets = {d.clip_id: d for d in iter_detections(self.root / self.manifest.detections)}
        frames = read_frames(self.root / rec.frames_dir)
        return RawClip(rec.clip_id, frames, self._dets[rec.clip_id], rec.label, rec.domain)

    def loaders(self, split: str):
        """Zero-argument callables, one per clip, each returning a :class:`RawClip`."""
        return [partial(self.load, rec) for rec in self.records(split)]

    def write(self, out) -> None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        self.manifest.detections = "detections.jsonl"
        all_dets = []
        for rec in self.manifest.clips:
            clip = self.generate(rec)
            rec.frames_dir = f"frames/{rec.clip_id}"
            write_frames(out / rec.frames_dir, clip.frames)
            all_dets.append(clip.dets)
        write_detections(out / self.manifest.detections, all_dets)
        self.manifest.write(out / "manifest.json")
        self.root = out


class BONDataset(ClipDataset):
    """Loader slot for the real BON egocentric recordings.

    Takes the same manifest and detection-file formats as the synthetic
    data; reading the actual videos is not implemented.
    """

    def generate(self, rec):
        raise NotImplementedError("BON clips must be read from disk")

    def load(self, rec):
        raise NotImplementedError("reading BON videos is not implemented")
