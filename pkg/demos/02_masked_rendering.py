"""Rendering a masked frame stack from detection masks.

Writes ``raw.png`` and ``masked.png`` side by side into the current
directory (or the path given as the first argument).
"""
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from adaprep import (CUP, PERSON, RAW, ClipDetections, Detection, FrameStack,
                     default_palette, render_masked_stack)

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
h = w = 64
yy, xx = np.mgrid[:h, :w]
frame = np.stack([xx * 4, yy * 4, np.full((h, w), 128)], -1).astype(np.uint8)

person = (yy - 34) ** 2 / 20 ** 2 + (xx - 30) ** 2 / 12 ** 2 < 1
cup = (abs(yy - 40) < 6) & (abs(xx - 40) < 5)
dets = ClipDetections([[Detection(PERSON, 0.9, person), Detection(CUP, 0.95, cup)]])

palette = default_palette(80, seed=0)
masked = render_masked_stack(FrameStack(frame[None], RAW), dets, palette).frames[0]

# The cup overlaps the person and wins on score. Blend is floor((pixel + colour) / 2).
y, x = 40, 40
print("pixel", frame[y, x], "cup colour", palette.colors[CUP], "->", masked[y, x])
print("background stays black:", masked[0, 0])

Image.fromarray(np.concatenate([frame, masked], axis=1)).save(out_dir / "masked.png")
print("wrote", out_dir / "masked.png")
