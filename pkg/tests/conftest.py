import numpy as np
import pytest
import torch

from adaprep.detections import ClipDetections, Detection


def random_clip(rng, n=None, num_classes=80, max_dets=6, shape=None):
    """Random detections; with ``shape`` each detection gets a random blob mask."""
    n = n if n is not None else int(rng.integers(1, 9))
    frames = []
    for _ in range(n):
        frame = []
        for _ in range(int(rng.integers(0, max_dets + 1))):
            mask = None
            if shape is not None:
                mask = rng.random(shape) < rng.uniform(0.05, 0.5)
            frame.append(Detection(int(rng.integers(0, num_classes)),
                                   float(rng.choice([1.0, rng.random()])), mask))
        frames.append(frame)
    return ClipDetections(frames)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, ok, detail)``."""
    def record(number, ok, detail=""):
        CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
