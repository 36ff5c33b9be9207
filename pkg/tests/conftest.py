"""Shared synthetic fixtures: sequences, detections, and on-disk datasets.

Everything here is seeded and deterministic so tests can assert exact
values and byte-identical artifacts.
"""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from fpvbench.dataset import (
    Detection,
    DetectionSet,
    FrameAnnotation,
    Sequence,
    recompute_attributes,
    write_detections,
    write_sequence,
)
from fpvbench.geometry import BoundingBox

FRAME_W = 320.0
FRAME_H = 240.0

DECOY = BoundingBox(2.0, 2.0, 20.0, 16.0)


def overlap_series(rng, n):
    """Seeded overlap trace shaped like a real run: hold above 0.5 until an
    optional sharp failure, one transition frame, then near-zero.

    Series that linger mid-band (0.25, 0.5) make the 51-point threshold mean
    diverge from a dense grid by up to ~0.02 (a full-height extent step at
    threshold k/100 weighs k/51 coarse vs k/50.01 dense), so the generator
    keeps held overlaps above that band the way trackers do.
    """
    out = []
    u = rng.uniform(0.7, 0.95)
    fail = rng.randrange(n) if rng.random() < 0.8 else None
    for i in range(n):
        if fail is None or i < fail:
            u = min(max(u + rng.gauss(0, 0.04), 0.55), 0.98)
            out.append(u)
        elif i == fail:
            out.append(u * rng.uniform(0.3, 0.6))
        else:
            out.append(0.0 if rng.random() < 0.7 else rng.uniform(0.0, 0.08))
    return out


def linear_sequence(name="line", n=30, fps=30.0, start=(60.0, 60.0),
                    size=(30.0, 24.0), step=(4.0, 0.0),
                    absent=()) -> Sequence:
    """Constant-velocity target; frames listed in `absent` lose the target."""
    frames = []
    for i in range(n):
        if i in absent:
            frames.append(FrameAnnotation(target=None))
            continue
        box = BoundingBox(
            start[0] + step[0] * i, start[1] + step[1] * i, size[0], size[1]
        )
        frames.append(FrameAnnotation(target=box))
    return Sequence(
        name=name, fps=float(fps), frame_width=FRAME_W, frame_height=FRAME_H,
        frames=tuple(frames),
    )


def static_sequence(name="still", n=20, fps=30.0,
                    box=BoundingBox(100.0, 80.0, 40.0, 30.0)) -> Sequence:
    frames = tuple(FrameAnnotation(target=box) for _ in range(n))
    return Sequence(
        name=name, fps=float(fps), frame_width=FRAME_W, frame_height=FRAME_H,
        frames=frames,
    )


def oracle_detections(seq: Sequence, score=0.9, decoy=True,
                      valid_from=0) -> DetectionSet:
    """Detections that mirror the annotations exactly.

    Object detections reproduce the target box (plus a disjoint low-score
    decoy); hand detections reproduce the hand boxes, flagged in-contact on
    interacting frames. Frames before `valid_from` get the decoy only,
    which makes detector-delay fixtures one argument away.
    """
    per_frame = []
    for i, fr in enumerate(seq.frames):
        dets = []
        if fr.target is not None and i >= valid_from:
            dets.append(Detection(box=fr.target, score=score, kind="object"))
        if decoy:
            dets.append(Detection(box=DECOY, score=0.5, kind="object"))
        contact = fr.interaction != "NONE"
        if fr.left_hand is not None:
            dets.append(Detection(box=fr.left_hand, score=score,
                                  kind="left_hand", contact=contact))
        if fr.right_hand is not None:
            dets.append(Detection(box=fr.right_hand, score=score,
                                  kind="right_hand", contact=contact))
        per_frame.append(tuple(dets))
    return DetectionSet(frames=tuple(per_frame))


def interaction_sequence(name="touch", n=30, fps=30.0, run_start=8,
                         run_length=10, label="RHI") -> Sequence:
    """Moving target with hands on every frame and one interaction run."""
    frames = []
    for i in range(n):
        target = BoundingBox(60.0 + 2.0 * i, 80.0, 32.0, 26.0)
        left = BoundingBox(30.0 + 2.0 * i, 120.0, 26.0, 22.0)
        right = BoundingBox(96.0 + 2.0 * i, 118.0, 26.0, 22.0)
        interacting = run_start <= i < run_start + run_length
        frames.append(FrameAnnotation(
            target=target, left_hand=left, right_hand=right,
            interaction=label if interacting else "NONE",
        ))
    return Sequence(
        name=name, fps=float(fps), frame_width=FRAME_W, frame_height=FRAME_H,
        frames=tuple(frames),
    )


def _random_sequence(name: str, rng: random.Random) -> Sequence:
    n = rng.randint(24, 40)
    fps = rng.choice([10.0, 20.0, 30.0])
    w = rng.uniform(22.0, 40.0)
    h = rng.uniform(18.0, 34.0)
    x = rng.uniform(60.0, 180.0)
    y = rng.uniform(50.0, 140.0)
    vx = rng.uniform(-3.0, 3.0)
    vy = rng.uniform(-2.0, 2.0)
    absent: set[int] = set()
    if rng.random() < 0.4:
        gap_start = rng.randint(n // 2, n - 6)
        absent = set(range(gap_start, gap_start + rng.randint(2, 4)))
    with_hands = rng.random() < 0.6
    run_start = rng.randint(2, 8)
    run_length = rng.randint(5, 9)
    label = rng.choice(["LHI", "RHI", "BHI"])
    frames = []
    for i in range(n):
        x = min(max(x + vx, 48.0), FRAME_W - 60.0 - w)
        y = min(max(y + vy, 40.0), FRAME_H - 50.0 - h)
        scale = 1.0 + 0.25 * rng.random() if rng.random() < 0.1 else 1.0
        bw = min(w * scale, 60.0)
        bh = min(h * scale, 50.0)
        if i in absent:
            frames.append(FrameAnnotation(target=None))
            continue
        target = BoundingBox(x, y, bw, bh)
        if not with_hands:
            frames.append(FrameAnnotation(target=target))
            continue
        left = BoundingBox(max(2.0, x - 34.0), min(y + 30.0, FRAME_H - 26.0),
                           24.0, 20.0)
        right = BoundingBox(min(x + bw + 8.0, FRAME_W - 26.0),
                            min(y + 28.0, FRAME_H - 26.0), 24.0, 20.0)
        interacting = run_start <= i < run_start + run_length and i not in absent
        frames.append(FrameAnnotation(
            target=target, left_hand=left, right_hand=right,
            interaction=label if interacting else "NONE",
        ))
    seq = Sequence(
        name=name, fps=fps, frame_width=FRAME_W, frame_height=FRAME_H,
        frames=tuple(frames),
        verb=rng.choice(["take", "put", "wash", "cut"]),
        noun=rng.choice(["cup", "knife", "sponge", "pan"]),
    )
    extras = {c for c in ("IV", "ROT", "POC", "HM") if rng.random() < 0.3}
    if with_hands:
        extras.add("2H" if label == "BHI" else "1H")
    return Sequence(
        name=seq.name, fps=seq.fps, frame_width=seq.frame_width,
        frame_height=seq.frame_height, frames=seq.frames,
        attributes=recompute_attributes(seq) | extras,
        verb=seq.verb, noun=seq.noun,
    )


def build_synthetic_dataset(root: Path, count: int = 10,
                            seed: int = 7) -> list[str]:
    """Write a deterministic multi-sequence dataset with detections."""
    rng = random.Random(seed)
    names = []
    for k in range(count):
        seq = _random_sequence(f"seq{k:02d}", rng)
        seq_dir = root / seq.name
        write_sequence(seq, seq_dir)
        write_detections(oracle_detections(seq), seq_dir / "detections.txt")
        names.append(seq.name)
    return names


@pytest.fixture(scope="session")
def synthetic_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("synthetic_dataset")
    build_synthetic_dataset(root)
    return root
