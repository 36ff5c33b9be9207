"""Reference baseline trackers operating on precomputed detections.

Four detection-driven baselines (tbyd, sort, tbyd+sort, ltmu) plus built-in
test trackers (oracle, static, noisy_oracle, delayed_oracle). Every tracker
implements the same two-method interface the protocols drive:

    init(frame_index, box)      start tracking from a known box
    update(frame_index) -> box  produce the box for a later frame

Trackers are constructed per run from a RunContext carrying the sequence
annotations and, for detection-driven baselines, a DetectionSet. A single
instance is single-run state and must not be reused across runs.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from fpvbench.dataset import DetectionSet, Sequence
from fpvbench.geometry import BoundingBox, iou


class BaselineError(RuntimeError):
    """A baseline tracker failed (bad configuration or numeric blow-up)."""


@dataclass(frozen=True)
class RunContext:
    """Per-run inputs a baseline may consume."""

    sequence: Sequence
    detections: DetectionSet | None = None

    def objects(self, index: int):
        if self.detections is None:
            return ()
        return self.detections.objects(index)


def _best_detection(dets, reference: BoundingBox, min_iou: float, strict: bool):
    """Detection with the largest IoU against reference, or None.

    Ties on IoU prefer the higher score, then file order. With strict=True
    the overlap must exceed min_iou, otherwise it must reach it.
    """
    best = None
    best_key = None
    for det in dets:
        ov = iou(det.box, reference)
        if (ov <= min_iou) if strict else (ov < min_iou):
            continue
        key = (ov, det.score)
        if best_key is None or key > best_key:
            best = det
            best_key = key
    return best


class TbydTracker:
    """Tracking-by-detection with a memorized reference box.

    Each step selects the object detection with the largest positive IoU
    against the memorized box; that detection becomes both the output and
    the new memory. Without any overlapping detection the memorized box is
    given as output, unchanged.
    """

    def __init__(self, context: RunContext):
        self.context = context
        self.memorized: BoundingBox | None = None

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.memorized = box

    def update(self, frame_index: int) -> BoundingBox:
        best = _best_detection(
            self.context.objects(frame_index), self.memorized, 0.0, strict=True
        )
        if best is not None:
            self.memorized = best.box
        return self.memorized


def _box_to_z(box: BoundingBox) -> np.ndarray:
    return np.array([box.cx, box.cy, box.area, box.w / box.h], dtype=np.float64)


def _x_to_box(x: np.ndarray) -> BoundingBox:
    s = max(float(x[2]), 1e-6)
    r = max(float(x[3]), 1e-6)
    w = math.sqrt(s * r)
    h = s / w
    return BoundingBox(float(x[0]) - w / 2.0, float(x[1]) - h / 2.0, w, h)


class KalmanBoxTrack:
    """Constant-velocity Kalman filter on (u, v, s, r) and their rates.

    State is (u, v, s, r, du, dv, ds): box center, area, and aspect ratio,
    with the aspect ratio held constant. Noise constants follow the usual
    reference defaults for this motion model. Single-target mode: the track
    is never deleted.
    """

    def __init__(self, box: BoundingBox):
        self.x = np.zeros(7, dtype=np.float64)
        self.x[:4] = _box_to_z(box)
        self.P = np.diag([10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4])
        self.F = np.eye(7)
        self.F[0, 4] = self.F[1, 5] = self.F[2, 6] = 1.0
        self.H = np.zeros((4, 7))
        self.H[:4, :4] = np.eye(4)
        self.R = np.diag([1.0, 1.0, 10.0, 10.0])
        self.Q = np.diag([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 0.0001])

    def _check(self) -> None:
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.P))):
            raise BaselineError("Kalman state is non-finite")

    def _clamp(self) -> None:
        self.x[2] = max(self.x[2], 1e-6)
        self.x[3] = max(self.x[3], 1e-6)

    def predict(self) -> None:
        if self.x[2] + self.x[6] <= 0.0:
            self.x[6] = 0.0
        self.x = self.F @ self.x
        self.P = self.F @ self.P @ self.F.T + self.Q
        self._clamp()
        self._check()

    def update(self, box: BoundingBox) -> None:
        z = _box_to_z(box)
        y = z - self.H @ self.x
        S = self.H @ self.P @ self.H.T + self.R
        K = np.linalg.solve(S, self.H @ self.P).T
        self.x = self.x + K @ y
        self.P = (np.eye(7) - K @ self.H) @ self.P
        self._clamp()
        self._check()

    def box(self) -> BoundingBox:
        return _x_to_box(self.x)

    @property
    def velocity(self) -> np.ndarray:
        return self.x[4:].copy()


class SortTracker:
    """Single-track variant: detections associate to the one Kalman track.

    Each frame the filter predicts, the detection with the largest IoU
    against the predicted box (gated at iou_min) feeds a measurement
    update, and the filtered state is the output. An empty or disjoint
    detection set leaves the frame as a pure predict.
    """

    def __init__(self, context: RunContext, iou_min: float = 0.3):
        self.context = context
        self.iou_min = float(iou_min)
        self.track: KalmanBoxTrack | None = None

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.track = KalmanBoxTrack(box)

    def update(self, frame_index: int) -> BoundingBox:
        self.track.predict()
        best = _best_detection(
            self.context.objects(frame_index),
            self.track.box(),
            self.iou_min,
            strict=False,
        )
        if best is not None:
            self.track.update(best.box)
        return self.track.box()


class TbydSortTracker:
    """Tracking-by-detection with Kalman smoothing of the selected box.

    Association runs against the memorized box exactly as in tbyd; the
    chosen detection feeds the filter and the filtered box is both output
    and the new memory. Frames without an overlapping detection output the
    memorized box while the filter coasts on prediction alone.
    """

    def __init__(self, context: RunContext):
        self.context = context
        self.memorized: BoundingBox | None = None
        self.track: KalmanBoxTrack | None = None

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.memorized = box
        self.track = KalmanBoxTrack(box)

    def update(self, frame_index: int) -> BoundingBox:
        best = _best_detection(
            self.context.objects(frame_index), self.memorized, 0.0, strict=True
        )
        self.track.predict()
        if best is not None:
            self.track.update(best.box)
            self.memorized = self.track.box()
        return self.memorized


class DetectionVerifier:
    """Proxy verifier: confidence is the best IoU of any object detection."""

    def __init__(self, context: RunContext):
        self.context = context

    def __call__(self, frame_index: int, box: BoundingBox) -> float:
        overlaps = [iou(d.box, box) for d in self.context.objects(frame_index)]
        return max(overlaps, default=0.0)


class DetectionRedetector:
    """Proxy redetector: the frame's object detections as (box, score)."""

    def __init__(self, context: RunContext):
        self.context = context

    def __call__(self, frame_index: int):
        return [(d.box, d.score) for d in self.context.objects(frame_index)]


class LtmuTracker:
    """Long-term scheme: short-term tracker, verifier gate, re-detection.

    Every step runs the short-term tracker and scores its box with the
    verifier. Confident boxes pass through and refresh the last known
    position. Otherwise up to K score-ranked candidates come from the
    redetector (falling back to the last known position when it returns
    nothing), each is verified, and the most confident one is output with
    the short-term tracker re-initialized on it.

    The short-term tracker may expose a presence() score; the combine rule
    selects how it merges with verifier confidence ("verifier" ignores it,
    "and" takes the min, "or" the max).
    """

    def __init__(
        self,
        short_term,
        verifier,
        redetector,
        tau: float = 0.5,
        top_k: int = 10,
        combine: str = "verifier",
    ):
        if not 0.0 <= tau <= 1.0:
            raise BaselineError(f"tau must be in [0,1], got {tau}")
        if top_k < 1:
            raise BaselineError(f"top_k must be >= 1, got {top_k}")
        if combine not in ("verifier", "and", "or"):
            raise BaselineError(f"unknown combine rule {combine!r}")
        self.short_term = short_term
        self.verifier = verifier
        self.redetector = redetector
        self.tau = float(tau)
        self.top_k = int(top_k)
        self.combine = combine
        self.last_position: BoundingBox | None = None

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.short_term.init(frame_index, box)
        self.last_position = box

    def _confidence(self, frame_index: int, box: BoundingBox) -> float:
        conf = float(self.verifier(frame_index, box))
        if self.combine == "verifier":
            return conf
        presence = getattr(self.short_term, "presence", None)
        if presence is None:
            return conf
        p = float(presence())
        return min(conf, p) if self.combine == "and" else max(conf, p)

    def update(self, frame_index: int) -> BoundingBox:
        box = self.short_term.update(frame_index)
        if self._confidence(frame_index, box) >= self.tau:
            self.last_position = box
            return box
        ranked = sorted(self.redetector(frame_index), key=lambda c: -c[1])
        candidates = [c[0] for c in ranked[: self.top_k]]
        if not candidates:
            candidates = [self.last_position]
        best = None
        best_conf = -1.0
        for cand in candidates:
            conf = float(self.verifier(frame_index, cand))
            if conf > best_conf:
                best = cand
                best_conf = conf
        self.short_term.init(frame_index, best)
        return best


class OracleTracker:
    """Echoes ground truth, repeating the last box over absent stretches."""

    def __init__(self, context: RunContext):
        self.context = context
        self.last: BoundingBox | None = None

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.last = box

    def update(self, frame_index: int) -> BoundingBox:
        target = self.context.sequence.frames[frame_index].target
        if target is not None:
            self.last = target
        return self.last


class StaticTracker:
    """Repeats the initialization box forever."""

    def __init__(self, context: RunContext):
        self.box: BoundingBox | None = None

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.box = box

    def update(self, frame_index: int) -> BoundingBox:
        return self.box


class NoisyOracleTracker:
    """Ground truth with seeded multiplicative/additive jitter of scale sigma."""

    def __init__(self, context: RunContext, sigma: float = 0.05, seed: int = 0):
        if sigma < 0:
            raise BaselineError(f"sigma must be non-negative, got {sigma}")
        self.context = context
        self.sigma = float(sigma)
        self.rng = random.Random(seed)
        self.last: BoundingBox | None = None

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.last = box

    def update(self, frame_index: int) -> BoundingBox:
        target = self.context.sequence.frames[frame_index].target
        if target is not None:
            self.last = target
        base = self.last
        cx = base.cx + self.rng.gauss(0.0, 1.0) * self.sigma * base.w
        cy = base.cy + self.rng.gauss(0.0, 1.0) * self.sigma * base.h
        w = base.w * math.exp(self.sigma * self.rng.gauss(0.0, 1.0))
        h = base.h * math.exp(self.sigma * self.rng.gauss(0.0, 1.0))
        return BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h)


class DelayedOracleTracker:
    """Ground truth lagged by k processed frames (init box during warm-up)."""

    def __init__(self, context: RunContext, k: int = 5):
        if k < 0:
            raise BaselineError(f"k must be non-negative, got {k}")
        self.context = context
        self.k = int(k)
        self.history: list[BoundingBox] = []

    def init(self, frame_index: int, box: BoundingBox) -> None:
        self.history = [box]

    def update(self, frame_index: int) -> BoundingBox:
        target = self.context.sequence.frames[frame_index].target
        self.history.append(target if target is not None else self.history[-1])
        if len(self.history) > self.k + 1:
            return self.history[-1 - self.k]
        return self.history[0]


def _make_ltmu(context: RunContext, **params) -> LtmuTracker:
    return LtmuTracker(
        short_term=TbydTracker(context),
        verifier=DetectionVerifier(context),
        redetector=DetectionRedetector(context),
        **params,
    )


BASELINES = {
    "tbyd": TbydTracker,
    "sort": SortTracker,
    "tbyd+sort": TbydSortTracker,
    "ltmu": _make_ltmu,
    "oracle": OracleTracker,
    "static": StaticTracker,
    "noisy_oracle": NoisyOracleTracker,
    "delayed_oracle": DelayedOracleTracker,
}


def create_baseline(name: str, context: RunContext, **params):
    """Instantiate a registered baseline for one run."""
    if name not in BASELINES:
        known = ", ".join(sorted(BASELINES))
        raise BaselineError(f"unknown baseline {name!r} (known: {known})")
    try:
        return BASELINES[name](context, **params)
    except TypeError as exc:
        raise BaselineError(f"bad parameters for baseline {name!r}: {exc}") from None


def parse_params(text: str) -> dict:
    """Parse "k=v,k=v" baseline parameters with numeric/bool coercion."""
    params: dict = {}
    if not text:
        return params
    for item in text.split(","):
        if "=" not in item:
            raise BaselineError(f"bad parameter {item!r}; expected key=value")
        key, value = item.split("=", 1)
        key = key.strip()
        value = value.strip()
        if value.lower() in ("true", "false"):
            params[key] = value.lower() == "true"
            continue
        try:
            params[key] = int(value)
        except ValueError:
            try:
                params[key] = float(value)
            except ValueError:
                params[key] = value
    return params
