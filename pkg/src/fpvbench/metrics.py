"""The three performance measures: SS, NPS, and GSR.

All three compare a tracker's boxes with temporally aligned ground truth
over the evaluation frames of a run (frames after the initialization frame
in which the ground truth is present; annotated-absent frames are never
scored).

The scalar summaries are exact closed forms of the continuous area under
the corresponding plot:

* success score SS        = mean per-frame IoU,
* normalized precision    = mean of 1 - min(d, 0.5) / 0.5 over the
  score NPS                 box-size-normalized center errors d,
* generalized success     = mean over collapse thresholds in [0, 0.5] of
  robustness GSR            the normalized run extent survived before the
                            first frame whose overlap drops to or below
                            the threshold.

The sampled curves exist for plotting and serialization only; the scalars
never depend on the sampling grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fpvbench import kernels

SUCCESS_THRESHOLDS = np.arange(101) / 100.0
PRECISION_THRESHOLDS = np.arange(51) / 100.0
ROBUSTNESS_THRESHOLDS = np.arange(51) / 100.0


class EmptySeriesError(ValueError):
    """A run produced no evaluation frame with ground truth."""


@dataclass(frozen=True)
class Curve:
    """Threshold-indexed plot samples; thresholds strictly increasing."""

    thresholds: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) != len(self.values):
            raise ValueError("thresholds and values differ in length")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds not strictly increasing")

    def to_csv(self) -> str:
        lines = ["threshold,value"]
        for t, v in zip(self.thresholds, self.values):
            lines.append(f"{t!r},{v!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Scores:
    ss: float
    nps: float
    gsr: float

    def mean(self) -> float:
        return (self.ss + self.nps + self.gsr) / 3.0

    def as_dict(self) -> dict:
        return {"ss": self.ss, "nps": self.nps, "gsr": self.gsr}


def _as_series(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise EmptySeriesError("empty overlap/distance series")
    return arr


def success(ious) -> tuple[Curve, float]:
    """Success plot over 101 thresholds plus its exact AUC (= mean IoU)."""
    arr = _as_series(ious)
    values = kernels.fraction_above(arr, SUCCESS_THRESHOLDS)
    ss = math.fsum(arr.tolist()) / arr.size
    return Curve(tuple(SUCCESS_THRESHOLDS.tolist()), tuple(values.tolist())), ss


def norm_precision(distances) -> tuple[Curve, float]:
    """Normalized precision plot over [0, 0.5] plus its exact AUC / 0.5."""
    arr = _as_series(distances)
    if np.any(arr < 0):
        raise ValueError("negative center distance")
    values = kernels.fraction_below(arr, PRECISION_THRESHOLDS)
    nps = math.fsum((1.0 - min(d, 0.5) / 0.5) for d in arr.tolist()) / arr.size
    return Curve(tuple(PRECISION_THRESHOLDS.tolist()), tuple(values.tolist())), nps


def gsr(ious) -> tuple[Curve, float]:
    """Generalized success robustness plot over [0, 0.5] plus its mean.

    For a threshold t the plot value is the fraction of evaluation frames
    strictly before the first frame with IoU <= t (1.0 when the run never
    collapses). The curve is monotone non-increasing in t.
    """
    arr = _as_series(ious)
    extents = kernels.extent_before_collapse(arr, ROBUSTNESS_THRESHOLDS)
    score = math.fsum(extents.tolist()) / extents.size
    return Curve(tuple(ROBUSTNESS_THRESHOLDS.tolist()), tuple(extents.tolist())), score


def run_series(run, seq, eval_range=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-evaluation-frame IoU and normalized center distance of a run.

    Evaluation frames are the run's frames after the initialization step
    whose ground truth is present, optionally restricted to the half-open
    sequence-index interval ``eval_range``. Run order is respected, so
    backward runs evaluate in reversed index order.
    """
    from fpvbench.geometry import boxes_to_array

    preds = []
    gts = []
    for step, frame_index in enumerate(run.frame_indices):
        if step == 0:
            continue
        if eval_range is not None and not (eval_range[0] <= frame_index < eval_range[1]):
            continue
        target = seq.frames[frame_index].target
        if target is None:
            continue
        preds.append(run.boxes[step])
        gts.append(target)
    if not preds:
        raise EmptySeriesError(
            f"run over {seq.name!r} has no evaluation frame with ground truth"
        )
    pred_arr = boxes_to_array(preds)
    gt_arr = boxes_to_array(gts)
    ious = kernels.iou_pairs(pred_arr, gt_arr)
    dists = kernels.center_dist_pairs(pred_arr, gt_arr)
    return ious, dists


def score_series(ious, dists) -> Scores:
    _, ss = success(ious)
    _, nps = norm_precision(dists)
    _, robustness = gsr(ious)
    return Scores(ss=ss, nps=nps, gsr=robustness)


def score_run(run, seq, eval_range=None) -> Scores:
    """Scores of an aligned run, skipping annotated-absent frames."""
    ious, dists = run_series(run, seq, eval_range)
    return score_series(ious, dists)


def mean_scores(scores: list[Scores], weights=None) -> Scores:
    """Weighted mean of Scores; unweighted when weights is None."""
    if not scores:
        raise ValueError("no scores to average")
    if weights is None:
        weights = [1.0] * len(scores)
    total = math.fsum(weights)
    if total <= 0:
        raise ValueError("non-positive total weight")
    return Scores(
        ss=math.fsum(s.ss * w for s, w in zip(scores, weights)) / total,
        nps=math.fsum(s.nps * w for s, w in zip(scores, weights)) / total,
        gsr=math.fsum(s.gsr * w for s, w in zip(scores, weights)) / total,
    )


def mean_curve(curves: list[Curve], weights=None) -> Curve:
    """Pointwise weighted mean of curves sharing one threshold grid."""
    if not curves:
        raise ValueError("no curves to average")
    grid = curves[0].thresholds
    for c in curves[1:]:
        if c.thresholds != grid:
            raise ValueError("curves sampled on different grids")
    if weights is None:
        weights = [1.0] * len(curves)
    total = math.fsum(weights)
    values = tuple(
        math.fsum(c.values[i] * w for c, w in zip(curves, weights)) / total
        for i in range(len(grid))
    )
    return Curve(grid, values)
