"""The five evaluation protocols.

OPE      one pass per sequence from frame 0, ground-truth initialization.
OPE-D    initialization from the first sufficiently overlapping object
         detection; paired against a ground-truth-initialized run from the
         same frame to isolate the effect of detector-driven starts.
MSE      multi-start: anchors every two seconds plus the terminal frame,
         runs forward or backward toward the longer side, length-weighted.
RTE      real-time: a simulated clock drops frames while the tracker is
         busy; skipped frames inherit the last output box.
HOI      hand-object interaction: per interaction run, start the tracker
         from the first valid detection and count matched frames.

Execution produces RunRecords (raw tracker exchanges plus protocol
metadata); scoring turns the records for one sequence into a
SequenceResult. Scoring is a pure function of the records and the dataset,
which is what makes stored runs re-reportable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from fpvbench import metrics
from fpvbench.baselines import BaselineError
from fpvbench.dataset import DatasetError, DetectionSet, Sequence
from fpvbench.geometry import iou
from fpvbench.metrics import EmptySeriesError, Scores
from fpvbench.runner import (
    RunnerError,
    TrackRun,
    TrackerHandle,
    open_session,
    session,
)

PROTOCOLS = ("ope", "oped", "mse", "rte", "hoi")

IOU_VALID = 0.5


class ProtocolError(ValueError):
    """Invalid protocol configuration or inputs."""


# ---------------------------------------------------------------------------
# Latency models (real-time protocol)


@dataclass(frozen=True)
class LatencyModel:
    """Per-frame tracker latency: constant, replayed trace, or wall clock.

    Deterministic modes exist so real-time behaviour is testable; live mode
    uses the measured duration of each exchange.
    """

    mode: str = "live"
    seconds: float = 0.0
    init_seconds: float | None = None
    trace: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode not in ("constant", "trace", "live"):
            raise ProtocolError(f"unknown latency mode {self.mode!r}")
        if self.seconds < 0 or (self.init_seconds is not None
                                and self.init_seconds < 0):
            raise ProtocolError("latency seconds must be non-negative")
        if any(t < 0 for t in self.trace):
            raise ProtocolError("latency trace values must be non-negative")

    def init_latency(self, frame_index: int, measured: float) -> float:
        if self.mode == "constant":
            return self.seconds if self.init_seconds is None else self.init_seconds
        if self.mode == "trace":
            return self._trace_at(frame_index)
        return measured

    def frame_latency(self, frame_index: int, measured: float) -> float:
        if self.mode == "constant":
            return self.seconds
        if self.mode == "trace":
            return self._trace_at(frame_index)
        return measured

    def _trace_at(self, frame_index: int) -> float:
        if frame_index >= len(self.trace):
            raise ProtocolError(
                f"latency trace has {len(self.trace)} entries; "
                f"frame {frame_index} requested"
            )
        return self.trace[frame_index]

    def describe(self) -> dict:
        out: dict = {"mode": self.mode}
        if self.mode == "constant":
            out["seconds"] = self.seconds
            if self.init_seconds is not None:
                out["init_seconds"] = self.init_seconds
        elif self.mode == "trace":
            out["entries"] = len(self.trace)
        return out


LIVE = LatencyModel(mode="live")


def parse_latency_model(text: str) -> LatencyModel:
    """Parse the CLI latency syntax.

    `live` | `constant:<seconds>[:<init_seconds>]` | `trace:<file>` where
    the trace file carries one latency in seconds per frame index.
    """
    parts = text.split(":")
    if parts[0] == "live":
        if len(parts) != 1:
            raise ProtocolError(f"live latency takes no arguments: {text!r}")
        return LIVE
    if parts[0] == "constant":
        if len(parts) not in (2, 3):
            raise ProtocolError(f"bad constant latency spec {text!r}")
        try:
            seconds = float(parts[1])
            init = float(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise ProtocolError(f"bad constant latency spec {text!r}") from None
        return LatencyModel(mode="constant", seconds=seconds, init_seconds=init)
    if parts[0] == "trace":
        if len(parts) != 2:
            raise ProtocolError(f"bad trace latency spec {text!r}")
        path = Path(parts[1])
        if not path.is_file():
            raise ProtocolError(f"latency trace file not found: {path}")
        lines = path.read_text(encoding="utf-8").split()
        try:
            values = tuple(float(v) for v in lines)
        except ValueError as exc:
            raise ProtocolError(f"{path}: {exc}") from None
        return LatencyModel(mode="trace", trace=values)
    raise ProtocolError(f"unknown latency model {text!r}")


# ---------------------------------------------------------------------------
# Run records


@dataclass(frozen=True)
class RunRecord:
    """One stored tracker execution plus protocol metadata.

    run is None when the protocol decided not to execute (for example an
    interaction run whose detector never fired); extra then says why.
    """

    run_id: str
    run: TrackRun | None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SequenceResult:
    """Scored outcome of one tracker on one sequence under one protocol."""

    sequence: str
    scores: Scores | None
    weight: float
    curves: dict
    extras: dict
    failures: tuple[str, ...] = ()
    skipped: str = ""


def _series_curves(ious, dists):
    success_curve, ss = metrics.success(ious)
    precision_curve, nps = metrics.norm_precision(dists)
    robustness_curve, gs = metrics.gsr(ious)
    scores = Scores(ss=ss, nps=nps, gsr=gs)
    curves = {
        "success": success_curve,
        "norm_precision": precision_curve,
        "robustness": robustness_curve,
    }
    return scores, curves


def _score_run(run: TrackRun, seq: Sequence):
    ious, dists = metrics.run_series(run, seq)
    return _series_curves(ious, dists)


# ---------------------------------------------------------------------------
# OPE


def ope_records(handle: TrackerHandle, seq: Sequence,
                detections: DetectionSet | None = None,
                timeout: float = 60.0) -> list[RunRecord]:
    init_box = seq.frames[0].target
    run = session(handle, seq, 0, init_box, range(1, seq.frame_count),
                  detections=detections, timeout=timeout)
    return [RunRecord(run_id="main", run=run)]


def score_ope(records: list[RunRecord], seq: Sequence,
              detections: DetectionSet | None = None,
              params: dict | None = None) -> SequenceResult:
    record = records[0]
    if record.run is None or record.run.failed:
        reason = record.run.failure if record.run is not None else "not executed"
        return SequenceResult(
            sequence=seq.name, scores=None, weight=1.0, curves={},
            extras={}, failures=(reason,), skipped="run failed",
        )
    try:
        scores, curves = _score_run(record.run, seq)
    except EmptySeriesError as exc:
        return SequenceResult(
            sequence=seq.name, scores=None, weight=1.0, curves={},
            extras={}, skipped=str(exc),
        )
    return SequenceResult(
        sequence=seq.name, scores=scores, weight=1.0, curves=curves, extras={},
    )


def run_ope(handle: TrackerHandle, seq: Sequence,
            detections: DetectionSet | None = None,
            timeout: float = 60.0):
    """Convenience one-sequence OPE: returns (TrackRun, Scores)."""
    records = ope_records(handle, seq, detections, timeout)
    result = score_ope(records, seq)
    if result.scores is None:
        raise ProtocolError(
            f"OPE run on {seq.name!r} produced no scores: "
            f"{result.skipped or result.failures}"
        )
    return records[0].run, result.scores


# ---------------------------------------------------------------------------
# OPE-D


def find_valid_detection(seq: Sequence, detections: DetectionSet):
    """Earliest frame with an object detection at IoU >= 0.5 with ground
    truth; returns (frame_index, detection) with the highest-scoring valid
    detection at that frame, or None."""
    for i in range(seq.frame_count):
        gt = seq.frames[i].target
        if gt is None:
            continue
        valid = [d for d in detections.objects(i) if iou(d.box, gt) >= IOU_VALID]
        if valid:
            return i, max(valid, key=lambda d: d.score)
    return None


def oped_records(handle: TrackerHandle, seq: Sequence,
                 detections: DetectionSet | None,
                 timeout: float = 60.0) -> list[RunRecord]:
    if detections is None:
        raise ProtocolError("OPE-D requires a detection set")
    found = find_valid_detection(seq, detections)
    if found is None:
        return [RunRecord(
            run_id="det_init", run=None,
            extra={"skipped": "no valid detection"},
        )]
    frame, det = found
    order = range(frame + 1, seq.frame_count)
    det_run = session(handle, seq, frame, det.box,
                      order, detections=detections, timeout=timeout)
    gt_run = session(handle, seq, frame, seq.frames[frame].target,
                     order, detections=detections, timeout=timeout)
    delay = {"delay": frame}
    return [
        RunRecord(run_id="det_init", run=det_run, extra=delay),
        RunRecord(run_id="gt_init", run=gt_run, extra=delay),
    ]


def score_oped(records: list[RunRecord], seq: Sequence,
               detections: DetectionSet | None = None,
               params: dict | None = None) -> SequenceResult:
    by_id = {r.run_id: r for r in records}
    det = by_id.get("det_init")
    if det is not None and det.run is None:
        return SequenceResult(
            sequence=seq.name, scores=None, weight=1.0, curves={},
            extras={}, skipped="no valid detection",
        )
    gt = by_id.get("gt_init")
    failures = tuple(
        r.run.failure for r in (det, gt)
        if r is not None and r.run is not None and r.run.failed
    )
    if failures or det is None or gt is None:
        return SequenceResult(
            sequence=seq.name, scores=None, weight=1.0, curves={},
            extras={}, failures=failures or ("incomplete record pair",),
            skipped="run failed",
        )
    try:
        det_scores, det_curves = _score_run(det.run, seq)
        gt_scores, _ = _score_run(gt.run, seq)
    except EmptySeriesError as exc:
        return SequenceResult(
            sequence=seq.name, scores=None, weight=1.0, curves={},
            extras={}, skipped=str(exc),
        )
    deltas = {
        "ss": det_scores.ss - gt_scores.ss,
        "nps": det_scores.nps - gt_scores.nps,
        "gsr": det_scores.gsr - gt_scores.gsr,
    }
    extras = {
        "delay": det.extra["delay"],
        "deltas": deltas,
        "gt_init": gt_scores.as_dict(),
    }
    return SequenceResult(
        sequence=seq.name, scores=det_scores, weight=1.0,
        curves=det_curves, extras=extras,
    )


def run_ope_d(handle: TrackerHandle, detections: DetectionSet, seq: Sequence,
              timeout: float = 60.0):
    """Convenience one-sequence OPE-D: returns (delta Scores dict, delay)
    or None when the sequence has no valid detection."""
    records = oped_records(handle, seq, detections, timeout)
    result = score_oped(records, seq, detections)
    if result.skipped == "no valid detection":
        return None
    if result.scores is None:
        raise ProtocolError(
            f"OPE-D on {seq.name!r} failed: {result.failures or result.skipped}"
        )
    return result.extras["deltas"], result.extras["delay"]


# ---------------------------------------------------------------------------
# MSE


@dataclass(frozen=True)
class Anchor:
    """Multi-start anchor: a present-target frame plus a run direction."""

    frame: int
    direction: str

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ProtocolError(f"bad anchor direction {self.direction!r}")

    def span(self, frame_count: int) -> int:
        if self.direction == "forward":
            return frame_count - self.frame
        return self.frame + 1

    def order(self, frame_count: int):
        """Frames after the anchor, in processing order."""
        if self.direction == "forward":
            return range(self.frame + 1, frame_count)
        return range(self.frame - 1, -1, -1)


def anchor_spacing(fps: float) -> int:
    """Anchors are separated by two seconds of video."""
    return max(1, round(2.0 * fps))


def mse_anchors(seq: Sequence) -> list[Anchor]:
    """Anchor set: candidates at multiples of the spacing plus the last
    frame. Inner candidates on absent-target frames shift forward until
    present, dropping out if they reach the next candidate or the end; an
    absent terminal anchor shifts backward. Directions point toward the
    longer side (ties forward)."""
    n = seq.frame_count
    spacing = anchor_spacing(seq.fps)
    candidates = list(range(0, n - 1, spacing))
    frames = []
    for idx, cand in enumerate(candidates):
        limit = candidates[idx + 1] if idx + 1 < len(candidates) else n - 1
        shifted = cand
        while shifted < limit and not seq.present(shifted):
            shifted += 1
        if shifted < limit:
            frames.append(shifted)
    # terminal anchor: shift backward over absent frames
    terminal = n - 1
    while terminal > 0 and not seq.present(terminal):
        terminal -= 1
    frames.append(terminal)
    unique = sorted(set(frames))
    anchors = []
    for a in unique:
        direction = "forward" if (n - a) >= (a + 1) else "backward"
        anchors.append(Anchor(frame=a, direction=direction))
    return anchors


def mse_records(handle: TrackerHandle, seq: Sequence,
                detections: DetectionSet | None = None,
                timeout: float = 60.0,
                anchors: list[Anchor] | None = None) -> list[RunRecord]:
    if anchors is None:
        anchors = mse_anchors(seq)
    records = []
    for anchor in anchors:
        init_box = seq.frames[anchor.frame].target
        if init_box is None:
            raise ProtocolError(
                f"anchor {anchor.frame} of {seq.name!r} has no ground truth"
            )
        run = session(handle, seq, anchor.frame, init_box,
                      anchor.order(seq.frame_count),
                      detections=detections, timeout=timeout)
        tag = "fwd" if anchor.direction == "forward" else "bwd"
        records.append(RunRecord(
            run_id=f"anchor_{anchor.frame:05d}_{tag}",
            run=run,
            extra={
                "anchor": anchor.frame,
                "direction": anchor.direction,
                "span": anchor.span(seq.frame_count),
            },
        ))
    return records


def score_mse(records: list[RunRecord], seq: Sequence,
              detections: DetectionSet | None = None,
              params: dict | None = None) -> SequenceResult:
    scored = []
    weights = []
    curves_list = []
    failures = []
    for record in records:
        if record.run is None or record.run.failed:
            failures.append(
                record.run.failure if record.run is not None else "not executed"
            )
            continue
        try:
            scores, curves = _score_run(record.run, seq)
        except EmptySeriesError:
            # sub-sequence with no evaluable frame contributes no weight
            continue
        scored.append(scores)
        weights.append(float(record.extra["span"]))
        curves_list.append(curves)
    if not scored:
        return SequenceResult(
            sequence=seq.name, scores=None, weight=float(seq.frame_count),
            curves={}, extras={}, failures=tuple(failures),
            skipped="no scoreable sub-sequence",
        )
    scores = metrics.mean_scores(scored, weights)
    curves = {
        name: metrics.mean_curve([c[name] for c in curves_list], weights)
        for name in curves_list[0]
    }
    return SequenceResult(
        sequence=seq.name, scores=scores, weight=float(seq.frame_count),
        curves=curves, extras={"sub_sequences": len(scored)},
        failures=tuple(failures),
    )


def run_mse(handle: TrackerHandle, seq: Sequence,
            detections: DetectionSet | None = None,
            timeout: float = 60.0,
            anchors: list[Anchor] | None = None) -> Scores:
    """Convenience one-sequence MSE: length-weighted Scores."""
    records = mse_records(handle, seq, detections, timeout, anchors)
    result = score_mse(records, seq)
    if result.scores is None:
        raise ProtocolError(
            f"MSE on {seq.name!r} failed: {result.failures or result.skipped}"
        )
    return result.scores


# ---------------------------------------------------------------------------
# RTE


def rte_records(handle: TrackerHandle, seq: Sequence,
                detections: DetectionSet | None = None,
                latency: LatencyModel = LIVE,
                timeout: float = 60.0) -> list[RunRecord]:
    """Real-time pass: frame i arrives at i/fps on a simulated clock.

    After finishing frame j at time T the tracker takes the most recent
    frame arrived by T (never older than j+1), waiting when it is ahead of
    the stream; the video ends once that jumps past the last frame.
    """
    fps = seq.fps
    n = seq.frame_count
    init_box = seq.frames[0].target
    indices = [0]
    boxes = [init_box]
    latencies = []
    failed = False
    failure = ""
    clock = 0.0
    sess = None
    try:
        sess = open_session(handle, seq, detections, timeout=timeout)
        measured = sess.init(0, init_box)
        lat = latency.init_latency(0, measured)
        latencies.append(lat)
        clock += lat
        j = 0
        while True:
            nxt = max(j + 1, math.floor(clock * fps + 1e-9))
            if nxt > n - 1:
                break
            arrival = nxt / fps
            if clock < arrival:
                clock = arrival
            box, measured = sess.step(nxt)
            lat = latency.frame_latency(nxt, measured)
            latencies.append(lat)
            clock += lat
            indices.append(nxt)
            boxes.append(box)
            j = nxt
    except (RunnerError, BaselineError, DatasetError) as exc:
        failed = True
        failure = str(exc)
    finally:
        if sess is not None:
            sess.close()
    duration = max(clock, n / fps)
    fps_measured = len(indices) / duration if not failed else 0.0
    run = TrackRun(
        tracker=handle.name, sequence=seq.name,
        frame_indices=tuple(indices), boxes=tuple(boxes),
        latencies=tuple(latencies) if len(latencies) == len(boxes) else None,
        failed=failed, failure=failure,
    )
    return [RunRecord(
        run_id="main", run=run,
        extra={"fps_measured": fps_measured, "latency": latency.describe()},
    )]


def fill_rte_boxes(run: TrackRun, frame_count: int) -> TrackRun:
    """Expand a processed-frames run to one box per frame; every skipped
    frame inherits the most recent processed output before it."""
    by_index = dict(zip(run.frame_indices, run.boxes))
    boxes = []
    last = run.boxes[0]
    for i in range(frame_count):
        if i in by_index:
            last = by_index[i]
        boxes.append(last)
    return TrackRun(
        tracker=run.tracker, sequence=run.sequence,
        frame_indices=tuple(range(frame_count)), boxes=tuple(boxes),
    )


def score_rte(records: list[RunRecord], seq: Sequence,
              detections: DetectionSet | None = None,
              params: dict | None = None) -> SequenceResult:
    record = records[0]
    if record.run is None or record.run.failed:
        reason = record.run.failure if record.run is not None else "not executed"
        return SequenceResult(
            sequence=seq.name, scores=None, weight=1.0, curves={},
            extras={}, failures=(reason,), skipped="run failed",
        )
    filled = fill_rte_boxes(record.run, seq.frame_count)
    try:
        scores, curves = _score_run(filled, seq)
    except EmptySeriesError as exc:
        return SequenceResult(
            sequence=seq.name, scores=None, weight=1.0, curves={},
            extras={}, skipped=str(exc),
        )
    extras = {
        "fps_measured": record.extra.get("fps_measured", 0.0),
        "processed_frames": len(record.run.frame_indices),
    }
    return SequenceResult(
        sequence=seq.name, scores=scores, weight=1.0,
        curves=curves, extras=extras,
    )


def run_rte(handle: TrackerHandle, seq: Sequence,
            latency: LatencyModel = LIVE,
            detections: DetectionSet | None = None,
            timeout: float = 60.0):
    """Convenience one-sequence RTE: returns (Scores, fps_measured)."""
    records = rte_records(handle, seq, detections, latency, timeout)
    result = score_rte(records, seq)
    if result.scores is None:
        raise ProtocolError(
            f"RTE on {seq.name!r} failed: {result.failures or result.skipped}"
        )
    return result.scores, result.extras["fps_measured"]


# ---------------------------------------------------------------------------
# HOI


INTERACTING = ("LHI", "RHI", "BHI")

_REQUIRED_HANDS = {
    "LHI": ("left_hand",),
    "RHI": ("right_hand",),
    "BHI": ("left_hand", "right_hand"),
}


def interaction_runs(seq: Sequence) -> list[tuple[int, int, str]]:
    """Maximal runs of identical interacting labels as (start, end, label),
    end inclusive."""
    runs = []
    start = None
    label = None
    for i, fr in enumerate(seq.frames):
        cur = fr.interaction if fr.interaction in INTERACTING else None
        if cur != label:
            if label is not None:
                runs.append((start, i - 1, label))
            start = i if cur is not None else None
            label = cur
    if label is not None:
        runs.append((start, seq.frame_count - 1, label))
    return runs


def _hands_valid(seq: Sequence, detections: DetectionSet, index: int,
                 label: str) -> bool:
    """All hands named by the label have an in-contact detection of the
    matching kind at IoU >= 0.5 with the hand's ground truth."""
    fr = seq.frames[index]
    for kind in _REQUIRED_HANDS[label]:
        gt_hand = fr.left_hand if kind == "left_hand" else fr.right_hand
        if gt_hand is None:
            return False
        cands = detections.hands(index, kind)
        if not any(d.contact is True and iou(d.box, gt_hand) >= IOU_VALID
                   for d in cands):
            return False
    return True


def _object_init_detection(seq: Sequence, detections: DetectionSet,
                           index: int):
    """Highest-scoring object detection at IoU >= 0.5 with the target, or
    None."""
    gt = seq.frames[index].target
    if gt is None:
        return None
    valid = [d for d in detections.objects(index) if iou(d.box, gt) >= IOU_VALID]
    if not valid:
        return None
    return max(valid, key=lambda d: d.score)


def hoi_records(handle: TrackerHandle, seq: Sequence,
                detections: DetectionSet | None,
                timeout: float = 60.0,
                oracle_init: bool = False) -> list[RunRecord]:
    if detections is None:
        raise ProtocolError("HOI requires a detection set")
    records = []
    for start, end, label in interaction_runs(seq):
        run_id = f"run_{start:05d}_{label}"
        length = end - start + 1
        base_extra = {"start": start, "end": end, "label": label,
                      "length": length}
        init_frame = None
        init_box = None
        if oracle_init:
            for i in range(start, end + 1):
                if seq.present(i):
                    init_frame = i
                    init_box = seq.frames[i].target
                    break
            extra = dict(base_extra, init_kind="gt")
        else:
            for i in range(start, end + 1):
                if not _hands_valid(seq, detections, i, label):
                    continue
                det = _object_init_detection(seq, detections, i)
                if det is not None:
                    init_frame = i
                    init_box = det.box
                    break
            extra = dict(base_extra, init_kind="det")
        if init_frame is None:
            records.append(RunRecord(
                run_id=run_id, run=None,
                extra=dict(base_extra, skipped="no valid detection"),
            ))
            continue
        extra["init_frame"] = init_frame
        run = session(handle, seq, init_frame, init_box,
                      range(init_frame + 1, end + 1),
                      detections=detections, timeout=timeout)
        records.append(RunRecord(run_id=run_id, run=run, extra=extra))
    return records


def hoi_matched(record: RunRecord, seq: Sequence,
                detections: DetectionSet) -> int:
    """Matched-frame count for one interaction run: per-frame hand/contact
    validity plus tracker IoU >= 0.5 with the target."""
    run = record.run
    if run is None or run.failed:
        return 0
    label = record.extra["label"]
    matched = 0
    for index, box in zip(run.frame_indices, run.boxes):
        gt = seq.frames[index].target
        if gt is None:
            continue
        if not _hands_valid(seq, detections, index, label):
            continue
        if iou(box, gt) >= IOU_VALID:
            matched += 1
    return matched


def score_hoi(records: list[RunRecord], seq: Sequence,
              detections: DetectionSet | None = None,
              params: dict | None = None) -> SequenceResult:
    if detections is None:
        raise ProtocolError("HOI scoring requires the detection set")
    if not records:
        return SequenceResult(
            sequence=seq.name, scores=None, weight=0.0, curves={},
            extras={}, skipped="no interaction runs",
        )
    total = 0
    matched = 0
    failures = []
    per_run = {}
    for record in records:
        length = record.extra["length"]
        total += length
        if record.run is not None and record.run.failed:
            failures.append(record.run.failure)
            per_run[record.run_id] = {"length": length, "matched": 0}
            continue
        m = hoi_matched(record, seq, detections)
        matched += m
        per_run[record.run_id] = {"length": length, "matched": m}
    recall = matched / total if total else 0.0
    extras = {
        "recall": recall,
        "matched": matched,
        "length": total,
        "runs": per_run,
    }
    return SequenceResult(
        sequence=seq.name, scores=None, weight=float(total),
        curves={}, extras=extras, failures=tuple(failures),
    )


def run_hoi(detections: DetectionSet, handle: TrackerHandle, seq: Sequence,
            oracle_init: bool = False, timeout: float = 60.0) -> float:
    """Convenience one-sequence HOI: length-weighted Recall."""
    records = hoi_records(handle, seq, detections, timeout, oracle_init)
    result = score_hoi(records, seq, detections)
    if result.skipped:
        raise ProtocolError(f"HOI on {seq.name!r}: {result.skipped}")
    return result.extras["recall"]


# ---------------------------------------------------------------------------
# Dispatch tables used by the evaluation driver and the report builder

RECORDERS = {
    "ope": lambda handle, seq, dets, **kw: ope_records(
        handle, seq, dets, timeout=kw.get("timeout", 60.0)),
    "oped": lambda handle, seq, dets, **kw: oped_records(
        handle, seq, dets, timeout=kw.get("timeout", 60.0)),
    "mse": lambda handle, seq, dets, **kw: mse_records(
        handle, seq, dets, timeout=kw.get("timeout", 60.0)),
    "rte": lambda handle, seq, dets, **kw: rte_records(
        handle, seq, dets, latency=kw.get("latency", LIVE),
        timeout=kw.get("timeout", 60.0)),
    "hoi": lambda handle, seq, dets, **kw: hoi_records(
        handle, seq, dets, timeout=kw.get("timeout", 60.0),
        oracle_init=kw.get("oracle_init", False)),
}

SCORERS = {
    "ope": score_ope,
    "oped": score_oped,
    "mse": score_mse,
    "rte": score_rte,
    "hoi": score_hoi,
}


def aggregate_breakdowns(results: list[SequenceResult],
                         sequences: dict[str, Sequence],
                         protocol: str) -> dict:
    """Group per-sequence results by attribute, verb, and noun.

    Scored protocols aggregate Scores with the protocol's weighting; HOI
    pools matched/length. Sequences that were skipped or failed do not
    contribute; empty groups are omitted."""
    groups: dict[str, dict[str, list[SequenceResult]]] = {
        "attributes": {}, "verbs": {}, "nouns": {},
    }
    for result in results:
        seq = sequences[result.sequence]
        keys = {
            "attributes": sorted(seq.attributes),
            "verbs": [seq.verb] if seq.verb else [],
            "nouns": [seq.noun] if seq.noun else [],
        }
        for axis, values in keys.items():
            for value in values:
                groups[axis].setdefault(value, []).append(result)
    out: dict = {}
    for axis, by_value in groups.items():
        axis_out = {}
        for value in sorted(by_value):
            agg = aggregate_overall(by_value[value], protocol)
            if agg is not None:
                axis_out[value] = agg
        out[axis] = axis_out
    return out


def aggregate_overall(results: list[SequenceResult], protocol: str):
    """Dataset-level reduction for a set of per-sequence results."""
    if protocol == "hoi":
        matched = sum(r.extras.get("matched", 0) for r in results if not r.skipped)
        length = sum(r.extras.get("length", 0) for r in results if not r.skipped)
        if length == 0:
            return None
        return {"recall": matched / length, "matched": matched, "length": length}
    usable = [r for r in results if r.scores is not None]
    if not usable:
        return None
    weights = None
    if protocol == "mse":
        weights = [r.weight for r in usable]
    scores = metrics.mean_scores([r.scores for r in usable], weights)
    out = scores.as_dict()
    out["sequences"] = len(usable)
    if protocol == "oped":
        deltas = [r.extras["deltas"] for r in usable]
        out["deltas"] = {
            key: math.fsum(d[key] for d in deltas) / len(deltas)
            for key in ("ss", "nps", "gsr")
        }
        out["mean_delay"] = math.fsum(
            r.extras["delay"] for r in usable) / len(usable)
    if protocol == "rte":
        out["fps_measured"] = math.fsum(
            r.extras["fps_measured"] for r in usable) / len(usable)
    return out
