"""Baseline trackers: association rules, filter behavior, the long-term
scheme with scripted components, and the builtin test trackers."""

import random

import numpy as np
import pytest

from fpvbench.baselines import (
    BASELINES,
    BaselineError,
    DelayedOracleTracker,
    DetectionRedetector,
    DetectionVerifier,
    KalmanBoxTrack,
    LtmuTracker,
    NoisyOracleTracker,
    OracleTracker,
    RunContext,
    SortTracker,
    StaticTracker,
    TbydSortTracker,
    TbydTracker,
    create_baseline,
    parse_params,
)
from fpvbench.dataset import Detection, DetectionSet
from fpvbench.geometry import BoundingBox, iou

from conftest import linear_sequence, static_sequence


def make_context(seq=None, det_frames=None):
    seq = seq or static_sequence(n=max(3, len(det_frames or [])))
    dets = None
    if det_frames is not None:
        frames = tuple(
            tuple(Detection(BoundingBox(*d[:4]), d[4]) for d in frame)
            for frame in det_frames
        )
        dets = DetectionSet(frames=frames)
    return RunContext(sequence=seq, detections=dets)


# ---------------------------------------------------------------------------
# TbyD


def test_tbyd_picks_max_iou_detection():
    ctx = make_context(det_frames=[
        [], [(1, 1, 10, 10, 0.9), (20, 20, 5, 5, 0.99)], []])
    t = TbydTracker(ctx)
    t.init(0, BoundingBox(0, 0, 10, 10))
    assert t.update(1) == BoundingBox(1, 1, 10, 10)
    assert t.memorized == BoundingBox(1, 1, 10, 10)


def test_tbyd_empty_detections_returns_memorized():
    ctx = make_context(det_frames=[[], [], []])
    t = TbydTracker(ctx)
    t.init(0, BoundingBox(0, 0, 10, 10))
    assert t.update(1) == BoundingBox(0, 0, 10, 10)


def test_tbyd_disjoint_detections_keep_memory():
    ctx = make_context(det_frames=[[], [(200, 200, 5, 5, 0.99)], []])
    t = TbydTracker(ctx)
    t.init(0, BoundingBox(0, 0, 10, 10))
    assert t.update(1) == BoundingBox(0, 0, 10, 10)
    assert t.memorized == BoundingBox(0, 0, 10, 10)


def test_tbyd_equal_iou_breaks_by_score():
    # both candidates overlap the memory identically; the 0.8 one wins
    ctx = make_context(det_frames=[
        [], [(0, 5, 10, 10, 0.3), (5, 0, 10, 10, 0.8)], []])
    t = TbydTracker(ctx)
    t.init(0, BoundingBox(0, 0, 10, 10))
    assert t.update(1) == BoundingBox(5, 0, 10, 10)


def test_tbyd_full_tie_keeps_file_order():
    ctx = make_context(det_frames=[
        [], [(0, 5, 10, 10, 0.5), (5, 0, 10, 10, 0.5)], []])
    t = TbydTracker(ctx)
    t.init(0, BoundingBox(0, 0, 10, 10))
    assert t.update(1) == BoundingBox(0, 5, 10, 10)


def test_tbyd_output_always_overlaps_previous_memory():
    rng = random.Random(3)
    frames = [[]]
    for _ in range(40):
        frames.append([
            (rng.uniform(0, 300), rng.uniform(0, 200),
             rng.uniform(5, 40), rng.uniform(5, 40), rng.random())
            for _ in range(4)
        ])
    ctx = make_context(seq=static_sequence(n=41), det_frames=frames)
    t = TbydTracker(ctx)
    t.init(0, BoundingBox(100, 80, 40, 30))
    for i in range(1, 41):
        before = t.memorized
        out = t.update(i)
        assert out == before or iou(out, before) > 0.0


# ---------------------------------------------------------------------------
# Kalman filter and SORT


def test_kalman_stationary_converges_exactly():
    box = BoundingBox(100.0, 80.0, 40.0, 30.0)
    track = KalmanBoxTrack(box)
    for _ in range(50):
        track.predict()
        track.update(box)
    assert np.abs(track.velocity).max() < 1e-3
    out = track.box()
    assert iou(out, box) == pytest.approx(1.0, abs=1e-9)


def test_kalman_constant_velocity_burn_in():
    track = KalmanBoxTrack(BoundingBox(0.0, 0.0, 40.0, 30.0))
    for i in range(1, 40):
        det = BoundingBox(2.0 * i, 0.0, 40.0, 30.0)
        track.predict()
        track.update(det)
        if i >= 20:
            assert abs(track.box().cx - det.cx) < 1.0


def test_kalman_zero_noise_reproduces_measurement():
    track = KalmanBoxTrack(BoundingBox(10.0, 10.0, 20.0, 20.0))
    track.Q[:] = 0.0
    track.R[:] = 0.0
    z = BoundingBox(14.0, 11.0, 22.0, 18.0)
    track.predict()
    track.update(z)
    out = track.box()
    assert out.cx == pytest.approx(z.cx, abs=1e-9)
    assert out.cy == pytest.approx(z.cy, abs=1e-9)
    assert out.area == pytest.approx(z.area, abs=1e-9)


def test_kalman_non_finite_state_raises():
    track = KalmanBoxTrack(BoundingBox(0, 0, 10, 10))
    track.x[0] = np.nan
    with pytest.raises(BaselineError, match="non-finite"):
        track.predict()


def test_sort_updates_on_gated_detection():
    box = BoundingBox(100.0, 80.0, 40.0, 30.0)
    frames = [[]] + [[(100.0, 80.0, 40.0, 30.0, 0.9)]] * 10
    t = SortTracker(make_context(seq=static_sequence(n=11), det_frames=frames))
    t.init(0, box)
    for i in range(1, 11):
        out = t.update(i)
    assert iou(out, box) > 0.99


def test_sort_gate_rejects_weak_overlap():
    # the only detection overlaps the prediction below iou_min = 0.3
    box = BoundingBox(100.0, 80.0, 40.0, 30.0)
    frames = [[], [(130.0, 80.0, 40.0, 30.0, 0.9)]]
    t = SortTracker(make_context(seq=static_sequence(n=2), det_frames=frames))
    t.init(0, box)
    assert iou(BoundingBox(130, 80, 40, 30), box) < 0.3
    out = t.update(1)
    assert iou(out, box) > 0.99


def test_sort_coasts_on_estimated_velocity():
    t = SortTracker(make_context(
        seq=static_sequence(n=40),
        det_frames=[[]] + [[(2.0 * i, 0.0, 40.0, 30.0, 0.9)]
                           for i in range(1, 25)] + [[]] * 15))
    t.init(0, BoundingBox(0.0, 0.0, 40.0, 30.0))
    for i in range(1, 25):
        out = t.update(i)
    last_cx = out.cx
    for i in range(25, 29):
        out = t.update(i)
        assert out.cx - last_cx == pytest.approx(2.0, abs=0.2)
        last_cx = out.cx


# ---------------------------------------------------------------------------
# TbyD + SORT


def test_tbyd_sort_memorizes_filtered_box():
    ctx = make_context(det_frames=[
        [], [(4, 0, 10, 10, 0.9)], []])
    t = TbydSortTracker(ctx)
    t.init(0, BoundingBox(0, 0, 10, 10))
    out = t.update(1)
    assert t.memorized == out
    # the filter pulls the detection toward the init state
    assert 0.0 < out.cx < BoundingBox(4, 0, 10, 10).cx


def test_tbyd_sort_keeps_memory_without_match():
    ctx = make_context(det_frames=[[], [(200, 200, 5, 5, 0.9)], []])
    t = TbydSortTracker(ctx)
    init = BoundingBox(0, 0, 10, 10)
    t.init(0, init)
    assert t.update(1) == init
    assert t.memorized == init


def test_tbyd_sort_association_uses_memory_not_prediction():
    # detection overlaps the memorized box but not enough for SORT's own
    # 0.3 gate; tbyd association only needs iou > 0
    ctx = make_context(det_frames=[[], [(9, 9, 10, 10, 0.9)], []])
    t = TbydSortTracker(ctx)
    t.init(0, BoundingBox(0, 0, 10, 10))
    out = t.update(1)
    assert out != BoundingBox(0, 0, 10, 10)


# ---------------------------------------------------------------------------
# LTMU with scripted components


class ScriptedShortTerm:
    def __init__(self, boxes, presence=None):
        self.boxes = dict(boxes)
        self.init_calls = []
        self._presence = presence

    def init(self, frame_index, box):
        self.init_calls.append((frame_index, box))

    def update(self, frame_index):
        return self.boxes[frame_index]

    def presence(self):
        if self._presence is None:
            raise AssertionError("presence not scripted")
        return self._presence


class ScriptedVerifier:
    def __init__(self, table, default=0.0):
        self.table = dict(table)
        self.default = default
        self.calls = []

    def __call__(self, frame_index, box):
        self.calls.append(box)
        return self.table.get(box, self.default)


class ScriptedRedetector:
    def __init__(self, candidates):
        self.candidates = list(candidates)
        self.calls = 0

    def __call__(self, frame_index):
        self.calls += 1
        return self.candidates


ST_BOX = BoundingBox(50, 50, 10, 10)
INIT_BOX = BoundingBox(40, 40, 10, 10)


def test_ltmu_confident_box_passes_without_redetection():
    verifier = ScriptedVerifier({ST_BOX: 0.9})
    redetector = ScriptedRedetector([])
    t = LtmuTracker(ScriptedShortTerm({1: ST_BOX}), verifier, redetector)
    t.init(0, INIT_BOX)
    assert t.update(1) == ST_BOX
    assert redetector.calls == 0
    assert t.last_position == ST_BOX


def test_ltmu_redetection_takes_argmax_confidence():
    a, b, c = (BoundingBox(0, 0, 5, 5), BoundingBox(10, 0, 5, 5),
               BoundingBox(20, 0, 5, 5))
    verifier = ScriptedVerifier({ST_BOX: 0.1, a: 0.2, b: 0.8, c: 0.4})
    st = ScriptedShortTerm({1: ST_BOX})
    t = LtmuTracker(st, verifier,
                    ScriptedRedetector([(a, 0.9), (b, 0.8), (c, 0.7)]))
    t.init(0, INIT_BOX)
    assert t.update(1) == b
    assert st.init_calls[-1] == (1, b)
    # re-detection does not refresh the last confident position
    assert t.last_position == INIT_BOX


def test_ltmu_empty_redetector_falls_back_to_last_position():
    verifier = ScriptedVerifier({ST_BOX: 0.1})
    st = ScriptedShortTerm({1: ST_BOX})
    t = LtmuTracker(st, verifier, ScriptedRedetector([]))
    t.init(0, INIT_BOX)
    assert t.update(1) == INIT_BOX
    assert st.init_calls[-1] == (1, INIT_BOX)


def test_ltmu_caps_candidates_at_top_k_by_score():
    boxes = [BoundingBox(10 * i, 0, 5, 5) for i in range(12)]
    # two lowest-scored candidates must never reach the verifier
    cands = [(boxes[i], 1.0 - 0.05 * i) for i in range(12)]
    verifier = ScriptedVerifier({ST_BOX: 0.1}, default=0.3)
    t = LtmuTracker(ScriptedShortTerm({1: ST_BOX}), verifier,
                    ScriptedRedetector(cands))
    t.init(0, INIT_BOX)
    t.update(1)
    verified = set(verifier.calls[1:])
    assert len(verified) == 10
    assert boxes[10] not in verified and boxes[11] not in verified


def test_ltmu_redetection_tie_keeps_best_scored_candidate():
    a, b = BoundingBox(0, 0, 5, 5), BoundingBox(10, 0, 5, 5)
    verifier = ScriptedVerifier({ST_BOX: 0.1, a: 0.6, b: 0.6})
    t = LtmuTracker(ScriptedShortTerm({1: ST_BOX}), verifier,
                    ScriptedRedetector([(a, 0.9), (b, 0.5)]))
    t.init(0, INIT_BOX)
    assert t.update(1) == a


@pytest.mark.parametrize("combine,expect_redetect", [
    ("verifier", True), ("and", True), ("or", False)])
def test_ltmu_combine_rules(combine, expect_redetect):
    # verifier says 0.3, the short-term tracker's presence says 0.9
    verifier = ScriptedVerifier({ST_BOX: 0.3}, default=0.6)
    redetector = ScriptedRedetector([(BoundingBox(0, 0, 5, 5), 1.0)])
    st = ScriptedShortTerm({1: ST_BOX}, presence=0.9)
    t = LtmuTracker(st, verifier, redetector, combine=combine)
    t.init(0, INIT_BOX)
    t.update(1)
    assert redetector.calls == (1 if expect_redetect else 0)


def test_ltmu_parameter_validation():
    st = ScriptedShortTerm({})
    v = ScriptedVerifier({})
    r = ScriptedRedetector([])
    with pytest.raises(BaselineError, match="tau"):
        LtmuTracker(st, v, r, tau=1.5)
    with pytest.raises(BaselineError, match="top_k"):
        LtmuTracker(st, v, r, top_k=0)
    with pytest.raises(BaselineError, match="combine"):
        LtmuTracker(st, v, r, combine="xor")


def test_ltmu_detection_proxies():
    ctx = make_context(det_frames=[
        [], [(0, 0, 10, 10, 0.7), (50, 50, 10, 10, 0.2)], []])
    verifier = DetectionVerifier(ctx)
    assert verifier(1, BoundingBox(0, 0, 10, 10)) == 1.0
    assert verifier(1, BoundingBox(200, 200, 10, 10)) == 0.0
    redetector = DetectionRedetector(ctx)
    assert redetector(1) == [
        (BoundingBox(0, 0, 10, 10), 0.7), (BoundingBox(50, 50, 10, 10), 0.2)]
    assert redetector(0) == []


# ---------------------------------------------------------------------------
# Builtin test trackers


def test_oracle_carries_forward_over_absent():
    seq = linear_sequence(n=6, absent=(2, 3), step=(4.0, 0.0))
    t = OracleTracker(RunContext(sequence=seq, detections=None))
    t.init(0, seq.frames[0].target)
    assert t.update(1) == seq.frames[1].target
    assert t.update(2) == seq.frames[1].target
    assert t.update(3) == seq.frames[1].target
    assert t.update(4) == seq.frames[4].target


def test_static_repeats_init_box():
    t = StaticTracker(RunContext(sequence=static_sequence(), detections=None))
    box = BoundingBox(5, 5, 8, 8)
    t.init(0, box)
    assert t.update(1) == box
    assert t.update(7) == box


def test_noisy_oracle_is_seed_deterministic():
    seq = linear_sequence(n=10)
    outs = []
    for _ in range(2):
        t = NoisyOracleTracker(RunContext(sequence=seq, detections=None),
                               sigma=0.1, seed=42)
        t.init(0, seq.frames[0].target)
        outs.append([t.update(i) for i in range(1, 10)])
    assert outs[0] == outs[1]
    other = NoisyOracleTracker(RunContext(sequence=seq, detections=None),
                               sigma=0.1, seed=43)
    other.init(0, seq.frames[0].target)
    assert [other.update(i) for i in range(1, 10)] != outs[0]


def test_noisy_oracle_zero_sigma_is_oracle():
    seq = linear_sequence(n=8)
    t = NoisyOracleTracker(RunContext(sequence=seq, detections=None),
                           sigma=0.0, seed=1)
    t.init(0, seq.frames[0].target)
    for i in range(1, 8):
        out = t.update(i)
        assert iou(out, seq.frames[i].target) == pytest.approx(1.0, abs=1e-9)


def test_delayed_oracle_lags_by_k():
    seq = linear_sequence(n=12, step=(4.0, 0.0))
    t = DelayedOracleTracker(RunContext(sequence=seq, detections=None), k=3)
    t.init(0, seq.frames[0].target)
    for i in range(1, 12):
        assert t.update(i) == seq.frames[max(0, i - 3)].target


def test_delayed_oracle_zero_lag_is_oracle():
    seq = linear_sequence(n=6, step=(4.0, 0.0))
    t = DelayedOracleTracker(RunContext(sequence=seq, detections=None), k=0)
    t.init(0, seq.frames[0].target)
    for i in range(1, 6):
        assert t.update(i) == seq.frames[i].target


# ---------------------------------------------------------------------------
# Registry and parameters


def test_registry_names():
    assert set(BASELINES) == {
        "tbyd", "sort", "tbyd+sort", "ltmu", "oracle", "static",
        "noisy_oracle", "delayed_oracle"}


def test_create_baseline_rejects_unknown_name():
    ctx = make_context()
    with pytest.raises(BaselineError, match="unknown baseline"):
        create_baseline("deep", ctx)


def test_create_baseline_rejects_bad_params():
    ctx = make_context()
    with pytest.raises(BaselineError, match="bad parameters"):
        create_baseline("static", ctx, sigma=0.5)


def test_create_baseline_ltmu_with_params():
    ctx = make_context(det_frames=[[], [(0, 0, 10, 10, 0.9)], []])
    t = create_baseline("ltmu", ctx, tau=0.3, top_k=5, combine="or")
    assert t.tau == 0.3 and t.top_k == 5 and t.combine == "or"


def test_parse_params_coercion():
    assert parse_params("sigma=0.1,seed=7,combine=or,flag=true") == {
        "sigma": 0.1, "seed": 7, "combine": "or", "flag": True}
    assert parse_params("") == {}
    with pytest.raises(BaselineError, match="expected key=value"):
        parse_params("sigma")
