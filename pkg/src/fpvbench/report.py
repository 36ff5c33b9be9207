"""Evaluation driver, run store, and deterministic report generation.

An evaluation writes a self-describing store:

    out/
      meta.json                       protocol, parameters, input digests
      runs/<tracker>/<sequence>/<run_id>/run.json   indices + metadata
                                         boxes.txt  one x,y,w,h per step
                                         times.txt  one latency per step
      report.json                     the full report document
      curves/<tracker>/<name>.csv     threshold,value rows

Scores in report.json are a pure function of the stored runs and the
digest-pinned dataset/detections, so `fpvbench report --runs out/` rebuilds
the identical document without touching any tracker. Two evaluations with
identical inputs emit byte-identical reports: no timestamps, sorted keys,
repr-exact floats, and aggregation order independent of worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fpvbench import __version__, metrics, protocols
from fpvbench.dataset import (
    DatasetError,
    DetectionSet,
    Sequence,
    dataset_digest,
    load_dataset,
    load_detections,
)
from fpvbench.geometry import BoundingBox, BoxError
from fpvbench.protocols import (
    LIVE,
    LatencyModel,
    ProtocolError,
    RunRecord,
    SequenceResult,
)
from fpvbench.runner import RunnerError, TrackRun, TrackerHandle


class ReportError(ValueError):
    """Invalid evaluation configuration or unreadable run store."""


def _fmt(v: float) -> str:
    return repr(float(v))


def _box_line(box: BoundingBox) -> str:
    return f"{_fmt(box.x)},{_fmt(box.y)},{_fmt(box.w)},{_fmt(box.h)}"


def sanitize(name: str) -> str:
    """Directory-safe tracker/sequence label."""
    return re.sub(r"[^A-Za-z0-9.+_-]", "_", name)


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def resolve_detections(root: Path, sequences: list[Sequence],
                       arg: str | None) -> dict[str, Path]:
    """Map sequence names to detection files.

    With no argument, each sequence's own detections.txt is used when
    present. A file argument serves a single-sequence dataset; a directory
    argument supplies <name>.txt per sequence."""
    mapping: dict[str, Path] = {}
    if arg is None:
        for seq in sequences:
            path = root / seq.name / "detections.txt"
            if path.is_file():
                mapping[seq.name] = path
        return mapping
    path = Path(arg)
    if path.is_file():
        if len(sequences) != 1:
            raise ReportError(
                "a single detections file needs a single-sequence dataset; "
                f"got {len(sequences)} sequences"
            )
        return {sequences[0].name: path}
    if path.is_dir():
        for seq in sequences:
            candidate = path / f"{seq.name}.txt"
            if candidate.is_file():
                mapping[seq.name] = candidate
        return mapping
    raise ReportError(f"detections path not found: {path}")


# ---------------------------------------------------------------------------
# Run store


def _write_record(run_dir: Path, record: RunRecord, tracker: str,
                  sequence: str) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    doc: dict = {
        "tracker": tracker,
        "sequence": sequence,
        "run_id": record.run_id,
        "extra": record.extra,
    }
    if record.run is None:
        doc["frame_indices"] = None
    else:
        doc["frame_indices"] = list(record.run.frame_indices)
        doc["failed"] = record.run.failed
        doc["failure"] = record.run.failure
        (run_dir / "boxes.txt").write_text(
            "\n".join(_box_line(b) for b in record.run.boxes) + "\n",
            encoding="utf-8",
        )
        if record.run.latencies is not None:
            (run_dir / "times.txt").write_text(
                "\n".join(_fmt(t) for t in record.run.latencies) + "\n",
                encoding="utf-8",
            )
    (run_dir / "run.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _read_lines(path: Path) -> list[str]:
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _read_record(run_dir: Path) -> RunRecord:
    doc = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    if doc["frame_indices"] is None:
        return RunRecord(run_id=doc["run_id"], run=None, extra=doc["extra"])
    boxes = []
    for i, line in enumerate(_read_lines(run_dir / "boxes.txt")):
        try:
            boxes.append(BoundingBox(*(float(p) for p in line.split(","))))
        except (ValueError, TypeError, BoxError) as exc:
            raise ReportError(f"{run_dir / 'boxes.txt'}:{i + 1}: {exc}") from None
    latencies = None
    times_path = run_dir / "times.txt"
    if times_path.is_file():
        latencies = tuple(float(t) for t in _read_lines(times_path))
    run = TrackRun(
        tracker=doc["tracker"],
        sequence=doc["sequence"],
        frame_indices=tuple(doc["frame_indices"]),
        boxes=tuple(boxes),
        latencies=latencies,
        failed=doc.get("failed", False),
        failure=doc.get("failure", ""),
    )
    return RunRecord(run_id=doc["run_id"], run=run, extra=doc["extra"])


# ---------------------------------------------------------------------------
# Evaluation driver


def evaluate(protocol: str, handles: list[TrackerHandle], dataset_root,
             out_dir, *, detections_arg: str | None = None,
             latency: LatencyModel = LIVE, workers: int = 1,
             timeout: float = 60.0, oracle_init: bool = False) -> dict:
    """Run every tracker over every sequence, write the store, and return
    the report document (also written to out/report.json)."""
    if protocol not in protocols.PROTOCOLS:
        raise ReportError(f"unknown protocol {protocol!r}")
    root = Path(dataset_root)
    out = Path(out_dir)
    sequences = load_dataset(root)
    names = [h.name for h in handles]
    if len(set(names)) != len(names):
        raise ReportError(f"duplicate tracker names: {names}")
    det_paths = resolve_detections(root, sequences, detections_arg)
    if protocol in ("oped", "hoi"):
        missing = [s.name for s in sequences if s.name not in det_paths]
        if missing:
            raise ReportError(
                f"protocol {protocol!r} requires detections for every "
                f"sequence; missing: {missing}"
            )
    det_sets = {
        name: load_detections(path, next(
            s.frame_count for s in sequences if s.name == name))
        for name, path in det_paths.items()
    }

    recorder = protocols.RECORDERS[protocol]
    kwargs = {"timeout": timeout, "latency": latency, "oracle_init": oracle_init}

    def job(handle: TrackerHandle, seq: Sequence):
        return recorder(handle, seq, det_sets.get(seq.name), **kwargs)

    results: dict[tuple[str, str], list[RunRecord]] = {}
    jobs = [(h, s) for h in handles for s in sequences]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {(h.name, s.name): pool.submit(job, h, s) for h, s in jobs}
        results = {key: f.result() for key, f in futures.items()}
    else:
        results = {(h.name, s.name): job(h, s) for h, s in jobs}

    out.mkdir(parents=True, exist_ok=True)
    for (tracker, seq_name), records in sorted(results.items()):
        for record in records:
            run_dir = (out / "runs" / sanitize(tracker) / sanitize(seq_name)
                       / sanitize(record.run_id))
            _write_record(run_dir, record, tracker, seq_name)

    meta = {
        "toolkit": {"name": "fpvbench", "version": __version__},
        "protocol": protocol,
        "parameters": _parameters(protocol, latency, oracle_init),
        "dataset": {
            "path": str(root.resolve()),
            "digest": dataset_digest(root),
            "sequences": len(sequences),
        },
        "detections": {
            name: {"path": str(path.resolve()), "digest": _file_digest(path)}
            for name, path in sorted(det_paths.items())
        },
        "trackers": [
            {"name": h.name, "kind": h.kind, "directory": sanitize(h.name)}
            for h in handles
        ],
    }
    (out / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    report = build_report(meta, results, sequences, det_sets)
    write_report(report, out)
    return report


def _parameters(protocol: str, latency: LatencyModel, oracle_init: bool) -> dict:
    params: dict = {"iou_valid": protocols.IOU_VALID}
    if protocol == "rte":
        params["latency"] = latency.describe()
    if protocol == "hoi":
        params["oracle_init"] = oracle_init
    return params


def load_store(out_dir):
    """Read a run store back: (meta, records, sequences, detection sets).

    Dataset and detection files are re-read from their recorded paths and
    their digests verified, so regenerated numbers are guaranteed to refer
    to the same inputs."""
    out = Path(out_dir)
    meta_path = out / "meta.json"
    if not meta_path.is_file():
        raise ReportError(f"not a run store (missing {meta_path})")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    root = Path(meta["dataset"]["path"])
    digest = dataset_digest(root)
    if digest != meta["dataset"]["digest"]:
        raise ReportError(
            f"dataset at {root} changed since the evaluation "
            f"(digest {digest} != {meta['dataset']['digest']})"
        )
    sequences = load_dataset(root)
    seq_by_name = {s.name: s for s in sequences}
    det_sets = {}
    for name, entry in meta["detections"].items():
        path = Path(entry["path"])
        if not path.is_file():
            raise ReportError(f"detections file moved: {path}")
        if _file_digest(path) != entry["digest"]:
            raise ReportError(f"detections file changed: {path}")
        det_sets[name] = load_detections(path, seq_by_name[name].frame_count)
    results: dict[tuple[str, str], list[RunRecord]] = {}
    for tracker in meta["trackers"]:
        tracker_dir = out / "runs" / tracker["directory"]
        if not tracker_dir.is_dir():
            raise ReportError(f"missing run directory: {tracker_dir}")
        for seq in sequences:
            seq_dir = tracker_dir / sanitize(seq.name)
            if not seq_dir.is_dir():
                continue
            records = [
                _read_record(d) for d in sorted(seq_dir.iterdir()) if d.is_dir()
            ]
            results[(tracker["name"], seq.name)] = records
    return meta, results, sequences, det_sets


def regenerate(out_dir) -> dict:
    """Rebuild the report document from a stored evaluation."""
    meta, results, sequences, det_sets = load_store(out_dir)
    return build_report(meta, results, sequences, det_sets)


# ---------------------------------------------------------------------------
# Report assembly


def rank(tracker_scores: dict[str, metrics.Scores | None]) -> list[dict]:
    """Order trackers by the mean of their three measures, descending;
    exact ties fall back to name order. Trackers without any scoreable run
    keep their ranking slot (last, null scores) rather than vanishing."""
    rows = []
    for name in sorted(tracker_scores):
        scores = tracker_scores[name]
        if scores is None:
            rows.append({"tracker": name, "ss": None, "nps": None,
                         "gsr": None, "mean": None})
        else:
            rows.append({
                "tracker": name,
                "ss": scores.ss,
                "nps": scores.nps,
                "gsr": scores.gsr,
                "mean": scores.mean(),
            })
    rows.sort(key=lambda r: (r["mean"] is None, -(r["mean"] or 0.0),
                             r["tracker"]))
    for i, row in enumerate(rows):
        row["rank"] = i + 1
    return rows


def _rank_hoi(recalls: dict[str, float | None]) -> list[dict]:
    rows = [
        {"tracker": name, "recall": recalls[name]} for name in sorted(recalls)
    ]
    rows.sort(key=lambda r: (r["recall"] is None, -(r["recall"] or 0.0),
                             r["tracker"]))
    for i, row in enumerate(rows):
        row["rank"] = i + 1
    return rows


def _curve_dict(curve: metrics.Curve) -> dict:
    return {
        "thresholds": [float(t) for t in curve.thresholds],
        "values": [float(v) for v in curve.values],
    }


def build_report(meta: dict, results: dict, sequences: list[Sequence],
                 det_sets: dict[str, DetectionSet]) -> dict:
    """Pure reduction of run records into the report document."""
    protocol = meta["protocol"]
    scorer = protocols.SCORERS[protocol]
    seq_by_name = {s.name: s for s in sequences}
    trackers_doc: dict = {}
    rank_scores: dict[str, metrics.Scores | None] = {}
    rank_recalls: dict[str, float | None] = {}
    for tracker in meta["trackers"]:
        name = tracker["name"]
        seq_results: list[SequenceResult] = []
        failed_runs = []
        for seq in sequences:
            records = results.get((name, seq.name), [])
            if not records:
                continue
            result = scorer(records, seq, det_sets.get(seq.name))
            seq_results.append(result)
            for record in records:
                if record.run is not None and record.run.failed:
                    failed_runs.append({
                        "sequence": seq.name,
                        "run_id": record.run_id,
                        "failure": record.run.failure,
                    })
        overall = protocols.aggregate_overall(seq_results, protocol)
        per_sequence = {}
        skipped = {}
        for result in seq_results:
            entry: dict = {}
            if result.scores is not None:
                entry.update(result.scores.as_dict())
            entry.update(result.extras)
            if result.failures:
                entry["failures"] = list(result.failures)
            per_sequence[result.sequence] = entry
            if result.skipped:
                skipped[result.sequence] = result.skipped
        doc: dict = {
            "overall": overall,
            "per_sequence": per_sequence,
            "breakdowns": protocols.aggregate_breakdowns(
                seq_results, seq_by_name, protocol),
            "failed_runs": failed_runs,
            "skipped_sequences": skipped,
        }
        curves = _dataset_curves(seq_results, protocol)
        if curves:
            doc["curves"] = {k: _curve_dict(c) for k, c in curves.items()}
        trackers_doc[name] = doc
        if protocol == "hoi":
            rank_recalls[name] = None if overall is None else overall["recall"]
        else:
            rank_scores[name] = None if overall is None else metrics.Scores(
                ss=overall["ss"], nps=overall["nps"], gsr=overall["gsr"])
    if protocol == "hoi":
        rankings = _rank_hoi(rank_recalls)
    else:
        rankings = rank(rank_scores)
    return {
        "toolkit": meta["toolkit"],
        "protocol": protocol,
        "parameters": meta["parameters"],
        "dataset": meta["dataset"],
        "detections": meta["detections"],
        "rankings": rankings,
        "trackers": trackers_doc,
    }


def _dataset_curves(seq_results: list[SequenceResult], protocol: str):
    usable = [r for r in seq_results if r.scores is not None and r.curves]
    if not usable:
        return {}
    weights = [r.weight for r in usable] if protocol == "mse" else None
    return {
        name: metrics.mean_curve([r.curves[name] for r in usable], weights)
        for name in usable[0].curves
    }


def write_report(report: dict, out_dir) -> None:
    """Emit report.json and per-tracker curve CSVs; byte-stable."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    for name, doc in report["trackers"].items():
        for curve_name, curve in doc.get("curves", {}).items():
            curve_dir = out / "curves" / sanitize(name)
            curve_dir.mkdir(parents=True, exist_ok=True)
            rows = [f"{_fmt(t)},{_fmt(v)}" for t, v in
                    zip(curve["thresholds"], curve["values"])]
            (curve_dir / f"{curve_name}.csv").write_text(
                "threshold,value\n" + "\n".join(rows) + "\n", encoding="utf-8"
            )


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
