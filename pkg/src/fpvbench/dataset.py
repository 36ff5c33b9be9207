"""Sequence data model, the text file formats, loaders, and dataset stats.

A dataset directory holds one subdirectory per sequence:

    <root>/<sequence_name>/
        sequence.json      required; name, fps, frame_count, frame_width,
                           frame_height, attributes, verb, noun and an
                           optional frame_paths list of image locators
        groundtruth.txt    required; one line per frame, "x,y,w,h" with
                           decimal point and no spaces, or "absent"
        hands.txt          optional; "LEFT;RIGHT", each side "x,y,w,h"
                           or "none"
        interaction.txt    optional; one of NONE,LHI,RHI,BHI per line
        detections.txt     optional; per-frame ";"-separated entries
                           "x,y,w,h,score[,kind[,contact]]" with kind in
                           {obj,lh,rh} and contact in {contact,no_contact};
                           an empty line means no detections

All per-frame files must have exactly frame_count lines. Frames are
pixel-optional: sequences without images are first class, and frame_paths
only matters when a tracker needs pixels. Malformed content is a hard
error naming file and line; extents that are zero, negative, or non-finite
are never clamped.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fpvbench.geometry import BoundingBox, BoxError

ATTRIBUTE_CODES = frozenset(
    {
        "SC", "ARC", "IV", "SOB", "RIG", "DEF", "ROT", "POC", "FOC",
        "OUT", "MB", "FM", "LR", "HR", "HM", "1H", "2H",
    }
)

INTERACTION_LABELS = ("NONE", "LHI", "RHI", "BHI")

# detections.txt kind column <-> internal names
_KIND_FROM_FILE = {"obj": "object", "lh": "left_hand", "rh": "right_hand"}
_KIND_TO_FILE = {v: k for k, v in _KIND_FROM_FILE.items()}

ABSENT_TOKEN = "absent"

LOW_RESOLUTION_AREA = 1000.0
HIGH_RESOLUTION_AREA = 250000.0
RATIO_RANGE = (0.5, 2.0)

AREA_HIST_EDGES = tuple(float(v) for v in 10.0 ** np.linspace(0.0, 7.0, 29))
RATIO_HIST_EDGES = tuple(float(v) for v in 2.0 ** np.linspace(-4.0, 4.0, 25))


class DatasetError(ValueError):
    """Malformed dataset content (always names the offending file/line)."""


@dataclass(frozen=True)
class FrameAnnotation:
    target: BoundingBox | None
    left_hand: BoundingBox | None = None
    right_hand: BoundingBox | None = None
    interaction: str = "NONE"


@dataclass(frozen=True)
class Sequence:
    name: str
    fps: float
    frame_width: float
    frame_height: float
    frames: tuple[FrameAnnotation, ...]
    attributes: frozenset[str] = frozenset()
    verb: str = ""
    noun: str = ""
    frame_paths: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.frames:
            raise DatasetError(f"sequence {self.name!r} has no frames")
        if self.frames[0].target is None:
            raise DatasetError(
                f"sequence {self.name!r}: first frame target is absent"
            )
        if self.fps <= 0 or not math.isfinite(self.fps):
            raise DatasetError(f"sequence {self.name!r}: invalid fps {self.fps}")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise DatasetError(f"sequence {self.name!r}: invalid frame size")
        bad = set(self.attributes) - ATTRIBUTE_CODES
        if bad:
            raise DatasetError(
                f"sequence {self.name!r}: unknown attribute codes {sorted(bad)}"
            )
        if self.frame_paths is not None and len(self.frame_paths) != len(self.frames):
            raise DatasetError(
                f"sequence {self.name!r}: frame_paths length mismatch"
            )
        for i, fr in enumerate(self.frames):
            if fr.interaction not in INTERACTION_LABELS:
                raise DatasetError(
                    f"sequence {self.name!r}: bad interaction {fr.interaction!r}"
                )
            if fr.interaction in ("LHI", "BHI") and fr.left_hand is None:
                raise DatasetError(
                    f"sequence {self.name!r} frame {i}: {fr.interaction} "
                    "without left hand box"
                )
            if fr.interaction in ("RHI", "BHI") and fr.right_hand is None:
                raise DatasetError(
                    f"sequence {self.name!r} frame {i}: {fr.interaction} "
                    "without right hand box"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def present(self, index: int) -> bool:
        return self.frames[index].target is not None

    def frame_ref(self, index: int) -> str:
        """Opaque frame token: image path when available, else frame:<i>."""
        if self.frame_paths is not None:
            return self.frame_paths[index]
        return f"frame:{index}"


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    kind: str = "object"
    contact: bool | None = None


@dataclass(frozen=True)
class DetectionSet:
    frames: tuple[tuple[Detection, ...], ...]

    def __len__(self) -> int:
        return len(self.frames)

    def objects(self, index: int) -> tuple[Detection, ...]:
        return tuple(d for d in self.frames[index] if d.kind == "object")

    def hands(self, index: int, kind: str) -> tuple[Detection, ...]:
        return tuple(d for d in self.frames[index] if d.kind == kind)


def _parse_box(text: str, where: str) -> BoundingBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise DatasetError(f"{where}: expected 4 comma-separated fields, got {text!r}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise DatasetError(f"{where}: non-numeric box field in {text!r}") from None
    for v in values:
        if not math.isfinite(v):
            raise DatasetError(f"{where}: non-finite box field in {text!r}")
    if values[2] <= 0 or values[3] <= 0:
        raise DatasetError(f"{where}: non-positive extent in {text!r}")
    try:
        return BoundingBox(*values)
    except BoxError as exc:
        raise DatasetError(f"{where}: {exc}") from None


def _read_lines(path: Path, expected: int, label: str) -> list[str]:
    if not path.is_file():
        raise DatasetError(f"missing {label} file: {path}")
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != expected:
        raise DatasetError(
            f"{path}: {len(lines)} lines but frame_count is {expected}"
        )
    return lines


_META_REQUIRED = {
    "name", "fps", "frame_count", "frame_width", "frame_height",
    "attributes", "verb", "noun",
}


def load_sequence(directory) -> Sequence:
    """Load and fully validate one sequence directory."""
    directory = Path(directory)
    meta_path = directory / "sequence.json"
    if not meta_path.is_file():
        raise DatasetError(f"missing metadata file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{meta_path}: invalid JSON ({exc})") from None
    if not isinstance(meta, dict):
        raise DatasetError(f"{meta_path}: top-level value must be an object")
    keys = set(meta)
    missing = _META_REQUIRED - keys
    if missing:
        raise DatasetError(f"{meta_path}: missing keys {sorted(missing)}")
    unknown = keys - _META_REQUIRED - {"frame_paths"}
    if unknown:
        raise DatasetError(f"{meta_path}: unknown keys {sorted(unknown)}")
    frame_count = meta["frame_count"]
    if not isinstance(frame_count, int) or frame_count < 1:
        raise DatasetError(f"{meta_path}: frame_count must be a positive integer")

    gt_path = directory / "groundtruth.txt"
    gt_lines = _read_lines(gt_path, frame_count, "ground-truth")
    targets: list[BoundingBox | None] = []
    for i, line in enumerate(gt_lines):
        if line == ABSENT_TOKEN:
            targets.append(None)
        else:
            targets.append(_parse_box(line, f"{gt_path}:{i + 1}"))

    hands: list[tuple[BoundingBox | None, BoundingBox | None]]
    hands_path = directory / "hands.txt"
    if hands_path.is_file():
        hands = []
        for i, line in enumerate(_read_lines(hands_path, frame_count, "hands")):
            where = f"{hands_path}:{i + 1}"
            sides = line.split(";")
            if len(sides) != 2:
                raise DatasetError(f"{where}: expected LEFT;RIGHT, got {line!r}")
            pair = tuple(
                None if side == "none" else _parse_box(side, where)
                for side in sides
            )
            hands.append(pair)  # type: ignore[arg-type]
    else:
        hands = [(None, None)] * frame_count

    interaction_path = directory / "interaction.txt"
    if interaction_path.is_file():
        labels = _read_lines(interaction_path, frame_count, "interaction")
        for i, label in enumerate(labels):
            if label not in INTERACTION_LABELS:
                raise DatasetError(
                    f"{interaction_path}:{i + 1}: unknown label {label!r}"
                )
    else:
        labels = ["NONE"] * frame_count

    frame_paths = None
    if "frame_paths" in meta:
        raw = meta["frame_paths"]
        if not isinstance(raw, list) or not all(isinstance(p, str) for p in raw):
            raise DatasetError(f"{meta_path}: frame_paths must be a list of strings")
        if len(raw) != frame_count:
            raise DatasetError(f"{meta_path}: frame_paths length mismatch")
        frame_paths = tuple(
            p if Path(p).is_absolute() else str(directory / p) for p in raw
        )

    frames = tuple(
        FrameAnnotation(
            target=targets[i],
            left_hand=hands[i][0],
            right_hand=hands[i][1],
            interaction=labels[i],
        )
        for i in range(frame_count)
    )
    if not isinstance(meta["attributes"], list):
        raise DatasetError(f"{meta_path}: attributes must be a list")
    return Sequence(
        name=str(meta["name"]),
        fps=float(meta["fps"]),
        frame_width=float(meta["frame_width"]),
        frame_height=float(meta["frame_height"]),
        frames=frames,
        attributes=frozenset(str(a) for a in meta["attributes"]),
        verb=str(meta["verb"]),
        noun=str(meta["noun"]),
        frame_paths=frame_paths,
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def _box_line(box: BoundingBox) -> str:
    return f"{_fmt(box.x)},{_fmt(box.y)},{_fmt(box.w)},{_fmt(box.h)}"


def write_sequence(seq: Sequence, directory) -> None:
    """Write a sequence in the on-disk format; inverse of load_sequence."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": seq.name,
        "fps": seq.fps,
        "frame_count": seq.frame_count,
        "frame_width": seq.frame_width,
        "frame_height": seq.frame_height,
        "attributes": sorted(seq.attributes),
        "verb": seq.verb,
        "noun": seq.noun,
    }
    if seq.frame_paths is not None:
        meta["frame_paths"] = list(seq.frame_paths)
    (directory / "sequence.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    gt_lines = [
        ABSENT_TOKEN if fr.target is None else _box_line(fr.target)
        for fr in seq.frames
    ]
    (directory / "groundtruth.txt").write_text(
        "\n".join(gt_lines) + "\n", encoding="utf-8"
    )

    if any(fr.left_hand or fr.right_hand for fr in seq.frames):
        hand_lines = [
            ";".join(
                "none" if side is None else _box_line(side)
                for side in (fr.left_hand, fr.right_hand)
            )
            for fr in seq.frames
        ]
        (directory / "hands.txt").write_text(
            "\n".join(hand_lines) + "\n", encoding="utf-8"
        )

    if any(fr.interaction != "NONE" for fr in seq.frames):
        (directory / "interaction.txt").write_text(
            "\n".join(fr.interaction for fr in seq.frames) + "\n", encoding="utf-8"
        )


def load_detections(path, frame_count: int) -> DetectionSet:
    """Parse a detections file into exactly frame_count per-frame lists."""
    path = Path(path)
    lines = _read_lines(path, frame_count, "detections")
    frames = []
    for i, line in enumerate(lines):
        where = f"{path}:{i + 1}"
        if line == "":
            frames.append(())
            continue
        dets = []
        for entry in line.split(";"):
            fields = entry.split(",")
            if len(fields) < 5 or len(fields) > 7:
                raise DatasetError(
                    f"{where}: expected 5 to 7 fields per entry, got {entry!r}"
                )
            box = _parse_box(",".join(fields[:4]), where)
            try:
                score = float(fields[4])
            except ValueError:
                raise DatasetError(f"{where}: bad score in {entry!r}") from None
            if not math.isfinite(score) or not 0.0 <= score <= 1.0:
                raise DatasetError(f"{where}: score outside [0,1] in {entry!r}")
            kind = "object"
            contact = None
            if len(fields) >= 6:
                if fields[5] not in _KIND_FROM_FILE:
                    raise DatasetError(f"{where}: unknown kind {fields[5]!r}")
                kind = _KIND_FROM_FILE[fields[5]]
            if len(fields) == 7:
                if fields[6] not in ("contact", "no_contact"):
                    raise DatasetError(f"{where}: unknown contact flag {fields[6]!r}")
                contact = fields[6] == "contact"
            dets.append(Detection(box=box, score=score, kind=kind, contact=contact))
        frames.append(tuple(dets))
    return DetectionSet(frames=tuple(frames))


def write_detections(dets: DetectionSet, path) -> None:
    lines = []
    for frame in dets.frames:
        entries = []
        for d in frame:
            fields = [_box_line(d.box), _fmt(d.score)]
            if d.kind != "object" or d.contact is not None:
                fields.append(_KIND_TO_FILE[d.kind])
            if d.contact is not None:
                fields.append("contact" if d.contact else "no_contact")
            entries.append(",".join(fields))
        lines.append(";".join(entries))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(root) -> list[Sequence]:
    """Load every sequence subdirectory of root, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    dirs = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / "sequence.json").is_file()
    )
    if not dirs:
        raise DatasetError(f"no sequence directories under {root}")
    sequences = [load_sequence(d) for d in dirs]
    names = [s.name for s in sequences]
    if len(set(names)) != len(names):
        raise DatasetError(f"duplicate sequence names under {root}")
    return sequences


def dataset_digest(root) -> str:
    """SHA-256 over the dataset's files, stable across runs."""
    root = Path(root)
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode("utf-8"))
            digest.update(b"\0")
            digest.update(hashlib.sha256(path.read_bytes()).hexdigest().encode())
            digest.update(b"\0")
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Dataset statistics and attribute recomputation


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def as_dict(self) -> dict:
        return {"edges": list(self.edges), "counts": list(self.counts)}


@dataclass(frozen=True)
class StatsReport:
    normalized_motion: float
    motion_pairs: int
    per_sequence_motion: dict[str, float]
    area_hist: Histogram
    area_ratio_hist: Histogram
    aspect_ratio_change_hist: Histogram
    sequences: int = 0
    frames: int = 0
    annotated_frames: int = 0

    def as_dict(self) -> dict:
        return {
            "sequences": self.sequences,
            "frames": self.frames,
            "annotated_frames": self.annotated_frames,
            "normalized_motion": self.normalized_motion,
            "motion_pairs": self.motion_pairs,
            "per_sequence_motion": dict(sorted(self.per_sequence_motion.items())),
            "box_area": self.area_hist.as_dict(),
            "area_ratio_vs_first": self.area_ratio_hist.as_dict(),
            "aspect_ratio_change_vs_first": self.aspect_ratio_change_hist.as_dict(),
        }


def _histogram(values, edges) -> Histogram:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size:
        arr = np.clip(arr, edges[0], edges[-1])
    counts, _ = np.histogram(arr, bins=np.asarray(edges))
    return Histogram(edges=tuple(edges), counts=tuple(int(c) for c in counts))


def _consecutive_present_pairs(seq: Sequence):
    for i in range(seq.frame_count - 1):
        a = seq.frames[i].target
        b = seq.frames[i + 1].target
        if a is not None and b is not None:
            yield a, b


def dataset_stats(sequences: list[Sequence]) -> StatsReport:
    """Motion and box-shape statistics over a set of sequences.

    The fast-motion statistic is the mean, over consecutive frame pairs
    with the target present in both, of the center displacement divided by
    the frame width (the toolkit's frame-size normalizer).
    """
    if not sequences:
        raise ValueError("dataset_stats needs at least one sequence")
    all_motion: list[float] = []
    per_seq: dict[str, float] = {}
    areas: list[float] = []
    area_ratios: list[float] = []
    aspect_changes: list[float] = []
    frames = 0
    annotated = 0
    for seq in sequences:
        seq_motion = [
            math.hypot(b.cx - a.cx, b.cy - a.cy) / seq.frame_width
            for a, b in _consecutive_present_pairs(seq)
        ]
        all_motion.extend(seq_motion)
        per_seq[seq.name] = (
            math.fsum(seq_motion) / len(seq_motion) if seq_motion else 0.0
        )
        first = seq.frames[0].target
        frames += seq.frame_count
        for fr in seq.frames:
            if fr.target is None:
                continue
            annotated += 1
            areas.append(fr.target.area)
            area_ratios.append(fr.target.area / first.area)
            aspect_changes.append(fr.target.aspect / first.aspect)
    motion = math.fsum(all_motion) / len(all_motion) if all_motion else 0.0
    return StatsReport(
        normalized_motion=motion,
        motion_pairs=len(all_motion),
        per_sequence_motion=per_seq,
        area_hist=_histogram(areas, AREA_HIST_EDGES),
        area_ratio_hist=_histogram(area_ratios, RATIO_HIST_EDGES),
        aspect_ratio_change_hist=_histogram(aspect_changes, RATIO_HIST_EDGES),
        sequences=len(sequences),
        frames=frames,
        annotated_frames=annotated,
    )


def recompute_attributes(seq: Sequence) -> frozenset[str]:
    """Recompute the attribute codes that have numeric definitions.

    SC/ARC compare each frame against the first frame with ratio outside
    [0.5, 2]; LR/HR threshold the box area; FM fires when the center moves
    farther between consecutive present frames than the box size
    (sqrt of the earlier box's area).
    """
    first = seq.frames[0].target
    found = set()
    for fr in seq.frames:
        t = fr.target
        if t is None:
            continue
        area_ratio = first.area / t.area
        if not RATIO_RANGE[0] <= area_ratio <= RATIO_RANGE[1]:
            found.add("SC")
        aspect_ratio = first.aspect / t.aspect
        if not RATIO_RANGE[0] <= aspect_ratio <= RATIO_RANGE[1]:
            found.add("ARC")
        if t.area < LOW_RESOLUTION_AREA:
            found.add("LR")
        if t.area > HIGH_RESOLUTION_AREA:
            found.add("HR")
    for a, b in _consecutive_present_pairs(seq):
        if math.hypot(b.cx - a.cx, b.cy - a.cy) > math.sqrt(a.area):
            found.add("FM")
            break
    return frozenset(found)


COMPUTABLE_ATTRIBUTES = frozenset({"SC", "ARC", "LR", "HR", "FM"})


def validate_attributes(seq: Sequence) -> dict[str, dict[str, bool]]:
    """Flag declared computable attributes that contradict the annotations.

    Returns {code: {"declared": bool, "recomputed": bool}} for every code
    where the two disagree; empty dict when consistent.
    """
    recomputed = recompute_attributes(seq)
    flags = {}
    for code in sorted(COMPUTABLE_ATTRIBUTES):
        declared = code in seq.attributes
        actual = code in recomputed
        if declared != actual:
            flags[code] = {"declared": declared, "recomputed": actual}
    return flags
