"""Tracker execution: builtin baselines, external processes, recorded runs.

External trackers are child processes speaking a line protocol over stdin
and stdout (UTF-8, LF-terminated, space-separated decimal fields):

    harness -> client: hello
    client -> harness: trek-client 1 <name>
    harness -> client: init <frame_ref> <x> <y> <w> <h>
    client -> harness: ok
    harness -> client: frame <frame_ref>
    client -> harness: box <x> <y> <w> <h> [conf]
    harness -> client: quit
    client exits 0

frame_ref is an opaque token: the frame's image path when the sequence has
one, else "frame:<index>". Exchanges are strict request-response. Each run
owns exactly one child process. Timeouts, crashes, and malformed replies
mark the run failed; they never abort the evaluation.
"""

from __future__ import annotations

import queue
import shlex
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from fpvbench import baselines
from fpvbench.dataset import DatasetError, DetectionSet, Sequence
from fpvbench.geometry import BoundingBox, BoxError

DEFAULT_TIMEOUT = 60.0


class RunnerError(RuntimeError):
    """A tracker session failed (protocol violation, crash, or timeout)."""


@dataclass(frozen=True)
class TrackerHandle:
    """Resolvable tracker identity: builtin baseline, external command, or
    a directory of pre-recorded results."""

    kind: str
    name: str
    baseline: str = ""
    params: dict = field(default_factory=dict)
    command: str = ""
    directory: str = ""

    def __post_init__(self):
        if self.kind not in ("builtin", "external", "recorded"):
            raise RunnerError(f"unknown handle kind {self.kind!r}")


def parse_tracker_spec(spec: str) -> TrackerHandle:
    """Parse a CLI tracker spec.

    Grammar: `baseline:<name>[:k=v,...]` | `exec:<command line>` |
    `recorded:<directory>`.
    """
    scheme, _, body = spec.partition(":")
    if not body:
        raise RunnerError(f"bad tracker spec {spec!r}")
    if scheme == "baseline":
        name, _, param_text = body.partition(":")
        params = baselines.parse_params(param_text)
        if name not in baselines.BASELINES:
            known = ", ".join(sorted(baselines.BASELINES))
            raise RunnerError(f"unknown baseline {name!r} (known: {known})")
        label = name if not param_text else f"{name}:{param_text}"
        return TrackerHandle(kind="builtin", name=label, baseline=name, params=params)
    if scheme == "exec":
        return TrackerHandle(kind="external", name=_external_name(body), command=body)
    if scheme == "recorded":
        directory = Path(body)
        if not directory.is_dir():
            raise RunnerError(f"recorded results directory not found: {directory}")
        return TrackerHandle(
            kind="recorded", name=directory.name, directory=str(directory)
        )
    raise RunnerError(f"unknown tracker spec scheme {scheme!r} in {spec!r}")


def _external_name(command: str) -> str:
    """Stable identity for an external command before any handshake."""
    tokens = shlex.split(command)
    if not tokens:
        raise RunnerError("empty external tracker command")
    for token in tokens:
        stem = Path(token).stem
        if stem not in ("python", "python3", "env", "sh", "bash", "node", "-u"):
            return stem
    return Path(tokens[0]).stem


@dataclass(frozen=True)
class TrackRun:
    """One tracker pass over (part of) a sequence.

    frame_indices[0] is the initialization frame and boxes[0] the init box;
    later entries follow the run's processing order. latencies are seconds
    per exchange, aligned with frame_indices, when the session measured or
    replayed them.
    """

    tracker: str
    sequence: str
    frame_indices: tuple[int, ...]
    boxes: tuple[BoundingBox, ...]
    latencies: tuple[float, ...] | None = None
    failed: bool = False
    failure: str = ""

    def __post_init__(self):
        if len(self.frame_indices) != len(self.boxes):
            raise RunnerError("frame_indices and boxes length mismatch")
        if self.latencies is not None and len(self.latencies) != len(self.boxes):
            raise RunnerError("latencies length mismatch")
        if not self.failed and not self.frame_indices:
            raise RunnerError("empty run")

    @property
    def init_frame(self) -> int:
        return self.frame_indices[0]

    @property
    def init_box(self) -> BoundingBox:
        return self.boxes[0]


class BuiltinSession:
    """Drives a baseline instance, measuring (negligible) wall latency."""

    def __init__(self, handle: TrackerHandle, seq: Sequence,
                 detections: DetectionSet | None):
        context = baselines.RunContext(sequence=seq, detections=detections)
        self.tracker = baselines.create_baseline(
            handle.baseline, context, **handle.params
        )
        self.name = handle.name

    def init(self, frame_index: int, box: BoundingBox) -> float:
        t0 = time.perf_counter()
        self.tracker.init(frame_index, box)
        return time.perf_counter() - t0

    def step(self, frame_index: int) -> tuple[BoundingBox, float]:
        t0 = time.perf_counter()
        box = self.tracker.update(frame_index)
        latency = time.perf_counter() - t0
        if not isinstance(box, BoundingBox):
            raise RunnerError(f"baseline returned {type(box).__name__}, not a box")
        return box, latency

    def close(self) -> None:
        pass


class _PipeReader:
    """Background thread feeding child stdout lines into a queue."""

    def __init__(self, stream):
        self.queue: queue.Queue = queue.Queue()
        self.thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self.thread.start()

    def _pump(self, stream) -> None:
        for line in stream:
            self.queue.put(line.rstrip("\r\n"))
        self.queue.put(None)

    def readline(self, timeout: float) -> str:
        try:
            line = self.queue.get(timeout=timeout)
        except queue.Empty:
            raise RunnerError(f"no response within {timeout:g}s") from None
        if line is None:
            raise RunnerError("child closed its output stream")
        return line


class _StderrTail:
    """Drains child stderr, keeping the last few lines for diagnostics."""

    def __init__(self, stream, keep: int = 20):
        self.lines: deque = deque(maxlen=keep)
        self.thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self.thread.start()

    def _pump(self, stream) -> None:
        for line in stream:
            self.lines.append(line.rstrip("\r\n"))

    def tail(self) -> str:
        return "\n".join(self.lines)


class ExternalSession:
    """One child process driven through the wire protocol."""

    def __init__(self, handle: TrackerHandle, seq: Sequence,
                 detections: DetectionSet | None = None,
                 timeout: float = DEFAULT_TIMEOUT):
        self.seq = seq
        self.timeout = float(timeout)
        try:
            self.process = subprocess.Popen(
                shlex.split(handle.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise RunnerError(f"cannot start {handle.command!r}: {exc}") from None
        self.reader = _PipeReader(self.process.stdout)
        self.stderr = _StderrTail(self.process.stderr)
        self.name = self._handshake()

    def _fail(self, message: str) -> RunnerError:
        tail = self.stderr.tail()
        if tail:
            message = f"{message}\nclient stderr:\n{tail}"
        self._terminate()
        return RunnerError(message)

    def _send(self, line: str) -> None:
        try:
            self.process.stdin.write(line + "\n")
            self.process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise self._fail(f"child pipe closed while sending {line!r}: {exc}")

    def _recv(self) -> str:
        try:
            return self.reader.readline(self.timeout)
        except RunnerError as exc:
            raise self._fail(str(exc)) from None

    def _handshake(self) -> str:
        self._send("hello")
        line = self._recv()
        parts = line.split(" ")
        if len(parts) != 3 or parts[0] != "trek-client":
            raise self._fail(f"bad handshake line {line!r}")
        if parts[1] != "1":
            raise self._fail(f"unsupported protocol version {parts[1]!r}")
        return parts[2]

    @staticmethod
    def _encode_box(box: BoundingBox) -> str:
        return f"{box.x!r} {box.y!r} {box.w!r} {box.h!r}"

    def init(self, frame_index: int, box: BoundingBox) -> float:
        ref = self.seq.frame_ref(frame_index)
        t0 = time.perf_counter()
        self._send(f"init {ref} {self._encode_box(box)}")
        line = self._recv()
        latency = time.perf_counter() - t0
        if line != "ok":
            raise self._fail(f"expected 'ok' after init, got {line!r}")
        return latency

    def step(self, frame_index: int) -> tuple[BoundingBox, float]:
        ref = self.seq.frame_ref(frame_index)
        t0 = time.perf_counter()
        self._send(f"frame {ref}")
        line = self._recv()
        latency = time.perf_counter() - t0
        parts = line.split(" ")
        if parts[0] != "box" or len(parts) not in (5, 6):
            raise self._fail(f"expected a box reply, got {line!r}")
        try:
            x, y, w, h = (float(p) for p in parts[1:5])
            if len(parts) == 6:
                float(parts[5])
            box = BoundingBox(x, y, w, h)
        except (ValueError, BoxError) as exc:
            raise self._fail(f"malformed box reply {line!r}: {exc}") from None
        return box, latency

    def _terminate(self) -> None:
        if self.process.poll() is None:
            self.process.terminate()
            try:
                self.process.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self.process.kill()
                self.process.wait()

    def close(self) -> None:
        if self.process.poll() is None:
            try:
                self.process.stdin.write("quit\n")
                self.process.stdin.flush()
                self.process.stdin.close()
            except (BrokenPipeError, OSError):
                pass
            try:
                self.process.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                pass
        self._terminate()


class RecordedSession:
    """Replays a pre-recorded run; only the full forward order is valid."""

    def __init__(self, handle: TrackerHandle, seq: Sequence,
                 detections: DetectionSet | None = None):
        self.run = load_recorded(handle.directory, seq, tracker=handle.name)
        self.name = handle.name
        self.cursor = 0

    def init(self, frame_index: int, box: BoundingBox) -> float:
        if frame_index != 0:
            raise RunnerError(
                "recorded runs only support initialization at frame 0"
            )
        self.cursor = 1
        return self._latency(0)

    def _latency(self, index: int) -> float:
        if self.run.latencies is None:
            return 0.0
        return self.run.latencies[index]

    def step(self, frame_index: int) -> tuple[BoundingBox, float]:
        if frame_index != self.cursor:
            raise RunnerError(
                f"recorded run is strictly sequential; expected frame "
                f"{self.cursor}, got {frame_index}"
            )
        box = self.run.boxes[frame_index]
        latency = self._latency(frame_index)
        self.cursor += 1
        return box, latency

    def close(self) -> None:
        pass


def open_session(handle: TrackerHandle, seq: Sequence,
                 detections: DetectionSet | None = None,
                 timeout: float = DEFAULT_TIMEOUT):
    if handle.kind == "builtin":
        return BuiltinSession(handle, seq, detections)
    if handle.kind == "external":
        return ExternalSession(handle, seq, detections, timeout=timeout)
    return RecordedSession(handle, seq, detections)


def session(handle: TrackerHandle, seq: Sequence, init_frame: int,
            init_box: BoundingBox, frame_order, *,
            detections: DetectionSet | None = None,
            timeout: float = DEFAULT_TIMEOUT) -> TrackRun:
    """Run one complete pass: handshake, init, one exchange per frame.

    frame_order lists the frames after the init frame, in processing
    order. Any failure yields a TrackRun with failed=True carrying the
    exchanges completed so far; it never raises.
    """
    order = list(frame_order)
    indices = [init_frame]
    boxes = [init_box]
    latencies = []
    sess = None
    try:
        sess = open_session(handle, seq, detections, timeout=timeout)
        latencies.append(sess.init(init_frame, init_box))
        for index in order:
            box, latency = sess.step(index)
            indices.append(index)
            boxes.append(box)
            latencies.append(latency)
    except (RunnerError, baselines.BaselineError, DatasetError) as exc:
        return TrackRun(
            tracker=handle.name,
            sequence=seq.name,
            frame_indices=tuple(indices),
            boxes=tuple(boxes),
            latencies=tuple(latencies) if len(latencies) == len(boxes) else None,
            failed=True,
            failure=str(exc),
        )
    finally:
        if sess is not None:
            sess.close()
    return TrackRun(
        tracker=handle.name,
        sequence=seq.name,
        frame_indices=tuple(indices),
        boxes=tuple(boxes),
        latencies=tuple(latencies),
    )


def load_recorded(directory, seq: Sequence, tracker: str = "") -> TrackRun:
    """Load `<dir>/<sequence>.txt` (one `x,y,w,h` line per frame, line 1 =
    the frame-0 box) plus optional `<dir>/<sequence>_times.txt` with one
    latency in seconds per line."""
    directory = Path(directory)
    path = directory / f"{seq.name}.txt"
    if not path.is_file():
        raise RunnerError(f"missing recorded results file: {path}")
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != seq.frame_count:
        raise RunnerError(
            f"{path}: {len(lines)} lines but sequence has "
            f"{seq.frame_count} frames"
        )
    boxes = []
    for i, line in enumerate(lines):
        parts = line.split(",")
        if len(parts) != 4:
            raise RunnerError(f"{path}:{i + 1}: expected x,y,w,h, got {line!r}")
        try:
            boxes.append(BoundingBox(*(float(p) for p in parts)))
        except (ValueError, BoxError) as exc:
            raise RunnerError(f"{path}:{i + 1}: {exc}") from None
    latencies = None
    times_path = directory / f"{seq.name}_times.txt"
    if times_path.is_file():
        time_lines = times_path.read_text(encoding="utf-8").split("\n")
        if time_lines and time_lines[-1] == "":
            time_lines.pop()
        if len(time_lines) != seq.frame_count:
            raise RunnerError(
                f"{times_path}: {len(time_lines)} lines but sequence has "
                f"{seq.frame_count} frames"
            )
        try:
            latencies = tuple(float(t) for t in time_lines)
        except ValueError as exc:
            raise RunnerError(f"{times_path}: {exc}") from None
    return TrackRun(
        tracker=tracker or directory.name,
        sequence=seq.name,
        frame_indices=tuple(range(seq.frame_count)),
        boxes=tuple(boxes),
        latencies=latencies,
    )
