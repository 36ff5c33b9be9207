"""Wire-protocol adapter: the serve loop owns all framing.

Tracker authors implement two callbacks, `init(frame_ref, box)` and
`update(frame_ref) -> box`, and hand the object to `serve()`. The adapter
answers the harness commands

    hello                      ->  trek-client 1 <name>
    init <ref> <x> <y> <w> <h> ->  ok
    frame <ref>                ->  box <x> <y> <w> <h> [conf]
    quit                       ->  (exit 0)

one line per exchange, UTF-8, LF-terminated, and never writes anything
else to standard output. Box fields are emitted with repr() so float
values round-trip bit-exactly through the protocol.
"""

from __future__ import annotations

import sys
from typing import NamedTuple

PROTOCOL_VERSION = 1


class Box(NamedTuple):
    """Axis-aligned box, top-left corner plus extent."""

    x: float
    y: float
    w: float
    h: float


class ClientError(Exception):
    """Unrecoverable per-session problem inside a tracker."""


def _encode(box) -> str:
    x, y, w, h = box
    return f"{float(x)!r} {float(y)!r} {float(w)!r} {float(h)!r}"


def serve(tracker, name: str | None = None, stdin=None, stdout=None) -> int:
    """Run one request-response session; returns the process exit code.

    0 after `quit` or end of input, nonzero after a malformed harness
    command or a tracker error. Diagnostics go to standard error so the
    protocol stream stays clean.
    """
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    if name is None:
        name = getattr(tracker, "name", type(tracker).__name__.lower())

    def reply(line: str) -> None:
        stdout.write(line + "\n")
        stdout.flush()

    def fail(message: str) -> int:
        print(f"fpvclient: {message}", file=sys.stderr, flush=True)
        return 2

    initialized = False
    for raw in stdin:
        line = raw.rstrip("\r\n")
        if line == "hello":
            reply(f"trek-client {PROTOCOL_VERSION} {name}")
        elif line == "quit":
            return 0
        elif line.startswith("init "):
            # frame refs may contain spaces; the box is the last 4 fields
            parts = line[len("init "):].rsplit(" ", 4)
            if len(parts) != 5:
                return fail(f"malformed init command: {line!r}")
            try:
                box = Box(*(float(p) for p in parts[1:]))
            except ValueError:
                return fail(f"malformed init box: {line!r}")
            try:
                tracker.init(parts[0], box)
            except ClientError as exc:
                return fail(str(exc))
            initialized = True
            reply("ok")
        elif line.startswith("frame "):
            if not initialized:
                return fail("frame before init")
            try:
                out = tracker.update(line[len("frame "):])
            except ClientError as exc:
                return fail(str(exc))
            if isinstance(out, tuple) and len(out) == 2:
                box, conf = out
                reply(f"box {_encode(box)} {float(conf)!r}")
            else:
                reply(f"box {_encode(out)}")
        else:
            return fail(f"unknown command: {line!r}")
    return 0
