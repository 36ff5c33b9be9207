"""Fixtures: a live wire-protocol driver, a synthetic clip with frame
images, and a helper that runs the benchmark CLI as an external tool."""

import json
import subprocess
import sys
import threading
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

CLIP_FRAMES = 24
CLIP_SIZE = (96, 72)
SQUARE = 16


class WireClient:
    """Drives one client subprocess line by line with reply timeouts."""

    def __init__(self, argv):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.PIPE, text=True, encoding="utf-8", bufsize=1,
        )

    def send(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv(self, timeout: float = 10.0) -> str:
        result = {}

        def pump():
            result["line"] = self.proc.stdout.readline()

        thread = threading.Thread(target=pump, daemon=True)
        thread.start()
        thread.join(timeout)
        if "line" not in result:
            self.proc.kill()
            raise AssertionError("client sent no reply in time")
        return result["line"].rstrip("\n")

    def ask(self, line: str) -> str:
        self.send(line)
        return self.recv()

    def wait(self, timeout: float = 10.0) -> int:
        return self.proc.wait(timeout=timeout)

    def stderr_text(self) -> str:
        return self.proc.stderr.read()

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()


@pytest.fixture
def wire():
    """Factory spawning `fpvclient <tracker> ...` wire clients."""
    clients = []

    def spawn(*args):
        client = WireClient([sys.executable, "-m", "fpvclient", *args])
        clients.append(client)
        return client

    yield spawn
    for client in clients:
        client.close()


def square_frame(offset_x: int, offset_y: int) -> np.ndarray:
    img = np.zeros((CLIP_SIZE[1], CLIP_SIZE[0]), dtype=np.uint8)
    img[offset_y:offset_y + SQUARE, offset_x:offset_x + SQUARE] = 255
    return img


def write_frame(path: Path, img: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img, mode="L").save(path)


@pytest.fixture(scope="session")
def clip_root(tmp_path_factory) -> Path:
    """One-sequence dataset: a 16px square translating 2px right per frame,
    with PNG frames referenced from the sequence metadata."""
    root = tmp_path_factory.mktemp("clip")
    seq_dir = root / "square"
    boxes = []
    paths = []
    for i in range(CLIP_FRAMES):
        x = 8 + 2 * i
        y = 28
        rel = f"img/{i:06d}.png"
        write_frame(seq_dir / rel, square_frame(x, y))
        boxes.append(f"{x},{y},{SQUARE},{SQUARE}")
        paths.append(rel)
    meta = {
        "name": "square",
        "fps": 30.0,
        "frame_count": CLIP_FRAMES,
        "frame_width": float(CLIP_SIZE[0]),
        "frame_height": float(CLIP_SIZE[1]),
        "attributes": [],
        "verb": "slide",
        "noun": "square",
        "frame_paths": paths,
    }
    (seq_dir / "sequence.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (seq_dir / "groundtruth.txt").write_text(
        "\n".join(boxes) + "\n", encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def launcher(tmp_path_factory):
    """Per-tracker launcher scripts so external runs get readable names."""
    scripts = tmp_path_factory.mktemp("launchers")

    def command(tracker: str, *extra: str) -> str:
        path = scripts / f"{tracker.replace('-', '_')}.py"
        if not path.exists():
            path.write_text(
                "import sys\n"
                "from fpvclient.__main__ import main\n"
                "\n"
                f"sys.exit(main([{tracker!r}] + sys.argv[1:]))\n",
                encoding="utf-8",
            )
        return " ".join([sys.executable, str(path), *extra])

    return command


@pytest.fixture(scope="session")
def bench():
    """Run the benchmark CLI as an external process; returns (rc, out, err)."""

    def run(*args):
        proc = subprocess.run(
            [sys.executable, "-m", "fpvbench.cli", *args],
            capture_output=True, text=True, timeout=120,
        )
        return proc.returncode, proc.stdout, proc.stderr

    return run
