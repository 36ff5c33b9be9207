"""Toy reference trackers.

All three are deterministic given identical inputs. Echo needs no pixels,
center-box can run with or without them, template-correlation requires
readable frame images.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from fpvclient.adapter import Box, ClientError
from fpvclient.frames import load_gray


class EchoTracker:
    """Returns the initialization box forever."""

    name = "echo"

    def __init__(self):
        self.box: Box | None = None

    def init(self, frame_ref: str, box: Box) -> None:
        self.box = box

    def update(self, frame_ref: str) -> Box:
        return self.box


class CenterBoxTracker:
    """Init-sized box centered in the frame.

    Frame dimensions come from the image behind each frame ref, or from an
    explicit (width, height) for annotation-only datasets.
    """

    name = "center-box"

    def __init__(self, frame_size: tuple[float, float] | None = None):
        self.frame_size = frame_size
        self.size: tuple[float, float] | None = None

    def _dims(self, frame_ref: str) -> tuple[float, float]:
        if self.frame_size is not None:
            return self.frame_size
        img = load_gray(frame_ref)
        return float(img.shape[1]), float(img.shape[0])

    def init(self, frame_ref: str, box: Box) -> None:
        self.size = (box.w, box.h)

    def update(self, frame_ref: str) -> Box:
        fw, fh = self._dims(frame_ref)
        w, h = self.size
        return Box((fw - w) / 2.0, (fh - h) / 2.0, w, h)


class TemplateTracker:
    """Zero-mean normalized cross-correlation over a local search window.

    The template is cropped once at initialization; every update scans the
    previous box inflated by `margin` pixels and moves the box to the
    best-scoring placement (size stays fixed). A uniform template leaves
    zero-mean correlation blind, so scoring then falls back to the plain
    cosine score, which peaks only at an equally uniform placement. Flat
    candidate patches score -1 so an all-background window never outbids
    a real match.
    """

    name = "template"

    def __init__(self, margin: int = 12):
        self.margin = int(margin)
        self.box: Box | None = None
        self.template: np.ndarray | None = None

    def init(self, frame_ref: str, box: Box) -> None:
        img = load_gray(frame_ref)
        x0, y0 = int(round(box.x)), int(round(box.y))
        x1 = x0 + max(1, int(round(box.w)))
        y1 = y0 + max(1, int(round(box.h)))
        if x0 < 0 or y0 < 0 or x1 > img.shape[1] or y1 > img.shape[0]:
            raise ClientError("init box reaches outside the frame")
        self.template = img[y0:y1, x0:x1].copy()
        self.box = box

    def update(self, frame_ref: str) -> Box:
        img = load_gray(frame_ref)
        th, tw = self.template.shape
        wx0 = max(0, int(round(self.box.x)) - self.margin)
        wy0 = max(0, int(round(self.box.y)) - self.margin)
        wx1 = min(img.shape[1], int(round(self.box.x)) + tw + self.margin)
        wy1 = min(img.shape[0], int(round(self.box.y)) + th + self.margin)
        window = img[wy0:wy1, wx0:wx1]
        if window.shape[0] < th or window.shape[1] < tw:
            return self.box  # window collapsed at the border; hold position

        t0 = self.template - self.template.mean()
        t_norm = float(np.sqrt((t0 * t0).sum()))
        zero_mean = t_norm > 0.0
        if not zero_mean:
            t0 = self.template
            t_norm = float(np.sqrt((t0 * t0).sum()))
            if t_norm == 0.0:
                return self.box  # all-zero template carries no signal

        patches = sliding_window_view(window, (th, tw))
        num = np.einsum("ijkl,kl->ij", patches, t0)
        p_sq = (patches * patches).sum(axis=(2, 3))
        if zero_mean:
            p_sum = patches.sum(axis=(2, 3))
            var = np.maximum(p_sq - p_sum * p_sum / t0.size, 0.0)
        else:
            var = p_sq
        denom = np.sqrt(var) * t_norm
        scores = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0),
                          -1.0)
        iy, ix = np.unravel_index(int(np.argmax(scores)), scores.shape)
        self.box = Box(float(wx0 + ix), float(wy0 + iy), self.box.w, self.box.h)
        return self.box


TRACKERS = {
    "echo": EchoTracker,
    "center-box": CenterBoxTracker,
    "template": TemplateTracker,
}
