"""Axis-aligned bounding-box arithmetic shared by every other module.

Boxes are continuous (real-valued, no pixel quantization) with top-left
origin and y growing downward. Degenerate extents are rejected when a box
is constructed, so downstream code can assume w > 0 and h > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BoxError(ValueError):
    """Raised for geometrically invalid boxes."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle: left edge, top edge, width, height (pixels)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise BoxError(f"non-finite box field {name}={v!r}")
            object.__setattr__(self, name, float(v))
        if self.w <= 0 or self.h <= 0:
            raise BoxError(f"non-positive extent w={self.w}, h={self.h}")

    @property
    def cx(self) -> float:
        return self.x + 0.5 * self.w

    @property
    def cy(self) -> float:
        return self.y + 0.5 * self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    iw = max(iw, 0.0)
    ih = max(ih, 0.0)
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0.0:
        return 0.0
    return min(inter / union, 1.0)


def norm_center_distance(pred: BoundingBox, gt: BoundingBox) -> float:
    """Center distance with components normalized by the ground-truth extent.

    The x offset is divided by gt.w and the y offset by gt.h, which makes
    the measure invariant under uniform scaling of boxes and frame.
    """
    dx = (pred.cx - gt.cx) / gt.w
    dy = (pred.cy - gt.cy) / gt.h
    return math.sqrt(dx * dx + dy * dy)


def boxes_to_array(boxes) -> np.ndarray:
    """Stack BoundingBoxes into an (n, 4) float64 array for the kernels."""
    out = np.empty((len(boxes), 4), dtype=np.float64)
    for i, b in enumerate(boxes):
        out[i, 0] = b.x
        out[i, 1] = b.y
        out[i, 2] = b.w
        out[i, 3] = b.h
    return out
