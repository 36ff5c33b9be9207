"""Numpy implementation of the per-frame box kernels.

Mirrors the compiled extension in fpvbench._kernels: identical signatures,
identical per-element arithmetic (same operation order, IEEE doubles), so
the two backends produce bit-identical outputs. All boxes are (x, y, w, h)
rows of float64 arrays.
"""

import numpy as np


def iou_pairs(a, b):
    """Row-wise IoU of two (n, 4) box arrays. Returns (n,) float64."""
    ax2 = a[:, 0] + a[:, 2]
    ay2 = a[:, 1] + a[:, 3]
    bx2 = b[:, 0] + b[:, 2]
    by2 = b[:, 1] + b[:, 3]
    iw = np.minimum(ax2, bx2) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(ay2, by2) - np.maximum(a[:, 1], b[:, 1])
    iw = np.maximum(iw, 0.0)
    ih = np.maximum(ih, 0.0)
    inter = iw * ih
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    out = np.zeros(len(a), dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0.0)
    np.minimum(out, 1.0, out=out)
    return out


def center_dist_pairs(pred, gt):
    """Row-wise center distance normalized by the ground-truth extent.

    The x component is divided by gt width, the y component by gt height,
    before taking the Euclidean norm. Returns (n,) float64.
    """
    dx = ((pred[:, 0] + 0.5 * pred[:, 2]) - (gt[:, 0] + 0.5 * gt[:, 2])) / gt[:, 2]
    dy = ((pred[:, 1] + 0.5 * pred[:, 3]) - (gt[:, 1] + 0.5 * gt[:, 3])) / gt[:, 3]
    return np.sqrt(dx * dx + dy * dy)


def fraction_above(values, thresholds):
    """For each threshold t: fraction of values strictly greater than t."""
    counts = (values[None, :] > thresholds[:, None]).sum(axis=1)
    return counts / float(len(values))


def fraction_below(values, thresholds):
    """For each threshold t: fraction of values strictly less than t."""
    counts = (values[None, :] < thresholds[:, None]).sum(axis=1)
    return counts / float(len(values))


def extent_before_collapse(ious, thresholds):
    """For each threshold t: normalized count of frames strictly before the
    first frame whose overlap is <= t; 1.0 when no frame collapses."""
    n = len(ious)
    hit = ious[None, :] <= thresholds[:, None]
    first = np.where(hit.any(axis=1), hit.argmax(axis=1), n)
    return first / float(n)
