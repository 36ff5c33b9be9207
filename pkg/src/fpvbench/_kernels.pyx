# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled box kernels. Same contract as fpvbench._kernels_py."""

import numpy as np

from libc.math cimport sqrt


def iou_pairs(double[:, :] a, double[:, :] b):
    cdef Py_ssize_t n = a.shape[0]
    out = np.zeros(n, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i
    cdef double ax2, ay2, bx2, by2, iw, ih, inter, union
    for i in range(n):
        ax2 = a[i, 0] + a[i, 2]
        ay2 = a[i, 1] + a[i, 3]
        bx2 = b[i, 0] + b[i, 2]
        by2 = b[i, 1] + b[i, 3]
        iw = min(ax2, bx2) - max(a[i, 0], b[i, 0])
        ih = min(ay2, by2) - max(a[i, 1], b[i, 1])
        iw = max(iw, 0.0)
        ih = max(ih, 0.0)
        inter = iw * ih
        union = a[i, 2] * a[i, 3] + b[i, 2] * b[i, 3] - inter
        if union > 0.0:
            o[i] = min(inter / union, 1.0)
    return out


def center_dist_pairs(double[:, :] pred, double[:, :] gt):
    cdef Py_ssize_t n = pred.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i
    cdef double dx, dy
    for i in range(n):
        dx = ((pred[i, 0] + 0.5 * pred[i, 2]) - (gt[i, 0] + 0.5 * gt[i, 2])) / gt[i, 2]
        dy = ((pred[i, 1] + 0.5 * pred[i, 3]) - (gt[i, 1] + 0.5 * gt[i, 3])) / gt[i, 3]
        o[i] = sqrt(dx * dx + dy * dy)
    return out


def fraction_above(double[:] values, double[:] thresholds):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t t = thresholds.shape[0]
    out = np.empty(t, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, j, count
    for j in range(t):
        count = 0
        for i in range(n):
            if values[i] > thresholds[j]:
                count += 1
        o[j] = count / <double>n
    return out


def fraction_below(double[:] values, double[:] thresholds):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t t = thresholds.shape[0]
    out = np.empty(t, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, j, count
    for j in range(t):
        count = 0
        for i in range(n):
            if values[i] < thresholds[j]:
                count += 1
        o[j] = count / <double>n
    return out


def extent_before_collapse(double[:] ious, double[:] thresholds):
    cdef Py_ssize_t n = ious.shape[0]
    cdef Py_ssize_t t = thresholds.shape[0]
    out = np.empty(t, dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i, j, first
    for j in range(t):
        first = n
        for i in range(n):
            if ious[i] <= thresholds[j]:
                first = i
                break
        o[j] = first / <double>n
    return out
