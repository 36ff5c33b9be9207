"""Backend selection for the hot box kernels.

Imports the compiled extension when it was built, otherwise the numpy
fallback. Set FPVBENCH_PURE_PYTHON=1 to force the fallback (used by the
kernel benchmark and by tests that compare the two backends).
"""

import os

from fpvbench import _kernels_py

if os.environ.get("FPVBENCH_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from fpvbench import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

iou_pairs = _impl.iou_pairs
center_dist_pairs = _impl.center_dist_pairs
fraction_above = _impl.fraction_above
fraction_below = _impl.fraction_below
extent_before_collapse = _impl.extent_before_collapse
