"""Benchmark toolkit for single-object tracking in first-person video.

The package bundles the annotation data model and file formats, the
evaluation measures (success, normalized precision, generalized success
robustness), the evaluation protocols (OPE, detection-initialized OPE,
multi-start, real-time, and hand-object interaction), reference baseline
trackers, a process runner for external trackers, and deterministic report
generation. See the fpvbench command line entry point for the user-facing
workflow.
"""

__version__ = "0.1.0"

from fpvbench.geometry import BoundingBox, BoxError, iou, norm_center_distance

__all__ = ["BoundingBox", "BoxError", "iou", "norm_center_distance", "__version__"]
