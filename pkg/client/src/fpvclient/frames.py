"""Frame decoding for the pixel-using toy trackers."""

from __future__ import annotations

import numpy as np
from PIL import Image, UnidentifiedImageError

from fpvclient.adapter import ClientError


def load_gray(frame_ref: str) -> np.ndarray:
    """Decode the referenced image as a float64 grayscale array.

    Raises ClientError when no readable image sits behind the ref,
    including the pixel-free `frame:<index>` tokens that annotation-only
    datasets use.
    """
    if frame_ref.startswith("frame:"):
        raise ClientError(f"no image behind frame ref {frame_ref!r}")
    try:
        with Image.open(frame_ref) as img:
            return np.asarray(img.convert("L"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise ClientError(f"unreadable image {frame_ref!r}: {exc}") from None
