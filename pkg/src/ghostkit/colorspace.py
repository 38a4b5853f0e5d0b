"""RGB <-> YCbCr conversion for the analysis stage.

Uses the studio-swing BT.601 coefficients (Y in [16, 235.045]); planes stay
in floating point so later amplification is not polluted by intermediate
rounding. This is deliberately separate from whatever conversion the JPEG
codec applies internally.
"""

from __future__ import annotations

import numpy as np

from . import codec

# Rows: Y, Cb, Cr. Columns: R, G, B.
FORWARD = np.array(
    [
        [0.257, 0.504, 0.098],
        [-0.148, -0.291, 0.439],
        [0.439, -0.368, -0.071],
    ]
)
OFFSET = np.array([16.0, 128.0, 128.0])
INVERSE = np.linalg.inv(FORWARD)


def rgb_to_ycbcr(image) -> np.ndarray:
    """Convert an (H, W, 3) uint8 RGB raster to float64 Y/Cb/Cr planes."""
    arr = codec.check_rgb(image)
    return arr.astype(np.float64) @ FORWARD.T + OFFSET


def ycbcr_to_rgb(planes) -> np.ndarray:
    """Invert rgb_to_ycbcr: round half away from zero, clamp to [0, 255]."""
    arr = np.asarray(planes, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected YCbCr array of shape (H, W, 3), got {arr.shape}")
    rgb = (arr - OFFSET) @ INVERSE.T
    rounded = np.copysign(np.floor(np.abs(rgb) + 0.5), rgb)
    return np.clip(rounded, 0, 255).astype(np.uint8)
