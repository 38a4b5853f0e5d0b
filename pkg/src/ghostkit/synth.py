"""Deterministic natural-looking test images.

Blends low-frequency illumination gradients with band-limited noise so the
result compresses like a photograph: enough mid/high-frequency content that
requantization at different qualities leaves a measurable residue. Used by
the test suite and CLI demos in place of an external photo corpus.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def textured_image(width: int = 512, height: int = 384, seed: int = 0) -> np.ndarray:
    """Render one (height, width, 3) uint8 image from a seed."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy /= height
    xx /= width

    # Two random low-frequency waves act as illumination / large structures.
    lum = np.zeros((height, width))
    for _ in range(2):
        fx, fy = rng.uniform(0.5, 2.5, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        lum += rng.uniform(20, 45) * np.cos(2 * np.pi * (fx * xx + fy * yy) + phase)

    # Band-limited noise from coarse to fine.
    for sigma, amp in ((8.0, 90.0), (3.0, 55.0), (1.2, 30.0), (0.6, 12.0)):
        lum += amp * ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma)

    # A few soft blobs so there are object-like regions.
    for _ in range(4):
        cy, cx = rng.uniform(0.1, 0.9) * height, rng.uniform(0.1, 0.9) * width
        ry, rx = rng.uniform(0.05, 0.25) * height, rng.uniform(0.05, 0.25) * width
        blob = np.exp(-(((yy * height - cy) / ry) ** 2 + ((xx * width - cx) / rx) ** 2))
        lum += rng.uniform(-35, 35) * blob

    lum -= lum.min()
    lum *= 200.0 / max(lum.max(), 1e-9)
    lum += 25.0

    # Smooth chroma fields, weaker than luma as in natural photos.
    cb = 14.0 * ndimage.gaussian_filter(rng.standard_normal((height, width)), 6.0)
    cr = 14.0 * ndimage.gaussian_filter(rng.standard_normal((height, width)), 6.0)
    r = lum + 1.4 * cr
    g = lum - 0.7 * cr - 0.3 * cb
    b = lum + 1.8 * cb
    return np.clip(np.stack([r, g, b], axis=2), 0, 255).astype(np.uint8)


def corpus(n: int, width: int = 512, height: int = 384, seed: int = 20260810) -> list:
    """A list of n deterministic images; seed offsets keep them distinct."""
    return [textured_image(width, height, seed=seed + i) for i in range(n)]
