"""Similarity and energy metrics over the recompression sweep.

SSIM is the three-factor luminance/contrast/structure product evaluated over
Gaussian-weighted sliding windows of the luma plane; energy is the plain sum
of an amplified difference map. The cover quality of a suspect image is read
off the sweep curve as the first interior SSIM maximum cross-checked against
the first interior energy minimum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import codec, colorspace


class EstimationError(RuntimeError):
    """Raised when a sweep curve has no interior extremum to read."""


@dataclass(frozen=True)
class SsimParams:
    """Stabilizing constants and window geometry for SSIM."""

    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    window_size: int = 11
    window_sigma: float = 1.5

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0 or self.c3 <= 0:
            raise ValueError("SSIM stabilizers must be positive")
        if self.window_size < 2 or self.window_size % 2 == 0:
            raise ValueError("window size must be an odd integer >= 3")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    @property
    def c3(self) -> float:
        return self.c2 / 2

    def window_1d(self) -> np.ndarray:
        x = np.arange(self.window_size, dtype=np.float64) - (self.window_size - 1) / 2
        g = np.exp(-(x * x) / (2 * self.window_sigma**2))
        return g / g.sum()

    def window(self) -> np.ndarray:
        """Full 2-D window weights; they sum to 1."""
        g = self.window_1d()
        return np.outer(g, g)


DEFAULT_SSIM = SsimParams()


def _luma(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim == 2:
        return arr.astype(np.float64)
    return colorspace.rgb_to_ycbcr(arr)[:, :, 0]


def _window_means(plane: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Separable correlation, then crop to windows fully inside the image.
    r = len(g) // 2
    out = ndimage.correlate1d(plane, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a, b, params: SsimParams | None = None) -> float:
    """Mean SSIM between two images of equal size.

    Accepts RGB rasters (compared on their luma plane) or bare 2-D planes.
    """
    params = params or DEFAULT_SSIM
    y1 = _luma(a)
    y2 = _luma(b)
    if y1.shape != y2.shape:
        raise ValueError(f"image sizes differ: {y1.shape} vs {y2.shape}")
    if min(y1.shape) < params.window_size:
        raise ValueError(
            f"image {y1.shape} is smaller than the {params.window_size}px window"
        )
    g = params.window_1d()
    mu1 = _window_means(y1, g)
    mu2 = _window_means(y2, g)
    var1 = np.clip(_window_means(y1 * y1, g) - mu1 * mu1, 0.0, None)
    var2 = np.clip(_window_means(y2 * y2, g) - mu2 * mu2, 0.0, None)
    cov = _window_means(y1 * y2, g) - mu1 * mu2
    sd1 = np.sqrt(var1)
    sd2 = np.sqrt(var2)
    lum = (2 * mu1 * mu2 + params.c1) / (mu1 * mu1 + mu2 * mu2 + params.c1)
    con = (2 * sd1 * sd2 + params.c2) / (var1 + var2 + params.c2)
    struct = (cov + params.c3) / (sd1 * sd2 + params.c3)
    return float(np.clip(lum * con * struct, -1.0, 1.0).mean())


def energy(difference_map) -> float:
    """Sum of every amplified difference value across all planes."""
    planes = getattr(difference_map, "planes", difference_map)
    return float(np.sum(planes))


class CurveSample(NamedTuple):
    quality: int
    ssim: float
    energy: float


@dataclass
class SweepCurve:
    """Ordered (quality, ssim, energy) samples of a recompression sweep."""

    samples: list

    def __post_init__(self):
        self.samples = [CurveSample(int(q), float(s), float(e)) for q, s, e in self.samples]
        qs = self.qualities
        if any(q2 <= q1 for q1, q2 in zip(qs, qs[1:])):
            raise ValueError("curve qualities must be strictly increasing")
        if any(s.energy < 0 for s in self.samples):
            raise ValueError("curve energies must be non-negative")

    @property
    def qualities(self) -> list:
        return [s.quality for s in self.samples]

    @property
    def ssim_values(self) -> list:
        return [s.ssim for s in self.samples]

    @property
    def energy_values(self) -> list:
        return [s.energy for s in self.samples]

    def step(self) -> int:
        """Smallest quality spacing between consecutive samples."""
        qs = self.qualities
        if len(qs) < 2:
            return 1
        return min(q2 - q1 for q1, q2 in zip(qs, qs[1:]))

    def to_csv(self) -> str:
        lines = ["quality,ssim,energy"]
        lines += [f"{s.quality},{s.ssim!r},{s.energy!r}" for s in self.samples]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SweepCurve":
        rows = [line for line in text.strip().splitlines() if line]
        if not rows or rows[0] != "quality,ssim,energy":
            raise ValueError("missing quality,ssim,energy header")
        samples = []
        for row in rows[1:]:
            q, s, e = row.split(",")
            samples.append(CurveSample(int(q), float(s), float(e)))
        return cls(samples)

    def to_json(self, estimate: "QualityEstimate | None" = None) -> str:
        record = {
            "samples": [{"quality": s.quality, "ssim": s.ssim, "energy": s.energy}
                        for s in self.samples],
            "estimate": estimate.to_dict() if estimate is not None else None,
        }
        return json.dumps(record, sort_keys=True)


@dataclass
class QualityEstimate:
    """Cover-quality readout from a sweep curve."""

    q_ssim: int | None
    q_energy: int | None
    q_final: int
    confidence: str  # "high" | "low"

    def to_dict(self) -> dict:
        return {
            "q_ssim": self.q_ssim,
            "q_energy": self.q_energy,
            "q_final": self.q_final,
            "confidence": self.confidence,
        }


def _pairs(samples) -> list:
    pts = [(int(q), float(v)) for q, v in samples]
    if len(pts) < 3:
        raise ValueError("need at least 3 samples to find an interior extremum")
    return pts


def first_local_max(samples):
    """Quality of the first interior local maximum, or None.

    A sample counts when it rises above its left neighbor and is not below
    its right one, so a plateau reports its leftmost quality; endpoints are
    never returned.
    """
    pts = _pairs(samples)
    for i in range(1, len(pts) - 1):
        if pts[i][1] > pts[i - 1][1] and pts[i][1] >= pts[i + 1][1]:
            return pts[i][0]
    return None


def first_local_min(samples):
    """Quality of the first interior local minimum, or None (mirror of max)."""
    pts = _pairs(samples)
    for i in range(1, len(pts) - 1):
        if pts[i][1] < pts[i - 1][1] and pts[i][1] <= pts[i + 1][1]:
            return pts[i][0]
    return None


def estimate_cover_quality(curve: SweepCurve) -> QualityEstimate:
    """Read the cover quality from a sweep curve.

    When the first SSIM maximum and the first energy minimum agree within a
    sweep step, the energy answer wins (it comes from the same map that gets
    binarized) and confidence is high. When they disagree, the candidate
    sitting deeper on the energy curve wins: requantization harmonics put
    shallow ripples on the descending branch that can fake an early energy
    minimum, but the true dip at the cover quality is orders of magnitude
    deeper. Raises EstimationError when neither curve has an interior
    extremum.
    """
    q_ssim = first_local_max(zip(curve.qualities, curve.ssim_values))
    q_energy = first_local_min(zip(curve.qualities, curve.energy_values))
    if q_ssim is None and q_energy is None:
        raise EstimationError("no interior extremum in either sweep curve")
    if q_energy is None:
        return QualityEstimate(q_ssim, None, q_ssim, "low")
    if q_ssim is None:
        return QualityEstimate(None, q_energy, q_energy, "low")
    if abs(q_ssim - q_energy) <= curve.step():
        return QualityEstimate(q_ssim, q_energy, q_energy, "high")
    depth = dict(zip(curve.qualities, curve.energy_values))
    q_final = q_energy if depth[q_energy] <= depth[q_ssim] else q_ssim
    return QualityEstimate(q_ssim, q_energy, q_final, "low")


def build_curve(sweep, dubious, resaved=None, jobs: int = 1) -> SweepCurve:
    """Assemble the SSIM/energy curve for a sweep result.

    `resaved` may supply the already-computed recompressed images (one per
    sweep quality); otherwise they are recomputed from `dubious`.
    """
    qualities = list(sweep.qualities)
    maps = list(sweep.maps)
    if resaved is None:
        resaved = [codec.resave(dubious, q) for q in qualities]
    if len(resaved) != len(qualities) or len(maps) != len(qualities):
        raise ValueError("sweep qualities, maps, and resaves must align")

    def sample(i):
        return CurveSample(qualities[i], ssim(dubious, resaved[i]), energy(maps[i]))

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(sample, range(len(qualities))))
    else:
        samples = [sample(i) for i in range(len(qualities))]
    return SweepCurve(samples)
