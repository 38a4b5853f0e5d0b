"""Ghost pipeline core: amplified difference maps, the recompression sweep,
binarization into a tamper mask, and end-to-end localization.

A suspect image is recompressed across a quality range; per quality the
cubed absolute difference of the YCbCr planes amplifies regions whose
compression history disagrees with the rest of the image. The map at the
estimated cover quality is thresholded and cleaned into a binary mask.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from . import codec, colorspace, metrics

MAX_DIFFERENCE = 255.0**3

# Binarization settings: difference evidence is pooled over a small window
# (below the 8px JPEG block pitch) before thresholding, and splits with
# almost no foreground/background contrast are rejected as degenerate.
POOL_SIZE = 7
MIN_CONTRAST_RATIO = 10.0
MAX_COVERAGE = 0.5

_MORPH_KERNEL = np.ones((3, 3), dtype=bool)


@dataclass
class SweepConfig:
    """Quality range for the recompression sweep."""

    q_min: int = 30
    q_max: int = 100
    step: int = 2

    def __post_init__(self):
        codec.check_quality(self.q_min)
        codec.check_quality(self.q_max)
        if self.q_min > self.q_max:
            raise ValueError("q_min must not exceed q_max")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if (self.q_max - self.q_min) % self.step != 0:
            raise ValueError("sweep range must be divisible by step")

    def qualities(self) -> list:
        return list(range(self.q_min, self.q_max + 1, self.step))


@dataclass
class DifferenceMap:
    """Per-pixel, per-channel amplified recompression difference at one quality."""

    planes: np.ndarray  # (H, W, 3) float64, Y/Cb/Cr order
    quality: int

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float64)
        if self.planes.ndim != 3 or self.planes.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) planes, got {self.planes.shape}")
        if self.planes.min() < 0 or self.planes.max() > MAX_DIFFERENCE:
            raise ValueError("difference values must lie in [0, 255^3]")
        self.quality = codec.check_quality(self.quality)

    @property
    def height(self) -> int:
        return self.planes.shape[0]

    @property
    def width(self) -> int:
        return self.planes.shape[1]

    def summed(self) -> np.ndarray:
        """Channel-aggregated map used for binarization and export."""
        return self.planes.sum(axis=2)


@dataclass
class TamperMask:
    """Boolean tamper verdict per pixel; True marks a suspected region."""

    bits: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ValueError(f"expected a 2-D mask, got shape {self.bits.shape}")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def true_pixels(self) -> int:
        return int(self.bits.sum())


@dataclass
class SweepResult:
    """All difference maps of a sweep plus the assembled metric curve."""

    qualities: list
    maps: list
    curve: "metrics.SweepCurve | None" = None

    def __post_init__(self):
        if len(self.qualities) != len(self.maps):
            raise ValueError("one difference map per sweep quality required")
        if any(q2 <= q1 for q1, q2 in zip(self.qualities, self.qualities[1:])):
            raise ValueError("sweep qualities must be strictly increasing")

    def map_at(self, quality: int) -> DifferenceMap:
        return self.maps[self.qualities.index(quality)]


@dataclass
class LocalizationResult:
    """Tamper mask at the chosen quality, with detection confidence."""

    mask: TamperMask
    quality: int
    estimate: "metrics.QualityEstimate | None"
    confidence: str  # "high" | "low"
    reason: str = ""
    sweep: "SweepResult | None" = field(default=None, repr=False)


def difference_map(dubious, resaved, q) -> DifferenceMap:
    """Cubed absolute YCbCr difference between a suspect image and a recompression."""
    a = codec.check_rgb(dubious)
    b = codec.check_rgb(resaved)
    if a.shape != b.shape:
        raise ValueError(f"image sizes differ: {a.shape} vs {b.shape}")
    diff = np.abs(colorspace.rgb_to_ycbcr(a) - colorspace.rgb_to_ycbcr(b)) ** 3
    return DifferenceMap(planes=diff, quality=q)


def run_sweep(dubious, config: SweepConfig | None = None, jobs: int = 1) -> SweepResult:
    """Recompress the suspect image at every sweep quality and collect maps + curve.

    Quality points are independent; with jobs > 1 they are evaluated on a
    thread pool and reassembled in quality order, so results do not depend
    on the worker count.
    """
    arr = codec.check_rgb(dubious)
    config = config or SweepConfig()
    qualities = config.qualities()

    def work(q):
        resaved = codec.resave(arr, q)
        return resaved, difference_map(arr, resaved, q)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(work, qualities))
    else:
        pairs = [work(q) for q in qualities]
    resaved_imgs = [p[0] for p in pairs]
    maps = [p[1] for p in pairs]
    result = SweepResult(qualities=qualities, maps=maps)
    result.curve = metrics.build_curve(result, arr, resaved=resaved_imgs, jobs=jobs)
    return result


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Histogram threshold maximizing between-class variance."""
    flat = np.asarray(values, dtype=np.float64).ravel()
    hist, edges = np.histogram(flat, bins=bins)
    hist = hist.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = hist.cumsum()
    total = w0[-1]
    m0 = (hist * centers).cumsum()
    mu_total = m0[-1]
    w0 = w0[:-1]
    m0 = m0[:-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    between = np.zeros_like(w0)
    mu0 = np.divide(m0, w0, out=np.zeros_like(m0), where=valid)
    mu1 = np.divide(mu_total - m0, w1, out=np.zeros_like(m0), where=valid)
    between[valid] = w0[valid] * w1[valid] * (mu0[valid] - mu1[valid]) ** 2
    k = int(np.argmax(between))
    return float(edges[k + 1])


def binarize(dmap: DifferenceMap) -> TamperMask:
    """Threshold a difference map into a tamper mask.

    The three planes are summed, locally mean-pooled (7x7, under the
    JPEG block pitch, so per-pixel requantization noise coheres into
    regions), log-compressed to tame the cubic dynamic range, and
    Otsu-thresholded. The raw binary mask is cleaned with a 3x3 opening and
    closing, small enough that a 10x10 region survives, and pixels with
    zero recorded difference are never marked.

    Degenerate maps come back all-false with the flag set: constant maps,
    splits claiming more than half the image, and splits whose foreground
    is less than 10x brighter than the background (recompression noise has
    no such contrast, real ghosts exceed it by orders of magnitude).
    """
    summed = dmap.summed()
    if np.all(summed == summed.flat[0]):
        return TamperMask(np.zeros(summed.shape, dtype=bool), degenerate=True)
    pooled = ndimage.uniform_filter(summed, size=POOL_SIZE)
    log_plane = np.log1p(pooled)
    threshold = otsu_threshold(log_plane)
    raw = log_plane > threshold
    coverage = float(raw.mean())
    if coverage == 0.0 or coverage > MAX_COVERAGE:
        return TamperMask(np.zeros(summed.shape, dtype=bool), degenerate=True)
    fg = float(summed[raw].mean())
    bg = float(summed[~raw].mean())
    if fg < MIN_CONTRAST_RATIO * max(bg, 1e-12):
        return TamperMask(np.zeros(summed.shape, dtype=bool), degenerate=True)
    mask = ndimage.binary_opening(raw, structure=_MORPH_KERNEL)
    mask = ndimage.binary_closing(mask, structure=_MORPH_KERNEL)
    mask &= summed > 0
    return TamperMask(mask)


def _regional_means(sweep: SweepResult, bits: np.ndarray):
    """Mean summed difference per quality, inside and outside the mask."""
    inside = []
    outside = []
    inv = ~bits
    for dmap in sweep.maps:
        summed = dmap.summed()
        inside.append(float(summed[bits].mean()))
        outside.append(float(summed[inv].mean()))
    return inside, outside


def _first_significant_min(qualities, values, rise: float = 0.2):
    """First interior minimum followed by a genuine upturn.

    Regional curves carry sub-percent requantization-harmonic ripples; a
    dip only counts when the next sample rises by at least `rise` relative,
    which real compression-history dips exceed by a wide margin.
    """
    for i in range(1, len(values) - 1):
        if (
            values[i] < values[i - 1]
            and values[i] <= values[i + 1]
            and values[i + 1] >= (1 + rise) * values[i]
        ):
            return qualities[i]
    return None


def _detection_confidence(sweep, estimate, mask):
    """Grade a localization: 'high' needs corroboration that the masked
    region's own compression history differs from the background's."""
    if mask.degenerate or not mask.bits.any():
        return "low", "empty tamper mask"
    coverage = float(mask.bits.mean())
    if coverage > 0.5:
        return "low", "mask covers most of the image"
    inside, outside = _regional_means(sweep, mask.bits)
    idx = sweep.qualities.index(estimate.q_final)
    if inside[idx] < 2.0 * max(outside[idx], 1e-12):
        return "low", "weak contrast at the estimated quality"
    q_region = _first_significant_min(sweep.qualities, inside)
    step = sweep.curve.step() if sweep.curve is not None else 1
    if q_region is None:
        return "low", "region quality unreadable (no significant regional dip)"
    if abs(q_region - estimate.q_final) <= step:
        return "low", "suspected region shares the background compression history"
    return "high", ""


def localize(dubious, config: SweepConfig | None = None, jobs: int = 1) -> LocalizationResult:
    """Full pipeline: sweep, estimate the cover quality, binarize at that quality.

    When no interior extremum exists the global energy minimum is used and
    the result is flagged low-confidence. Confidence is also demoted when
    the mask is empty or when the suspected region's own energy curve dips
    at the same quality as the background (same-quality forgeries).
    """
    sweep = run_sweep(dubious, config, jobs=jobs)
    try:
        estimate = metrics.estimate_cover_quality(sweep.curve)
    except metrics.EstimationError:
        energies = sweep.curve.energy_values
        q_star = sweep.qualities[int(np.argmin(energies))]
        mask = binarize(sweep.map_at(q_star))
        return LocalizationResult(
            mask, q_star, None, "low", "no interior extremum in sweep curves", sweep
        )
    q_star = estimate.q_final
    mask = binarize(sweep.map_at(q_star))
    confidence, reason = _detection_confidence(sweep, estimate, mask)
    return LocalizationResult(mask, q_star, estimate, confidence, reason, sweep)


def export_difference_png(dmap: DifferenceMap, path) -> None:
    """Write the summed map as 16-bit grayscale PNG.

    Scaling: value = round(65535 * log1p(D_sum) / log1p(3 * 255^3)), i.e.
    log-compressed and normalized against the maximum representable sum.
    """
    scaled = np.log1p(dmap.summed()) / np.log1p(3 * MAX_DIFFERENCE)
    arr = np.round(scaled * 65535).astype(np.uint16)
    Image.fromarray(arr).save(path, "PNG")


def export_mask_png(mask: TamperMask, path) -> None:
    """Write a tamper mask as 8-bit PNG: 0 untampered, 255 tampered."""
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, "PNG")


def load_mask_png(path) -> np.ndarray:
    """Read a mask PNG back into a boolean array."""
    arr = np.array(Image.open(path).convert("L"))
    return arr > 127
