"""JPEG ghost forensics toolkit.

Detects and localizes spliced regions in JPEG images whose compression
history differs from the host image, estimates the host's original quality
from recompression-sweep curves, synthesizes ground-truthed forgeries, and
batch-scores localization results.
"""

from .analysis import (
    DifferenceMap,
    LocalizationResult,
    SweepConfig,
    SweepResult,
    TamperMask,
    binarize,
    difference_map,
    localize,
    run_sweep,
)
from .codec import (
    JpegParseError,
    QuantTables,
    decode,
    encode,
    parse_quant_tables,
    quality_to_quant_tables,
    resave,
)
from .colorspace import rgb_to_ycbcr, ycbcr_to_rgb
from .evalharness import EvalReport, MaskScore, evaluate, export_report, score_mask
from .forge import (
    DatasetManifest,
    ForgerySpec,
    build_dataset,
    copy_move,
    ghost_insert,
    rescale_ghost,
    text_insert,
    tiny_ghost_suite,
)
from .metrics import (
    EstimationError,
    QualityEstimate,
    SsimParams,
    SweepCurve,
    build_curve,
    energy,
    estimate_cover_quality,
    first_local_max,
    first_local_min,
    ssim,
)

__version__ = "0.1.0"
