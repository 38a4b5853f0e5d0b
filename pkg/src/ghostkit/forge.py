"""Ground-truthed forgery synthesis and the composite dataset protocol.

Four attack kinds are supported: pasting a region recompressed at a
different quality (ghost_insert), in-image copy-move, bitmap-font text
overlays, and bilinear rescale-and-paste. Every synthesized composite comes
with an exact boolean mask of the written pixels. build_dataset sweeps a
corpus across a cover/ghost quality grid using the xx_yy_zz.jpg naming rule
(xx = image number, yy = ghost quality, zz = cover quality).
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import codec, font
from .analysis import TamperMask, export_mask_png

FORGERY_KINDS = ("ghost_insert", "copy_move", "text_insert", "rescale")

# Default grids for the full-scale dataset protocol: 11 cover folders of
# 12 ghost qualities each, both on a step-5 grid starting at 40.
PAPER_COVER_GRID = list(range(40, 95, 5))   # 40..90
PAPER_GHOST_GRID = list(range(40, 100, 5))  # 40..95
DEFAULT_GHOST_RECT = (190, 60, 64, 64)

_IMAGE_SUFFIXES = {".tif", ".tiff", ".png", ".jpg", ".jpeg", ".bmp"}
_NAME_RE = re.compile(r"^(\d+)_(\d+)_(\d+)\.jpg$")


@dataclass
class ForgerySpec:
    """Declarative description of one synthesized attack."""

    kind: str
    cover_q: int
    ghost_q: int | None = None
    region: tuple | None = None      # (x, y, w, h) source rectangle
    target: tuple | None = None      # (x, y) destination top-left; defaults to region origin
    dest_size: tuple | None = None   # (w, h), rescale only
    text: str = ""
    text_height: int = font.GLYPH_HEIGHT
    resave_q: int = 100

    def __post_init__(self):
        if self.kind not in FORGERY_KINDS:
            raise ValueError(f"unknown forgery kind {self.kind!r}")
        codec.check_quality(self.cover_q)
        codec.check_quality(self.resave_q)
        if self.kind == "ghost_insert":
            if self.ghost_q is None:
                raise ValueError("ghost_insert requires ghost_q")
            codec.check_quality(self.ghost_q)
        if self.kind in ("ghost_insert", "copy_move", "rescale") and self.region is None:
            raise ValueError(f"{self.kind} requires a source region")
        if self.kind == "rescale" and self.dest_size is None:
            raise ValueError("rescale requires dest_size")
        if self.kind == "text_insert" and self.target is None:
            raise ValueError("text_insert requires a target coordinate")
        if self.region is not None:
            self.region = tuple(int(v) for v in self.region)
            if len(self.region) != 4:
                raise ValueError("region must be (x, y, w, h)")
        if self.target is not None:
            self.target = tuple(int(v) for v in self.target)
        if self.dest_size is not None:
            self.dest_size = tuple(int(v) for v in self.dest_size)
            if len(self.dest_size) != 2 or min(self.dest_size) < 1:
                raise ValueError("dest_size must be a positive (w, h)")

    def resolved_target(self) -> tuple:
        if self.target is not None:
            return self.target
        return (self.region[0], self.region[1])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "cover_q": self.cover_q,
            "ghost_q": self.ghost_q,
            "region": list(self.region) if self.region else None,
            "target": list(self.target) if self.target else None,
            "dest_size": list(self.dest_size) if self.dest_size else None,
            "text": self.text,
            "text_height": self.text_height,
            "resave_q": self.resave_q,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "ForgerySpec":
        known = {
            "kind", "cover_q", "ghost_q", "region", "target",
            "dest_size", "text", "text_height", "resave_q",
        }
        unknown = set(record) - known
        if unknown:
            raise ValueError(f"unknown forgery spec fields: {sorted(unknown)}")
        kwargs = dict(record)
        for key in ("region", "target", "dest_size"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _check_rect(shape, x, y, w, h, what="region"):
    height, width = shape[:2]
    if w < 1 or h < 1:
        raise ValueError(f"{what} must have positive size, got {w}x{h}")
    if x < 0 or y < 0 or x + w > width or y + h > height:
        raise ValueError(
            f"{what} ({x},{y},{w},{h}) lies outside the {width}x{height} image"
        )


def _rect_mask(shape, x, y, w, h) -> np.ndarray:
    mask = np.zeros(shape[:2], dtype=bool)
    mask[y : y + h, x : x + w] = True
    return mask


def ghost_insert(cover, spec: ForgerySpec):
    """Paste a region recompressed at ghost_q into the cover resaved at cover_q.

    The composite is saved once more at resave_q (default 100). Returns the
    JPEG bytes and the boolean ground-truth mask of the pasted rectangle.
    """
    arr = codec.check_rgb(cover)
    if spec.kind != "ghost_insert":
        raise ValueError(f"expected a ghost_insert spec, got {spec.kind!r}")
    x, y, w, h = spec.region
    _check_rect(arr.shape, x, y, w, h)
    tx, ty = spec.resolved_target()
    _check_rect(arr.shape, tx, ty, w, h, what="target")
    base = codec.resave(arr, spec.cover_q)
    patch = codec.resave(arr[y : y + h, x : x + w], spec.ghost_q)
    composite = base.copy()
    composite[ty : ty + h, tx : tx + w] = patch
    return codec.encode(composite, spec.resave_q), _rect_mask(arr.shape, tx, ty, w, h)


def copy_move(image, spec: ForgerySpec):
    """Duplicate a region elsewhere in the same image; histories coincide."""
    arr = codec.check_rgb(image)
    if spec.kind != "copy_move":
        raise ValueError(f"expected a copy_move spec, got {spec.kind!r}")
    x, y, w, h = spec.region
    _check_rect(arr.shape, x, y, w, h)
    tx, ty = spec.resolved_target()
    _check_rect(arr.shape, tx, ty, w, h, what="target")
    base = codec.resave(arr, spec.cover_q)
    patch = base[y : y + h, x : x + w].copy()  # copy first: rectangles may overlap
    base[ty : ty + h, tx : tx + w] = patch
    return codec.encode(base, spec.resave_q), _rect_mask(arr.shape, tx, ty, w, h)


def text_insert(image, spec: ForgerySpec):
    """Stamp solid black text onto the image, then save at cover_q.

    The mask marks exactly the glyph foreground dots; an empty string
    degenerates to a plain resave with an all-false mask.
    """
    arr = codec.check_rgb(image)
    if spec.kind != "text_insert":
        raise ValueError(f"expected a text_insert spec, got {spec.kind!r}")
    glyphs = font.render_text(spec.text, spec.text_height)
    mask = np.zeros(arr.shape[:2], dtype=bool)
    if glyphs.size:
        tx, ty = spec.resolved_target()
        gh, gw = glyphs.shape
        _check_rect(arr.shape, tx, ty, gw, gh, what="rendered text")
        canvas = arr.copy()
        canvas[ty : ty + gh, tx : tx + gw][glyphs] = 0
        mask[ty : ty + gh, tx : tx + gw] = glyphs
        return codec.encode(canvas, spec.cover_q), mask
    return codec.encode(arr, spec.cover_q), mask


def rescale_ghost(image, spec: ForgerySpec):
    """Bilinearly resize a region and paste it back, then save at cover_q."""
    arr = codec.check_rgb(image)
    if spec.kind != "rescale":
        raise ValueError(f"expected a rescale spec, got {spec.kind!r}")
    x, y, w, h = spec.region
    _check_rect(arr.shape, x, y, w, h)
    dw, dh = spec.dest_size
    tx, ty = spec.resolved_target()
    _check_rect(arr.shape, tx, ty, dw, dh, what="target")
    patch = Image.fromarray(arr[y : y + h, x : x + w], "RGB")
    resized = np.array(patch.resize((dw, dh), Image.BILINEAR), dtype=np.uint8)
    composite = arr.copy()
    composite[ty : ty + dh, tx : tx + dw] = resized
    return codec.encode(composite, spec.cover_q), _rect_mask(arr.shape, tx, ty, dw, dh)


_DISPATCH = {
    "ghost_insert": ghost_insert,
    "copy_move": copy_move,
    "text_insert": text_insert,
    "rescale": rescale_ghost,
}


def apply_forgery(image, spec: ForgerySpec):
    """Route a spec to its synthesizer; returns (jpeg bytes, truth mask)."""
    return _DISPATCH[spec.kind](image, spec)


def tiny_ghost_suite(image, cover_q, ghost_q, sizes=(10, 20, 30, 40, 50, 60),
                     origin=(29, 9), resave_q=100):
    """One ghost insertion per square size, all at a fixed coordinate."""
    ox, oy = origin
    out = []
    for size in sizes:
        spec = ForgerySpec(
            kind="ghost_insert",
            cover_q=cover_q,
            ghost_q=ghost_q,
            region=(ox, oy, size, size),
            resave_q=resave_q,
        )
        out.append(ghost_insert(image, spec))
    return out


def format_composite_name(index: int, ghost_q: int, cover_q: int) -> str:
    return f"{index:03d}_{ghost_q}_{cover_q}.jpg"


def parse_composite_name(name: str):
    """Invert format_composite_name: returns (image number, ghost q, cover q)."""
    m = _NAME_RE.match(Path(name).name)
    if not m:
        raise ValueError(f"{name!r} does not follow the xx_yy_zz.jpg naming rule")
    return int(m.group(1)), int(m.group(2)), int(m.group(3))


def load_image(path) -> np.ndarray:
    """Read any Pillow-supported raster as (H, W, 3) uint8 RGB."""
    with Image.open(path) as img:
        return np.array(img.convert("RGB"), dtype=np.uint8)


@dataclass
class ManifestEntry:
    path: str
    mask_path: str
    spec: ForgerySpec

    def to_dict(self) -> dict:
        return {"path": self.path, "mask_path": self.mask_path, "spec": self.spec.to_dict()}

    @classmethod
    def from_dict(cls, record: dict) -> "ManifestEntry":
        return cls(record["path"], record["mask_path"], ForgerySpec.from_dict(record["spec"]))


@dataclass
class DatasetManifest:
    """Index of a synthesized dataset: every composite, its spec, its mask."""

    corpus_id: str
    quality_grid: dict
    entries: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_json(self) -> str:
        record = {
            "corpus_id": self.corpus_id,
            "quality_grid": self.quality_grid,
            "entries": [e.to_dict() for e in self.entries],
            "errors": self.errors,
        }
        return json.dumps(record, indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        record = json.loads(text)
        return cls(
            corpus_id=record["corpus_id"],
            quality_grid=record["quality_grid"],
            entries=[ManifestEntry.from_dict(e) for e in record["entries"]],
            errors=list(record["errors"]),
        )

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text())


def list_corpus(corpus_dir) -> list:
    """Candidate corpus images, sorted by name for stable numbering."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ValueError(f"corpus directory {root} does not exist")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)


def dataset_plan(n_images: int, cover_grid=None, ghost_grid=None) -> int:
    """Number of composites a build would emit: images x covers x ghosts."""
    cover_grid = PAPER_COVER_GRID if cover_grid is None else list(cover_grid)
    ghost_grid = PAPER_GHOST_GRID if ghost_grid is None else list(ghost_grid)
    return n_images * len(cover_grid) * len(ghost_grid)


def build_dataset(corpus_dir, out_dir, cover_grid=None, ghost_grid=None,
                  ghost_rect=DEFAULT_GHOST_RECT, resave_q=100, corpus_id=None,
                  jobs: int = 1) -> DatasetManifest:
    """Synthesize a ghost-insertion composite per (image, cover q, ghost q).

    Layout: <out>/F_c{cover}/Z_c{cover}_g{ghost}/xx_yy_zz.jpg with the truth
    mask alongside as xx_yy_zz_mask.png. Unreadable corpus files are skipped
    and recorded in the manifest's errors list. The manifest is written to
    <out>/manifest.json.
    """
    cover_grid = PAPER_COVER_GRID if cover_grid is None else [codec.check_quality(q) for q in cover_grid]
    ghost_grid = PAPER_GHOST_GRID if ghost_grid is None else [codec.check_quality(q) for q in ghost_grid]
    files = list_corpus(corpus_dir)
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(
        corpus_id=corpus_id or Path(corpus_dir).name,
        quality_grid={"cover": list(cover_grid), "ghost": list(ghost_grid)},
    )

    images = []
    for index, path in enumerate(files, start=1):
        try:
            images.append((index, load_image(path)))
        except Exception as exc:
            manifest.errors.append(f"{path.name}: {exc}")

    x, y, w, h = ghost_rect
    jobs_list = [
        (index, image, cq, gq)
        for index, image in images
        for cq in cover_grid
        for gq in ghost_grid
    ]

    def synthesize(job):
        index, image, cq, gq = job
        spec = ForgerySpec(
            kind="ghost_insert", cover_q=cq, ghost_q=gq,
            region=(x, y, w, h), resave_q=resave_q,
        )
        data, mask = ghost_insert(image, spec)
        rel_dir = Path(f"F_c{cq}") / f"Z_c{cq}_g{gq}"
        name = format_composite_name(index, gq, cq)
        (out_root / rel_dir).mkdir(parents=True, exist_ok=True)
        (out_root / rel_dir / name).write_bytes(data)
        mask_name = name.replace(".jpg", "_mask.png")
        export_mask_png(TamperMask(mask), out_root / rel_dir / mask_name)
        return ManifestEntry(str(rel_dir / name), str(rel_dir / mask_name), spec)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(synthesize, jobs_list))
    else:
        entries = [synthesize(job) for job in jobs_list]
    manifest.entries = sorted(entries, key=lambda e: e.path)
    manifest.save(out_root / "manifest.json")
    return manifest
