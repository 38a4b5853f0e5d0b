"""Baseline JPEG encode/decode and the quality-factor-to-quantization-table mapping.

Entropy coding and the DCT path are delegated to libjpeg via Pillow; the
quality scaling, marker-level stream validation, and DQT extraction are
implemented here so the quality knob can be checked against the bytes an
encoder actually emits. All encodes use 4:4:4 chroma (no subsampling) so
chroma stays pixel-aligned with luma.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

# Reference quantization tables (the quality-50 baseline tables).
LUMA_BASE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

CHROMA_BASE = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)

# Marker bytes (second byte of the 0xFFxx pair).
_SOI = 0xD8
_EOI = 0xD9
_SOS = 0xDA
_DQT = 0xDB
_SOF0 = 0xC0
_SOF1 = 0xC1
_SOF2 = 0xC2
# Markers that carry no length field.
_STANDALONE = {0x01} | set(range(0xD0, 0xD8))  # TEM, RST0..RST7
_SOF_ALL = {0xC0, 0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}


class JpegParseError(ValueError):
    """Malformed or unsupported JPEG stream. `offset` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _zigzag_positions():
    """(row, col) for each position of the zig-zag scan of an 8x8 block."""
    positions = []
    for s in range(15):
        diagonal = [(s - c, c) for c in range(max(0, s - 7), min(s, 7) + 1)]
        if s % 2 == 1:
            diagonal.reverse()
        positions.extend(diagonal)
    return positions


ZIGZAG = _zigzag_positions()


@dataclass
class QuantTables:
    """One 8x8 integer divisor grid per component class, entries in [1, 255]."""

    luma: np.ndarray
    chroma: np.ndarray

    def __post_init__(self):
        for name in ("luma", "chroma"):
            grid = np.asarray(getattr(self, name), dtype=np.int64)
            if grid.shape != (8, 8):
                raise ValueError(f"{name} table must be 8x8, got {grid.shape}")
            if grid.min() < 1 or grid.max() > 255:
                raise ValueError(f"{name} table entries must lie in [1, 255]")
            setattr(self, name, grid)


def check_quality(q) -> int:
    """Validate a JPEG quality factor; returns it as an int in [1, 100]."""
    if not isinstance(q, (int, np.integer)) or isinstance(q, bool):
        raise ValueError(f"quality must be an integer in [1, 100], got {q!r}")
    q = int(q)
    if not 1 <= q <= 100:
        raise ValueError(f"quality must be in [1, 100], got {q}")
    return q


def quality_to_quant_tables(q) -> QuantTables:
    """Scale the reference tables to a quality factor.

    scale = 5000/q (q < 50) or 200 - 2q (q >= 50); each entry becomes
    floor((base * scale + 50) / 100) clamped to [1, 255]. Quality 50 is the
    reference itself; quality 100 collapses every entry to 1.
    """
    q = check_quality(q)
    scale = 5000 // q if q < 50 else 200 - 2 * q

    def scaled(base):
        return np.clip((base * scale + 50) // 100, 1, 255)

    return QuantTables(luma=scaled(LUMA_BASE), chroma=scaled(CHROMA_BASE))


def check_rgb(image) -> np.ndarray:
    """Validate an interleaved 8-bit RGB raster of shape (H, W, 3)."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected RGB array of shape (H, W, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {arr.dtype}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image has a zero dimension")
    return arr


def encode(image, q) -> bytes:
    """Encode an RGB raster as a baseline JFIF stream at quality q (4:4:4)."""
    arr = check_rgb(image)
    q = check_quality(q)
    buf = io.BytesIO()
    Image.fromarray(arr, "RGB").save(buf, "JPEG", quality=q, subsampling=0)
    return buf.getvalue()


def iter_segments(data: bytes):
    """Walk a JFIF stream, yielding (marker, payload_offset, payload) tuples.

    Raises JpegParseError with the byte offset on structural faults:
    missing SOI, truncation, bad marker prefixes, bogus segment lengths.
    """
    n = len(data)
    if n < 2 or data[0] != 0xFF or data[1] != _SOI:
        raise JpegParseError("missing SOI marker", 0)
    yield _SOI, 2, b""
    pos = 2
    while True:
        if pos + 2 > n:
            raise JpegParseError("truncated stream before EOI", pos)
        if data[pos] != 0xFF:
            raise JpegParseError(f"expected marker, found 0x{data[pos]:02x}", pos)
        while pos + 1 < n and data[pos + 1] == 0xFF:  # fill bytes
            pos += 1
        if pos + 2 > n:
            raise JpegParseError("truncated stream before EOI", pos)
        marker = data[pos + 1]
        if marker == 0x00:
            raise JpegParseError("stuffed byte outside entropy-coded data", pos)
        if marker == _EOI:
            yield _EOI, pos + 2, b""
            return
        if marker in _STANDALONE:
            yield marker, pos + 2, b""
            pos += 2
            continue
        if pos + 4 > n:
            raise JpegParseError("truncated segment header", pos)
        seg_len = (data[pos + 2] << 8) | data[pos + 3]
        if seg_len < 2:
            raise JpegParseError(f"invalid segment length {seg_len}", pos + 2)
        end = pos + 2 + seg_len
        if end > n:
            raise JpegParseError("segment length exceeds stream", pos + 2)
        yield marker, pos + 4, data[pos + 4 : end]
        pos = end
        if marker == _SOS:
            # Skip entropy-coded data: 0xFF00 is a stuffed literal and
            # RST0..7 are restart markers; anything else ends the scan.
            while True:
                if pos + 1 >= n:
                    raise JpegParseError("truncated entropy-coded data", pos)
                if data[pos] == 0xFF and data[pos + 1] != 0x00 and not (
                    0xD0 <= data[pos + 1] <= 0xD7
                ):
                    break
                pos += 1


def stream_info(data: bytes) -> dict:
    """Validate stream structure and return frame facts (dimensions, SOF kind)."""
    info = {"width": None, "height": None, "sof": None, "sof_offset": None, "sos_offset": None}
    for marker, offset, payload in iter_segments(data):
        if marker in _SOF_ALL:
            if marker == _SOF2:
                raise JpegParseError("progressive JPEG is not supported", offset - 4)
            if marker not in (_SOF0, _SOF1):
                raise JpegParseError(f"unsupported SOF marker 0xff{marker:02x}", offset - 4)
            if len(payload) < 6:
                raise JpegParseError("short SOF payload", offset)
            info["sof"] = marker
            info["sof_offset"] = offset
            info["height"] = (payload[1] << 8) | payload[2]
            info["width"] = (payload[3] << 8) | payload[4]
        elif marker == _SOS and info["sos_offset"] is None:
            info["sos_offset"] = offset
    if info["sof"] is None:
        raise JpegParseError("no frame header (SOF) found", len(data))
    if info["sos_offset"] is None:
        raise JpegParseError("no scan header (SOS) found", len(data))
    return info


def decode(data: bytes) -> np.ndarray:
    """Decode a baseline JFIF stream to an (H, W, 3) uint8 RGB raster."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise ValueError("decode expects a byte string")
    data = bytes(data)
    info = stream_info(data)
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise JpegParseError(f"undecodable scan data: {exc}", info["sos_offset"]) from exc
    if img.mode != "RGB":
        img = img.convert("RGB")
    arr = np.array(img, dtype=np.uint8)
    if arr.shape[:2] != (info["height"], info["width"]):
        raise JpegParseError("decoded dimensions disagree with frame header", info["sof_offset"])
    return arr


def resave(image, q) -> np.ndarray:
    """Round-trip an RGB raster through a quality-q JPEG encode/decode."""
    return decode(encode(image, q))


def parse_quant_tables(data: bytes) -> QuantTables:
    """Extract the luma/chroma quantization tables from a stream's DQT segments."""
    tables = {}
    for marker, offset, payload in iter_segments(data):
        if marker != _DQT:
            continue
        i = 0
        while i < len(payload):
            precision = payload[i] >> 4
            table_id = payload[i] & 0x0F
            i += 1
            count = 64 * (2 if precision else 1)
            if i + count > len(payload):
                raise JpegParseError("truncated DQT table", offset + i)
            if precision:
                vals = np.frombuffer(payload, dtype=">u2", count=64, offset=i)
            else:
                vals = np.frombuffer(payload, dtype=np.uint8, count=64, offset=i)
            grid = np.zeros((8, 8), dtype=np.int64)
            for k, (r, c) in enumerate(ZIGZAG):
                grid[r, c] = vals[k]
            tables[table_id] = grid
            i += count
    if 0 not in tables or 1 not in tables:
        raise JpegParseError("stream does not define both quantization tables", len(data))
    return QuantTables(luma=tables[0], chroma=tables[1])
