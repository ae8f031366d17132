"""Image containers and Netpbm file I/O.

Formats, all row-major with origin at the top-left:
  - masks:     PBM (P4 binary / P1 ASCII), 1 = foreground
  - grayscale: PGM 8-bit (P5 binary / P2 ASCII)
  - depth:     PGM 16-bit (P5, maxval 65535), big-endian, millimeters,
               0 = invalid measurement
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image; data is (height, width) uint8."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=np.uint8))
        if self.data.ndim != 2:
            raise ValueError("grayscale data must be 2-D")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean mask; bits is (height, width) bool."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))
        if self.bits.ndim != 2:
            raise ValueError("mask bits must be 2-D")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Depth image in meters; 0 marks an invalid measurement."""

    depths: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=np.float64)
        object.__setattr__(self, "depths", d)
        if d.ndim != 2:
            raise ValueError("depth data must be 2-D")
        if np.any(d < 0):
            raise ValueError("depths must be non-negative")

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def height(self) -> int:
        return self.depths.shape[0]


def rgb_value_channel(rgb: np.ndarray) -> GrayImage:
    """HSV value channel (max of R, G, B) of an (H, W, 3) uint8 image."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB image")
    return GrayImage(rgb.max(axis=2))


# --- Netpbm parsing -----------------------------------------------------

def _read_header(buf: bytes):
    """Parse magic, dimensions, and (for PGM) maxval; return offset of raster."""
    magic = buf[:2].decode("ascii")
    pos = 2
    fields_needed = 2 if magic in ("P1", "P4") else 3
    fields: list[int] = []
    while len(fields) < fields_needed:
        m = re.match(rb"(\s+|#[^\n]*\n?)", buf[pos:])
        if m:
            pos += m.end()
            continue
        m = re.match(rb"\d+", buf[pos:])
        if not m:
            raise ValueError("malformed Netpbm header")
        fields.append(int(m.group()))
        pos += m.end()
    if magic in ("P4", "P5"):
        pos += 1  # exactly one whitespace byte before binary raster
    return magic, fields, pos


def read_pbm(path: str | Path) -> BinaryMask:
    buf = Path(path).read_bytes()
    magic, (w, h), pos = _read_header(buf)
    if magic == "P1":
        tokens = re.findall(rb"[01]", buf[pos:])
        bits = np.array([t == b"1" for t in tokens[: w * h]], dtype=bool)
        return BinaryMask(bits.reshape(h, w))
    if magic == "P4":
        row_bytes = (w + 7) // 8
        raw = np.frombuffer(buf[pos: pos + row_bytes * h], dtype=np.uint8)
        rows = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
        return BinaryMask(rows.astype(bool))
    raise ValueError(f"not a PBM file: {magic}")


def write_pbm(path: str | Path, mask: BinaryMask) -> None:
    h, w = mask.bits.shape
    packed = np.packbits(mask.bits.astype(np.uint8), axis=1)
    with open(path, "wb") as f:
        f.write(f"P4\n{w} {h}\n".encode("ascii"))
        f.write(packed.tobytes())


def read_pgm(path: str | Path):
    """Read a PGM file; returns GrayImage (maxval <= 255) or DepthMap (16-bit, mm)."""
    buf = Path(path).read_bytes()
    magic, fields, pos = _read_header(buf)
    w, h, maxval = fields
    if magic == "P2":
        tokens = re.findall(rb"\d+", buf[pos:])
        data = np.array(tokens[: w * h], dtype=np.int64).reshape(h, w)
    elif magic == "P5":
        if maxval > 255:
            raw = np.frombuffer(buf[pos: pos + 2 * w * h], dtype=">u2")
        else:
            raw = np.frombuffer(buf[pos: pos + w * h], dtype=np.uint8)
        data = raw.reshape(h, w).astype(np.int64)
    else:
        raise ValueError(f"not a PGM file: {magic}")
    if maxval > 255:
        return DepthMap(data.astype(np.float64) / 1000.0)
    return GrayImage(data.astype(np.uint8))


def write_pgm(path: str | Path, image: GrayImage) -> None:
    h, w = image.data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(image.data.tobytes())


def write_depth_pgm(path: str | Path, depth: DepthMap) -> None:
    """Write depth as 16-bit PGM in millimeters (values clipped to 65535)."""
    mm = np.clip(np.round(depth.depths * 1000.0), 0, 65535).astype(">u2")
    h, w = mm.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(mm.tobytes())


def read_depth_pgm(path: str | Path) -> DepthMap:
    depth = read_pgm(path)
    if not isinstance(depth, DepthMap):
        raise ValueError("expected a 16-bit depth PGM")
    return depth
