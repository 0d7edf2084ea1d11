"""Image ingestion (IDX3 files) and pixel-grid cost matrices.

The IDX3 layout is the one MNIST ships in: big-endian magic 0x00000803,
then uint32 image count, row count and column count, then one unsigned byte
per pixel, images concatenated row-major.  ``write_idx3`` produces the same
layout so tests and demos can exercise the reader without the dataset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from eurot.core import CostMatrix, Measure

IDX3_MAGIC = 0x00000803
_HEADER = struct.Struct(">IIII")


class IdxFormatError(ValueError):
    """The file does not parse as IDX3 image data."""


@dataclass(frozen=True)
class ImageMeasure:
    """A grayscale image normalised into a probability measure over pixels."""

    height: int
    width: int
    measure: Measure
    source_id: int


def load_idx(path, index: int) -> ImageMeasure:
    """Read image ``index`` from an IDX3 file and normalise it to mass one.

    Zero pixels are kept as exact zeros in the measure.  An all-zero image
    cannot be normalised and is rejected.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise IdxFormatError(
            f"{path}: truncated header, {len(data)} bytes (need {_HEADER.size})"
        )
    magic, count, height, width = _HEADER.unpack_from(data, 0)
    if magic != IDX3_MAGIC:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IDX3_MAGIC:08x}"
        )
    frame = height * width
    expected = _HEADER.size + count * frame
    if len(data) < expected:
        raise IdxFormatError(
            f"{path}: truncated payload, file ends at offset {len(data)} "
            f"but {count} images of {height}x{width} need {expected} bytes"
        )
    if not 0 <= index < count:
        raise IdxFormatError(f"{path}: image index {index} out of range [0, {count})")
    offset = _HEADER.size + index * frame
    raw = np.frombuffer(data, dtype=np.uint8, count=frame, offset=offset)
    intensities = raw.astype(np.float64)
    total = intensities.sum()
    if total == 0:
        raise IdxFormatError(f"{path}: image {index} has zero total mass")
    return ImageMeasure(
        height=int(height),
        width=int(width),
        measure=Measure(intensities / total),
        source_id=index,
    )


def write_idx3(path, images: np.ndarray) -> None:
    """Write a (count, height, width) uint8 array as an IDX3 file."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise ValueError("images must have shape (count, height, width)")
    if images.dtype != np.uint8:
        raise ValueError("images must be uint8")
    count, height, width = images.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(IDX3_MAGIC, count, height, width))
        fh.write(images.tobytes(order="C"))


def grid_cost(height: int, width: int, normalise: bool = True) -> CostMatrix:
    """Pairwise Euclidean distances between the pixels of a height-x-width grid.

    Pixels are indexed row-major, so the matrix is (h*w) x (h*w), symmetric
    with zero diagonal.  With ``normalise`` the entries are divided by the
    largest distance, making ||C||_inf = 1.
    """
    if height < 1 or width < 1 or height * width < 1:
        raise ValueError("grid must contain at least one pixel")
    rows, cols = np.divmod(np.arange(height * width), width)
    dr = rows[:, None] - rows[None, :]
    dc = cols[:, None] - cols[None, :]
    d = np.hypot(dr, dc)
    if normalise and d.max() > 0:
        d /= d.max()
    return CostMatrix(d)


def synthetic_digit_pair(height: int = 28, width: int = 28) -> np.ndarray:
    """Two deterministic digit-like grayscale images (a ring and a bar).

    A stand-in for an MNIST pair when the dataset files are not on disk: the
    same shapes (sparse support, smooth intensity falloff) at the same
    28x28 resolution, generated without any randomness.
    """
    yy, xx = np.mgrid[0:height, 0:width]
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0

    radius = np.hypot(yy - cy, xx - cx)
    ring = np.exp(-((radius - min(height, width) / 3.5) ** 2) / 4.0)

    slope = (xx - cx) - 0.25 * (yy - cy)
    bar = np.exp(-(slope**2) / 3.0) * (np.abs(yy - cy) <= height / 2.8)

    images = np.stack([ring, bar])
    images = (255 * images / images.max(axis=(1, 2), keepdims=True)).astype(np.uint8)
    return images
