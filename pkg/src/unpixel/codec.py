"""Block-average image codec and its binary container format.

Compression keeps one rounded mean intensity per step x step block per
channel. The container is a fixed little-endian layout:

    bytes 0-3   magic "LAB1"
    byte  4     version (1)
    bytes 5-6   original width, u16 LE
    bytes 7-8   original height, u16 LE
    byte  9     channels (1 or 3)
    byte  10    step (2, 3 or 4)
    then per channel, row-major block means as raw bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .image import RasterImage, round_half_away

MAGIC = b"LAB1"
VERSION = 1
_HEADER = struct.Struct("<4sBHHBB")

SUPPORTED_STEPS = (2, 3, 4)


@dataclass(frozen=True, eq=False)
class BlockAverageImage:
    """Compressed form: per-channel grid of block means plus the step."""

    orig_width: int
    orig_height: int
    step: int
    means: np.ndarray  # uint8, shape (channels, grid_h, grid_w)

    def __post_init__(self):
        if self.step not in SUPPORTED_STEPS:
            raise ValueError(f"unsupported step {self.step}")
        m = np.asarray(self.means)
        if m.dtype != np.uint8 or m.ndim != 3 or m.shape[0] not in (1, 3):
            raise ValueError("means must be uint8 with shape (channels, grid_h, grid_w)")
        gh = -(-self.orig_height // self.step)
        gw = -(-self.orig_width // self.step)
        if m.shape[1:] != (gh, gw):
            raise ValueError(
                f"means grid {m.shape[2]}x{m.shape[1]} does not match "
                f"{self.orig_width}x{self.orig_height} at step {self.step}"
            )
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "means", m)

    @property
    def channels(self) -> int:
        return self.means.shape[0]

    @property
    def grid_height(self) -> int:
        return self.means.shape[1]

    @property
    def grid_width(self) -> int:
        return self.means.shape[2]

    def __eq__(self, other):
        if not isinstance(other, BlockAverageImage):
            return NotImplemented
        return (
            (self.orig_width, self.orig_height, self.step) ==
            (other.orig_width, other.orig_height, other.step)
            and np.array_equal(self.means, other.means)
        )


def compress(image: RasterImage, step: int) -> BlockAverageImage:
    """Block-average `image`; partial edge blocks average only existing pixels."""
    if step not in SUPPORTED_STEPS:
        raise ValueError(f"unsupported step {step}")
    h, w = image.height, image.width
    row_idx = np.arange(0, h, step)
    col_idx = np.arange(0, w, step)
    p = image.planes.astype(np.int64)
    sums = np.add.reduceat(np.add.reduceat(p, row_idx, axis=1), col_idx, axis=2)
    rows_per = np.minimum(row_idx + step, h) - row_idx
    cols_per = np.minimum(col_idx + step, w) - col_idx
    counts = rows_per[:, None] * cols_per[None, :]
    means = round_half_away(sums / counts).astype(np.uint8)
    return BlockAverageImage(w, h, step, means)


def expand(b: BlockAverageImage) -> RasterImage:
    """Block-constant raster at the original size: every pixel of a block
    carries the block mean."""
    full = np.repeat(np.repeat(b.means, b.step, axis=1), b.step, axis=2)
    return RasterImage(full[:, : b.orig_height, : b.orig_width])


# ---------------------------------------------------------------------------
# container I/O
# ---------------------------------------------------------------------------

class LabFormatError(ValueError):
    pass


def write_lab(b: BlockAverageImage, sink) -> None:
    sink.write(_HEADER.pack(MAGIC, VERSION, b.orig_width, b.orig_height, b.channels, b.step))
    for c in range(b.channels):
        sink.write(b.means[c].tobytes())


def read_lab(source) -> BlockAverageImage:
    header = source.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise LabFormatError("truncated header")
    magic, version, w, h, channels, step = _HEADER.unpack(header)
    if magic != MAGIC:
        raise LabFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise LabFormatError(f"unsupported version {version}")
    if channels not in (1, 3):
        raise LabFormatError(f"invalid channel count {channels}")
    if step not in SUPPORTED_STEPS:
        raise LabFormatError(f"invalid step {step}")
    gh = -(-h // step)
    gw = -(-w // step)
    payload = source.read(channels * gh * gw)
    if len(payload) < channels * gh * gw:
        raise LabFormatError("truncated payload")
    means = np.frombuffer(payload, dtype=np.uint8).reshape(channels, gh, gw)
    return BlockAverageImage(w, h, step, means)


def save_lab(b: BlockAverageImage, path) -> None:
    with open(path, "wb") as f:
        write_lab(b, f)


def load_lab(path) -> BlockAverageImage:
    with open(path, "rb") as f:
        return read_lab(f)
