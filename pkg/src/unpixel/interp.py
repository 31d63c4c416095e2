"""Conditional block interpolation.

A block-averaged image is refined by splitting each block into four regions
and, where neighboring blocks are close enough in intensity, recoloring the
regions bordering those neighbors with the pairwise average. Region B1 (top
left) always keeps the block color; B2/B3/B4 face the right, bottom and
diagonal neighbors and are gated by thresholds p2/p3/p4. A threshold of 0
never interpolates, 255 always does.

Two passes exist: LEVEL 1 on full step x step blocks and LEVEL 2, the same
arithmetic on the 2x2 sub-cells left by LEVEL 1. An asymmetric 3x3 geometry
covers odd step 3, where B1 is stretched to 2x2 and B2/B3 shrink to the
remaining edge strips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import RasterImage, round_half_away


@dataclass(frozen=True)
class ThresholdTriple:
    """Gate widths for the B2 (right), B3 (below), B4 (diagonal) updates."""

    p2: int
    p3: int
    p4: int

    def __post_init__(self):
        for name in ("p2", "p3", "p4"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= 255:
                raise ValueError(f"{name} must be an integer in 0..255, got {v!r}")


@dataclass(frozen=True)
class InterpLevel:
    """Pass selector: level 1 or 2, with the regular or the 3x3 geometry."""

    level: int
    geometry: str = "even-step"

    def __post_init__(self):
        if self.level not in (1, 2):
            raise ValueError(f"level must be 1 or 2, got {self.level}")
        if self.geometry not in ("even-step", "step3"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "step3" and self.level != 1:
            raise ValueError("step3 geometry exists only for level 1")


def _representatives(planes: np.ndarray, step: int) -> np.ndarray:
    """Rounded per-block mean intensity; the block color on block-constant
    input, a stable stand-in once earlier passes have split blocks."""
    c, h, w = planes.shape
    means = planes.reshape(c, h // step, step, w // step, step).mean(axis=(2, 4)).astype(np.float64)
    return round_half_away(means).astype(np.int64)


def _masks_and_averages(reps: np.ndarray, t: ThresholdTriple):
    """Decision masks and averaged colors against the right / below / diagonal
    neighbor. Masks live on the full block grid; boundary rows/cols that lack
    the neighbor stay False."""
    c, nv, nh = reps.shape

    def gate(b, other, p):
        # p = 0 suppresses interpolation even at zero difference
        return (np.abs(b - other) <= p) & (p > 0)

    m2 = np.zeros((c, nv, nh), dtype=bool)
    m3 = np.zeros((c, nv, nh), dtype=bool)
    m4 = np.zeros((c, nv, nh), dtype=bool)
    a2 = np.zeros((c, nv, nh), dtype=np.uint8)
    a3 = np.zeros((c, nv, nh), dtype=np.uint8)
    a4 = np.zeros((c, nv, nh), dtype=np.uint8)

    b, right = reps[:, :, :-1], reps[:, :, 1:]
    m2[:, :, :-1] = gate(b, right, t.p2)
    a2[:, :, :-1] = round_half_away((b + right) / 2.0)

    b, below = reps[:, :-1, :], reps[:, 1:, :]
    m3[:, :-1, :] = gate(b, below, t.p3)
    a3[:, :-1, :] = round_half_away((b + below) / 2.0)

    b, diag = reps[:, :-1, :-1], reps[:, 1:, 1:]
    m4[:, :-1, :-1] = gate(b, diag, t.p4)
    a4[:, :-1, :-1] = round_half_away((b + diag) / 2.0)

    return (m2, m3, m4), (a2, a3, a4)


def decision_masks(image: RasterImage, step: int, t: ThresholdTriple, geometry: str = "even-step"):
    """Which blocks' B2/B3/B4 regions would be recolored by a pass. Returns
    three boolean arrays on the (channels, blocks_v, blocks_h) grid."""
    _check_dims(image, step, geometry)
    reps = _representatives(image.planes, step)
    masks, _ = _masks_and_averages(reps, t)
    return masks


def _check_dims(image: RasterImage, step: int, geometry: str):
    if geometry == "step3":
        if step != 3:
            raise ValueError("step3 geometry requires step 3")
    else:
        if step < 2 or step % 2:
            raise ValueError(f"step must be even and >= 2, got {step}")
    if image.height % step or image.width % step:
        raise ValueError(
            f"dimensions {image.width}x{image.height} not divisible by step {step}"
        )


def _apply(image: RasterImage, step: int, t: ThresholdTriple, regions) -> RasterImage:
    """Shared core: recolor the given block regions where the masks fire.

    `regions` maps each of B2/B3/B4 to its (row slice, col slice) inside a
    block. All neighbor values are read from the frozen input.
    """
    reps = _representatives(image.planes, step)
    (m2, m3, m4), (a2, a3, a4) = _masks_and_averages(reps, t)
    c, h, w = image.planes.shape
    out = image.planes.copy()
    view = out.reshape(c, h // step, step, w // step, step)
    for mask, avg, (rows, cols) in zip((m2, m3, m4), (a2, a3, a4), regions):
        region = view[:, :, rows, :, cols]
        m = mask[:, :, None, :, None]
        region[...] = np.where(m, avg[:, :, None, :, None], region)
    return RasterImage(out)


def level1_pass(image: RasterImage, step: int, t: ThresholdTriple) -> RasterImage:
    """One LEVEL 1 pass over step x step blocks (step even). Quadrants are
    q x q with q = step/2; B1 top-left is untouched."""
    _check_dims(image, step, "even-step")
    q = step // 2
    regions = (
        (slice(0, q), slice(q, step)),   # B2 top right
        (slice(q, step), slice(0, q)),   # B3 bottom left
        (slice(q, step), slice(q, step)),  # B4 bottom right
    )
    return _apply(image, step, t, regions)


def level2_pass(image: RasterImage, t: ThresholdTriple) -> RasterImage:
    """LEVEL 2: the LEVEL 1 arithmetic on the 2x2 cells produced by LEVEL 1,
    i.e. single pixels take the averaged colors."""
    return level1_pass(image, 2, t)


def level1_step3_pass(image: RasterImage, t: ThresholdTriple) -> RasterImage:
    """LEVEL 1 on 3x3 blocks: B1 is the 2x2 top-left, B2 the 2-pixel right
    edge, B3 the 2-pixel bottom edge, B4 the corner pixel."""
    _check_dims(image, 3, "step3")
    regions = (
        (slice(0, 2), slice(2, 3)),  # B2
        (slice(2, 3), slice(0, 2)),  # B3
        (slice(2, 3), slice(2, 3)),  # B4
    )
    return _apply(image, 3, t, regions)
