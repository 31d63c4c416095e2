"""Raster image types, resampling, metrics, and the forward observation model.

Images are stored as read-only uint8 plane stacks of shape (channels, height,
width) with channels 1 (grayscale) or 3 (RGB). Intermediate float planes used
by the restoration code are plain float64 arrays normalized to [0, 1] and are
clamped back into range at operation boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round half away from zero (0.5 -> 1, -0.5 -> -1)."""
    v = np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit raster with 1 or 3 channel planes, immutable once constructed."""

    planes: np.ndarray  # uint8, shape (channels, height, width)

    def __post_init__(self):
        p = np.asarray(self.planes)
        if p.ndim != 3:
            raise ValueError("planes must have shape (channels, height, width)")
        if p.shape[0] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {p.shape[0]}")
        if p.shape[1] < 1 or p.shape[2] < 1:
            raise ValueError("image dimensions must be at least 1x1")
        if p.dtype != np.uint8:
            raise ValueError(f"planes must be uint8, got {p.dtype}")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "planes", p)

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @classmethod
    def from_gray(cls, plane) -> "RasterImage":
        a = np.asarray(plane, dtype=np.uint8)
        return cls(a[None, :, :])

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.planes.shape == other.planes.shape and np.array_equal(
            self.planes, other.planes
        )

    def __repr__(self):
        return f"RasterImage({self.channels}x{self.height}x{self.width})"


@dataclass(frozen=True)
class ObservationParams:
    """Forward-model parameters: block size of the subsampler and noise level."""

    step: int
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.step not in (2, 3, 4):
            raise ValueError(f"unsupported step {self.step}, expected 2, 3 or 4")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


# ---------------------------------------------------------------------------
# forward model
# ---------------------------------------------------------------------------

def forward_observe(
    image: RasterImage,
    params: ObservationParams,
    seed=None,
    central_square: bool = False,
) -> RasterImage:
    """Low-resolution observation of `image`: per-block means plus optional noise.

    The observation operator is subsampling composed with a step x step box
    blur (the geometric transform is fixed to identity). Block means are
    rounded half away from zero; Gaussian noise of sigma = params.noise_sigma
    is then added and the result clamped to 0..255.

    central_square=True averages only the centered floor(step/2) window of
    each block instead of the full block (an illustration variant; degenerate
    to the top-left pixel at step 2).
    """
    s = params.step
    h, w = image.height, image.width
    if h % s or w % s:
        raise ValueError(f"dimensions {w}x{h} not divisible by step {s}")
    p = image.planes.astype(np.float64)
    blocks = p.reshape(image.channels, h // s, s, w // s, s)
    if central_square:
        q = max(1, s // 2)
        off = (s - q) // 2
        blocks = blocks[:, :, off : off + q, :, off : off + q]
    means = blocks.mean(axis=(2, 4))
    out = round_half_away(means)
    if params.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        out = round_half_away(out + rng.normal(0.0, params.noise_sigma, out.shape))
    return RasterImage(np.clip(out, 0, 255).astype(np.uint8))


def reconstruction_residual(candidate: RasterImage, observation: RasterImage, step: int) -> float:
    """L2 norm of forward_observe(candidate) - observation; 0 means the
    reconstruction constraint holds exactly."""
    if (candidate.width, candidate.height) != (
        observation.width * step,
        observation.height * step,
    ):
        raise ValueError(
            f"candidate {candidate.width}x{candidate.height} does not match "
            f"observation {observation.width}x{observation.height} at step {step}"
        )
    if candidate.channels != observation.channels:
        raise ValueError("channel count mismatch")
    pred = forward_observe(candidate, ObservationParams(step))
    return float(np.sqrt(l2_distance(pred, observation)))


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _area_axis(a: np.ndarray, out_n: int, axis: int) -> np.ndarray:
    """Box-average resample along one axis by exact integration of the
    piecewise-constant signal; reduces to block means at integer downscales."""
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    csum = np.concatenate(
        [np.zeros(a.shape[:-1] + (1,)), np.cumsum(a, axis=-1)], axis=-1
    )
    # cell edges in source coordinates; multiply before dividing so integer
    # hits stay exact
    edges = np.arange(out_n + 1, dtype=np.float64) * n / out_n
    idx = np.minimum(edges.astype(np.int64), n)
    frac = edges - idx
    vals = csum[..., idx] + frac * a[..., np.minimum(idx, n - 1)]
    out = (vals[..., 1:] - vals[..., :-1]) * (out_n / n)
    return np.moveaxis(out, -1, axis)


def _linear_axis(a: np.ndarray, out_n: int, axis: int) -> np.ndarray:
    """Bilinear resample along one axis, half-pixel centers, edges clamped."""
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    pos = (np.arange(out_n) + 0.5) * (n / out_n) - 0.5
    pos = np.clip(pos, 0.0, n - 1.0)
    lo = pos.astype(np.int64)
    hi = np.minimum(lo + 1, n - 1)
    t = pos - lo
    out = a[..., lo] * (1.0 - t) + a[..., hi] * t
    return np.moveaxis(out, -1, axis)


def resize_to(image: RasterImage, target_w: int, target_h: int, method: str = "bilinear") -> RasterImage:
    """Resample to (target_w, target_h) with nearest, bilinear or area-average."""
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    if method not in ("nearest", "bilinear", "area-average"):
        raise ValueError(f"unknown resample method {method!r}")
    if (target_w, target_h) == (image.width, image.height):
        return image
    p = image.planes.astype(np.float64)
    if method == "nearest":
        rows = np.minimum(
            ((np.arange(target_h) + 0.5) * image.height / target_h).astype(np.int64),
            image.height - 1,
        )
        cols = np.minimum(
            ((np.arange(target_w) + 0.5) * image.width / target_w).astype(np.int64),
            image.width - 1,
        )
        out = p[:, rows[:, None], cols[None, :]]
    elif method == "bilinear":
        out = _linear_axis(_linear_axis(p, target_h, 1), target_w, 2)
    elif method == "area-average":
        out = _area_axis(_area_axis(p, target_h, 1), target_w, 2)
    else:
        raise ValueError(f"unknown resample method {method!r}")
    return RasterImage(np.clip(round_half_away(out), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def l2_distance(a: RasterImage, b: RasterImage) -> float:
    """Squared L2 distance: sum over channels and pixels of squared intensity
    differences (no square root, matching the fidelity term of the objective)."""
    if a.planes.shape != b.planes.shape:
        raise ValueError(f"shape mismatch {a.planes.shape} vs {b.planes.shape}")
    d = a.planes.astype(np.int64) - b.planes.astype(np.int64)
    return float(np.sum(d * d))


# ---------------------------------------------------------------------------
# PNG I/O
# ---------------------------------------------------------------------------

def load_png(path) -> RasterImage:
    with Image.open(path) as im:
        if im.mode in ("1", "L", "I", "I;16", "LA"):
            im = im.convert("L")
            return RasterImage(np.asarray(im, dtype=np.uint8)[None, :, :])
        im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
        return RasterImage(np.moveaxis(arr, 2, 0))


def save_png(image: RasterImage, path) -> None:
    if image.channels == 1:
        Image.fromarray(image.planes[0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(np.moveaxis(image.planes, 0, 2), mode="RGB").save(path, format="PNG")


def png_bytes(image: RasterImage) -> bytes:
    import io

    buf = io.BytesIO()
    save_png(image, buf)
    return buf.getvalue()
