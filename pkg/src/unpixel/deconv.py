"""Linear-motion blur kernels and Richardson-Lucy deconvolution.

Block expansion leaves staircase edges; deconvolving the expanded image with
a short motion kernel smears those steps back into oriented structure. The
useful settings cluster around one direction per image (a resonance angle),
which `sweep` exposes by rendering the whole (L, theta) grid.

theta is measured counterclockwise from the horizontal axis and is unsigned:
theta and theta+180 give the same kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage, signal

from .image import RasterImage, resize_to, round_half_away

L_MAX = 20
THETA_GRID = tuple(range(0, 180, 5))
AMOUNT_GRID = tuple(range(0, 301, 25))
SOURCES = ("DVC", "OFC")
NOISE_MODES = ("NO", "YES", "DO", "LO", "AUTO")

_WEIGHT_FLOOR = 1e-10   # coverage below this is numerical noise, not support
_DIV_GUARD = 1e-6
# kernels at least this big go through the FFT path
_FFT_TAPS = 170


@dataclass(frozen=True, eq=False)
class MotionKernel:
    """Anti-aliased line segment of `length` pixels at `theta` degrees,
    normalized to unit mass."""

    length: int
    theta: float
    taps: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError("taps must be a 2-D matrix")
        if np.any(t < 0) or abs(float(t.sum()) - 1.0) > 1e-6:
            raise ValueError("taps must be nonnegative and sum to 1")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "taps", t)

    @property
    def shape(self):
        return self.taps.shape


def motion_psf(L: int, theta: float) -> MotionKernel:
    """Point spread function of straight-line motion over L pixels at angle
    theta (degrees, counterclockwise from horizontal).

    Tap weights are the coverage of each pixel by a unit-width segment:
    1 - perpendicular distance to the line, with a corrected radial distance
    past the endpoints so the line terminates in rounded caps. Only the half
    matrix around the center is built; the other half is its 180 degree
    rotation. L of 0 or 1 is no motion, the 1x1 identity.
    """
    if L < 0:
        raise ValueError(f"L must be >= 0, got {L}")
    theta = float(theta) % 180.0
    if L <= 1:
        return MotionKernel(int(L), theta, np.ones((1, 1)))

    half = (L - 1) / 2.0
    phi = np.deg2rad(theta)
    cosphi, sinphi = np.cos(phi), np.sin(phi)
    xsign = 1.0 if cosphi >= 0 else -1.0
    linewdt = 1.0

    # box generous enough to hold the segment plus its unit-width sleeve;
    # all-zero border rows/cols are trimmed afterwards
    sx = int(np.ceil(half * abs(cosphi) + linewdt * sinphi))
    sy = int(np.ceil(half * sinphi + linewdt * abs(cosphi)))
    x, y = np.meshgrid(np.arange(sx + 1) * xsign, np.arange(sy + 1))

    dist = y * cosphi - x * sinphi          # signed distance to the line
    rad = np.hypot(x, y)
    near_end = (rad >= half) & (np.abs(dist) <= linewdt)
    if abs(cosphi) > 1e-12:
        overshoot = half - np.abs((x[near_end] + dist[near_end] * sinphi) / cosphi)
    else:
        overshoot = half - np.abs(y[near_end])
    d = dist.copy()
    d[near_end] = np.sqrt(dist[near_end] ** 2 + overshoot ** 2)
    w = linewdt + np.finfo(float).eps - np.abs(d)
    w[w < _WEIGHT_FLOOR] = 0.0

    rows = np.where(w.any(axis=1))[0]
    cols = np.where(w.any(axis=0))[0]
    w = w[: rows.max() + 1, : cols.max() + 1]

    m, n = w.shape
    h = np.zeros((2 * m - 1, 2 * n - 1))
    h[:m, :n] = np.rot90(w, 2)
    h[m - 1 :, n - 1 :] = w
    h /= h.sum()
    if cosphi > 0:
        h = np.flipud(h)
    return MotionKernel(int(L), theta, h)


@dataclass(frozen=True)
class DeconvSettings:
    """One deconvolution: magnification, kernel geometry, and the tone
    controls (source softening, iteration amount, noise prefilter)."""

    gamma: float = 1.0
    L: int = 0
    theta: int = 0
    source: str = "DVC"
    amount: int = 100
    noise: str = "NO"

    def __post_init__(self):
        if not 1.0 <= self.gamma <= 4.0:
            raise ValueError(f"gamma must be in [1, 4], got {self.gamma}")
        if not isinstance(self.L, (int, np.integer)) or not 0 <= self.L <= L_MAX:
            raise ValueError(f"L must be an integer in 0..{L_MAX}, got {self.L!r}")
        if not isinstance(self.theta, (int, np.integer)) or not 0 <= self.theta <= 175:
            raise ValueError(f"theta must be an integer in 0..175, got {self.theta!r}")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.amount not in AMOUNT_GRID:
            raise ValueError(f"amount must be on the grid {{0,25,..,300}}, got {self.amount!r}")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"noise must be one of {NOISE_MODES}, got {self.noise!r}")


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def _gaussian3(sigma: float = 0.5) -> np.ndarray:
    g = np.exp(-np.arange(-1, 2) ** 2 / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def _effective_kernel(L: int, theta: float, source: str) -> np.ndarray:
    taps = motion_psf(L, theta).taps
    if source == "OFC":
        # softer optics: blur the kernel itself a little
        taps = signal.convolve2d(taps, _gaussian3(), mode="full")
        taps = taps / taps.sum()
    return taps


def _prefilter(plane: np.ndarray, mode: str) -> np.ndarray:
    if mode == "NO":
        return plane
    med = ndimage.median_filter(plane, size=3, mode="nearest")
    if mode in ("YES", "AUTO"):
        return med
    m = plane.mean()
    if mode == "DO":
        return np.where(plane < m, med, plane)
    if mode == "LO":
        return np.where(plane > m, med, plane)
    raise ValueError(f"unknown noise mode {mode!r}")


def _conv(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """2-D convolution with replicate boundary; FFT for big kernels."""
    if taps.size < _FFT_TAPS:
        return ndimage.convolve(plane, taps, mode="nearest")
    ph, pw = taps.shape[0] // 2, taps.shape[1] // 2
    padded = np.pad(plane, ((ph, ph), (pw, pw)), mode="edge")
    return signal.fftconvolve(padded, taps, mode="valid")


def _rl_iterates(observed: np.ndarray, taps: np.ndarray):
    """Yield the Richardson-Lucy estimate after each iteration, forever.

    The estimate after k iterations does not depend on how many more are
    taken, so one chain serves every iteration count (the parameter search
    snapshots it at several depths).
    """
    mirrored = taps[::-1, ::-1]
    x = observed
    x_prev = observed
    g1 = g2 = None  # update vectors of iterations k-1 and k-2
    while True:
        alpha = 0.0
        if g1 is not None and g2 is not None:
            denom = float((g2 * g2).sum())
            if denom > 0.0:
                alpha = min(max(float((g1 * g2).sum()) / denom, 0.0), 1.0 - 1e-3)
        y = np.clip(x + alpha * (x - x_prev), 0.0, 1.0)
        blurred = _conv(y, taps)
        ratio = observed / np.maximum(blurred, _DIV_GUARD)
        x_new = np.clip(y * _conv(ratio, mirrored), 0.0, 1.0)
        g2 = g1
        g1 = x_new - y
        x_prev = x
        x = x_new
        yield x


def richardson_lucy(observed: np.ndarray, taps: np.ndarray, iterations: int) -> np.ndarray:
    """Multiplicative Richardson-Lucy on one [0, 1] plane, with the usual
    vector extrapolation so a dozen iterations undo a dozen pixels of motion.

    Each step first extrapolates along the last update direction (step length
    from the correlation of successive update vectors, clamped to [0, 1)),
    then applies the multiplicative update
    est <- est * (observed / (est conv h)) conv h_mirrored. Estimates are
    clamped back into [0, 1] every step. The first two iterations are plain
    updates, so short runs degenerate to textbook Richardson-Lucy. A 1x1
    kernel is a fixed point and returns the observation unchanged.
    """
    if taps.size == 1:
        return observed
    chain = _rl_iterates(observed, taps)
    for _ in range(iterations - 1):
        next(chain)
    return next(chain)


def _magnify(image: RasterImage, gamma: float) -> RasterImage:
    if gamma == 1.0:
        return image
    tw = int(np.floor(gamma * image.width + 0.5))
    th = int(np.floor(gamma * image.height + 0.5))
    return resize_to(image, tw, th, "bilinear")


def _iterations(amount: int) -> int:
    return max(1, int(round(amount / 25)))


def _prefiltered_planes(image: RasterImage, noise: str):
    return [_prefilter(p, noise) for p in image.planes.astype(np.float64) / 255.0]


def _quantize(planes) -> RasterImage:
    arr = np.stack(planes) * 255.0
    return RasterImage(np.clip(round_half_away(arr), 0, 255).astype(np.uint8))


def deconvolve(image: RasterImage, s: DeconvSettings) -> RasterImage:
    """Magnify by s.gamma, then deconvolve every channel with the motion
    kernel; iteration count is amount/25 (at least one)."""
    mag = _magnify(image, s.gamma)
    taps = _effective_kernel(s.L, s.theta, s.source)
    pre = _prefiltered_planes(mag, s.noise)
    n = _iterations(s.amount)
    return _quantize([richardson_lucy(p, taps, n) for p in pre])


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    L: int
    theta: int
    image: RasterImage
    objective: Optional[float] = None


@dataclass(frozen=True)
class SweepGrid:
    """Rectangular grid of deconvolution previews, rows by L, columns by
    theta, in deterministic row-major order."""

    Ls: tuple
    thetas: tuple
    rows: tuple

    def __post_init__(self):
        if len(self.rows) != len(self.Ls) or any(
            len(r) != len(self.thetas) for r in self.rows
        ):
            raise ValueError("grid is not rectangular")

    def cell(self, L: int, theta: int) -> SweepCell:
        return self.rows[self.Ls.index(L)][self.thetas.index(theta)]

    def cells(self):
        for row in self.rows:
            yield from row

    def best(self) -> SweepCell:
        """Cell with the smallest objective; first in row-major order wins
        ties. Requires the sweep to have been run with a reference."""
        best = None
        for c in self.cells():
            if c.objective is None:
                raise ValueError("sweep was run without a reference")
            if best is None or c.objective < best.objective:
                best = c
        return best


def sweep(
    image: RasterImage,
    gamma: float,
    L_values,
    theta_values,
    source: str = "DVC",
    amount: int = 100,
    noise: str = "NO",
    reference: Optional[RasterImage] = None,
    lam: float = 0.1,
) -> SweepGrid:
    """Render deconvolve(image, ...) for every (L, theta) pair. Magnification
    and the noise prefilter do not depend on the kernel, so they are shared
    across cells; every cell is bit-identical to a standalone deconvolve call.

    With a reference image each cell carries the tuning objective evaluated
    against it (lower is better).
    """
    Ls = tuple(int(v) for v in L_values)
    thetas = tuple(int(v) for v in theta_values)
    if not Ls or not thetas:
        raise ValueError("L and theta ranges must be nonempty")
    for L in Ls:
        if not 0 <= L <= L_MAX:
            raise ValueError(f"L {L} out of range 0..{L_MAX}")
    for th in thetas:
        if not 0 <= th <= 175:
            raise ValueError(f"theta {th} out of range 0..175")
    DeconvSettings(gamma=gamma, L=Ls[0], theta=thetas[0], source=source, amount=amount, noise=noise)

    mag = _magnify(image, gamma)
    pre = _prefiltered_planes(mag, noise)
    n = _iterations(amount)
    if reference is not None:
        from .search import objective  # deferred: search builds on this module

    grid_rows = []
    for L in Ls:
        row = []
        for theta in thetas:
            taps = _effective_kernel(L, theta, source)
            img = _quantize([richardson_lucy(p, taps, n) for p in pre])
            obj = None
            if reference is not None:
                obj = objective(img, reference, lam).total
            row.append(SweepCell(L, theta, img, obj))
        grid_rows.append(tuple(row))
    return SweepGrid(Ls, thetas, tuple(grid_rows))


def montage(grid: SweepGrid, pad: int = 2, pad_value: int = 32) -> RasterImage:
    """Assemble the sweep previews into one contact-sheet image."""
    first = grid.rows[0][0].image
    c, h, w = first.planes.shape
    nv, nh = len(grid.Ls), len(grid.thetas)
    out = np.full(
        (c, nv * h + (nv + 1) * pad, nh * w + (nh + 1) * pad),
        pad_value,
        dtype=np.uint8,
    )
    for i, row in enumerate(grid.rows):
        for j, cell in enumerate(row):
            y = pad + i * (h + pad)
            x = pad + j * (w + pad)
            out[:, y : y + h, x : x + w] = cell.image.planes
    return RasterImage(out)
