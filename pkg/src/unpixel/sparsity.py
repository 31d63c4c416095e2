"""Sparse-image baselines on top of the wavelet transforms.

Covers top-k coefficient approximation, coefficient decay curves, masked L1
inpainting by iterative soft thresholding, and two toy-scale dictionary
diagnostics (mutual coherence and brute-force restricted-isometry bounds).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .image import RasterImage, round_half_away
from .wavelets import WaveletFilterPair, dwt2, idwt2, max_levels, rebalanced


@dataclass(frozen=True, eq=False)
class SparseProblem:
    """Masked recovery instance: reconstruct the pixels the mask hides."""

    mask: np.ndarray  # bool, shape (height, width); True marks a known pixel
    observed: RasterImage  # intensities; only values under the mask are used
    basis: WaveletFilterPair
    mu: float  # L1 weight, in [0, 1] intensity units
    iterations: int

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.dtype != np.bool_ or m.ndim != 2:
            raise ValueError("mask must be a 2-D boolean array")
        if m.shape != (self.observed.height, self.observed.width):
            raise ValueError(
                f"mask shape {m.shape} does not match image "
                f"{self.observed.height}x{self.observed.width}"
            )
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)
        if not isinstance(self.basis, WaveletFilterPair):
            raise ValueError("basis must be a WaveletFilterPair")
        if not (float(self.mu) > 0.0 and np.isfinite(self.mu)):
            raise ValueError("mu must be positive")
        if not isinstance(self.iterations, int) or self.iterations < 1:
            raise ValueError("iterations must be a positive integer")


def _quantize(planes: np.ndarray) -> RasterImage:
    return RasterImage(np.clip(round_half_away(planes), 0.0, 255.0).astype(np.uint8))


# ---------------------------------------------------------------------------
# top-k approximation and decay curves
# ---------------------------------------------------------------------------

def topk_approx(
    image: RasterImage, basis: WaveletFilterPair, percent: float, levels: int = 3
) -> RasterImage:
    """Keep the k largest-magnitude coefficients per channel, drop the rest."""
    if not (0.0 < percent <= 100.0):
        raise ValueError("percent must lie in (0, 100]")
    planes = image.planes.astype(np.float64)
    coeffs = dwt2(planes, basis, levels)
    n = image.height * image.width
    k = int(round(percent / 100.0 * n))
    kept = np.zeros_like(coeffs)
    for ch in range(image.channels):
        flat = coeffs[ch].ravel()
        order = np.argsort(-np.abs(flat), kind="stable")[:k]
        out = np.zeros_like(flat)
        out[order] = flat[order]
        kept[ch] = out.reshape(coeffs[ch].shape)
    return _quantize(idwt2(kept, basis, levels))


def decay_curve(image: RasterImage, basis: WaveletFilterPair) -> np.ndarray:
    """(rank, magnitude, cumulative) rows over all channels, largest first.

    The decomposition runs to the deepest level the dimensions allow, so a
    flat image collapses to a single approximation coefficient.
    """
    levels = max_levels(image.height, image.width)
    planes = image.planes.astype(np.float64)
    coeffs = dwt2(planes, basis, levels) if levels else planes
    mags = np.sort(np.abs(coeffs).ravel())[::-1]
    rows = np.empty((mags.size, 3), dtype=np.float64)
    rows[:, 0] = np.arange(1, mags.size + 1)
    rows[:, 1] = mags
    rows[:, 2] = np.cumsum(mags)
    return rows


def decay_csv(rows: np.ndarray) -> str:
    lines = ["rank,magnitude,cumulative"]
    for rank, mag, cum in rows:
        lines.append(f"{int(rank)},{mag:.17g},{cum:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# masked L1 inpainting
# ---------------------------------------------------------------------------

def _soft(values: np.ndarray, t: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - t, 0.0)


def ista_inpaint(problem: SparseProblem, levels: int = 3, on_iteration=None) -> RasterImage:
    """Fill hidden pixels by iterative soft thresholding.

    Gradient step on the masked data term with step size 1, then shrinkage of
    all transform coefficients by mu.  The transform runs in the rebalanced
    (near-orthonormal) version of the bank: with the intensity normalization
    the synthesis operator is far from isometric and the shrinkage step badly
    overshoots, which shows up as a rising objective.  Known pixels are
    re-imposed exactly on the way out.
    """
    mask = problem.mask
    if not mask.any():
        raise ValueError("mask selects no pixels")
    bank = rebalanced(problem.basis)
    y = problem.observed.planes.astype(np.float64) / 255.0
    fill = y[:, mask].mean(axis=1).reshape(-1, 1, 1)
    x = np.where(mask, y, fill)
    for k in range(problem.iterations):
        r = x + mask * (y - x)
        x = idwt2(_soft(dwt2(r, bank, levels), problem.mu), bank, levels)
        if on_iteration is not None:
            on_iteration(k, x.copy())
    x = np.clip(x, 0.0, 1.0)
    x[:, mask] = y[:, mask]
    return _quantize(x * 255.0)


def ista_objective(problem: SparseProblem, planes: np.ndarray, levels: int = 3) -> float:
    """Masked squared error plus the weighted L1 norm of the coefficients.

    planes are float intensities in [0, 1], shaped like the observed stack;
    uses the same rebalanced bank as the iteration so descent is measurable.
    """
    bank = rebalanced(problem.basis)
    y = problem.observed.planes.astype(np.float64) / 255.0
    x = np.asarray(planes, dtype=np.float64)
    fid = float(np.sum(((x - y) ** 2)[:, problem.mask]))
    return fid + problem.mu * float(np.abs(dwt2(x, bank, levels)).sum())


# ---------------------------------------------------------------------------
# dictionary diagnostics
# ---------------------------------------------------------------------------

def coherence(theta: np.ndarray) -> float:
    """Largest normalized inner product between two distinct columns."""
    a = np.asarray(theta, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] < 2:
        raise ValueError("expected a matrix with at least two columns")
    gram = a.T @ a
    norms_sq = np.diag(gram).copy()
    if np.any(norms_sq == 0.0):
        raise ValueError("matrix has a zero column")
    # ratios of squares keep identical columns at exactly 1.0
    ratio = gram * gram / np.outer(norms_sq, norms_sq)
    np.fill_diagonal(ratio, 0.0)
    return float(min(1.0, np.sqrt(ratio.max())))


def estimate_rip_delta(matrix: np.ndarray, k: int) -> float:
    """Smallest isometry slack over every k-column submatrix.

    Enumerates all supports, so the column count is capped where that is
    still a desk-scale computation.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n = a.shape[1]
    if n > 16:
        raise ValueError("support enumeration is limited to 16 columns")
    if not isinstance(k, int) or not (1 <= k <= n):
        raise ValueError(f"k must lie in 1..{n}")
    delta = 0.0
    for support in itertools.combinations(range(n), k):
        s = np.linalg.svd(a[:, support], compute_uv=False)
        delta = max(delta, s[0] * s[0] - 1.0, 1.0 - s[-1] * s[-1])
    return float(max(delta, 0.0))
