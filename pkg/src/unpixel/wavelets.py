"""Biorthogonal wavelet filter banks and separable 2-D transforms.

Filters are odd-length symmetric low-pass pairs stored center tap first and
normalized to DC gains of 1 (analysis) and 2 (synthesis), so approximation
coefficients stay in the intensity range of the input.  High-pass taps follow
the quadrature relation h1[n] = (-1)^n g0[n] and g1[n] = (-1)^n h0[n], all
filters indexed from their center tap.

Boundary handling is whole-sample symmetric on the signal.  Subbands extend
with the parities induced by the interleaved coefficient sequence: the
approximation band reflects whole-sample on the left edge and half-sample on
the right, the detail band the other way around.  Reconstruction is then
exact for any even length, including length-2 subbands.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

RECONSTRUCTION_TOL = 1e-6


def _as_taps(values, label: str) -> np.ndarray:
    taps = np.array(values, dtype=np.float64)
    if taps.ndim != 1 or taps.size % 2 == 0:
        raise ValueError(f"{label} taps must be a 1-D odd-length sequence")
    if not np.all(np.isfinite(taps)):
        raise ValueError(f"{label} taps must be finite")
    if not np.allclose(taps, taps[::-1], rtol=0.0, atol=1e-12):
        raise ValueError(f"{label} taps must be symmetric about the center")
    taps.flags.writeable = False
    return taps


def _modulate(taps: np.ndarray) -> np.ndarray:
    k = taps.size // 2
    out = ((-1.0) ** np.arange(-k, k + 1)) * taps
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class WaveletFilterPair:
    """Symmetric biorthogonal low-pass pair; high-pass filters are derived."""

    name: str
    analysis_low: np.ndarray
    synthesis_low: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "analysis_low", _as_taps(self.analysis_low, "analysis"))
        object.__setattr__(self, "synthesis_low", _as_taps(self.synthesis_low, "synthesis"))
        object.__setattr__(self, "analysis_high", _modulate(self.synthesis_low))
        object.__setattr__(self, "synthesis_high", _modulate(self.analysis_low))

    @classmethod
    def from_halves(cls, name: str, analysis_half, synthesis_half) -> "WaveletFilterPair":
        """Build from center-tap-first half filters (the file convention)."""
        def unfold(half):
            half = np.asarray(half, dtype=np.float64)
            return np.concatenate([half[:0:-1], half])
        return cls(name, unfold(analysis_half), unfold(synthesis_half))


def rebalanced(pair: WaveletFilterPair) -> WaveletFilterPair:
    """Same bank with both DC gains moved to sqrt(2).

    The (1, 2) normalization keeps approximation bands in intensity units but
    leaves the synthesis operator with a large norm, which breaks thresholding
    schemes that treat the transform as roughly orthonormal.  Rebalancing
    preserves perfect reconstruction exactly.
    """
    r = np.sqrt(2.0)
    return WaveletFilterPair(pair.name, pair.analysis_low * r, pair.synthesis_low / r)


# ---------------------------------------------------------------------------
# symmetric extension and the 1-D filter passes
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _fold_indices(start: int, count: int, n: int, left_hss: bool, right_hss: bool) -> np.ndarray:
    """Indices start..start+count-1 folded into [0, n) by symmetric reflection.

    left_hss/right_hss pick half-sample symmetry (mirror between samples) over
    whole-sample symmetry (mirror on the edge sample) per side.
    """
    out = np.empty(count, dtype=np.intp)
    for j in range(count):
        i = start + j
        if n == 1:
            out[j] = 0
            continue
        while i < 0 or i >= n:
            if i < 0:
                i = (-i - 1) if left_hss else -i
            else:
                i = (2 * n - 1 - i) if right_hss else (2 * n - 2 - i)
        out[j] = i
    out.flags.writeable = False
    return out


def _analyze(x: np.ndarray, pair: WaveletFilterPair):
    """One analysis pass along the last axis; returns (approx, detail)."""
    n = x.shape[-1]
    h0, h1 = pair.analysis_low, pair.analysis_high
    k0, k1 = h0.size // 2, h1.size // 2
    lo = max(k0, k1 + 1)
    hi = max(k0, k1 + 1)
    ext = x[..., _fold_indices(-lo, n + lo + hi, n, False, False)]
    half = n // 2
    a = np.zeros(x.shape[:-1] + (half,), dtype=np.float64)
    d = np.zeros_like(a)
    for t in range(-k0, k0 + 1):
        a += h0[t + k0] * ext[..., lo + t : lo + t + n : 2]
    for t in range(-k1, k1 + 1):
        d += h1[t + k1] * ext[..., lo + 1 + t : lo + 1 + t + n : 2]
    return a, d


def _synthesize(a: np.ndarray, d: np.ndarray, pair: WaveletFilterPair) -> np.ndarray:
    """Inverse of _analyze along the last axis."""
    half = a.shape[-1]
    n = 2 * half
    g0, g1 = pair.synthesis_low, pair.synthesis_high
    k0, k1 = g0.size // 2, g1.size // 2
    ma, md = k0 // 2 + 1, k1 // 2 + 1
    ae = a[..., _fold_indices(-ma, half + 2 * ma, half, False, True)]
    de = d[..., _fold_indices(-md, half + 2 * md, half, True, False)]
    x = np.zeros(a.shape[:-1] + (n,), dtype=np.float64)
    for t in range(-k0, k0 + 1):
        i0 = t % 2
        m0 = (i0 - t) // 2
        cnt = (n - 1 - i0) // 2 + 1
        x[..., i0::2] += g0[t + k0] * ae[..., m0 + ma : m0 + ma + cnt]
    for t in range(-k1, k1 + 1):
        i0 = (t + 1) % 2
        m0 = (i0 - t - 1) // 2
        cnt = (n - 1 - i0) // 2 + 1
        x[..., i0::2] += g1[t + k1] * de[..., m0 + md : m0 + md + cnt]
    return x


# ---------------------------------------------------------------------------
# separable 2-D transform with packed quadrants
# ---------------------------------------------------------------------------

def _check_dims(shape, levels: int):
    if len(shape) < 2:
        raise ValueError("expected an array with at least two axes")
    if not isinstance(levels, int) or levels < 1:
        raise ValueError("levels must be a positive integer")
    h, w = shape[-2], shape[-1]
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(
            f"dimensions {h}x{w} are not divisible by 2^{levels}"
        )


def _forward_axis(x: np.ndarray, pair: WaveletFilterPair) -> np.ndarray:
    a, d = _analyze(x, pair)
    return np.concatenate([a, d], axis=-1)


def _inverse_axis(c: np.ndarray, pair: WaveletFilterPair) -> np.ndarray:
    half = c.shape[-1] // 2
    return _synthesize(c[..., :half], c[..., half:], pair)


def dwt2(plane: np.ndarray, basis: WaveletFilterPair, levels: int = 3) -> np.ndarray:
    """Forward transform of a plane (or stack of planes) over the last two axes.

    Each level rewrites the current approximation block in place as packed
    quadrants: approximation top-left, then the three detail orientations.
    """
    x = np.asarray(plane, dtype=np.float64)
    _check_dims(x.shape, levels)
    c = x.copy()
    h, w = x.shape[-2], x.shape[-1]
    for lv in range(levels):
        hh, ww = h >> lv, w >> lv
        sub = _forward_axis(c[..., :hh, :ww], basis)
        sub = _forward_axis(sub.swapaxes(-1, -2), basis).swapaxes(-1, -2)
        c[..., :hh, :ww] = sub
    return c


def idwt2(coeffs: np.ndarray, basis: WaveletFilterPair, levels: int = 3) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    _check_dims(c.shape, levels)
    x = c.copy()
    h, w = c.shape[-2], c.shape[-1]
    for lv in reversed(range(levels)):
        hh, ww = h >> lv, w >> lv
        sub = _inverse_axis(x[..., :hh, :ww].swapaxes(-1, -2), basis).swapaxes(-1, -2)
        x[..., :hh, :ww] = _inverse_axis(sub, basis)
    return x


def max_levels(height: int, width: int) -> int:
    """Deepest decomposition both dimensions support."""
    lv = 0
    while height % 2 == 0 and width % 2 == 0 and height > 1 and width > 1:
        height //= 2
        width //= 2
        lv += 1
    return lv


def reconstruction_error(pair: WaveletFilterPair, size: int = 16, levels: int = 2) -> float:
    """Worst round-trip error over a few seeded random planes."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(4):
        x = rng.uniform(0.0, 255.0, size=(size, size))
        y = idwt2(dwt2(x, pair, levels), pair, levels)
        worst = max(worst, float(np.abs(x - y).max()))
    return worst


# ---------------------------------------------------------------------------
# registry: the built-in 9/7 pair plus the shipped filter file
# ---------------------------------------------------------------------------

# The 9/7 pair standardized in JPEG 2000, quoted here to the precision the
# irrational closed forms are usually tabulated at.
_CDF97_ANALYSIS_HALF = (
    0.602949018236360,
    0.266864118442875,
    -0.078223266528990,
    -0.016864118442875,
    0.026748757410810,
)
_CDF97_SYNTHESIS_HALF = (
    1.115087052457000,
    0.591271763114250,
    -0.057543526228500,
    -0.091271763114250,
)

# Best compression basis per bundled portrait, recorded from the same desk
# notes the preset pipelines come from.  Metadata only; nothing dispatches
# on it.
PREFERRED_BASIS = {
    "google-brain-1": "villasenor1",
    "google-brain-2": "villasenor5",
    "google-brain-3": "villasenor1",
    "marie-bonneau-1": "villasenor5",
    "marie-bonneau-2": "villasenor1",
    "ellie-goulding": "villasenor1",
    "ariana-grande": "villasenor5",
    "shailene-woodley": "villasenor5",
    "man": "villasenor1",
    "eye": "villasenor1",
    "meghan-markle": "villasenor5",
}


def parse_filter_file(text: str, origin: str = "filter file") -> "tuple[WaveletFilterPair, ...]":
    """Parse `name; a0 a1 ...; s0 s1 ...` lines (center tap first).

    Every parsed pair is round-tripped before it is returned, so a wrong
    transcription fails at load time instead of corrupting results later.
    """
    pairs = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(";")]
        if len(parts) != 3 or not parts[0]:
            raise ValueError(f"{origin} line {ln}: expected 'name; analysis taps; synthesis taps'")
        name = parts[0]
        try:
            a_half = [float(v) for v in parts[1].split()]
            s_half = [float(v) for v in parts[2].split()]
        except ValueError:
            raise ValueError(f"{origin} line {ln}: taps must be numeric") from None
        if not a_half or not s_half:
            raise ValueError(f"{origin} line {ln}: empty tap list")
        try:
            pair = WaveletFilterPair.from_halves(name, a_half, s_half)
        except ValueError as exc:
            raise ValueError(f"{origin} line {ln}: {exc}") from None
        err = reconstruction_error(pair)
        if err > RECONSTRUCTION_TOL:
            raise ValueError(
                f"{origin} line {ln}: pair {name!r} fails reconstruction (max error {err:.3g})"
            )
        pairs.append(pair)
    return tuple(pairs)


@lru_cache(maxsize=1)
def _registry() -> "dict[str, WaveletFilterPair]":
    table = {
        "villasenor1": WaveletFilterPair.from_halves(
            "villasenor1", _CDF97_ANALYSIS_HALF, _CDF97_SYNTHESIS_HALF
        )
    }
    text = resources.files("unpixel").joinpath("filters/villasenor.flt").read_text("utf-8")
    for pair in parse_filter_file(text, origin="villasenor.flt"):
        table[pair.name] = pair
    return table


def basis_names() -> "tuple[str, ...]":
    return tuple(_registry())


def load_basis(name: str) -> WaveletFilterPair:
    table = _registry()
    if name not in table:
        raise KeyError(f"unknown wavelet basis {name!r}; have {', '.join(table)}")
    return table[name]
