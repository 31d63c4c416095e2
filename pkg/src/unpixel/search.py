"""Regularized grid search for restoration parameters.

The objective balances data fidelity against flatness: squared L2 distance to
the reference plus lambda times an inverse-contrast penalty. Low-contrast
candidates score a large penalty, fully flat ones an infinite one, so among
candidates that explain the reference equally well the search prefers the
crisper one.

`optimize` greedily builds a pipeline one occurrence at a time: an
interpolation triple, a full-open presmooth, then a deconvolution tuple, each
chosen by exhaustive search over coarse grids with a no-op candidate included,
so the committed objective never increases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .deconv import AMOUNT_GRID, L_MAX, NOISE_MODES, SOURCES
from .image import RasterImage, l2_distance, resize_to
from .interp import ThresholdTriple

WINDOW = 8


def contrast_regularizer(h: RasterImage) -> float:
    """Inverse total contrast: R = 1 / sum of per-window Michelson contrasts
    (Imax - Imin)/(Imax + Imin) over 8x8 windows of every channel. An all-zero
    window contributes 0; a completely contrast-free image maps to +inf.
    """
    if h.height % WINDOW or h.width % WINDOW:
        raise ValueError(
            f"dimensions {h.width}x{h.height} not divisible by window {WINDOW}"
        )
    v = h.planes.reshape(
        h.channels, h.height // WINDOW, WINDOW, h.width // WINDOW, WINDOW
    ).astype(np.float64)
    mx = v.max(axis=(2, 4))
    mn = v.min(axis=(2, 4))
    s = mx + mn
    c = np.divide(mx - mn, s, out=np.zeros_like(s), where=s > 0)
    total = float(c.sum())
    return math.inf if total == 0.0 else 1.0 / total


@dataclass(frozen=True)
class ObjectiveBreakdown:
    fidelity: float
    regularizer: float
    lam: float
    total: float


def objective(candidate: RasterImage, reference: RasterImage, lam: float) -> ObjectiveBreakdown:
    """Fidelity plus regularizer of `candidate` against `reference`.

    The candidate is brought to the reference size by area averaging before
    both terms are evaluated, so stages may work at any magnification.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    view = resize_to(candidate, reference.width, reference.height, "area-average")
    fid = float(l2_distance(view, reference))
    reg = contrast_regularizer(view)
    # guard 0 * inf: lam == 0 means fidelity only
    total = fid if lam == 0 else fid + lam * reg
    return ObjectiveBreakdown(fid, reg, lam, total)


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    """Grids and stopping rules for `optimize`.

    p_values defaults to the coarse 0..255 grid with step p_step (always
    including 0 and 255); the deconvolution grids default to the full
    parameter ranges. gamma_values applies to the first occurrence only,
    later ones never magnify. lam and threshold have no natural scale in the
    0..255 world; the defaults are arbitrary and meant to be overridden.
    """

    lam: float = 0.1
    threshold: float = 0.0
    max_occurrences: int = 4
    p_step: int = 5
    p_values: Optional[tuple] = None
    L_values: tuple = tuple(range(L_MAX + 1))
    theta_values: tuple = tuple(range(0, 180, 5))
    amount_values: tuple = AMOUNT_GRID
    gamma_values: tuple = (1.0, 2.0, 2.25, 3.0, 3.5, 4.0)
    source_values: tuple = SOURCES
    noise_values: tuple = NOISE_MODES
    rel_floor: float = 1e-3

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.max_occurrences < 0:
            raise ValueError("max_occurrences must be >= 0")
        if self.rel_floor < 0:
            raise ValueError("rel_floor must be >= 0")
        if self.p_step < 1:
            raise ValueError("p_step must be >= 1")
        if self.p_values is None:
            grid = tuple(sorted(set(range(0, 256, self.p_step)) | {0, 255}))
            object.__setattr__(self, "p_values", grid)
        else:
            object.__setattr__(self, "p_values", tuple(int(v) for v in self.p_values))
        for name in ("p_values", "L_values", "theta_values", "amount_values",
                     "gamma_values", "source_values", "noise_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if not all(0 <= p <= 255 for p in self.p_values):
            raise ValueError("p_values must lie in 0..255")
        if not all(isinstance(L, (int, np.integer)) and 0 <= L <= L_MAX for L in self.L_values):
            raise ValueError(f"L_values must be integers in 0..{L_MAX}")
        if not all(isinstance(t, (int, np.integer)) and 0 <= t <= 175 for t in self.theta_values):
            raise ValueError("theta_values must be integers in 0..175")
        if not all(a in AMOUNT_GRID for a in self.amount_values):
            raise ValueError("amount_values must lie on the grid {0,25,..,300}")
        if not all(1.0 <= g <= 4.0 for g in self.gamma_values):
            raise ValueError("gamma_values must lie in [1, 4]")
        if not all(s in SOURCES for s in self.source_values):
            raise ValueError(f"source_values must be among {SOURCES}")
        if not all(nz in NOISE_MODES for nz in self.noise_values):
            raise ValueError(f"noise_values must be among {NOISE_MODES}")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    fidelity: float
    regularizer: float
    total: float


@dataclass(frozen=True)
class SearchState:
    """Result of `optimize`: the committed pipeline, its objective, the
    number of committed steps, and the objective trace (row 0 is the plain
    block expansion)."""

    spec: "PipelineSpec"
    objective: ObjectiveBreakdown
    iteration: int
    trace: tuple


def trace_csv(trace) -> str:
    lines = ["iteration,fidelity,regularizer,total"]
    for row in trace:
        lines.append(
            f"{row.iteration},{row.fidelity:.17g},{row.regularizer:.17g},{row.total:.17g}"
        )
    return "\n".join(lines) + "\n"


def _interp_geometry(gran: int) -> str:
    return "step3" if gran == 3 else "even-step"


def _best_interp(img, gran, bd0, reference, cfg):
    """Exhaust the threshold cube; every candidate is the pair (triple pass,
    full-open presmooth). Doing nothing is a candidate too, so the phase
    never worsens the objective. Returns (stages, image, breakdown)."""
    from .pipeline import CondInterp, apply_stage

    geom = _interp_geometry(gran)
    pres = CondInterp(1, ThresholdTriple(255, 255, 255), geom)
    best = ((bd0.total, ()), (), img, bd0)
    for p2 in cfg.p_values:
        for p3 in cfg.p_values:
            for p4 in cfg.p_values:
                s1 = CondInterp(1, ThresholdTriple(p2, p3, p4), geom)
                im, g = apply_stage(img, s1, gran)
                im, g = apply_stage(im, pres, g)
                bd = objective(im, reference, cfg.lam)
                cand = ((bd.total, (p2, p3, p4)), (s1, pres), im, bd)
                if cand[0] < best[0]:
                    best = cand
    return best[1], best[2], best[3]


def _best_deconv(img, gran, bd0, reference, cfg, gammas):
    """Exhaust (gamma, L, theta, source, amount, noise). One Richardson-Lucy
    chain per kernel serves the whole amount grid (prefix snapshots). Ties
    break toward the lexicographically smallest tuple, and doing nothing
    sorts before everything. Returns (stages, image, breakdown, granularity).
    """
    from .pipeline import Deconvolve, Magnify

    from .deconv import (
        DeconvSettings,
        _effective_kernel,
        _iterations,
        _magnify,
        _prefiltered_planes,
        _quantize,
        _rl_iterates,
    )

    src_idx = {s: i for i, s in enumerate(SOURCES)}
    noise_idx = {nz: i for i, nz in enumerate(NOISE_MODES)}
    depth_for = {a: _iterations(a) for a in cfg.amount_values}

    best = ((bd0.total, ()), (), img, bd0, gran)

    def consider(total_key, stages, image, bd, new_gran):
        nonlocal best
        if total_key < best[0]:
            best = (total_key, stages, image, bd, new_gran)

    def stages_for(gamma, L, theta, source, amount, noise):
        out = []
        if gamma > 1:
            out.append(Magnify(gamma))
        if not (L == 0 and noise == "NO"):
            out.append(
                Deconvolve(
                    DeconvSettings(
                        gamma=1.0, L=L, theta=theta,
                        source=source, amount=amount, noise=noise,
                    )
                )
            )
        return tuple(out)

    for gamma in gammas:
        base = _magnify(img, gamma)
        new_gran = 2 if gamma > 1 else gran
        for noise in cfg.noise_values:
            planes = _prefiltered_planes(base, noise)
            for L in cfg.L_values:
                for theta in cfg.theta_values:
                    for source in cfg.source_values:
                        taps = _effective_kernel(L, theta, source)
                        if taps.size == 1:
                            im = _quantize(planes)
                            bd = objective(im, reference, cfg.lam)
                            for amount in cfg.amount_values:
                                key = (gamma, L, theta, src_idx[source], amount, noise_idx[noise])
                                consider(
                                    (bd.total, key),
                                    stages_for(gamma, L, theta, source, amount, noise),
                                    im, bd, new_gran,
                                )
                            continue
                        chains = [_rl_iterates(p, taps) for p in planes]
                        depth = 0
                        state = planes
                        images = {}
                        for d in sorted(set(depth_for.values())):
                            for _ in range(d - depth):
                                state = [next(ch) for ch in chains]
                            depth = d
                            images[d] = _quantize(state)
                        bd_for = {d: objective(im, reference, cfg.lam) for d, im in images.items()}
                        for amount in cfg.amount_values:
                            d = depth_for[amount]
                            key = (gamma, L, theta, src_idx[source], amount, noise_idx[noise])
                            consider(
                                (bd_for[d].total, key),
                                stages_for(gamma, L, theta, source, amount, noise),
                                images[d], bd_for[d], new_gran,
                            )
    return best[1], best[2], best[3], best[4]


def _best_trio(img, gran, bd0, reference, cfg):
    """Final smoothing block: triple pass, full-open presmooth, full-open
    LEVEL 2. Appended only when it strictly improves on doing nothing."""
    from .pipeline import CondInterp, apply_stage

    geom = _interp_geometry(gran)
    pres = CondInterp(1, ThresholdTriple(255, 255, 255), geom)
    final = CondInterp(2, ThresholdTriple(255, 255, 255))
    best = ((bd0.total, ()), (), img, bd0)
    for p2 in cfg.p_values:
        for p3 in cfg.p_values:
            for p4 in cfg.p_values:
                s1 = CondInterp(1, ThresholdTriple(p2, p3, p4), geom)
                im, g = apply_stage(img, s1, gran)
                im, g = apply_stage(im, pres, g)
                im, g = apply_stage(im, final, g)
                bd = objective(im, reference, cfg.lam)
                cand = ((bd.total, (p2, p3, p4)), (s1, pres, final), im, bd)
                if cand[0] < best[0]:
                    best = cand
    return best[1], best[2], best[3]


def optimize(
    source,
    reference: RasterImage,
    cfg: Optional[SearchConfig] = None,
    on_progress: Optional[Callable] = None,
) -> SearchState:
    """Greedy occurrence-by-occurrence pipeline construction.

    Each occurrence grid-searches an interpolation triple (applied together
    with its full-open presmooth) and then a deconvolution tuple. Both phases
    include a do-nothing candidate, so an occurrence can only lower the
    objective; it is committed when the relative improvement reaches
    cfg.rel_floor and discarded (ending the loop) otherwise. The run stops
    early once the total falls to cfg.threshold. A final smoothing block
    (triple, presmooth, LEVEL 2 pass) is appended when it helps.

    on_progress, when given, receives each TraceRow as it is committed
    along with the pipeline built so far.
    """
    from .pipeline import PipelineSpec

    from .codec import expand

    cfg = SearchConfig() if cfg is None else cfg
    want_w = source.grid_width * source.step
    want_h = source.grid_height * source.step
    if (reference.width, reference.height) != (want_w, want_h):
        raise ValueError(
            f"reference must be {want_w}x{want_h} (input grid times step), "
            f"got {reference.width}x{reference.height}"
        )
    if reference.width % WINDOW or reference.height % WINDOW:
        raise ValueError(
            f"reference dimensions must be divisible by {WINDOW} for the regularizer"
        )

    img = expand(source)
    gran = source.step
    bd = objective(img, reference, cfg.lam)
    stages = []
    trace = [TraceRow(0, bd.fidelity, bd.regularizer, bd.total)]
    if on_progress is not None:
        on_progress(trace[-1], PipelineSpec("optimized", ()))
    iteration = 0

    for occ in range(1, cfg.max_occurrences + 1):
        if bd.total <= cfg.threshold:
            break
        start_total = bd.total
        a_stages, a_img, a_bd = _best_interp(img, gran, bd, reference, cfg)
        gammas = cfg.gamma_values if occ == 1 else (1.0,)
        b_stages, b_img, b_bd, b_gran = _best_deconv(a_img, gran, a_bd, reference, cfg, gammas)
        improved = (
            b_bd.total < start_total
            and start_total - b_bd.total >= cfg.rel_floor * start_total
        )
        if not improved:
            break
        stages.extend(a_stages)
        stages.extend(b_stages)
        img, gran, bd = b_img, b_gran, b_bd
        iteration += 1
        trace.append(TraceRow(iteration, bd.fidelity, bd.regularizer, bd.total))
        if on_progress is not None:
            on_progress(trace[-1], PipelineSpec("optimized", tuple(stages)))

    t_stages, t_img, t_bd = _best_trio(img, gran, bd, reference, cfg)
    if t_stages:
        stages.extend(t_stages)
        img, bd = t_img, t_bd
        iteration += 1
        trace.append(TraceRow(iteration, bd.fidelity, bd.regularizer, bd.total))
        if on_progress is not None:
            on_progress(trace[-1], PipelineSpec("optimized", tuple(stages)))

    return SearchState(PipelineSpec("optimized", tuple(stages)), bd, iteration, tuple(trace))
