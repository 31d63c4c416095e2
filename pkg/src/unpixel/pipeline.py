"""Restoration pipelines: stage lists, their text form, presets, and the
tabular parameter import.

A pipeline is an ordered list of three stage kinds: conditional interpolation
passes, one optional magnification, and deconvolutions. The text format holds
one stage per line (`interp1 p2=.. p3=.. p4=..`, `magnify gamma=..`,
`deconv L=.. theta=.. source=.. amount=.. noise=..`) with `#` comments.

Execution starts from the expanded block image and tracks the block
granularity: level 1 interpolations run on blocks of the input step until the
image is resampled (magnification or a deconvolution with gamma > 1), after
which the block structure is gone and they run at the 2x2 pixel scale, like
level 2 always does. Resampled sizes need not divide the block size, so a
pass covers the largest aligned region and leaves the remainder untouched,
consistent with the boundary rule that a block without a neighbor keeps its
pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Tuple, Union

from .codec import BlockAverageImage, expand
from .deconv import AMOUNT_GRID, DeconvSettings, L_MAX, NOISE_MODES, SOURCES, _magnify, deconvolve
from .image import RasterImage
from .interp import (
    InterpLevel,
    ThresholdTriple,
    level1_pass,
    level1_step3_pass,
    level2_pass,
)


class PipelineError(ValueError):
    pass


class PipelineSyntaxError(PipelineError):
    """Malformed stage line; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class PipelineRangeError(PipelineError):
    """Well-formed line with an out-of-range value; names the field."""

    def __init__(self, message: str, line: int, field_name: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.field = field_name


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CondInterp:
    level: int
    t: ThresholdTriple
    geometry: str = "even-step"

    def __post_init__(self):
        InterpLevel(self.level, self.geometry)  # reuse its validation
        if not isinstance(self.t, ThresholdTriple):
            raise ValueError("t must be a ThresholdTriple")


@dataclass(frozen=True)
class Magnify:
    gamma: float

    def __post_init__(self):
        if not 1.0 <= self.gamma <= 4.0:
            raise ValueError(f"gamma must be in [1, 4], got {self.gamma}")


@dataclass(frozen=True)
class Deconvolve:
    settings: DeconvSettings

    def __post_init__(self):
        if not isinstance(self.settings, DeconvSettings):
            raise ValueError("settings must be a DeconvSettings")


Stage = Union[CondInterp, Magnify, Deconvolve]


def _magnifies(s: Stage) -> bool:
    return (isinstance(s, Magnify) and s.gamma > 1) or (
        isinstance(s, Deconvolve) and s.settings.gamma > 1
    )


@dataclass(frozen=True)
class PipelineSpec:
    """Named, ordered stage list. At most one stage may magnify, and it must
    come no later than the first deconvolution."""

    name: str = ""
    stages: Tuple[Stage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        magnifiers = [i for i, s in enumerate(self.stages) if _magnifies(s)]
        if len(magnifiers) > 1:
            raise PipelineError("at most one stage may magnify (gamma > 1)")
        deconvs = [i for i, s in enumerate(self.stages) if isinstance(s, Deconvolve)]
        if magnifiers and deconvs and magnifiers[0] > deconvs[0]:
            raise PipelineError("magnification must precede the first deconvolution")


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def _split_fields(tokens, line):
    kv = {}
    for tok in tokens:
        if "=" not in tok:
            raise PipelineSyntaxError(f"expected key=value, got {tok!r}", line)
        k, v = tok.split("=", 1)
        if not k or not v:
            raise PipelineSyntaxError(f"expected key=value, got {tok!r}", line)
        if k in kv:
            raise PipelineSyntaxError(f"duplicate field {k!r}", line)
        kv[k] = v
    return kv


def _take_int(kv, key, lo, hi, line):
    if key not in kv:
        raise PipelineSyntaxError(f"missing field {key!r}", line)
    raw = kv.pop(key)
    try:
        v = int(raw)
    except ValueError:
        raise PipelineSyntaxError(f"field {key!r} expects an integer, got {raw!r}", line) from None
    if not lo <= v <= hi:
        raise PipelineRangeError(f"{key} must be in {lo}..{hi}, got {v}", line, key)
    return v


def _take_enum(kv, key, allowed, line):
    if key not in kv:
        raise PipelineSyntaxError(f"missing field {key!r}", line)
    raw = kv.pop(key)
    if raw not in allowed:
        raise PipelineRangeError(
            f"{key} must be one of {'|'.join(allowed)}, got {raw!r}", line, key
        )
    return raw


def parse(text: str, name: str = "") -> PipelineSpec:
    """Parse the one-stage-per-line format. Raises PipelineSyntaxError with
    the line number on malformed lines and PipelineRangeError naming the
    field on out-of-range values."""
    stages = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, kv = tokens[0], _split_fields(tokens[1:], line_no)

        if kind in ("interp1", "interp2"):
            t = ThresholdTriple(
                _take_int(kv, "p2", 0, 255, line_no),
                _take_int(kv, "p3", 0, 255, line_no),
                _take_int(kv, "p4", 0, 255, line_no),
            )
            geometry = "even-step"
            if kind == "interp1" and "geom" in kv:
                geom = kv.pop("geom")
                if geom != "step3":
                    raise PipelineRangeError(
                        f"geom must be step3, got {geom!r}", line_no, "geom"
                    )
                geometry = "step3"
            stage = CondInterp(1 if kind == "interp1" else 2, t, geometry)
        elif kind == "magnify":
            if "gamma" not in kv:
                raise PipelineSyntaxError("missing field 'gamma'", line_no)
            raw_g = kv.pop("gamma")
            try:
                g = float(raw_g)
            except ValueError:
                raise PipelineSyntaxError(
                    f"field 'gamma' expects a number, got {raw_g!r}", line_no
                ) from None
            if not 1.0 <= g <= 4.0:
                raise PipelineRangeError(f"gamma must be in [1, 4], got {g}", line_no, "gamma")
            stage = Magnify(g)
        elif kind == "deconv":
            L = _take_int(kv, "L", 0, L_MAX, line_no)
            theta = _take_int(kv, "theta", 0, 175, line_no)
            source = _take_enum(kv, "source", SOURCES, line_no)
            amount = _take_int(kv, "amount", 0, 300, line_no)
            if amount not in AMOUNT_GRID:
                raise PipelineRangeError(
                    f"amount must be a multiple of 25, got {amount}", line_no, "amount"
                )
            noise = _take_enum(kv, "noise", NOISE_MODES, line_no)
            stage = Deconvolve(
                DeconvSettings(
                    gamma=1.0, L=L, theta=theta, source=source, amount=amount, noise=noise
                )
            )
        else:
            raise PipelineSyntaxError(f"unknown stage {kind!r}", line_no)

        if kv:
            raise PipelineSyntaxError(
                f"unknown field(s) for {kind}: {', '.join(sorted(kv))}", line_no
            )
        stages.append(stage)
    return PipelineSpec(name, tuple(stages))


def _fmt_float(x: float) -> str:
    return f"{x:g}"


def serialize(spec: PipelineSpec) -> str:
    lines = []
    for s in spec.stages:
        if isinstance(s, CondInterp):
            line = f"interp{s.level} p2={s.t.p2} p3={s.t.p3} p4={s.t.p4}"
            if s.geometry == "step3":
                line += " geom=step3"
            lines.append(line)
        elif isinstance(s, Magnify):
            lines.append(f"magnify gamma={_fmt_float(s.gamma)}")
        else:
            st = s.settings
            if st.gamma != 1.0:
                # the text format has no gamma key on deconv lines
                lines.append(f"magnify gamma={_fmt_float(st.gamma)}")
                st = DeconvSettings(
                    gamma=1.0, L=st.L, theta=st.theta,
                    source=st.source, amount=st.amount, noise=st.noise,
                )
            lines.append(
                f"deconv L={st.L} theta={st.theta} source={st.source} "
                f"amount={st.amount} noise={st.noise}"
            )
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _aligned_pass(img: RasterImage, block: int, fn) -> RasterImage:
    """Apply fn to the largest top-left region divisible by `block`; the
    remainder rows/cols pass through unchanged."""
    h2 = img.height - img.height % block
    w2 = img.width - img.width % block
    if h2 < block or w2 < block:
        return img
    if (h2, w2) == (img.height, img.width):
        return fn(img)
    sub = fn(RasterImage(img.planes[:, :h2, :w2]))
    out = img.planes.copy()
    out[:, :h2, :w2] = sub.planes
    return RasterImage(out)


def apply_stage(img: RasterImage, stage: Stage, granularity: int):
    """Run one stage; returns (image, granularity). The granularity is the
    block size level 1 interpolations operate on; any resampling stage drops
    it to 2."""
    if isinstance(stage, CondInterp):
        if stage.geometry == "step3":
            if granularity != 3:
                raise PipelineError(
                    f"step3 interpolation needs 3x3 blocks, granularity is {granularity}"
                )
            return _aligned_pass(img, 3, lambda s: level1_step3_pass(s, stage.t)), granularity
        if stage.level == 2:
            return _aligned_pass(img, 2, lambda s: level2_pass(s, stage.t)), granularity
        if granularity % 2:
            raise PipelineError(
                f"level 1 interpolation needs an even block size, granularity is {granularity}"
            )
        return (
            _aligned_pass(img, granularity, lambda s: level1_pass(s, granularity, stage.t)),
            granularity,
        )
    if isinstance(stage, Magnify):
        out = _magnify(img, stage.gamma)
        return out, (2 if stage.gamma > 1 else granularity)
    if isinstance(stage, Deconvolve):
        out = deconvolve(img, stage.settings)
        return out, (2 if stage.settings.gamma > 1 else granularity)
    raise PipelineError(f"unknown stage type {type(stage).__name__}")


def run(spec: PipelineSpec, source: BlockAverageImage) -> RasterImage:
    """Expand the block image and apply the stages in order."""
    img = expand(source)
    gran = source.step
    for stage in spec.stages:
        img, gran = apply_stage(img, stage, gran)
    return img


# ---------------------------------------------------------------------------
# tabular import
# ---------------------------------------------------------------------------

def _cell(c) -> str:
    return str(c).strip()


def _num(c):
    s = _cell(c).rstrip("°")
    try:
        return float(s)
    except ValueError:
        return None


def _is_source_row(row) -> bool:
    return len(row) == 3 and _cell(row[0]).upper() in SOURCES


def import_parameter_matrix(rows, name: str = "") -> PipelineSpec:
    """Build a pipeline from the 3-column parameter table layout.

    Rows are interpreted positionally: a numeric row followed by a source row
    (DVC/OFC plus an amount percent and a noise mode, in either order) is a
    deconvolution (gamma, L, theta) — a gamma above 1 becomes a leading
    magnify stage; any other numeric row is a level 1 threshold triple. A
    trailing pair of full-open triples is the presmoothing, so the final one
    becomes the level 2 pass. Tolerates a variable number of deconvolution
    groups and omitted threshold rows between them.
    """
    stages = []
    i = 0
    rows = list(rows)
    while i < len(rows):
        row = rows[i]
        if len(row) != 3:
            raise PipelineError(f"row {i + 1}: expected 3 cells, got {len(row)}")
        nums = [_num(c) for c in row]
        if all(v is not None for v in nums):
            if i + 1 < len(rows) and _is_source_row(rows[i + 1]):
                gamma, L, theta = nums
                if not (float(L).is_integer() and float(theta).is_integer()):
                    raise PipelineError(f"row {i + 1}: L and theta must be integers")
                src_row = rows[i + 1]
                source = _cell(src_row[0]).upper()
                # amount and noise appear in either order; sniff by type
                amount = noise = None
                for c in (src_row[1], src_row[2]):
                    text = _cell(c)
                    if text.upper() in NOISE_MODES and noise is None:
                        noise = text.upper()
                        continue
                    try:
                        value = int(text.rstrip("%"))
                    except ValueError:
                        raise PipelineError(
                            f"row {i + 2}: {c!r} is neither an amount nor a noise mode"
                        ) from None
                    if amount is not None:
                        raise PipelineError(f"row {i + 2}: two amount cells")
                    amount = value
                if amount is None or noise is None:
                    raise PipelineError(f"row {i + 2}: need one amount and one noise cell")
                if gamma > 1.0:
                    stages.append(Magnify(gamma))
                stages.append(
                    Deconvolve(
                        DeconvSettings(
                            gamma=1.0,
                            L=int(L),
                            theta=int(theta) % 180,
                            source=source,
                            amount=amount,
                            noise=noise,
                        )
                    )
                )
                i += 2
            else:
                if not all(float(v).is_integer() and 0 <= v <= 255 for v in nums):
                    raise PipelineError(
                        f"row {i + 1}: {tuple(row)!r} fits no template position"
                    )
                stages.append(CondInterp(1, ThresholdTriple(*(int(v) for v in nums))))
                i += 1
        else:
            raise PipelineError(f"row {i + 1}: {tuple(row)!r} fits no template position")

    full_open = ThresholdTriple(255, 255, 255)

    def is_presmooth(s) -> bool:
        return isinstance(s, CondInterp) and s.level == 1 and s.geometry == "even-step" and s.t == full_open

    if len(stages) >= 2 and is_presmooth(stages[-1]) and is_presmooth(stages[-2]):
        stages[-1] = CondInterp(2, full_open)
    return PipelineSpec(name, tuple(stages))


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def preset_names():
    root = resources.files("unpixel") / "presets"
    return sorted(p.name[: -len(".txt")] for p in root.iterdir() if p.name.endswith(".txt"))


def preset_text(name: str) -> str:
    path = resources.files("unpixel") / "presets" / f"{name}.txt"
    if not path.is_file():
        raise KeyError(f"no preset named {name!r}")
    return path.read_text()


def load_preset(name: str) -> PipelineSpec:
    return parse(preset_text(name), name=name)
