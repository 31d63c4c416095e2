import numpy as np
import pytest

from conftest import random_image

from unpixel.codec import BlockAverageImage, compress, expand
from unpixel.deconv import DeconvSettings
from unpixel.image import RasterImage, l2_distance
from unpixel.interp import ThresholdTriple
from unpixel.pipeline import (
    CondInterp,
    Deconvolve,
    Magnify,
    PipelineError,
    PipelineRangeError,
    PipelineSpec,
    PipelineSyntaxError,
    import_parameter_matrix,
    load_preset,
    parse,
    preset_names,
    run,
    serialize,
)

FULL_OPEN = ThresholdTriple(255, 255, 255)


def L1(p2, p3, p4, geometry="even-step"):
    return CondInterp(1, ThresholdTriple(p2, p3, p4), geometry)


def L2(p2, p3, p4):
    return CondInterp(2, ThresholdTriple(p2, p3, p4))


def DEC(L, theta, source="DVC", amount=100, noise="NO", gamma=1.0):
    return Deconvolve(
        DeconvSettings(gamma=gamma, L=L, theta=theta, source=source, amount=amount, noise=noise)
    )


# ---------------------------------------------------------------------------
# stage and spec construction
# ---------------------------------------------------------------------------

def test_stage_validation():
    with pytest.raises(ValueError):
        CondInterp(3, FULL_OPEN)
    with pytest.raises(ValueError):
        CondInterp(2, FULL_OPEN, "step3")  # step3 is a level 1 geometry
    with pytest.raises(ValueError):
        CondInterp(1, (255, 255, 255))  # bare tuple
    with pytest.raises(ValueError):
        Magnify(0.5)
    with pytest.raises(ValueError):
        Magnify(4.5)
    with pytest.raises(ValueError):
        Deconvolve("not settings")


def test_spec_allows_single_magnifier():
    PipelineSpec("ok", (Magnify(2.0), DEC(5, 45)))
    PipelineSpec("ok", (DEC(5, 45, gamma=2.0), DEC(3, 10)))
    PipelineSpec("ok", (Magnify(1.0), DEC(5, 45), Magnify(1.0)))  # gamma=1 is a no-op


def test_spec_rejects_two_magnifiers():
    with pytest.raises(PipelineError):
        PipelineSpec("bad", (Magnify(2.0), Magnify(2.0)))
    with pytest.raises(PipelineError):
        PipelineSpec("bad", (Magnify(2.0), DEC(5, 45, gamma=2.0)))


def test_spec_rejects_magnify_after_deconv():
    with pytest.raises(PipelineError):
        PipelineSpec("bad", (DEC(5, 45), Magnify(2.0)))
    with pytest.raises(PipelineError):
        PipelineSpec("bad", (DEC(5, 45), DEC(3, 10, gamma=2.0)))


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

MARIE_STAGES = (
    L1(135, 10, 20),
    L1(255, 255, 255),
    Magnify(2.25),
    DEC(13, 105, "DVC", 100, "DO"),
    DEC(5, 5, "DVC", 150, "LO"),
    DEC(3, 35, "DVC", 125, "AUTO"),
    L1(135, 10, 20),
    L1(255, 255, 255),
    L2(255, 255, 255),
)


def test_parse_basic():
    spec = parse(
        "interp1 p2=63 p3=255 p4=20\n"
        "magnify gamma=3.8\n"
        "deconv L=16 theta=90 source=DVC amount=100 noise=LO\n"
        "interp2 p2=255 p3=255 p4=255\n",
        name="demo",
    )
    assert spec.name == "demo"
    assert spec.stages == (
        L1(63, 255, 20),
        Magnify(3.8),
        DEC(16, 90, "DVC", 100, "LO"),
        L2(255, 255, 255),
    )


def test_parse_step3_geometry():
    spec = parse("interp1 p2=1 p3=2 p4=3 geom=step3\n")
    assert spec.stages == (L1(1, 2, 3, "step3"),)


def test_parse_comments_and_blanks():
    spec = parse(
        "# a preset\n"
        "\n"
        "interp1 p2=10 p3=20 p4=30   # trailing note\n"
        "   \n"
        "# done\n"
    )
    assert spec.stages == (L1(10, 20, 30),)


def test_roundtrip_marie():
    spec = PipelineSpec("marie", MARIE_STAGES)
    again = parse(serialize(spec), name="marie")
    assert again.stages == spec.stages
    assert again == spec


def test_roundtrip_all_stage_shapes():
    spec = PipelineSpec(
        "x",
        (
            L1(0, 128, 255),
            L1(1, 2, 3, "step3"),
            Magnify(2.2),
            DEC(0, 0, "OFC", 0, "NO"),
            DEC(20, 175, "DVC", 300, "AUTO"),
            L2(7, 8, 9),
        ),
    )
    assert parse(serialize(spec), name="x") == spec


def test_serialize_embedded_gamma_becomes_magnify_line():
    spec = PipelineSpec("x", (DEC(13, 105, gamma=2.25),))
    text = serialize(spec)
    assert text.splitlines() == [
        "magnify gamma=2.25",
        "deconv L=13 theta=105 source=DVC amount=100 noise=NO",
    ]


def test_serialize_empty():
    assert serialize(PipelineSpec()) == ""
    assert parse("").stages == ()


def test_parse_unknown_stage():
    with pytest.raises(PipelineSyntaxError) as e:
        parse("interp1 p2=1 p3=1 p4=1\nsharpen radius=2\n")
    assert e.value.line == 2


def test_parse_malformed_field():
    with pytest.raises(PipelineSyntaxError):
        parse("interp1 p2=1 p3 p4=1\n")
    with pytest.raises(PipelineSyntaxError):
        parse("magnify gamma=two\n")
    with pytest.raises(PipelineSyntaxError):
        parse("interp1 p2=1.5 p3=0 p4=0\n")


def test_parse_missing_duplicate_unknown_fields():
    with pytest.raises(PipelineSyntaxError):
        parse("interp1 p2=1 p3=1\n")
    with pytest.raises(PipelineSyntaxError):
        parse("interp1 p2=1 p2=2 p3=1 p4=1\n")
    with pytest.raises(PipelineSyntaxError):
        parse("interp1 p2=1 p3=1 p4=1 p5=1\n")
    with pytest.raises(PipelineSyntaxError):
        parse("interp2 p2=1 p3=1 p4=1 geom=step3\n")  # level 2 has no geometry
    with pytest.raises(PipelineSyntaxError):
        parse("deconv L=5 theta=45 source=DVC amount=100\n")  # noise missing


def test_parse_range_error_names_field():
    with pytest.raises(PipelineRangeError) as e:
        parse("interp1 p2=300 p3=0 p4=0\n")
    assert e.value.field == "p2"
    assert e.value.line == 1
    assert "300" in str(e.value)


@pytest.mark.parametrize(
    "line,field",
    [
        ("interp2 p2=0 p3=256 p4=0", "p3"),
        ("magnify gamma=4.5", "gamma"),
        ("magnify gamma=0.9", "gamma"),
        ("deconv L=21 theta=0 source=DVC amount=100 noise=NO", "L"),
        ("deconv L=5 theta=180 source=DVC amount=100 noise=NO", "theta"),
        ("deconv L=5 theta=0 source=ABC amount=100 noise=NO", "source"),
        ("deconv L=5 theta=0 source=DVC amount=310 noise=NO", "amount"),
        ("deconv L=5 theta=0 source=DVC amount=30 noise=NO", "amount"),
        ("deconv L=5 theta=0 source=DVC amount=100 noise=MAYBE", "noise"),
        ("interp1 p2=1 p3=1 p4=1 geom=diag", "geom"),
    ],
)
def test_parse_range_errors(line, field):
    with pytest.raises(PipelineRangeError) as e:
        parse(line + "\n")
    assert e.value.field == field


def test_parse_error_line_numbers():
    text = "interp1 p2=1 p3=1 p4=1\n# fine\n\ninterp1 p2=1 p3=999 p4=1\n"
    with pytest.raises(PipelineRangeError) as e:
        parse(text)
    assert e.value.line == 4


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def small_input(rng, channels=1, height=8, width=8, step=4):
    img = random_image(rng, channels, height * step, width * step)
    return compress(img, step)


def test_run_empty_spec_is_expand(rng):
    src = small_input(rng)
    out = run(PipelineSpec(), src)
    assert out == expand(src)


def test_run_full_open_on_constant_is_identity(rng):
    pixels = np.full((1, 16, 16), 77, dtype=np.uint8)
    src = compress(RasterImage(pixels), 4)
    out = run(PipelineSpec("c", (L1(255, 255, 255),)), src)
    assert out == expand(src)


def test_run_is_deterministic(rng):
    src = small_input(rng, channels=3)
    spec = load_preset("marie-bonneau-1")
    a = run(spec, src)
    b = run(spec, src)
    assert a == b


def test_marie_preset_output_size(rng):
    src = small_input(rng, channels=1, height=8, width=8, step=4)
    out = run(load_preset("marie-bonneau-1"), src)
    assert (out.height, out.width) == (72, 72)


def test_output_width_tracks_gamma(rng):
    src = small_input(rng, height=6, width=9, step=4)  # 24x36 pixels
    for gamma in (1.5, 2.25, 3.83):
        spec = PipelineSpec("g", (Magnify(gamma), DEC(3, 45, amount=25)))
        out = run(spec, src)
        assert out.width == int(np.floor(gamma * 36 + 0.5))
        assert out.height == int(np.floor(gamma * 24 + 0.5))


def test_interp_runs_at_input_step_then_two(rng):
    # before any resize, level 1 works on step-sized blocks: on a step=4
    # input a (100, 120) block pair mixes over the 2x2 sub-quadrants of the
    # 4x4 blocks, which full-open L1 at step 4 changes but step 2 would not
    pixels = np.zeros((1, 8, 8), dtype=np.uint8)
    pixels[:, :, :4] = 100
    pixels[:, :, 4:] = 120
    src = compress(RasterImage(pixels), 4)
    out4 = run(PipelineSpec("s", (L1(255, 255, 255),)), src)
    assert out4.planes[0, 0, 2] == 110  # B2 average written into top-right 2x2
    assert out4.planes[0, 0, 6] == 120  # right boundary block untouched
    # after a magnify, the same stage runs on 2x2 cells of the resized image
    spec = PipelineSpec("s", (Magnify(2.0), L1(255, 255, 255)))
    out = run(spec, src)
    assert (out.height, out.width) == (16, 16)


def test_step3_geometry_requires_step3_input(rng):
    src3 = small_input(rng, height=4, width=4, step=3)
    run(PipelineSpec("ok", (L1(10, 10, 10, "step3"),)), src3)  # fine
    src4 = small_input(rng, height=4, width=4, step=4)
    with pytest.raises(PipelineError):
        run(PipelineSpec("bad", (L1(10, 10, 10, "step3"),)), src4)


def test_even_geometry_rejects_odd_step_input(rng):
    src3 = small_input(rng, height=4, width=4, step=3)
    with pytest.raises(PipelineError):
        run(PipelineSpec("bad", (L1(255, 255, 255),)), src3)
    # but once magnified the granularity is 2 and it runs
    spec = PipelineSpec("ok", (Magnify(2.0), L1(255, 255, 255)))
    run(spec, src3)


def test_unaligned_remainder_untouched(rng):
    # 3.05x on a 24-pixel edge gives 73: one remainder row/col at step 2
    src = small_input(rng, height=6, width=6, step=4)
    base = PipelineSpec("b", (Magnify(3.05),))
    with_pass = PipelineSpec("p", (Magnify(3.05), L1(255, 255, 255)))
    a = run(base, src)
    b = run(with_pass, src)
    assert a.width == 73
    assert np.array_equal(a.planes[:, -1, :], b.planes[:, -1, :])
    assert np.array_equal(a.planes[:, :, -1], b.planes[:, :, -1])


def test_trailing_level2_touches_only_non_b11_pixels(rng):
    src = small_input(rng, channels=3, height=8, width=8, step=4)
    tail = PipelineSpec("t", MARIE_STAGES)
    assert isinstance(tail.stages[-1], CondInterp) and tail.stages[-1].level == 2
    trimmed = PipelineSpec("t", MARIE_STAGES[:-1])
    a = run(tail, src)
    b = run(trimmed, src)
    assert np.array_equal(a.planes[:, ::2, ::2], b.planes[:, ::2, ::2])
    assert a != b  # the pass does do something on a random input


# ---------------------------------------------------------------------------
# parameter matrix import
# ---------------------------------------------------------------------------

# tuning sheets for the three worked examples, as recorded
SHEET_BRAIN_1 = [
    (63, 255, 20),
    (255, 255, 255),
    (3.80, 16, "90°"),
    ("DVC", "LO", "100%"),
    (1, 7, "45°"),
    ("DVC", "LO", "75%"),
    (1, 15, "75°"),
    ("DVC", "DO", "0%"),
    (65, 0, 65),
    (255, 255, 255),
    (255, 255, 255),
]

SHEET_BRAIN_2 = [
    (65, 0, 65),
    (255, 255, 255),
    (3.40, 15, "70°"),
    ("OFC", "YES", "300%"),
    (65, 0, 65),
    (255, 255, 255),
    (1, 6, "150°"),
    ("DVC", "YES", "75%"),
    (75, 0, 0),
    (255, 255, 255),
    (1, 6, "155°"),
    ("DVC", "DO", "50%"),
    (75, 0, 0),
    (255, 255, 255),
    (255, 255, 255),
]

SHEET_MARIE_1 = [
    (135, 10, 20),
    (255, 255, 255),
    (2.25, 13, "105°"),
    ("DVC", "DO", "100%"),
    (1, 5, "5°"),
    ("DVC", "LO", "150%"),
    (1, 3, "35°"),
    ("DVC", "AUTO", "125%"),
    (135, 10, 20),
    (255, 255, 255),
    (255, 255, 255),
]


def test_import_marie_matches_run_example():
    spec = import_parameter_matrix(SHEET_MARIE_1, name="marie")
    assert spec.stages == MARIE_STAGES


def test_import_brain_1_is_nine_stages():
    spec = import_parameter_matrix(SHEET_BRAIN_1)
    assert spec.stages == (
        L1(63, 255, 20),
        L1(255, 255, 255),
        Magnify(3.80),
        DEC(16, 90, "DVC", 100, "LO"),
        DEC(7, 45, "DVC", 75, "LO"),
        DEC(15, 75, "DVC", 0, "DO"),
        L1(65, 0, 65),
        L1(255, 255, 255),
        L2(255, 255, 255),
    )


def test_import_brain_2_is_thirteen_stages():
    spec = import_parameter_matrix(SHEET_BRAIN_2)
    assert len(spec.stages) == 13
    assert spec.stages[2] == Magnify(3.40)
    assert spec.stages[3] == DEC(15, 70, "OFC", 300, "YES")
    assert spec.stages[6] == DEC(6, 150, "DVC", 75, "YES")
    assert spec.stages[9] == DEC(6, 155, "DVC", 50, "DO")
    assert spec.stages[-1] == L2(255, 255, 255)


def test_import_presets_match_sheets():
    for name, sheet in [
        ("google-brain-1", SHEET_BRAIN_1),
        ("google-brain-2", SHEET_BRAIN_2),
        ("marie-bonneau-1", SHEET_MARIE_1),
    ]:
        assert load_preset(name).stages == import_parameter_matrix(sheet).stages


def test_import_amount_noise_in_either_order():
    rows = [(2.0, 5, 45), ("DVC", "100%", "LO")]
    alt = [(2.0, 5, 45), ("DVC", "LO", "100")]
    assert import_parameter_matrix(rows).stages == import_parameter_matrix(alt).stages


def test_import_wraps_angles():
    spec = import_parameter_matrix([(1, 6, 180), ("DVC", "NO", "100%")])
    assert spec.stages == (DEC(6, 0, "DVC", 100, "NO"),)


def test_import_canonical_template():
    rows = [
        (10, 20, 30),
        (255, 255, 255),
        (2.5, 8, 90),
        ("DVC", 100, "NO"),  # spec cell order
        (40, 50, 60),
        (255, 255, 255),
        (1, 4, 10),
        ("OFC", 50, "YES"),
        (70, 80, 90),
        (255, 255, 255),
        (1, 2, 170),
        ("DVC", 0, "DO"),
        (11, 12, 13),
        (255, 255, 255),
        (255, 255, 255),
    ]
    spec = import_parameter_matrix(rows)
    kinds = [type(s).__name__ for s in spec.stages]
    assert kinds == [
        "CondInterp", "CondInterp", "Magnify", "Deconvolve",
        "CondInterp", "CondInterp", "Deconvolve",
        "CondInterp", "CondInterp", "Deconvolve",
        "CondInterp", "CondInterp", "CondInterp",
    ]
    assert spec.stages[-1] == L2(255, 255, 255)
    assert all(
        s.settings.gamma == 1.0 for s in spec.stages if isinstance(s, Deconvolve)
    )


def test_import_single_group_all_open():
    rows = [
        (255, 255, 255),
        (2.0, 5, 45),
        ("DVC", 100, "NO"),
        (255, 255, 255),
    ]
    spec = import_parameter_matrix(rows)
    assert spec.stages == (
        L1(255, 255, 255),
        Magnify(2.0),
        DEC(5, 45),
        L1(255, 255, 255),
    )


def test_import_rejects_misfit_rows():
    with pytest.raises(PipelineError):
        import_parameter_matrix([("DVC", "NO", "100%")])  # source row first
    with pytest.raises(PipelineError):
        import_parameter_matrix([(3.5, 10, 10)])  # fractional threshold
    with pytest.raises(PipelineError):
        import_parameter_matrix([(300, 10, 10)])  # threshold out of range
    with pytest.raises(PipelineError):
        import_parameter_matrix([(1, 2)])  # wrong arity
    with pytest.raises(PipelineError):
        import_parameter_matrix([(2.0, 5, 45), ("DVC", "NO", "YES")])  # two noises
    with pytest.raises(PipelineError):
        import_parameter_matrix([(2.0, 5, 45), ("DVC", "50%", "100%")])  # two amounts
    with pytest.raises(PipelineError):
        import_parameter_matrix([(2.0, 5.5, 45), ("DVC", "NO", "100%")])  # fractional L


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

EXPECTED_PRESETS = [
    "ariana-grande",
    "ellie-goulding",
    "eye",
    "google-brain-1",
    "google-brain-2",
    "google-brain-3",
    "man",
    "marie-bonneau-1",
    "marie-bonneau-2",
    "meghan-markle",
    "shailene-woodley",
]


def test_preset_catalog():
    assert preset_names() == EXPECTED_PRESETS


def test_presets_parse_and_start_with_magnify_before_deconvs():
    for name in preset_names():
        spec = load_preset(name)
        assert spec.name == name
        assert spec.stages
        magnifiers = [s for s in spec.stages if isinstance(s, Magnify) and s.gamma > 1]
        assert len(magnifiers) == 1


def test_unknown_preset():
    with pytest.raises(KeyError):
        load_preset("no-such-image")
