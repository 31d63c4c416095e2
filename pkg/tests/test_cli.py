import numpy as np
import pytest
from click.testing import CliRunner
from conftest import random_image

from unpixel import codec, deconv, interp, pipeline
from unpixel.cli import main
from unpixel.image import load_png, save_png


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args, code=0):
    result = runner.invoke(main, [str(a) for a in args])
    assert result.exit_code == code, result.output
    return result


# ---------------------------------------------------------------------------
# codec commands
# ---------------------------------------------------------------------------

def test_compress_expand_round_trip(runner, rng, tmp_path):
    img = random_image(rng, channels=3, height=16, width=16)
    src = tmp_path / "in.png"
    lab = tmp_path / "out.lab"
    back = tmp_path / "back.png"
    save_png(img, src)
    invoke(runner, "compress", "--step", 4, src, lab)
    invoke(runner, "expand", lab, back)

    b = codec.load_lab(lab)
    restored = load_png(back)
    assert np.array_equal(restored.planes, codec.expand(b).planes)
    # block-constant: every pixel equals its block representative
    reps = restored.planes[:, ::4, ::4]
    assert np.array_equal(np.repeat(np.repeat(reps, 4, axis=1), 4, axis=2), restored.planes)
    # .lab file round trip is byte-identical
    again = tmp_path / "again.lab"
    codec.save_lab(b, again)
    assert again.read_bytes() == lab.read_bytes()


# ---------------------------------------------------------------------------
# psf / interp / deconv
# ---------------------------------------------------------------------------

def test_psf_print_matches_kernel(runner):
    result = invoke(runner, "psf", "--L", 13, "--theta", 105, "--print")
    printed = np.array(
        [[float(v) for v in line.split()] for line in result.output.strip().splitlines()]
    )
    kernel = deconv.motion_psf(13, 105.0)
    assert printed.shape == kernel.taps.shape
    assert np.abs(printed - kernel.taps).max() <= 5e-7


def test_psf_writes_csv(runner, tmp_path):
    out = tmp_path / "k.csv"
    invoke(runner, "psf", "--L", 5, "--theta", 30, "--out", out)
    taps = np.loadtxt(out, delimiter=",", ndmin=2)
    assert taps.sum() == pytest.approx(1.0, abs=1e-6)


def test_interp_zero_thresholds_is_identity(runner, rng, tmp_path):
    img = random_image(rng, height=16, width=16)
    src, dst = tmp_path / "a.png", tmp_path / "b.png"
    save_png(img, src)
    invoke(runner, "interp", src, dst, "--p2", 0, "--p3", 0, "--p4", 0)
    assert np.array_equal(load_png(dst).planes, img.planes)


def test_interp_full_open_matches_library_pass(runner, rng, tmp_path):
    img = random_image(rng, height=16, width=16)
    src, dst = tmp_path / "a.png", tmp_path / "b.png"
    save_png(img, src)
    invoke(runner, "interp", src, dst, "--p2", 255, "--p3", 255, "--p4", 255, "--block", 4)
    expected = interp.level1_pass(img, 4, interp.ThresholdTriple(255, 255, 255))
    assert np.array_equal(load_png(dst).planes, expected.planes)


def test_deconv_noop_settings_preserve_input(runner, rng, tmp_path):
    img = random_image(rng, height=12, width=12)
    src, dst = tmp_path / "a.png", tmp_path / "b.png"
    save_png(img, src)
    invoke(runner, "deconv", src, dst, "--L", 0, "--noise", "NO")
    assert np.array_equal(load_png(dst).planes, img.planes)


def test_sweep_csv_lists_every_cell(runner, rng, tmp_path):
    src = tmp_path / "a.png"
    save_png(random_image(rng, height=8, width=8), src)
    result = invoke(
        runner, "sweep", src, "--L", "2..3", "--theta", "0..5", "--amount", 25,
        "--format", "csv",
    )
    lines = result.output.strip().splitlines()
    assert lines[0] == "L,theta"
    assert len(lines) == 1 + 2 * 2


def test_sweep_png_montage(runner, rng, tmp_path):
    src, out = tmp_path / "a.png", tmp_path / "m.png"
    save_png(random_image(rng, height=8, width=8), src)
    invoke(runner, "sweep", src, "--L", "2..3", "--theta", "0..5", "--amount", 25,
           "--out", out)
    montage = load_png(out)
    assert montage.width > 16 and montage.height > 16


def test_sweep_png_needs_out(runner, rng, tmp_path):
    src = tmp_path / "a.png"
    save_png(random_image(rng, height=8, width=8), src)
    result = runner.invoke(main, ["sweep", str(src), "--L", "2..2", "--theta", "0..0"])
    assert result.exit_code == 1
    assert "--out" in result.output


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def test_pipeline_run_preset_on_synthetic_input(runner, rng, tmp_path):
    spec_path = tmp_path / "marie.txt"
    spec_path.write_text(pipeline.serialize(pipeline.load_preset("marie-bonneau-1")))
    src = tmp_path / "in.png"
    save_png(random_image(rng, height=8, width=8), src)
    out = tmp_path / "out.png"
    invoke(runner, "pipeline-run", spec_path, src, out, "--step", 4)
    restored = load_png(out)
    assert (restored.width, restored.height) == (72, 72)  # round(2.25 * 32)


def test_pipeline_run_accepts_lab_input(runner, rng, tmp_path):
    spec_path = tmp_path / "none.txt"
    spec_path.write_text("")  # empty pipeline: plain expansion
    img = random_image(rng, height=16, width=16)
    lab = tmp_path / "in.lab"
    codec.save_lab(codec.compress(img, 2), lab)
    out = tmp_path / "out.png"
    invoke(runner, "pipeline-run", spec_path, lab, out)
    assert np.array_equal(
        load_png(out).planes, codec.expand(codec.compress(img, 2)).planes
    )


MARIE_SHEET = [
    ["135", "10", "20"],
    ["255", "255", "255"],
    ["2.25", "13", "105°"],
    ["DVC", "DO", "100%"],
    ["1", "5", "5°"],
    ["DVC", "LO", "150%"],
    ["1", "3", "35°"],
    ["DVC", "AUTO", "125%"],
    ["135", "10", "20"],
    ["255", "255", "255"],
    ["255", "255", "255"],
]


def test_pipeline_import_matches_preset(runner, tmp_path):
    sheet = tmp_path / "matrix.csv"
    sheet.write_text("\n".join(",".join(row) for row in MARIE_SHEET) + "\n")
    result = invoke(runner, "pipeline-import", sheet)
    assert result.output == pipeline.serialize(pipeline.load_preset("marie-bonneau-1"))


def test_pipeline_import_reports_bad_rows(runner, tmp_path):
    sheet = tmp_path / "matrix.csv"
    sheet.write_text("1.5,2,3\n")
    result = runner.invoke(main, ["pipeline-import", str(sheet)])
    assert result.exit_code == 1
    assert "Error" in result.output


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

def test_search_writes_spec_and_monotone_trace(runner, rng, tmp_path):
    img = random_image(rng, height=16, width=16)
    lab = tmp_path / "in.lab"
    codec.save_lab(codec.compress(img, 2), lab)
    ref = tmp_path / "ref.png"
    save_png(codec.expand(codec.compress(img, 2)), ref)
    out, trace = tmp_path / "spec.txt", tmp_path / "trace.csv"
    result = invoke(
        runner, "search", "--input", lab, "--reference", ref,
        "--L", "0..0", "--theta", "0..0", "--amounts", "25", "--gammas", "1.0",
        "--noises", "NO", "--p-step", 255, "--out", out, "--trace", trace,
    )
    assert result.output.startswith("total ")
    assert "after 0 improvements" in result.output
    spec = pipeline.parse(out.read_text())
    assert spec.stages == ()
    lines = trace.read_text().strip().splitlines()
    assert lines[0] == "iteration,fidelity,regularizer,total"
    totals = [float(line.split(",")[3]) for line in lines[1:]]
    assert totals == sorted(totals, reverse=True)


# ---------------------------------------------------------------------------
# sparse baselines
# ---------------------------------------------------------------------------

def test_wavelet_topk_full_percent_identity(runner, rng, tmp_path):
    img = random_image(rng)
    src, dst = tmp_path / "a.png", tmp_path / "b.png"
    save_png(img, src)
    invoke(runner, "wavelet-topk", src, dst, "--percent", 100)
    assert np.abs(load_png(dst).planes.astype(int) - img.planes.astype(int)).max() <= 1


def test_wavelet_decay_prints_csv(runner, rng, tmp_path):
    src = tmp_path / "a.png"
    save_png(random_image(rng, height=8, width=8), src)
    result = invoke(runner, "wavelet-decay", src, "--basis", "villasenor5")
    lines = result.output.strip().splitlines()
    assert lines[0] == "rank,magnitude,cumulative"
    assert len(lines) == 65


def test_inpaint_deterministic_given_seed(runner, rng, tmp_path):
    src = tmp_path / "a.png"
    save_png(random_image(rng), src)
    first, second = tmp_path / "r1.png", tmp_path / "r2.png"
    for dst in (first, second):
        invoke(runner, "inpaint", src, dst, "--iterations", 30, "--seed", 3)
    assert first.read_bytes() == second.read_bytes()


def test_inpaint_accepts_mask_file(runner, rng, tmp_path):
    img = random_image(rng)
    src, dst, mask = tmp_path / "a.png", tmp_path / "b.png", tmp_path / "m.png"
    save_png(img, src)
    save_png(
        type(img)(np.full((1, 32, 32), 255, dtype=np.uint8)), mask
    )
    invoke(runner, "inpaint", src, dst, "--mask", mask, "--iterations", 2)
    assert np.array_equal(load_png(dst).planes, img.planes)  # full mask: exact


def test_coherence_prints_value(runner, tmp_path):
    path = tmp_path / "m.csv"
    np.savetxt(path, np.eye(4), delimiter=",")
    result = invoke(runner, "coherence", path)
    assert result.output.strip() == "0"


def test_rip_prints_value(runner, tmp_path):
    path = tmp_path / "m.csv"
    np.savetxt(path, np.eye(4), delimiter=",")
    result = invoke(runner, "rip", path, "--k", 2)
    assert result.output.strip() == "0"


# ---------------------------------------------------------------------------
# exit codes and help
# ---------------------------------------------------------------------------

def test_unknown_subcommand_is_usage_error(runner):
    result = runner.invoke(main, ["frobnicate"])
    assert result.exit_code == 2


def test_missing_required_argument_is_usage_error(runner):
    result = runner.invoke(main, ["compress"])
    assert result.exit_code == 2


def test_contract_violation_is_operational_error(runner, rng, tmp_path):
    src = tmp_path / "a.png"
    save_png(random_image(rng, height=16, width=16), src)
    result = runner.invoke(main, ["compress", "--step", "5", str(src), str(tmp_path / "x.lab")])
    assert result.exit_code == 1
    assert result.output.strip().count("\n") == 0  # one-line diagnostic


def test_unknown_basis_is_operational_error(runner, rng, tmp_path):
    src = tmp_path / "a.png"
    save_png(random_image(rng), src)
    result = runner.invoke(
        main, ["wavelet-decay", str(src), "--basis", "nope"]
    )
    assert result.exit_code == 1
    assert "unknown wavelet basis" in result.output


EXPECTED_COMMANDS = {
    "compress", "expand", "interp", "psf", "deconv", "sweep",
    "pipeline-run", "pipeline-import", "search", "wavelet-topk",
    "wavelet-decay", "inpaint", "coherence", "rip", "serve",
}


def test_root_help_lists_every_subcommand(runner):
    result = invoke(runner, "--help")
    assert set(main.commands) == EXPECTED_COMMANDS
    for name in EXPECTED_COMMANDS:
        assert name in result.output


@pytest.mark.parametrize("name", sorted(EXPECTED_COMMANDS))
def test_subcommand_help_documents_every_flag(runner, name):
    result = invoke(runner, name, "--help")
    for param in main.commands[name].params:
        opts = [o for o in param.opts if o.startswith("--")]
        if opts:
            assert any(o in result.output for o in opts), (name, opts)
