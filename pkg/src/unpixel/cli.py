"""Command-line entry point: codec, interpolation and deconvolution passes,
pipeline running and import, parameter search, sparse baselines, and the
HTTP service.

Conventions: paths ending in .lab are block-average files, everything else
is PNG. Usage mistakes exit 2 with the usage text; operational failures exit
1 with a one-line diagnostic. Commands are deterministic; the only random
choice (the inpaint mask) is driven by --seed.
"""

from __future__ import annotations

import csv
import functools
import sys

import click
import numpy as np

from . import codec, deconv, interp, pipeline, search, sparsity, wavelets
from .image import RasterImage, load_png, save_png


def _guarded(fn):
    """Turn contract violations into one-line CLI errors (exit code 1)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except KeyError as exc:
            raise click.ClickException(str(exc.args[0]) if exc.args else str(exc))
        except (ValueError, OSError) as exc:
            raise click.ClickException(str(exc))

    return wrapper


def _load_source(path: str, step: int) -> codec.BlockAverageImage:
    """A .lab file as-is; a PNG becomes a means grid at the given step."""
    if path.lower().endswith(".lab"):
        return codec.load_lab(path)
    img = load_png(path)
    return codec.BlockAverageImage(
        orig_width=img.width * step,
        orig_height=img.height * step,
        step=step,
        means=img.planes,
    )


def _parse_range(text: str, step: int, label: str):
    """'a..b' (inclusive, stepped) or a single value."""
    parts = text.split("..")
    try:
        if len(parts) == 1:
            return (int(parts[0]),)
        if len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
            return tuple(range(lo, hi + 1, step))
    except ValueError:
        pass
    raise click.ClickException(f"{label} must be 'a..b' or a single integer, got {text!r}")


def _parse_list(text: str, conv, label: str):
    try:
        return tuple(conv(v.strip()) for v in text.split(",") if v.strip())
    except ValueError:
        raise click.ClickException(f"{label} must be a comma-separated list, got {text!r}")


@click.group()
@click.version_option(package_name="unpixel")
def main():
    """Block-image restoration toolkit."""


# ---------------------------------------------------------------------------
# codec
# ---------------------------------------------------------------------------

@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False, writable=True))
@click.option("--step", type=int, default=4, show_default=True, help="Block edge in pixels.")
@_guarded
def compress(input, output, step):
    """Average INPUT over step x step blocks and write a .lab file."""
    codec.save_lab(codec.compress(load_png(input), step), output)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False, writable=True))
@_guarded
def expand(input, output):
    """Expand a .lab file back to a block-constant PNG."""
    save_png(codec.expand(codec.load_lab(input)), output)


# ---------------------------------------------------------------------------
# single restoration passes
# ---------------------------------------------------------------------------

@main.command("interp")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False, writable=True))
@click.option("--level", type=click.Choice(["1", "2"]), default="1", show_default=True)
@click.option("--p2", type=int, required=True, help="Right-neighbor threshold.")
@click.option("--p3", type=int, required=True, help="Below-neighbor threshold.")
@click.option("--p4", type=int, required=True, help="Diagonal threshold.")
@click.option(
    "--geometry",
    type=click.Choice(["even-step", "step3"]),
    default="even-step",
    show_default=True,
)
@click.option("--block", type=int, default=4, show_default=True, help="Block granularity of INPUT.")
@_guarded
def interp_cmd(input, output, level, p2, p3, p4, geometry, block):
    """One conditional-interpolation pass over a block-structured PNG."""
    stage = pipeline.CondInterp(
        level=int(level), t=interp.ThresholdTriple(p2, p3, p4), geometry=geometry
    )
    img, _ = pipeline.apply_stage(load_png(input), stage, block)
    save_png(img, output)


@main.command()
@click.option("--L", "length", type=int, required=True, help="Blur length in pixels.")
@click.option("--theta", type=float, required=True, help="Blur angle in degrees.")
@click.option("--print", "print_", is_flag=True, help="Print the matrix to stdout.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), help="Write the matrix as CSV.")
@_guarded
def psf(length, theta, print_, out):
    """Motion-blur point-spread matrix for a length/angle pair."""
    kernel = deconv.motion_psf(length, theta)
    if out:
        np.savetxt(out, kernel.taps, fmt="%.10f", delimiter=",")
    if print_ or not out:
        for row in kernel.taps:
            click.echo(" ".join(f"{v:.6f}" for v in row))


@main.command("deconv")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False, writable=True))
@click.option("--gamma", type=float, default=1.0, show_default=True, help="Magnification first.")
@click.option("--L", "length", type=int, default=0, show_default=True)
@click.option("--theta", type=int, default=0, show_default=True)
@click.option("--source", type=click.Choice(deconv.SOURCES), default="DVC", show_default=True)
@click.option("--amount", type=int, default=100, show_default=True)
@click.option("--noise", type=click.Choice(deconv.NOISE_MODES), default="NO", show_default=True)
@_guarded
def deconv_cmd(input, output, gamma, length, theta, source, amount, noise):
    """Deconvolve INPUT with a motion kernel."""
    settings = deconv.DeconvSettings(
        gamma=gamma, L=length, theta=theta, source=source, amount=amount, noise=noise
    )
    save_png(deconv.deconvolve(load_png(input), settings), output)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--L", "length", default="0..20", show_default=True, help="Length range a..b.")
@click.option("--theta", default="0..175", show_default=True, help="Angle range a..b, stepped by 5.")
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--amount", type=int, default=100, show_default=True)
@click.option("--source", type=click.Choice(deconv.SOURCES), default="DVC", show_default=True)
@click.option("--noise", type=click.Choice(deconv.NOISE_MODES), default="NO", show_default=True)
@click.option("--reference", type=click.Path(exists=True, dir_okay=False), help="Score cells against this PNG.")
@click.option("--lambda", "lam", type=float, default=0.1, show_default=True, help="Regularizer weight for scoring.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), help="Output path (required for png).")
@click.option("--format", "fmt", type=click.Choice(["png", "csv"]), default="png", show_default=True)
@_guarded
def sweep(input, length, theta, gamma, amount, source, noise, reference, lam, out, fmt):
    """Deconvolution preview grid over length/angle ranges."""
    grid = deconv.sweep(
        load_png(input),
        gamma,
        _parse_range(length, 1, "--L"),
        _parse_range(theta, 5, "--theta"),
        source=source,
        amount=amount,
        noise=noise,
        reference=load_png(reference) if reference else None,
        lam=lam,
    )
    if fmt == "png":
        if not out:
            raise click.ClickException("--out is required with --format png")
        save_png(deconv.montage(grid), out)
        return
    lines = ["L,theta" + (",total" if reference else "")]
    for cell in grid.cells():
        row = f"{cell.L},{cell.theta}"
        if reference:
            row += f",{cell.objective:.17g}"
        lines.append(row)
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

@main.command("pipeline-run")
@click.argument("spec", type=click.Path(exists=True, dir_okay=False))
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False, writable=True))
@click.option("--step", type=int, default=4, show_default=True, help="Block step for PNG inputs.")
@_guarded
def pipeline_run(spec, input, output, step):
    """Run a pipeline file on a .lab file (or a PNG taken as block means)."""
    with open(spec, encoding="utf-8") as fh:
        parsed = pipeline.parse(fh.read(), name=spec)
    save_png(pipeline.run(parsed, _load_source(input, step)), output)


@main.command("pipeline-import")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--name", default="", help="Name recorded in the spec.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), help="Write here instead of stdout.")
@_guarded
def pipeline_import(input, name, out):
    """Convert a parameter-matrix CSV into pipeline text."""
    with open(input, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh)]
    text = pipeline.serialize(pipeline.import_parameter_matrix(rows, name=name))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command("search")
@click.option("--input", "input_", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--reference", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--step", type=int, default=4, show_default=True, help="Block step for PNG inputs.")
@click.option("--lambda", "lam", type=float, default=0.1, show_default=True)
@click.option("--threshold", type=float, default=0.0, show_default=True)
@click.option("--max-occurrences", type=int, default=4, show_default=True)
@click.option("--p-step", type=int, default=5, show_default=True)
@click.option("--rel-floor", type=float, default=1e-3, show_default=True)
@click.option("--L", "length", default=None, help="Length range a..b (default full grid).")
@click.option("--theta", default=None, help="Angle range a..b stepped by 5 (default full grid).")
@click.option("--amounts", default=None, help="Comma list of iteration amounts.")
@click.option("--gammas", default=None, help="Comma list of magnifications tried first.")
@click.option("--sources", default=None, help="Comma list of kernel sources.")
@click.option("--noises", default=None, help="Comma list of noise modes.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True, help="Pipeline text output.")
@click.option("--trace", type=click.Path(dir_okay=False, writable=True), help="Objective trace CSV.")
@_guarded
def search_cmd(input_, reference, step, lam, threshold, max_occurrences, p_step,
               rel_floor, length, theta, amounts, gammas, sources, noises, out, trace):
    """Greedy parameter search against a reference image."""
    overrides = {}
    if length is not None:
        overrides["L_values"] = _parse_range(length, 1, "--L")
    if theta is not None:
        overrides["theta_values"] = _parse_range(theta, 5, "--theta")
    if amounts is not None:
        overrides["amount_values"] = _parse_list(amounts, int, "--amounts")
    if gammas is not None:
        overrides["gamma_values"] = _parse_list(gammas, float, "--gammas")
    if sources is not None:
        overrides["source_values"] = _parse_list(sources, str, "--sources")
    if noises is not None:
        overrides["noise_values"] = _parse_list(noises, str, "--noises")
    cfg = search.SearchConfig(
        lam=lam,
        threshold=threshold,
        max_occurrences=max_occurrences,
        p_step=p_step,
        rel_floor=rel_floor,
        **overrides,
    )
    state = search.optimize(_load_source(input_, step), load_png(reference), cfg)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(pipeline.serialize(state.spec))
    if trace:
        with open(trace, "w", encoding="utf-8") as fh:
            fh.write(search.trace_csv(state.trace))
    click.echo(f"total {state.objective.total:.17g} after {state.iteration} improvements")


# ---------------------------------------------------------------------------
# sparse baselines
# ---------------------------------------------------------------------------

@main.command("wavelet-topk")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False, writable=True))
@click.option("--basis", default="villasenor1", show_default=True)
@click.option("--percent", type=float, required=True, help="Share of coefficients kept, (0, 100].")
@click.option("--levels", type=int, default=3, show_default=True)
@_guarded
def wavelet_topk(input, output, basis, percent, levels):
    """Keep the largest wavelet coefficients and reconstruct."""
    img = sparsity.topk_approx(load_png(input), wavelets.load_basis(basis), percent, levels)
    save_png(img, output)


@main.command("wavelet-decay")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--basis", default="villasenor1", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), help="Write here instead of stdout.")
@_guarded
def wavelet_decay(input, basis, out):
    """Sorted coefficient magnitudes with cumulative sums, as CSV."""
    rows = sparsity.decay_curve(load_png(input), wavelets.load_basis(basis))
    text = sparsity.decay_csv(rows)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False, writable=True))
@click.option("--basis", default="villasenor1", show_default=True)
@click.option("--mu", type=float, default=0.002, show_default=True, help="L1 weight.")
@click.option("--iterations", type=int, default=500, show_default=True)
@click.option("--levels", type=int, default=3, show_default=True)
@click.option("--known-fraction", type=float, default=0.6, show_default=True,
              help="Share of pixels kept when drawing a random mask.")
@click.option("--seed", type=int, default=0, show_default=True, help="Mask seed.")
@click.option("--mask", type=click.Path(exists=True, dir_okay=False),
              help="PNG mask (nonzero = known) instead of a random one.")
@_guarded
def inpaint(input, output, basis, mu, iterations, levels, known_fraction, seed, mask):
    """Reconstruct an image from a subset of its pixels."""
    img = load_png(input)
    if mask:
        m = load_png(mask).planes[0] > 0
    else:
        rng = np.random.default_rng(seed)
        m = rng.random((img.height, img.width)) < known_fraction
        if not m.any():
            m[0, 0] = True
    problem = sparsity.SparseProblem(
        mask=m, observed=img, basis=wavelets.load_basis(basis), mu=mu, iterations=iterations
    )
    save_png(sparsity.ista_inpaint(problem, levels=levels), output)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@_guarded
def coherence(input):
    """Largest normalized column inner product of a CSV matrix."""
    value = sparsity.coherence(np.loadtxt(input, delimiter=",", ndmin=2))
    click.echo(f"{value:.12g}")


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, required=True, help="Sparsity level.")
@_guarded
def rip(input, k):
    """Brute-force restricted-isometry slack of a CSV matrix."""
    value = sparsity.estimate_rip_delta(np.loadtxt(input, delimiter=",", ndmin=2), k)
    click.echo(f"{value:.12g}")


# ---------------------------------------------------------------------------
# service
# ---------------------------------------------------------------------------

@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--ttl", type=float, default=3600.0, show_default=True, help="Idle session lifetime, seconds.")
@click.option("--max-upload", type=int, default=1 << 20, show_default=True, help="Upload cap in bytes.")
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False), help="Static frontend to serve at /.")
@_guarded
def serve(host, port, ttl, max_upload, ui_dir):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(ttl_seconds=ttl, max_upload=max_upload, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
