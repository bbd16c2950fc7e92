"""Command line interface tying the pipeline together.

Exit codes: 0 success, 2 validation error, 3 numerical error,
4 fit did not converge (output files are still written).
"""

from __future__ import annotations

import functools
import sys

import click
import numpy as np

from . import fileio
from ._version import __version__
from .calibration import CalibrationConfig, evaluate_holdout, fit_model
from .errors import NumericalError, ValidationError
from .lattice import FrequencyGrid, suggest_grid
from .thermal import crosstalk_ratio, mean_hopping_nm, predict_eigen_wavelengths
from .tomography import FitConfig, fit_reflection, reconstruct
from .virtual import (
    DeviceRanges,
    NoiseSpec,
    SweepProtocol,
    device_spectrum,
    generate_dataset,
    generate_device,
)

EXIT_NONCONVERGED = 4


def _mapped_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _parse_volts(text: str | None, n: int) -> np.ndarray:
    if text is None:
        return np.zeros(n)
    try:
        v = np.array([float(x) for x in text.split(",")], dtype=float)
    except ValueError:
        raise ValidationError(f"could not parse voltage list {text!r}") from None
    if v.size != n:
        raise ValidationError(f"expected {n} voltages, got {v.size}")
    return v


@click.group()
@click.version_option(__version__, prog_name="ccakit")
def main():
    """Simulate, map and calibrate 1D lossy coupled cavity arrays."""


@main.command("gen-device")
@click.option("--seed", type=int, required=True, help="RNG seed; same seed, same device.")
@click.option("--sites", type=int, default=8, show_default=True)
@click.option("--j-min", type=float, default=10.0, show_default=True, help="Min hopping rate (GHz).")
@click.option("--j-max", type=float, default=50.0, show_default=True, help="Max hopping rate (GHz).")
@click.option("--q", type=float, default=8.5e4, show_default=True, help="Loaded quality factor target.")
@click.option("--ref-wavelength", type=float, default=1550.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--h0-out", type=click.Path(dir_okay=False), default=None,
              help="Optionally also write the true effective Hamiltonian.")
@_mapped_errors
def gen_device(seed, sites, j_min, j_max, q, ref_wavelength, out, h0_out):
    """Generate a random device with a planted crosstalk model."""
    ranges = DeviceRanges(hop_ghz=(j_min, j_max), q_factor=q, ref_wavelength=ref_wavelength)
    truth = generate_device(seed, n_sites=sites, ranges=ranges)
    fileio.save_device(out, truth.spec, truth.model)
    if h0_out:
        fileio.save_hamiltonian(
            h0_out,
            fileio.HamiltonianRecord(
                truth.h0, truth.spec.gamma_in, truth.spec.gamma_out, ref_wavelength
            ),
        )
    click.echo(f"wrote {out}")


def _grid_for(device_h, grid_min, grid_max, grid_points):
    if grid_min is None or grid_max is None:
        return suggest_grid(device_h, points=grid_points)
    return FrequencyGrid.linspace(grid_min, grid_max, grid_points)


@main.command()
@click.argument("device_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_file", type=click.Path(dir_okay=False))
@click.option("--kind", type=click.Choice(["R", "T"]), default="R", show_default=True)
@click.option("--volts", default=None, help="Comma-separated heater voltages; default all zero.")
@click.option("--grid-min-ghz", type=float, default=None)
@click.option("--grid-max-ghz", type=float, default=None)
@click.option("--grid-points", type=int, default=2001, show_default=True)
@click.option("--units", type=click.Choice(["ghz", "nm"]), default="ghz", show_default=True)
@click.option("--noise-sigma", type=float, default=0.0, show_default=True,
              help="Relative multiplicative spectrum noise.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Also render the spectrum to this image file.")
@_mapped_errors
def simulate(device_file, out_file, kind, volts, grid_min_ghz, grid_max_ghz,
             grid_points, units, noise_sigma, seed, plot):
    """Synthesize a reflection or transmission spectrum of a device."""
    spec, model = fileio.load_device(device_file)
    v = _parse_volts(volts, spec.n_sites)
    if np.any(v > 0) and model is None:
        raise ValidationError("device file has no crosstalk model; cannot apply voltages")
    from .thermal import CrosstalkModel

    if model is None:
        model = CrosstalkModel(
            spec.n_sites,
            np.zeros(spec.n_sites),
            np.ones(spec.n_sites),
            np.zeros(3),
            np.zeros(12),
        )
    from .virtual import DeviceTruth

    truth = DeviceTruth(spec=spec, model=model, seed=seed)
    grid = _grid_for(truth.h0, grid_min_ghz, grid_max_ghz, grid_points)
    noise = NoiseSpec(spectrum_mult_sigma=noise_sigma, seed=seed)
    kind_name = "reflection" if kind == "R" else "transmission"
    spectrum = device_spectrum(truth, v, grid, noise, kind_name)
    fileio.save_spectrum(out_file, spectrum, units=units, ref_wavelength=spec.ref_wavelength)
    if plot:
        from .plotting import plot_spectrum

        plot_spectrum(spectrum, plot)
    click.echo(f"wrote {out_file}")


@main.command()
@click.argument("spectrum_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_file", type=click.Path(dir_okay=False))
@click.option("--modes", type=int, required=True, help="Number of modes N to fit.")
@click.option("--starts", type=int, default=8, show_default=True, help="Multi-start count.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-iter", type=int, default=None, help="Cap on fit function evaluations.")
@click.option("--ref-wavelength", type=float, default=1550.0, show_default=True)
@click.option("--gamma-out", type=float, default=0.0, show_default=True,
              help="Known exit-port rate to store alongside the result (a reflection "
                   "measurement alone cannot determine it).")
@click.option("--report", "report_file", type=click.Path(dir_okay=False), default=None)
@click.option("--plot", type=click.Path(dir_okay=False), default=None)
@_mapped_errors
def tomography(spectrum_file, out_file, modes, starts, seed, max_iter,
               ref_wavelength, gamma_out, report_file, plot):
    """Recover the effective Hamiltonian from a reflection spectrum."""
    if modes < 1:
        raise ValidationError("--modes must be >= 1")
    spectrum = fileio.load_spectrum(spectrum_file, kind="reflection",
                                    ref_wavelength=ref_wavelength)
    config = FitConfig(n_starts=starts, seed=seed, max_nfev=max_iter)
    lsum, report = fit_reflection(spectrum, modes, config)
    recon_error = None
    try:
        h_rec, _ = reconstruct(lsum)
    except NumericalError as exc:
        # an unconverged fit is the root cause; report it as such
        if report.converged:
            raise
        h_rec, recon_error = None, exc
    if h_rec is not None:
        fileio.save_hamiltonian(
            out_file,
            fileio.HamiltonianRecord(h_rec, lsum.gamma0, gamma_out, ref_wavelength),
        )
    if report_file:
        fileio._write_json(
            report_file,
            {
                "format": "ccakit-fit-report",
                "format_version": fileio.FORMAT_VERSION,
                "tool": f"ccakit {__version__}",
                "residual": report.residual,
                "penalty_residue": report.penalty_residue,
                "penalty_hops": report.penalty_hops,
                "iterations": report.iterations,
                "converged": report.converged,
                "reconstruction_error": str(recon_error) if recon_error else None,
                "gamma0_ghz": lsum.gamma0,
                "modes": [
                    {
                        "amplitude_ghz": m.amplitude,
                        "phase_rad": m.phase,
                        "center_ghz": m.center,
                        "halfwidth_ghz": m.halfwidth,
                    }
                    for m in lsum.sorted().modes
                ],
            },
        )
    if plot:
        from .plotting import plot_reflection_fit

        plot_reflection_fit(spectrum, lsum, plot)
    if h_rec is not None:
        click.echo(f"wrote {out_file}")
    if not report.converged:
        click.echo("warning: fit did not converge; results written anyway", err=True)
        if recon_error is not None:
            click.echo(f"warning: no Hamiltonian written ({recon_error})", err=True)
        sys.exit(EXIT_NONCONVERGED)


@main.command("gen-dataset")
@click.argument("device_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_file", type=click.Path(dir_okay=False))
@click.option("--ramp-steps", type=int, default=12, show_default=True)
@click.option("--ramp-vmax", type=float, default=0.8, show_default=True)
@click.option("--random", "n_random", type=int, default=288, show_default=True)
@click.option("--random-vmax", type=float, default=0.8, show_default=True)
@click.option("--eigen-noise-nm", type=float, default=0.0, show_default=True)
@click.option("--include-zero/--no-include-zero", default=True, show_default=True,
              help="Include the all-heaters-off record used for offset seeding.")
@click.option("--seed", type=int, default=0, show_default=True)
@_mapped_errors
def gen_dataset(device_file, out_file, ramp_steps, ramp_vmax, n_random,
                random_vmax, eigen_noise_nm, include_zero, seed):
    """Generate a sweep dataset (ramps + random profiles) from a device."""
    spec, model = fileio.load_device(device_file)
    if model is None:
        raise ValidationError("device file has no crosstalk model to sweep")
    from .virtual import DeviceTruth

    truth = DeviceTruth(spec=spec, model=model, seed=seed)
    protocol = SweepProtocol(
        ramp_steps=ramp_steps,
        ramp_vmax=ramp_vmax,
        n_random=n_random,
        random_vmax=random_vmax,
        include_zero=include_zero,
        seed=seed,
    )
    noise = NoiseSpec(eigen_sigma_nm=eigen_noise_nm, seed=seed)
    dataset = generate_dataset(truth, protocol, noise)
    fileio.save_dataset(out_file, dataset)
    click.echo(f"wrote {out_file} ({len(dataset.records)} records)")


@main.command()
@click.argument("h0_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_model_file", type=click.Path(dir_okay=False))
@click.option("--errors-csv", type=click.Path(dir_okay=False), default=None,
              help="Per-record error table (violin-plot ready).")
@click.option("--holdout", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Optional hold-out dataset to evaluate the fitted model on.")
@click.option("--holdout-plot", type=click.Path(dir_okay=False), default=None)
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Render the error distributions to this image file.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-starts", type=int, default=3, show_default=True)
@_mapped_errors
def calibrate(h0_file, dataset_file, out_model_file, errors_csv, holdout,
              holdout_plot, plot, seed, max_starts):
    """Fit the voltage-to-potential crosstalk model from a sweep dataset."""
    rec = fileio.load_hamiltonian(h0_file)
    dataset = fileio.load_dataset(dataset_file, rec.h)
    if abs(dataset.ref_wavelength - rec.ref_wavelength) > 1e-9:
        raise ValidationError("dataset and Hamiltonian reference wavelengths disagree")
    config = CalibrationConfig(seed=seed, max_starts=max_starts)
    result = fit_model(rec.h, dataset, config)
    fileio.save_model(out_model_file, result.model)
    report = evaluate_holdout(result.model, rec.h, dataset)
    if errors_csv:
        fileio.save_calibration_errors(
            errors_csv, dataset, result.per_record_error, report.mode_deviations
        )
    if plot:
        from .plotting import plot_error_violin

        j_norm = mean_hopping_nm(rec.h, rec.ref_wavelength)
        plot_error_violin(result.per_record_error, report.mode_deviations, j_norm, plot)
    if holdout:
        hold = fileio.load_dataset(holdout, rec.h)
        hold_report = evaluate_holdout(result.model, rec.h, hold)
        click.echo(
            f"holdout: mean record error {hold_report.mean_record_error!r} nm, "
            f"mean mode deviation {hold_report.mean_mode_deviation!r} nm"
        )
        if holdout_plot:
            from .plotting import plot_prediction
            from .thermal import predict_eigen_wavelengths as _predict

            measured = [r.measured_eigen for r in hold.records]
            predicted = [
                _predict(rec.h, result.model, r.profile, rec.ref_wavelength)
                for r in hold.records
            ]
            plot_prediction(measured, predicted, holdout_plot)
    click.echo(f"wrote {out_model_file} (mean error {result.mean_error!r} nm)")
    if not result.converged:
        click.echo("warning: calibration did not converge; results written anyway", err=True)
        sys.exit(EXIT_NONCONVERGED)


@main.command()
@click.argument("h0_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--volts", default=None, help="Comma-separated heater voltages; default all zero.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the eigen-wavelength CSV here instead of stdout.")
@_mapped_errors
def predict(h0_file, model_file, volts, out):
    """Predict sorted eigen-wavelengths for a voltage profile."""
    rec = fileio.load_hamiltonian(h0_file)
    model = fileio.load_model(model_file)
    v = _parse_volts(volts, model.n_sites)
    lam = predict_eigen_wavelengths(rec.h, model, v, rec.ref_wavelength)
    text = fileio.format_eigen_csv(lam)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--site", type=int, default=0, show_default=True)
@_mapped_errors
def eta(model_file, site):
    """Print the nearest-neighbour crosstalk ratio of a model."""
    model = fileio.load_model(model_file)
    click.echo(repr(crosstalk_ratio(model, site)))


if __name__ == "__main__":
    main()
