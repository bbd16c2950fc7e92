"""Figure rendering for the report paths of the command line tools.

Everything draws straight to a file through the Agg backend, so the
toolkit stays usable on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .lattice import Spectrum
from .tomography import LorentzianSum, _power, _pack


def plot_spectrum(spectrum: Spectrum, path, title: str | None = None) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(spectrum.grid.points, spectrum.values, lw=1.0, color="#5b2a86")
    ax.set_xlabel("detuning (GHz)")
    ax.set_ylabel(f"|{'R' if spectrum.kind == 'reflection' else 'T'}|$^2$")
    ax.set_title(title or spectrum.kind)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_reflection_fit(spectrum: Spectrum, lsum: LorentzianSum, path) -> None:
    """Measured reflection, the fitted curve, and each mode's contribution."""
    w = spectrum.grid.points
    srt = lsum.sorted()
    n = srt.n_modes
    p = _pack(
        np.array([m.amplitude for m in srt.modes]),
        np.array([m.phase for m in srt.modes]),
        np.array([m.center for m in srt.modes]),
        np.array([m.halfwidth for m in srt.modes]),
    )
    fit = _power(p, w, offset=1.0)

    fig, (top, bottom) = plt.subplots(
        2, 1, figsize=(7, 6), sharex=True, height_ratios=[2, 1]
    )
    top.plot(w, spectrum.values, ".", ms=2, color="#5b2a86", label="measured")
    top.plot(w, fit, lw=1.2, color="#e8b54d", label="fit")
    top.set_ylabel("|R|$^2$")
    top.legend(frameon=False)
    cmap = plt.get_cmap("viridis")
    for k, m in enumerate(srt.modes):
        profile = (m.amplitude**2) / ((w - m.center) ** 2 + m.halfwidth**2)
        bottom.plot(w, profile, lw=1.0, color=cmap(k / max(n - 1, 1)))
    bottom.set_xlabel("detuning (GHz)")
    bottom.set_ylabel("mode intensity")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_error_violin(record_errors, mode_deviations, j_norm: float, path) -> None:
    """Distribution of calibration errors normalized to the hopping scale."""
    rec = np.asarray(record_errors, dtype=float) / j_norm
    dev = np.asarray(mode_deviations, dtype=float).ravel() / j_norm
    fig, ax = plt.subplots(figsize=(5, 4))
    parts = ax.violinplot([rec, dev], showmedians=True)
    for body in parts["bodies"]:
        body.set_facecolor("#8d6cab")
    ax.set_xticks([1, 2], ["per record", "per mode"])
    ax.set_ylabel("error / mean hopping rate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_prediction(measured_sets, predicted_sets, path) -> None:
    """Measured eigen-wavelengths as bars, predictions as deviation-sized dots."""
    fig, ax = plt.subplots(figsize=(8, 4))
    devs = []
    for k, (meas, pred) in enumerate(zip(measured_sets, predicted_sets)):
        meas = np.asarray(meas, dtype=float)
        pred = np.asarray(pred, dtype=float)
        devs.append(np.abs(pred - meas))
        ax.plot([k] * meas.size, meas, "_", ms=12, color="black", alpha=0.7)
    devs = np.asarray(devs)
    scale = 400.0 / max(float(devs.max()), 1e-12)
    for k, (meas, pred) in enumerate(zip(measured_sets, predicted_sets)):
        pred = np.asarray(pred, dtype=float)
        ax.scatter(
            [k] * pred.size,
            pred,
            s=np.maximum(devs[k] * scale, 4.0),
            c=[float(np.mean(devs[k]))] * pred.size,
            cmap="plasma",
            alpha=0.8,
        )
    ax.set_xlabel("record")
    ax.set_ylabel("eigen-wavelength (nm)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
