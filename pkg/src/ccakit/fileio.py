"""Bit-stable file formats: device/Hamiltonian/model/dataset JSON, spectrum CSV.

Every file embeds the tool version. JSON documents carry a mandatory
``format``/``format_version`` pair and reject unknown fields; all
physical quantities use unit-suffixed field names so GHz never gets
confused with nm. Floats are serialized at full precision, so
load(save(x)) reproduces x bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .calibration import SweepDataset, SweepRecord
from .errors import ValidationError
from .lattice import (
    EffectiveHamiltonian,
    FrequencyGrid,
    LatticeSpec,
    Spectrum,
    to_detuning,
    to_wavelength,
)
from .thermal import CrosstalkModel

FORMAT_VERSION = 1
_TOOL = f"ccakit {__version__}"


# ----------------------------------------------------------------------
# JSON helpers.
# ----------------------------------------------------------------------


def _write_json(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None


def _check_header(doc: dict, fmt: str, path) -> None:
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    if doc.get("format") != fmt:
        raise ValidationError(f"{path}: expected format {fmt!r}, got {doc.get('format')!r}")
    if "format_version" not in doc:
        raise ValidationError(f"{path}: missing mandatory format_version field")
    if doc["format_version"] != FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported format_version {doc['format_version']!r}"
        )


def _check_keys(obj: dict, required: set[str], optional: set[str], where: str) -> None:
    keys = set(obj)
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise ValidationError(f"{where}: missing fields {sorted(missing)}")
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")


def _floats(obj, where: str, length: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: expected an array of numbers") from None
    if length is not None and arr.shape != (length,):
        raise ValidationError(f"{where}: expected {length} numbers, got shape {arr.shape}")
    return arr


# ----------------------------------------------------------------------
# Device files.
# ----------------------------------------------------------------------

_LATTICE_KEYS = {
    "n_sites", "mu_ghz", "hop_ghz", "kappa_ghz",
    "gamma_in_ghz", "gamma_out_ghz", "ref_wavelength_nm",
}
_CROSSTALK_KEYS = {"delta_nm", "alpha_nm_per_v2", "beta_by_distance", "gamma_by_orbit"}


def save_device(path, spec: LatticeSpec, model: CrosstalkModel | None = None) -> None:
    doc = {
        "format": "ccakit-device",
        "format_version": FORMAT_VERSION,
        "tool": _TOOL,
        "lattice": {
            "n_sites": spec.n_sites,
            "mu_ghz": spec.mu.tolist(),
            "hop_ghz": spec.hop.tolist(),
            "kappa_ghz": spec.kappa.tolist(),
            "gamma_in_ghz": spec.gamma_in,
            "gamma_out_ghz": spec.gamma_out,
            "ref_wavelength_nm": spec.ref_wavelength,
        },
    }
    if model is not None:
        doc["crosstalk"] = {
            "delta_nm": model.delta.tolist(),
            "alpha_nm_per_v2": model.alpha.tolist(),
            "beta_by_distance": model.beta.tolist(),
            "gamma_by_orbit": model.gamma_cross.tolist(),
        }
    _write_json(path, doc)


def load_device(path) -> tuple[LatticeSpec, CrosstalkModel | None]:
    doc = _read_json(path)
    _check_header(doc, "ccakit-device", path)
    _check_keys(doc, {"format", "format_version", "lattice"}, {"tool", "crosstalk"}, str(path))
    lat = doc["lattice"]
    _check_keys(lat, _LATTICE_KEYS, set(), f"{path}:lattice")
    n = int(lat["n_sites"])
    spec = LatticeSpec(
        n_sites=n,
        mu=_floats(lat["mu_ghz"], f"{path}:mu_ghz", n),
        hop=_floats(lat["hop_ghz"], f"{path}:hop_ghz", max(n - 1, 0)),
        kappa=_floats(lat["kappa_ghz"], f"{path}:kappa_ghz", n),
        gamma_in=float(lat["gamma_in_ghz"]),
        gamma_out=float(lat["gamma_out_ghz"]),
        ref_wavelength=float(lat["ref_wavelength_nm"]),
    )
    model = None
    if "crosstalk" in doc:
        ct = doc["crosstalk"]
        _check_keys(ct, _CROSSTALK_KEYS, set(), f"{path}:crosstalk")
        model = CrosstalkModel(
            n_sites=n,
            delta=_floats(ct["delta_nm"], f"{path}:delta_nm", n),
            alpha=_floats(ct["alpha_nm_per_v2"], f"{path}:alpha_nm_per_v2", n),
            beta=_floats(ct["beta_by_distance"], f"{path}:beta_by_distance", 3),
            gamma_cross=_floats(ct["gamma_by_orbit"], f"{path}:gamma_by_orbit", 12),
        )
    return spec, model


# ----------------------------------------------------------------------
# Hamiltonian files.
# ----------------------------------------------------------------------


@dataclass
class HamiltonianRecord:
    """A stored effective Hamiltonian together with its port rates."""

    h: EffectiveHamiltonian
    gamma_in: float
    gamma_out: float
    ref_wavelength: float


_H_KEYS = {"n", "real", "imag", "gamma_in_ghz", "gamma_out_ghz", "ref_wavelength_nm"}


def save_hamiltonian(path, rec: HamiltonianRecord) -> None:
    doc = {
        "format": "ccakit-hamiltonian",
        "format_version": FORMAT_VERSION,
        "tool": _TOOL,
        "n": rec.h.dim,
        "real": rec.h.entries.real.tolist(),
        "imag": rec.h.entries.imag.tolist(),
        "gamma_in_ghz": float(rec.gamma_in),
        "gamma_out_ghz": float(rec.gamma_out),
        "ref_wavelength_nm": float(rec.ref_wavelength),
    }
    _write_json(path, doc)


def load_hamiltonian(path, band_tol: float = 1e-9) -> HamiltonianRecord:
    doc = _read_json(path)
    _check_header(doc, "ccakit-hamiltonian", path)
    _check_keys(doc, {"format", "format_version"} | _H_KEYS, {"tool"}, str(path))
    n = int(doc["n"])
    real = np.asarray(doc["real"], dtype=float)
    imag = np.asarray(doc["imag"], dtype=float)
    if real.shape != (n, n) or imag.shape != (n, n):
        raise ValidationError(f"{path}: real/imag must be {n}x{n} arrays")
    m = real + 1j * imag
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > band_tol * scale:
        raise ValidationError(f"{path}: matrix is not symmetric under transpose")
    band = np.tri(n, k=1) * np.tri(n, k=1).T
    if np.max(np.abs(m * (1 - band))) > band_tol * scale:
        raise ValidationError(f"{path}: matrix is not tridiagonal within tolerance")
    m = m * band  # drop sub-tolerance fill outside the band
    return HamiltonianRecord(
        h=EffectiveHamiltonian(m),
        gamma_in=float(doc["gamma_in_ghz"]),
        gamma_out=float(doc["gamma_out_ghz"]),
        ref_wavelength=float(doc["ref_wavelength_nm"]),
    )


# ----------------------------------------------------------------------
# Crosstalk model files.
# ----------------------------------------------------------------------

_MODEL_KEYS = {"n_sites"} | _CROSSTALK_KEYS


def save_model(path, model: CrosstalkModel) -> None:
    doc = {
        "format": "ccakit-crosstalk-model",
        "format_version": FORMAT_VERSION,
        "tool": _TOOL,
        "n_sites": model.n_sites,
        "delta_nm": model.delta.tolist(),
        "alpha_nm_per_v2": model.alpha.tolist(),
        "beta_by_distance": model.beta.tolist(),
        "gamma_by_orbit": model.gamma_cross.tolist(),
    }
    _write_json(path, doc)


def load_model(path) -> CrosstalkModel:
    doc = _read_json(path)
    _check_header(doc, "ccakit-crosstalk-model", path)
    _check_keys(doc, {"format", "format_version"} | _MODEL_KEYS, {"tool"}, str(path))
    n = int(doc["n_sites"])
    return CrosstalkModel(
        n_sites=n,
        delta=_floats(doc["delta_nm"], f"{path}:delta_nm", n),
        alpha=_floats(doc["alpha_nm_per_v2"], f"{path}:alpha_nm_per_v2", n),
        beta=_floats(doc["beta_by_distance"], f"{path}:beta_by_distance", 3),
        gamma_cross=_floats(doc["gamma_by_orbit"], f"{path}:gamma_by_orbit", 12),
    )


# ----------------------------------------------------------------------
# Sweep dataset files.
# ----------------------------------------------------------------------

_RECORD_KEYS = {"volts", "eigen_nm", "tag"}


def save_dataset(path, dataset: SweepDataset) -> None:
    doc = {
        "format": "ccakit-dataset",
        "format_version": FORMAT_VERSION,
        "tool": _TOOL,
        "n_sites": dataset.h0.dim,
        "ref_wavelength_nm": dataset.ref_wavelength,
        "records": [
            {
                "volts": rec.profile.tolist(),
                "eigen_nm": rec.measured_eigen.tolist(),
                "tag": rec.tag,
            }
            for rec in dataset.records
        ],
    }
    _write_json(path, doc)


def load_dataset(path, h0: EffectiveHamiltonian) -> SweepDataset:
    doc = _read_json(path)
    _check_header(doc, "ccakit-dataset", path)
    _check_keys(
        doc,
        {"format", "format_version", "n_sites", "ref_wavelength_nm", "records"},
        {"tool"},
        str(path),
    )
    n = int(doc["n_sites"])
    if n != h0.dim:
        raise ValidationError(
            f"{path}: dataset is for {n} sites but the Hamiltonian has {h0.dim}"
        )
    records = []
    for k, rec in enumerate(doc["records"]):
        _check_keys(rec, {"volts", "eigen_nm"}, {"tag"}, f"{path}:records[{k}]")
        records.append(
            SweepRecord(
                profile=_floats(rec["volts"], f"{path}:records[{k}].volts", n),
                measured_eigen=_floats(rec["eigen_nm"], f"{path}:records[{k}].eigen_nm", n),
                tag=str(rec.get("tag", "")),
            )
        )
    return SweepDataset(records, h0, float(doc["ref_wavelength_nm"]))


# ----------------------------------------------------------------------
# Spectrum CSV files.
# ----------------------------------------------------------------------


def save_spectrum(path, spectrum: Spectrum, units: str = "ghz", ref_wavelength: float | None = None) -> None:
    """Write a spectrum as CSV; detuning (GHz) or absolute wavelength (nm)."""
    if units == "ghz":
        col = "detuning_ghz"
        first = spectrum.grid.points
        values = spectrum.values
    elif units == "nm":
        if ref_wavelength is None:
            raise ValidationError("writing wavelength units requires ref_wavelength")
        col = "wavelength_nm"
        wl = ref_wavelength + to_wavelength(spectrum.grid.points, ref_wavelength)
        order = np.argsort(wl)
        first = wl[order]
        values = spectrum.values[order]
    else:
        raise ValidationError(f"unknown spectrum units {units!r}")
    lines = [f"# {_TOOL} spectrum kind={spectrum.kind}", f"{col},value"]
    lines += [f"{x!r},{v!r}" for x, v in zip(first.tolist(), values.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_spectrum(path, kind: str | None = None, ref_wavelength: float | None = None) -> Spectrum:
    """Read a spectrum CSV back onto an ascending detuning grid.

    Wavelength-sampled files need ``ref_wavelength`` to convert back to
    detunings. ``kind`` overrides the kind recorded in the file comment
    (falling back to reflection when neither is present).
    """
    text = Path(path).read_text(encoding="utf-8")
    file_kind = None
    rows = []
    header = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "kind=" in line:
                file_kind = line.split("kind=")[-1].strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            continue
        rows.append(line.split(","))
    if header is None or header not in (["detuning_ghz", "value"], ["wavelength_nm", "value"]):
        raise ValidationError(
            f"{path}: expected header 'detuning_ghz,value' or 'wavelength_nm,value'"
        )
    try:
        data = np.array([[float(a), float(b)] for a, b in rows])
    except (TypeError, ValueError):
        raise ValidationError(f"{path}: malformed numeric row") from None
    if data.size == 0:
        raise ValidationError(f"{path}: no samples")
    x, v = data[:, 0], data[:, 1]
    diffs = np.diff(x)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValidationError(f"{path}: first column must be strictly monotone")
    if np.any(v < 0):
        raise ValidationError(f"{path}: spectrum values must be non-negative")
    if header[0] == "wavelength_nm":
        if ref_wavelength is None:
            raise ValidationError(
                f"{path}: wavelength-sampled spectrum needs a reference wavelength"
            )
        x = np.asarray(to_detuning(x - ref_wavelength, ref_wavelength))
    order = np.argsort(x)
    use_kind = kind or file_kind or "reflection"
    return Spectrum(FrequencyGrid(x[order]), v[order], use_kind)


# ----------------------------------------------------------------------
# Simple value tables (eigen-wavelengths, calibration errors).
# ----------------------------------------------------------------------


def format_eigen_csv(wavelengths_nm) -> str:
    lines = [f"# {_TOOL} eigenvalues", "eigen_wavelength_nm"]
    lines += [repr(float(x)) for x in np.asarray(wavelengths_nm).tolist()]
    return "\n".join(lines) + "\n"


def save_calibration_errors(path, dataset: SweepDataset, record_errors, mode_deviations) -> None:
    """Violin-plot-ready error table: one row per record, both error flavours."""
    n = dataset.h0.dim
    cols = ",".join(f"dev_mode_{i}_nm" for i in range(n))
    lines = [
        f"# {_TOOL} calibration-errors",
        f"record_index,tag,record_error_nm,{cols}",
    ]
    for k, rec in enumerate(dataset.records):
        devs = ",".join(repr(float(d)) for d in mode_deviations[k])
        lines.append(f"{k},{rec.tag},{float(record_errors[k])!r},{devs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
