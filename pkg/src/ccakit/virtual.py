"""Synthetic devices with planted ground truth for closed-loop testing.

Generates reproducible random chains (lattice parameters plus a planted
crosstalk model), simulates their spectra under arbitrary voltage
profiles with configurable noise, and emits sweep datasets whose
measured eigen-wavelengths are the planted truth plus noise. Every
output is a pure function of (device seed, inputs, noise seed), with
per-record noise streams so record order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import SweepDataset, SweepRecord
from .errors import ValidationError
from .lattice import (
    SPEED_OF_LIGHT_NM_GHZ,
    EffectiveHamiltonian,
    FrequencyGrid,
    Spectrum,
    build_hamiltonian,
    LatticeSpec,
    resolvent_response,
    suggest_grid,
    to_detuning,
    to_wavelength,
)
from .thermal import CrosstalkModel, potential_shift
from .tomography import FitConfig, eigenvalues_from_transmission


@dataclass(frozen=True)
class DeviceRanges:
    """Sampling bands for random device generation.

    Site linewidths are set from the quality-factor target: each site's
    total loss (intrinsic plus its port share, if any) equals the loaded
    linewidth c/(lambda*Q) up to the jitter fraction. Crosstalk weights
    fall off geometrically with distance.
    """

    mu_ghz: tuple[float, float] = (-10.0, 10.0)
    hop_ghz: tuple[float, float] = (10.0, 50.0)
    q_factor: float = 8.5e4
    port_fraction: float = 0.6
    kappa_jitter: float = 0.1
    alpha_nm_per_v2: tuple[float, float] = (0.3, 0.5)
    beta1: tuple[float, float] = (0.015, 0.035)
    beta_decay: tuple[float, float] = (0.2, 0.3)
    gamma_cross: tuple[float, float] = (0.001, 0.004)
    delta_nm: tuple[float, float] = (0.005, 0.02)
    ref_wavelength: float = 1550.0

    def __post_init__(self):
        for name in ("mu_ghz", "hop_ghz", "alpha_nm_per_v2", "beta1", "beta_decay",
                     "gamma_cross", "delta_nm"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValidationError(f"range {name} must satisfy lo <= hi")
        if self.hop_ghz[0] <= 0:
            raise ValidationError("hopping range must be strictly positive")
        if not 0 < self.port_fraction < 1:
            raise ValidationError("port_fraction must lie in (0, 1)")
        if self.q_factor <= 0 or self.ref_wavelength <= 0:
            raise ValidationError("q_factor and ref_wavelength must be positive")
        if self.kappa_jitter < 0:
            raise ValidationError("kappa_jitter must be non-negative")


@dataclass
class DeviceTruth:
    """A synthetic chip: lattice parameters plus the planted crosstalk model."""

    spec: LatticeSpec
    model: CrosstalkModel
    seed: int

    @property
    def h0(self) -> EffectiveHamiltonian:
        return build_hamiltonian(self.spec)


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement noise levels; zero sigmas mean clean data."""

    spectrum_mult_sigma: float = 0.0
    eigen_sigma_nm: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.spectrum_mult_sigma < 0 or self.eigen_sigma_nm < 0:
            raise ValidationError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class SweepProtocol:
    """Measurement plan: per-heater ramps plus random multi-heater profiles."""

    ramp_steps: int = 12
    ramp_vmax: float = 0.8
    n_random: int = 288
    random_vmax: float = 0.8
    include_zero: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.ramp_steps < 0 or self.n_random < 0:
            raise ValidationError("protocol counts must be non-negative")
        if self.ramp_vmax < 0 or self.random_vmax < 0:
            raise ValidationError("protocol voltage limits must be non-negative")


def linewidth_ghz(ref_wavelength_nm: float, q_factor: float) -> float:
    """Loaded linewidth c/(lambda*Q) in GHz."""
    return SPEED_OF_LIGHT_NM_GHZ / (ref_wavelength_nm * q_factor)


def generate_device(seed: int, n_sites: int = 8, ranges: DeviceRanges = DeviceRanges()) -> DeviceTruth:
    """Reproducible random device: same seed, bit-identical truth."""
    if n_sites < 1:
        raise ValidationError("n_sites must be >= 1")
    rng = np.random.default_rng(seed)
    total = linewidth_ghz(ranges.ref_wavelength, ranges.q_factor)
    site_total = total * (1.0 + ranges.kappa_jitter * rng.uniform(-1.0, 1.0, n_sites))

    mu = rng.uniform(*ranges.mu_ghz, n_sites)
    hop = rng.uniform(*ranges.hop_ghz, max(n_sites - 1, 0))
    kappa = site_total.copy()
    if n_sites == 1:
        gamma_in = gamma_out = 0.5 * ranges.port_fraction * site_total[0]
        kappa[0] -= gamma_in + gamma_out
    else:
        gamma_in = ranges.port_fraction * site_total[0]
        gamma_out = ranges.port_fraction * site_total[-1]
        kappa[0] -= gamma_in
        kappa[-1] -= gamma_out
    spec = LatticeSpec(
        n_sites=n_sites,
        mu=mu,
        hop=hop,
        kappa=kappa,
        gamma_in=gamma_in,
        gamma_out=gamma_out,
        ref_wavelength=ranges.ref_wavelength,
    )

    alpha = rng.uniform(*ranges.alpha_nm_per_v2, n_sites)
    beta1 = rng.uniform(*ranges.beta1)
    decay = rng.uniform(*ranges.beta_decay)
    beta = beta1 * decay ** np.arange(3)
    gamma_cross = rng.uniform(*ranges.gamma_cross, 12)
    delta = rng.uniform(*ranges.delta_nm, n_sites) * rng.choice([-1.0, 1.0], n_sites)
    model = CrosstalkModel(n_sites, delta, alpha, beta, gamma_cross)
    return DeviceTruth(spec=spec, model=model, seed=int(seed))


def device_spectrum(
    truth: DeviceTruth,
    volts,
    grid: FrequencyGrid,
    noise: NoiseSpec = NoiseSpec(),
    kind: str = "reflection",
) -> Spectrum:
    """Reflection or transmission spectrum of the device under drive.

    Applies the planted crosstalk model to the diagonal, synthesizes the
    spectrum by direct solves, then applies multiplicative noise (values
    clipped at zero to stay physical).
    """
    if kind not in ("reflection", "transmission"):
        raise ValidationError(f"unknown spectrum kind {kind!r}")
    shift_nm = potential_shift(truth.model, volts)
    h = truth.h0.shifted(to_detuning(shift_nm, truth.spec.ref_wavelength))
    refl, trans = resolvent_response(h, truth.spec.gamma_in, truth.spec.gamma_out, grid)
    out = refl if kind == "reflection" else trans
    if noise.spectrum_mult_sigma > 0:
        rng = np.random.default_rng([noise.seed, 0])
        factor = 1.0 + noise.spectrum_mult_sigma * rng.standard_normal(len(grid))
        out = Spectrum(grid, np.maximum(out.values * factor, 0.0), kind)
    return out


def _profiles(truth: DeviceTruth, protocol: SweepProtocol):
    """Ordered (group, index, tag, profile) tuples for the protocol."""
    n = truth.spec.n_sites
    out = []
    if protocol.include_zero:
        out.append((0, 0, "zero", np.zeros(n)))
    for heater in range(n):
        for s in range(protocol.ramp_steps):
            v = np.zeros(n)
            v[heater] = protocol.ramp_vmax * (s + 1) / protocol.ramp_steps
            out.append((1, heater * protocol.ramp_steps + s, f"heater-{heater}", v))
    for k in range(protocol.n_random):
        rng = np.random.default_rng([protocol.seed, 2, k])
        v = rng.uniform(0.0, protocol.random_vmax, n)
        out.append((2, k, f"random-{k}", v))
    return out


def generate_dataset(
    truth: DeviceTruth,
    protocol: SweepProtocol = SweepProtocol(),
    noise: NoiseSpec = NoiseSpec(),
    full_pipeline: bool = False,
    grid: FrequencyGrid | None = None,
    fit_config: FitConfig | None = None,
) -> SweepDataset:
    """Sweep dataset of (profile, measured eigen-wavelengths) records.

    By default each record carries the true modified eigen-wavelengths
    plus additive Gaussian noise (re-sorted, as a peak-position readout
    would be). With ``full_pipeline=True`` the eigenvalues are instead
    extracted by fitting a synthesized noisy transmission spectrum, which
    exercises the whole measurement chain and is much slower.
    """
    spec = truth.spec
    h0 = truth.h0
    ref = spec.ref_wavelength
    if full_pipeline and grid is None:
        grid = suggest_grid(h0)
    records = []
    for group, idx, tag, volts in _profiles(truth, protocol):
        rng = np.random.default_rng([noise.seed, group, idx])
        if full_pipeline:
            shift_nm = potential_shift(truth.model, volts)
            h = h0.shifted(to_detuning(shift_nm, ref))
            _, trans = resolvent_response(h, spec.gamma_in, spec.gamma_out, grid)
            values = trans.values
            if noise.spectrum_mult_sigma > 0:
                values = np.maximum(
                    values * (1.0 + noise.spectrum_mult_sigma * rng.standard_normal(values.size)),
                    0.0,
                )
            eps, _ = eigenvalues_from_transmission(
                Spectrum(grid, values, "transmission"),
                spec.n_sites,
                fit_config or FitConfig(),
            )
            lam = ref + to_wavelength(eps.real, ref)
        else:
            shift_nm = potential_shift(truth.model, volts)
            h = h0.shifted(to_detuning(shift_nm, ref))
            eps = np.linalg.eigvals(h.entries)
            lam = ref + to_wavelength(eps.real, ref)
            if noise.eigen_sigma_nm > 0:
                lam = lam + noise.eigen_sigma_nm * rng.standard_normal(lam.size)
        records.append(SweepRecord(volts, np.sort(lam), tag))
    return SweepDataset(records, h0, ref)
