"""Fitting the crosstalk model from measured eigen-wavelength sweeps.

Two layers: per-heater extraction from single-drive voltage ramps (each
heater fitted to its own efficiency plus up to six neighbour leak
coefficients), and a joint least-squares fit of the full model over many
multi-heater profiles, seeded from the per-heater estimates. Hold-out
evaluation reports how well the fitted model predicts unseen profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import UnderdeterminedError, ValidationError
from .lattice import (
    EffectiveHamiltonian,
    eig_complex_symmetric,
    to_detuning,
    to_wavelength,
)
from .thermal import (
    WINDOW,
    CrosstalkModel,
    _shift_core,
    mean_hopping_nm,
    normalized_error,
)


@dataclass
class SweepRecord:
    """One measurement: a voltage profile and the sorted eigen-wavelengths."""

    profile: np.ndarray
    measured_eigen: np.ndarray
    tag: str = ""

    def __post_init__(self):
        self.profile = np.asarray(self.profile, dtype=float).reshape(-1)
        self.measured_eigen = np.asarray(self.measured_eigen, dtype=float).reshape(-1)
        if np.any(self.profile < 0):
            raise ValidationError("voltage profiles must be non-negative")
        if np.any(np.diff(self.measured_eigen) < 0):
            raise ValidationError("measured eigen-wavelengths must be sorted ascending")


@dataclass
class SweepDataset:
    """A set of sweep records tied to the reference Hamiltonian."""

    records: list[SweepRecord]
    h0: EffectiveHamiltonian
    ref_wavelength: float = 1550.0

    def __post_init__(self):
        n = self.h0.dim
        for k, rec in enumerate(self.records):
            if rec.profile.size != n or rec.measured_eigen.size != n:
                raise ValidationError(
                    f"record {k} is not dimension-consistent with the Hamiltonian"
                )


@dataclass
class CalibrationResult:
    model: CrosstalkModel
    per_record_error: np.ndarray
    mean_error: float
    converged: bool
    holdout_error: float | None = None


@dataclass
class SingleHeaterFit:
    """Per-heater extraction result: efficiency plus neighbour leaks."""

    heater: int
    alpha: float
    beta_prime: dict[int, float]
    converged: bool


@dataclass
class HoldoutReport:
    """Per-record errors plus violin-plot-ready summary statistics."""

    record_errors: np.ndarray
    mode_deviations: np.ndarray
    mean_record_error: float | None
    mean_mode_deviation: float | None
    max_mode_deviation: float | None
    quantiles: dict[float, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CalibrationConfig:
    max_nfev: int | None = None
    ftol: float = 1e-14
    xtol: float = 1e-14
    gtol: float = 1e-14
    max_starts: int = 3
    seed: int = 0
    retry_threshold: float = 0.05
    alpha_seed: float = 0.3
    alpha_floor: float = 1e-6


def _batched_eigen_wavelengths(h0: EffectiveHamiltonian, shifts_nm: np.ndarray, ref: float):
    """Sorted eigen-wavelengths for a stack of diagonal shifts (R, N) in nm."""
    n = h0.dim
    r = shifts_nm.shape[0]
    hs = np.broadcast_to(h0.entries, (r, n, n)).copy()
    idx = np.arange(n)
    hs[:, idx, idx] += to_detuning(shifts_nm, ref)
    eps = np.linalg.eigvals(hs)
    lam = ref + to_wavelength(eps.real, ref)
    return np.sort(lam, axis=1)


def _stack(dataset: SweepDataset):
    vb = np.stack([r.profile for r in dataset.records])
    meas = np.stack([r.measured_eigen for r in dataset.records])
    return vb, meas


def solve_delta_offsets(
    h0: EffectiveHamiltonian,
    measured_eigen: np.ndarray,
    ref_wavelength: float,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> np.ndarray:
    """Per-site wavelength offsets reproducing one zero-voltage record.

    Newton iteration on the diagonal of ``h0``: the derivative of each
    eigen-wavelength with respect to a site offset is the real part of
    the squared site weight of that mode, courtesy of the unconjugated
    eigenbasis. Noiseless data is recovered to machine precision; on
    failure the zero offset is returned.
    """
    n = h0.dim
    d = np.zeros(n)
    target = np.asarray(measured_eigen, dtype=float)
    for _ in range(max_iter):
        try:
            eig = eig_complex_symmetric(h0.shifted(to_detuning(d, ref_wavelength)))
        except Exception:
            return np.zeros(n)
        lam = ref_wavelength + to_wavelength(eig.eigenvalues.real, ref_wavelength)
        perm = np.argsort(lam)
        r = target - lam[perm]
        if np.max(np.abs(r)) < tol:
            break
        jac = np.real(eig.eigenvectors**2).T[perm]
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        if not np.all(np.isfinite(step)):
            return np.zeros(n)
        d = d + step
    return d


def fit_single_heater(
    h0: EffectiveHamiltonian,
    sweeps: SweepDataset,
    heater: int,
    delta_nm: np.ndarray | None = None,
    config: CalibrationConfig = CalibrationConfig(),
) -> SingleHeaterFit:
    """Extract one heater's efficiency and neighbour leaks from its ramp.

    Every record must drive only the given heater (zero-voltage records
    are allowed and constrain nothing). The model per record is
    shift[heater] = alpha*V^2 and shift[heater+o] = beta'_o*V^2 for
    offsets |o| <= 3 inside the chain; ``delta_nm`` optionally supplies a
    known static baseline added to every shift.
    """
    n = h0.dim
    if not 0 <= heater < n:
        raise ValidationError(f"heater index {heater} out of range")
    for k, rec in enumerate(sweeps.records):
        others = np.delete(rec.profile, heater)
        if np.any(others != 0):
            raise ValidationError(
                f"record {k} drives sites other than heater {heater}"
            )
    base = np.zeros(n) if delta_nm is None else np.asarray(delta_nm, dtype=float)
    offsets = [o for o in range(-WINDOW, WINDOW + 1) if o != 0 and 0 <= heater + o < n]
    n_params = 1 + len(offsets)
    driven = [r for r in sweeps.records if r.profile[heater] > 0]
    if len(driven) < n_params:
        raise UnderdeterminedError(
            f"{len(driven)} driven records cannot determine {n_params} coefficients"
        )

    vb, meas = _stack(sweeps)
    v2 = vb[:, heater] ** 2
    ref = sweeps.ref_wavelength

    def shifts(theta):
        s = np.tile(base, (len(v2), 1))
        s[:, heater] += theta[0] * v2
        for k, o in enumerate(offsets):
            s[:, heater + o] += theta[1 + k] * v2
        return s

    def residuals(theta):
        lam = _batched_eigen_wavelengths(h0, shifts(theta), ref)
        return (lam - meas).ravel()

    theta0 = np.concatenate([[config.alpha_seed], np.zeros(len(offsets))])
    lb = np.concatenate([[config.alpha_floor], np.full(len(offsets), -np.inf)])
    ub = np.full(n_params, np.inf)
    res = least_squares(
        residuals,
        theta0,
        bounds=(lb, ub),
        method="trf",
        ftol=config.ftol,
        xtol=config.xtol,
        gtol=config.gtol,
        max_nfev=config.max_nfev,
    )
    beta_prime = {heater + o: float(res.x[1 + k]) for k, o in enumerate(offsets)}
    return SingleHeaterFit(
        heater=heater,
        alpha=float(res.x[0]),
        beta_prime=beta_prime,
        converged=res.status > 0,
    )


def _single_heater_groups(dataset: SweepDataset):
    """Group records by their single driven heater; multi-drive records skipped."""
    groups: dict[int, list[SweepRecord]] = {}
    zeros: list[SweepRecord] = []
    for rec in dataset.records:
        hot = np.nonzero(rec.profile)[0]
        if hot.size == 0:
            zeros.append(rec)
        elif hot.size == 1:
            groups.setdefault(int(hot[0]), []).append(rec)
    return groups, zeros


def _seed_parameters(dataset: SweepDataset, config: CalibrationConfig):
    """Initial (delta, alpha, beta, gamma) estimates from the dataset.

    delta comes from the zero-voltage record when present; per-heater
    ramps seed alpha and, via the leak/efficiency ratios, the three
    shared distance weights. Pair weights start at zero.
    """
    h0 = dataset.h0
    n = h0.dim
    groups, zeros = _single_heater_groups(dataset)

    delta = np.zeros(n)
    if zeros:
        delta = solve_delta_offsets(h0, zeros[0].measured_eigen, dataset.ref_wavelength)

    alpha = np.full(n, config.alpha_seed)
    ratios: dict[int, list[float]] = {1: [], 2: [], 3: []}
    for heater, recs in sorted(groups.items()):
        sub = SweepDataset(recs + zeros, h0, dataset.ref_wavelength)
        try:
            fit = fit_single_heater(h0, sub, heater, delta_nm=delta, config=config)
        except (UnderdeterminedError, ValidationError):
            continue
        if fit.alpha > 0:
            alpha[heater] = fit.alpha
            for site, bp in fit.beta_prime.items():
                ratios[abs(site - heater)].append(bp / fit.alpha)
    beta = np.array([float(np.mean(ratios[d])) if ratios[d] else 0.0 for d in (1, 2, 3)])
    gamma = np.zeros(12)
    return delta, alpha, beta, gamma


def fit_model(
    h0: EffectiveHamiltonian,
    dataset: SweepDataset,
    config: CalibrationConfig = CalibrationConfig(),
) -> CalibrationResult:
    """Joint least-squares fit of the full crosstalk model.

    Needs at least 2N + 15 records (N static offsets, N efficiencies,
    3 distance weights, 12 pair weights). Damped least squares on the
    smooth eigenvalue objective with finite-difference Jacobians;
    restarted from perturbed seeds if the first run fails to converge or
    leaves a suspiciously large mean deviation.

    Chains shorter than 7 sites cannot excite every offset-pair orbit
    (the distance-3 antisymmetric pair needs sites n-3 and n+3 both in
    range); structurally silent coefficients simply keep their seed
    values.
    """
    n = h0.dim
    n_params = 2 * n + WINDOW + 12
    if len(dataset.records) < n_params:
        raise UnderdeterminedError(
            f"{len(dataset.records)} records cannot determine {n_params} coefficients"
        )
    vb, meas = _stack(dataset)
    ref = dataset.ref_wavelength
    j_norm = mean_hopping_nm(h0, ref) if n >= 2 else 1.0

    delta0, alpha0, beta0, gamma0 = _seed_parameters(dataset, config)
    theta0 = np.concatenate([delta0, alpha0, beta0, gamma0])
    lb = np.concatenate(
        [np.full(n, -np.inf), np.full(n, config.alpha_floor), np.full(15, -np.inf)]
    )
    ub = np.full(n_params, np.inf)

    def unpack(theta):
        return theta[:n], theta[n : 2 * n], theta[2 * n : 2 * n + 3], theta[2 * n + 3 :]

    def residuals(theta):
        delta, alpha, beta, gamma = unpack(theta)
        shifts = _shift_core(delta, alpha, beta, gamma, vb)
        lam = _batched_eigen_wavelengths(h0, shifts, ref)
        return (lam - meas).ravel()

    best = None
    for start in range(max(config.max_starts, 1)):
        theta_start = theta0.copy()
        if start > 0:
            rng = np.random.default_rng([max(config.seed, 0), start])
            theta_start[:n] += rng.normal(0.0, 0.01, n)
            theta_start[n : 2 * n] *= np.exp(rng.uniform(-0.5, 0.5, n))
            theta_start[2 * n :] += rng.normal(0.0, 0.01, 15)
        theta_start = np.clip(theta_start, lb, ub)
        res = least_squares(
            residuals,
            theta_start,
            bounds=(lb, ub),
            method="trf",
            ftol=config.ftol,
            xtol=config.xtol,
            gtol=config.gtol,
            max_nfev=config.max_nfev,
        )
        dev = np.abs(res.fun.reshape(meas.shape))
        mean_dev = float(np.mean(dev))
        if best is None or res.cost < best[0]:
            best = (res.cost, res.x, res.status > 0, mean_dev)
        if best[2] and best[3] <= config.retry_threshold * j_norm:
            break

    _, theta, converged, _ = best
    delta, alpha, beta, gamma = unpack(theta)
    model = CrosstalkModel(n, delta, alpha, beta, gamma)
    shifts = _shift_core(delta, alpha, beta, gamma, vb)
    lam = _batched_eigen_wavelengths(h0, shifts, ref)
    per_record = np.array(
        [normalized_error(lam[k], meas[k], j_norm) for k in range(len(dataset.records))]
    )
    return CalibrationResult(
        model=model,
        per_record_error=per_record,
        mean_error=float(np.mean(per_record)),
        converged=bool(converged),
    )


def evaluate_holdout(
    model: CrosstalkModel,
    h0: EffectiveHamiltonian,
    holdout: SweepDataset,
) -> HoldoutReport:
    """Prediction errors of a fitted model on records it never saw."""
    if model.n_sites != h0.dim:
        raise ValidationError("model and Hamiltonian dimensions disagree")
    if not holdout.records:
        return HoldoutReport(
            record_errors=np.empty(0),
            mode_deviations=np.empty((0, h0.dim)),
            mean_record_error=None,
            mean_mode_deviation=None,
            max_mode_deviation=None,
        )
    vb, meas = _stack(holdout)
    ref = holdout.ref_wavelength
    j_norm = mean_hopping_nm(h0, ref) if h0.dim >= 2 else 1.0
    shifts = _shift_core(model.delta, model.alpha, model.beta, model.gamma_cross, vb)
    lam = _batched_eigen_wavelengths(h0, shifts, ref)
    dev = np.abs(lam - meas)
    errors = np.array([normalized_error(lam[k], meas[k], j_norm) for k in range(len(vb))])
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    return HoldoutReport(
        record_errors=errors,
        mode_deviations=dev,
        mean_record_error=float(np.mean(errors)),
        mean_mode_deviation=float(np.mean(dev)),
        max_mode_deviation=float(np.max(dev)),
        quantiles={q: float(np.quantile(errors, q)) for q in qs},
    )
