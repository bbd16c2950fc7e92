"""Recovering the effective Hamiltonian from a single reflection spectrum.

The reflection amplitude of an N-site chain is a constant plus a sum of N
complex Lorentzians, one per eigenmode. Fitting |R|^2 to that form yields
the complex eigenvalues and the squared end-site weights of every mode;
a site-by-site recursion then rebuilds the full tridiagonal Hamiltonian
from them. Transmission spectra determine the eigenvalues only (the
product of two different site weights cannot be split), so the
transmission fit returns just those.

The fit minimizes the squared data misfit plus two physicality penalties:
the imaginary part of the summed mode residues (which must be a real port
rate) and the total imaginary part of the reconstructed hopping rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize

from .errors import (
    BrokenChainError,
    GridMarginError,
    InconsistentModesError,
    InsufficientDataError,
    ResampleRequiredError,
    ValidationError,
)
from .lattice import EffectiveHamiltonian, FrequencyGrid, Spectrum, resolvent_response

# Penalty assigned when the reconstruction recursion cannot run at all
# (non-positive port rate or a vanishing hopping rate).
_BROKEN_PENALTY = 1e9


@dataclass
class LorentzianMode:
    """One resonance of the modal expansion.

    amplitude (GHz, >= 0) and phase (rad) form the complex residue
    A*exp(j*phi); center (GHz) and halfwidth (GHz, > 0) form the complex
    eigenvalue center - j*halfwidth.
    """

    amplitude: float
    phase: float
    center: float
    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValidationError("mode halfwidth must be positive")
        if self.amplitude < 0:
            raise ValidationError("mode amplitude must be non-negative")

    @property
    def residue(self) -> complex:
        return self.amplitude * np.exp(1j * self.phase)

    @property
    def eigenvalue(self) -> complex:
        return self.center - 1j * self.halfwidth


@dataclass
class LorentzianSum:
    """A set of fitted modes; the derived port rate is Re(sum of residues)."""

    modes: list[LorentzianMode]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def residues(self) -> np.ndarray:
        return np.array([m.residue for m in self.modes], dtype=complex)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([m.eigenvalue for m in self.modes], dtype=complex)

    @property
    def gamma0(self) -> float:
        return float(np.sum(self.residues).real)

    def sorted(self) -> "LorentzianSum":
        return LorentzianSum(sorted(self.modes, key=lambda m: m.center))


@dataclass
class FitReport:
    """Outcome of a modal fit: final objective value and its penalty parts."""

    residual: float
    penalty_residue: float
    penalty_hops: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FitConfig:
    """Tolerances and strategy knobs for the modal fits."""

    n_starts: int = 8
    seed: int = 0
    max_nfev: int | None = 400
    ftol: float = 1e-12
    xtol: float = 1e-12
    gtol: float = 1e-14
    residue_weight: float = 1.0
    hop_weight: float = 1.0
    polish: bool = True
    polish_maxfev: int = 2000
    polish_threshold: float = 1e-8
    early_stop_objective: float = 1e-8
    margin_linewidths: float = 5.0
    enforce_margin: bool = True
    perturb_scale: float = 0.3
    hop_floor: float = 1e-9
    drift_tol: float = 1e-2


# ----------------------------------------------------------------------
# Modal lineshape model. Parameter vectors are laid out as
# [amplitudes | phases | centers | halfwidths], n entries each.
# ----------------------------------------------------------------------


def _split(p: np.ndarray):
    n = p.size // 4
    return p[:n], p[n : 2 * n], p[2 * n : 3 * n], p[3 * n :]


def _pack(amp, phase, center, halfwidth) -> np.ndarray:
    return np.concatenate([amp, phase, center, halfwidth])


def _mode_sum(p: np.ndarray, w: np.ndarray):
    """Sum of residues over (omega - eigenvalue) and its parameter gradients."""
    amp, phase, cen, hw = _split(p)
    c = amp * np.exp(1j * phase)
    d = w[:, None] - (cen - 1j * hw)[None, :]
    inv = 1.0 / d
    s = np.sum(c * inv, axis=1)
    return s, c, inv


def _power(p: np.ndarray, w: np.ndarray, offset: float) -> np.ndarray:
    s, _, _ = _mode_sum(p, w)
    return np.abs(offset - 1j * s) ** 2


def _power_jac(p: np.ndarray, w: np.ndarray, offset: float) -> np.ndarray:
    amp, phase, _, _ = _split(p)
    s, c, inv = _mode_sum(p, w)
    a = offset - 1j * s
    # d(amp)/d(param) for each mode, stacked [A, phi, center, halfwidth].
    da = -1j * np.exp(1j * phase)[None, :] * inv
    dphi = c[None, :] * inv
    dcen = -1j * c[None, :] * inv * inv
    dhw = -c[None, :] * inv * inv
    grads = np.concatenate([da, dphi, dcen, dhw], axis=1)
    return 2.0 * np.real(np.conj(a)[:, None] * grads)


# ----------------------------------------------------------------------
# Seeding from spectral features.
# ----------------------------------------------------------------------


def _feature_indices(y: np.ndarray, dips: bool) -> np.ndarray:
    if dips:
        hit = (y[1:-1] < y[:-2]) & (y[1:-1] <= y[2:])
    else:
        hit = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    return np.nonzero(hit)[0] + 1


def _walk_to_level(y: np.ndarray, i: int, level: float, direction: int, above: bool) -> int:
    """March from index i until the level is crossed.

    For a dip (``above``) the march also stops at the first local maximum
    encountered on the way out, so a shallow feature sitting on the
    shoulder of a deep one cannot claim the neighbour's territory; the
    peak case mirrors this with local minima.
    """
    j = i
    while 0 < j + min(direction, 0) and j + max(direction, 0) < y.size - 1:
        nxt = j + direction
        if above:
            if y[nxt] >= level:
                return nxt
            if y[nxt] < y[j] and y[j] > y[i]:
                return j
        else:
            if y[nxt] <= level:
                return nxt
            if y[nxt] > y[j] and y[j] < y[i]:
                return j
        j = nxt
    return j


def _half_level_width(x: np.ndarray, y: np.ndarray, i: int, level: float, above: bool) -> float:
    """Half width of the feature at index i, at the given crossing level.

    The narrower of the two one-sided walks is used: a neighbour feature
    can only inflate one flank, and underestimating a width is harmless
    downstream while overestimating poisons the margin rule.
    """
    j = _walk_to_level(y, i, level, -1, above)
    k = _walk_to_level(y, i, level, +1, above)
    step = (x[-1] - x[0]) / (x.size - 1)
    return max(min(x[k] - x[i], x[i] - x[j]), 0.5 * step)


def _seed_params(spectrum: Spectrum, n_modes: int, dips: bool) -> np.ndarray:
    if n_modes < 1:
        raise ValidationError("n_modes must be >= 1")
    if len(spectrum.grid) < 3:
        raise InsufficientDataError("need at least 3 spectrum samples to seed a fit")
    x = spectrum.grid.points
    y = spectrum.values
    span = x[-1] - x[0]
    step = span / (x.size - 1)

    cand = _feature_indices(y, dips)
    if dips:
        size = np.maximum(1.0 - y[cand], 0.0)
    else:
        size = y[cand]
    keep = cand[size > 1e-12]
    sizes = size[size > 1e-12]

    # Width estimate per candidate: half-depth (half-height) walk, capped so
    # a shallow feature on a sloping background cannot claim a huge width.
    widths = np.empty(keep.size)
    for k, i in enumerate(keep):
        if dips:
            level = y[i] + 0.5 * sizes[k]
            widths[k] = _half_level_width(x, y, i, level, above=True)
        else:
            widths[k] = _half_level_width(x, y, i, 0.5 * y[i], above=False)
    widths = np.minimum(widths, span / 8.0)

    # Deepest first, suppressing candidates inside an already chosen feature.
    order = np.argsort(-sizes)
    chosen: list[int] = []
    for k in order:
        sep_ok = all(
            abs(x[keep[k]] - x[keep[j]]) > max(3 * step, 0.7 * max(widths[k], widths[j]))
            for j in chosen
        )
        if sep_ok:
            chosen.append(int(k))
        if len(chosen) == n_modes:
            break

    centers = np.array([x[keep[k]] for k in chosen])
    hws = np.array([widths[k] for k in chosen])
    feat = np.array([sizes[k] for k in chosen])

    # Overlapping features share the gap between them: cap each width at half
    # the distance to its nearest chosen neighbour.
    if centers.size > 1:
        srt = np.argsort(centers)
        gaps = np.full(centers.size, np.inf)
        cs = centers[srt]
        for i in range(cs.size):
            if i > 0:
                gaps[srt[i]] = min(gaps[srt[i]], 0.5 * (cs[i] - cs[i - 1]))
            if i < cs.size - 1:
                gaps[srt[i]] = min(gaps[srt[i]], 0.5 * (cs[i + 1] - cs[i]))
        hws = np.maximum(np.minimum(hws, gaps), 0.5 * step)

    if dips:
        amps = feat * hws
    else:
        amps = hws * np.sqrt(feat)
    phases = np.zeros(centers.size)

    missing = n_modes - centers.size
    if missing > 0:
        fill = np.linspace(x[0], x[-1], missing + 2)[1:-1]
        centers = np.concatenate([centers, fill])
        hws = np.concatenate([hws, np.full(missing, span / (4.0 * n_modes))])
        amps = np.concatenate([amps, np.zeros(missing)])
        phases = np.concatenate([phases, np.zeros(missing)])

    order = np.argsort(centers)
    return _pack(amps[order], phases[order], centers[order], hws[order])


def _params_to_sum(p: np.ndarray) -> LorentzianSum:
    amp, phase, cen, hw = _split(p)
    phase = np.angle(np.exp(1j * phase))
    modes = [
        LorentzianMode(float(a), float(ph), float(c), float(h))
        for a, ph, c, h in zip(amp, phase, cen, hw)
    ]
    return LorentzianSum(modes).sorted()


def seed_modes(spectrum: Spectrum, n_modes: int) -> LorentzianSum:
    """Initial mode guesses from the N deepest reflection dips.

    Centers sit on local minima of |R|^2, halfwidths come from the
    half-depth width of each dip, amplitudes scale with depth times
    width and phases start at zero. If fewer than ``n_modes`` dips are
    found the remaining seeds are spread uniformly across the grid with
    zero amplitude.
    """
    if spectrum.kind != "reflection":
        raise ValidationError("seed_modes expects a reflection spectrum")
    p = _seed_params(spectrum, n_modes, dips=True)
    return _params_to_sum(p)


# ----------------------------------------------------------------------
# Site-by-site reconstruction recursion.
# ----------------------------------------------------------------------


def _recursion(
    residues: np.ndarray,
    eigenvalues: np.ndarray,
    hop_floor: float,
    drift_tol: float,
):
    """Rebuild diagonal/hopping terms and the full site-weight table.

    The squared end-site weights are residues/gamma0. Each step reads off
    the current diagonal element from the weighted eigenvalue sum, forms
    the next hopping rate from the normalized residual vector (square
    root taken with positive real part), and back-substitutes to obtain
    the next site's weights.
    """
    gamma0 = float(np.sum(residues).real)
    if not gamma0 > 0:
        raise ValidationError("sum of mode residues must have a positive real part")
    n = residues.size
    weights = np.empty((n, n), dtype=complex)
    weights[0] = np.sqrt(residues / gamma0)
    mu = np.empty(n, dtype=complex)
    hops = np.empty(max(n - 1, 0), dtype=complex)

    for site in range(n):
        w = weights[site]
        drift = abs(np.sum(w * w) - 1.0)
        if drift > drift_tol:
            raise InconsistentModesError(
                f"site {site} weight normalization drifted by {drift:.3e}"
            )
        mu[site] = np.sum(eigenvalues * w * w)
        if site == n - 1:
            break
        r = (eigenvalues - mu[site]) * w
        if site > 0:
            r = r - hops[site - 1] * weights[site - 1]
        j = np.sqrt(np.sum(r * r))
        if not np.isfinite(j) or abs(j) < hop_floor:
            raise BrokenChainError(site)
        if abs(j.real) < 1e-12 * abs(j):
            raise BrokenChainError(
                site, f"hopping rate at site {site} has no real part to fix its sign"
            )
        hops[site] = j
        weights[site + 1] = r / j

    return mu, hops, weights


def reconstruct(
    lsum: LorentzianSum,
    hop_floor: float = 1e-9,
    drift_tol: float = 1e-2,
) -> tuple[EffectiveHamiltonian, np.ndarray]:
    """Assemble the effective Hamiltonian from a fitted mode set.

    Returns the tridiagonal Hamiltonian and the (site, mode) weight
    table. Raises :class:`BrokenChainError` when a hopping rate falls
    below ``hop_floor`` (the back-substitution would blow up) and
    :class:`InconsistentModesError` when the site weights drift away
    from unit normalization.
    """
    srt = lsum.sorted()
    mu, hops, weights = _recursion(srt.residues, srt.eigenvalues, hop_floor, drift_tol)
    n = len(mu)
    m = np.diag(mu)
    idx = np.arange(n - 1)
    m[idx, idx + 1] = hops
    m[idx + 1, idx] = hops
    return EffectiveHamiltonian(m), weights


def _hop_imag_penalty(p: np.ndarray, hop_floor: float) -> float:
    amp, phase, cen, hw = _split(p)
    order = np.argsort(cen)
    residues = (amp * np.exp(1j * phase))[order]
    eigenvalues = (cen - 1j * hw)[order]
    try:
        _, hops, _ = _recursion(residues, eigenvalues, hop_floor, drift_tol=np.inf)
    except (ValidationError, BrokenChainError):
        return _BROKEN_PENALTY
    return float(np.sum(np.abs(hops.imag)))


# ----------------------------------------------------------------------
# Fitting.
# ----------------------------------------------------------------------


def _check_margin(p0: np.ndarray, grid: FrequencyGrid, margin: float) -> None:
    amp, _, cen, hw = _split(p0)
    for a, c, h in zip(amp, cen, hw):
        if a <= 0:
            continue
        if c - margin * h < grid.lo or c + margin * h > grid.hi:
            raise GridMarginError(
                f"resonance near {c:.3f} GHz needs {margin:g} linewidths "
                f"({margin * h:.3f} GHz) of margin inside the grid "
                f"[{grid.lo:.3f}, {grid.hi:.3f}] GHz; widen the scan"
            )


def _perturb(p0: np.ndarray, start: int, config: FitConfig, grid: FrequencyGrid) -> np.ndarray:
    if start == 0:
        return p0.copy()
    rng = np.random.default_rng([max(config.seed, 0), start])
    amp, phase, cen, hw = _split(p0)
    s = config.perturb_scale
    amp = amp * np.exp(rng.uniform(-s, s, amp.size))
    phase = phase + rng.uniform(-s, s, phase.size)
    cen = cen + rng.uniform(-s, s, cen.size) * hw
    hw = hw * np.exp(rng.uniform(-s, s, hw.size))
    p = _pack(amp, phase, cen, hw)
    return p


def _fit_bounds(n: int, grid: FrequencyGrid):
    lo = np.concatenate(
        [np.zeros(n), np.full(n, -np.inf), np.full(n, grid.lo), np.full(n, 1e-9)]
    )
    hi = np.concatenate(
        [np.full(n, np.inf), np.full(n, np.inf), np.full(n, grid.hi), np.full(n, np.inf)]
    )
    return lo, hi


def _fit_modal(
    spectrum: Spectrum,
    n_modes: int,
    config: FitConfig,
    offset: float,
    with_penalties: bool,
):
    """Shared multi-start fit driver for reflection (offset 1) and
    transmission (offset 0) power spectra."""
    w = spectrum.grid.points
    y = spectrum.values
    p0 = _seed_params(spectrum, n_modes, dips=offset == 1.0)
    if config.enforce_margin:
        _check_margin(p0, spectrum.grid, config.margin_linewidths)
    lo, hi = _fit_bounds(n_modes, spectrum.grid)

    def residuals(p):
        return _power(p, w, offset) - y

    def jac(p):
        return _power_jac(p, w, offset)

    def objective(p):
        data = float(np.sum(residuals(p) ** 2))
        if not with_penalties:
            return data, 0.0, 0.0
        amp, phase, _, _ = _split(p)
        pres = abs(float(np.sum(amp * np.exp(1j * phase)).imag))
        hop = _hop_imag_penalty(p, config.hop_floor)
        return (
            data + config.residue_weight * pres + config.hop_weight * hop,
            pres,
            hop,
        )

    # Zero-amplitude seeds would zero out whole Jacobian columns and break
    # the adaptive trust-region scaling, so fit starts get a tiny floor.
    amp_floor = 1e-3 * max(float(np.median(_split(p0)[3])), 1e-9)

    best = None
    nfev_total = 0
    for start in range(max(config.n_starts, 1)):
        p_start = np.clip(_perturb(p0, start, config, spectrum.grid), lo, hi)
        p_start[:n_modes] = np.maximum(p_start[:n_modes], amp_floor)
        res = least_squares(
            residuals,
            p_start,
            jac=jac,
            bounds=(lo, hi),
            method="trf",
            x_scale="jac",
            ftol=config.ftol,
            xtol=config.xtol,
            gtol=config.gtol,
            max_nfev=config.max_nfev,
        )
        nfev_total += res.nfev
        obj, pres, hop = objective(res.x)
        if best is None or obj < best[0]:
            best = (obj, res.x, pres, hop, res.status > 0)
        if best[0] < config.early_stop_objective:
            break

    obj, p_best, pres, hop, converged = best
    converged = converged or obj < config.early_stop_objective
    if with_penalties and config.polish and pres + hop > config.polish_threshold:
        out = minimize(
            lambda p: objective(p)[0],
            p_best,
            method="Nelder-Mead",
            options={
                "maxfev": config.polish_maxfev,
                "xatol": 1e-10,
                "fatol": 1e-12,
            },
        )
        nfev_total += out.nfev
        if out.fun < obj:
            obj, pres, hop = objective(out.x)
            p_best = out.x

    report = FitReport(
        residual=float(obj),
        penalty_residue=float(pres),
        penalty_hops=float(hop),
        iterations=int(nfev_total),
        converged=bool(converged),
    )
    return p_best, report


def fit_reflection(
    spectrum: Spectrum, n_modes: int, config: FitConfig = FitConfig()
) -> tuple[LorentzianSum, FitReport]:
    """Fit |R|^2 to a sum of complex Lorentzians with physicality penalties.

    The returned report carries the final objective value (squared data
    misfit plus the residue-realness and hop-realness penalties), the two
    penalty magnitudes, the total function-evaluation count and a
    convergence flag. A non-converged fit is returned rather than raised;
    the caller decides what to do with it.
    """
    if spectrum.kind != "reflection":
        raise ValidationError("fit_reflection expects a reflection spectrum")
    p, report = _fit_modal(spectrum, n_modes, config, offset=1.0, with_penalties=True)
    return _params_to_sum(p), report


def eigenvalues_from_transmission(
    spectrum: Spectrum, n_modes: int, config: FitConfig = FitConfig()
) -> tuple[np.ndarray, FitReport]:
    """Fit |T|^2 to the modal form and return the complex eigenvalues only.

    The spectral weights entering a transmission spectrum are products of
    two different site amplitudes and cannot be separated, so no weight
    information is returned.
    """
    if spectrum.kind != "transmission":
        raise ValidationError("eigenvalues_from_transmission expects a transmission spectrum")
    p, report = _fit_modal(spectrum, n_modes, config, offset=0.0, with_penalties=False)
    _, _, cen, hw = _split(p)
    order = np.argsort(cen)
    return (cen - 1j * hw)[order], report


def spectrum_misfit(predicted: Spectrum, measured: Spectrum) -> float:
    """Relative L2 distance between two spectra on the same grid."""
    if len(predicted.grid) != len(measured.grid) or not np.array_equal(
        predicted.grid.points, measured.grid.points
    ):
        raise ResampleRequiredError("spectra live on different grids; resample first")
    diff = float(np.linalg.norm(predicted.values - measured.values))
    scale = float(np.linalg.norm(measured.values))
    return diff / scale if scale > 0 else diff


def validate_reconstruction(
    h_rec: EffectiveHamiltonian,
    gamma_in: float,
    gamma_out: float,
    measured_t: Spectrum,
) -> float:
    """Score a recovered Hamiltonian against a held-back transmission spectrum.

    Synthesizes |T|^2 from ``h_rec`` on the measurement grid and returns
    the normalized L2 misfit (0 for a perfect prediction).
    """
    if measured_t.kind != "transmission":
        raise ValidationError("validation needs a transmission spectrum")
    _, predicted = resolvent_response(h_rec, gamma_in, gamma_out, measured_t.grid)
    return spectrum_misfit(predicted, measured_t)
