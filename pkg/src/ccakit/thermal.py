"""Voltage-to-potential thermal crosstalk model for heater-tuned chains.

Ohmic heating shifts each cavity resonance proportionally to the square
of the applied voltage. Heat also leaks to neighbours up to three sites
away, so the wavelength shift at site n collects: a static offset, the
site's own quadratic term, distance-weighted neighbour terms, and
cross products of voltage pairs inside the seven-site window. Chain
symmetry reduces the shared coefficients to 3 neighbour weights (one per
distance) and 12 pair-orbit weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ValidationError
from .lattice import (
    EffectiveHamiltonian,
    eig_complex_symmetric,
    to_detuning,
    to_wavelength,
)

#: Crosstalk reaches at most this many sites from a heater.
WINDOW = 3


@dataclass(frozen=True)
class OrbitTable:
    """Canonical indexing of unordered offset pairs under negation symmetry.

    Distinct offsets within ``[-WINDOW, WINDOW]`` form 21 unordered pairs;
    identifying {a, b} with {-a, -b} (mirror symmetry of the chain) leaves
    12 orbits: 3 containing offset 0, 3 antisymmetric pairs {a, -a} and 6
    generic ones.
    """

    reps: tuple[tuple[int, int], ...]
    _index: dict[tuple[int, int], int]

    @property
    def n_orbits(self) -> int:
        return len(self.reps)

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        """All unordered offset pairs, each as a sorted tuple."""
        return tuple(sorted(self._index))

    def orbit_of(self, a: int, b: int) -> int:
        if a == b:
            raise ValidationError("offset pairs must contain two distinct offsets")
        key = (min(a, b), max(a, b))
        if key not in self._index:
            raise ValidationError(f"offsets {a}, {b} fall outside the +/-{WINDOW} window")
        return self._index[key]


def orbit_table() -> OrbitTable:
    """Enumerate the 12 offset-pair orbits of the crosstalk window."""
    reps: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for pair in combinations(range(-WINDOW, WINDOW + 1), 2):
        mirrored = tuple(sorted((-pair[0], -pair[1])))
        rep = min(pair, mirrored)
        reps.setdefault(rep, []).append(pair)
    ordered = tuple(sorted(reps))
    index = {}
    for i, rep in enumerate(ordered):
        for pair in reps[rep]:
            index[pair] = i
    return OrbitTable(ordered, index)


_TABLE = orbit_table()


@dataclass
class CrosstalkModel:
    """Coefficients of the voltage-to-potential map.

    delta : per-site static wavelength offsets (nm).
    alpha : per-site heater efficiencies (nm/V^2), strictly positive.
    beta : neighbour weights for distances 1..3, shared across sites.
    gamma_cross : the 12 pair-orbit weights, indexed by :func:`orbit_table`.

    The self term carries an implicit unit coefficient (it is absorbed
    into alpha), which pins the overall scale during calibration.
    """

    n_sites: int
    delta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma_cross: np.ndarray

    def __post_init__(self):
        self.n_sites = int(self.n_sites)
        self.delta = np.asarray(self.delta, dtype=float).reshape(-1)
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        self.beta = np.asarray(self.beta, dtype=float).reshape(-1)
        self.gamma_cross = np.asarray(self.gamma_cross, dtype=float).reshape(-1)
        if self.n_sites < 1:
            raise ValidationError("n_sites must be >= 1")
        if self.delta.shape != (self.n_sites,) or self.alpha.shape != (self.n_sites,):
            raise ValidationError("delta and alpha must have one entry per site")
        if self.beta.shape != (WINDOW,):
            raise ValidationError(f"beta must hold exactly {WINDOW} distance weights")
        if self.gamma_cross.shape != (_TABLE.n_orbits,):
            raise ValidationError(
                f"gamma_cross must hold exactly {_TABLE.n_orbits} orbit weights"
            )
        if not np.all(self.alpha > 0):
            raise ValidationError("heater efficiencies alpha must be strictly positive")


def _as_profile(volts, n_sites: int) -> np.ndarray:
    v = np.asarray(volts, dtype=float)
    if v.shape[-1] != n_sites:
        raise ValidationError(
            f"voltage profile must have {n_sites} entries, got shape {v.shape}"
        )
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ValidationError("voltages must be finite and non-negative")
    return v


def _shift_core(delta, alpha, beta, gamma_cross, v) -> np.ndarray:
    """Wavelength shifts (nm) for profiles ``v`` of shape (..., N)."""
    n = alpha.size
    p = alpha * v * v
    out = delta + p
    for d in range(1, WINDOW + 1):
        if d >= n:
            break
        out[..., d:] += beta[d - 1] * p[..., :-d]
        out[..., :-d] += beta[d - 1] * p[..., d:]
    u = np.sqrt(alpha) * v
    for d1, d2 in _TABLE.pairs:
        g = gamma_cross[_TABLE.orbit_of(d1, d2)]
        lo = max(0, -d1)
        hi = n - 1 - max(0, d2)
        if lo > hi:
            continue
        out[..., lo : hi + 1] += g * u[..., lo + d1 : hi + 1 + d1] * u[..., lo + d2 : hi + 1 + d2]
    return out


def potential_shift(model: CrosstalkModel, volts) -> np.ndarray:
    """Per-site wavelength shifts (nm) produced by a voltage profile.

    Accepts a single profile of length N or a batch with shape (..., N);
    window terms referencing sites outside the chain are dropped.
    """
    v = _as_profile(volts, model.n_sites)
    return _shift_core(model.delta, model.alpha, model.beta, model.gamma_cross, v)


def single_heater_shift(alpha_n: float, beta_prime: float, volts: float) -> tuple[float, float]:
    """Self and neighbour wavelength shifts for one driven heater.

    Returns ``(alpha_n * V^2, beta_prime * V^2)`` - the reduced
    one-heater model used when extracting crosstalk from per-heater
    sweeps.
    """
    v = float(volts)
    if v < 0:
        raise ValidationError("voltage must be non-negative")
    return alpha_n * v * v, beta_prime * v * v


def predict_eigen_wavelengths(
    h0: EffectiveHamiltonian,
    model: CrosstalkModel,
    volts,
    ref_wavelength_nm: float,
) -> np.ndarray:
    """Sorted eigen-wavelengths (nm) of the chain under a voltage profile.

    The wavelength shifts are converted to frequency detunings, added to
    the diagonal of ``h0``, and the modified matrix is diagonalized.
    """
    if model.n_sites != h0.dim:
        raise ValidationError("model and Hamiltonian dimensions disagree")
    shift_nm = potential_shift(model, volts)
    h = h0.shifted(to_detuning(shift_nm, ref_wavelength_nm))
    eig = eig_complex_symmetric(h)
    lam = ref_wavelength_nm + to_wavelength(eig.eigenvalues.real, ref_wavelength_nm)
    return np.sort(lam)


def normalized_error(predicted, measured, j_norm: float) -> float:
    """Squared L2 deviation between two sorted eigen-wavelength vectors,
    normalized to the mean hopping rate (nm)."""
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    if p.shape != m.shape:
        raise ValidationError("predicted and measured vectors must have equal length")
    if not j_norm > 0:
        raise ValidationError("j_norm must be positive")
    return float(np.sum((p - m) ** 2) / j_norm)


def crosstalk_ratio(model: CrosstalkModel, site: int) -> float:
    """Neighbour-to-driven shift ratio for a single heater at ``site``.

    With only one heater on, the shift at the driven site is
    alpha*V^2 and at its neighbour beta_1*alpha*V^2, so the ratio is the
    distance-1 coefficient; the quadratic voltage dependence cancels and
    the ratio is voltage independent.
    """
    if not 0 <= site < model.n_sites - 1:
        raise ValidationError(f"site {site} has no in-range neighbour site+1")
    return float(model.beta[0])


def mean_hopping_nm(h: EffectiveHamiltonian, ref_wavelength_nm: float) -> float:
    """Mean |hopping rate| expressed as a wavelength scale (nm)."""
    if h.dim < 2:
        raise ValidationError("mean hopping rate needs at least 2 sites")
    ghz = float(np.mean(np.abs(h.hopping.real)))
    return float(abs(to_wavelength(ghz, ref_wavelength_nm)))
