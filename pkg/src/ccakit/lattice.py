"""Effective Hamiltonians and scattering spectra of 1D lossy cavity chains.

A chain of N coupled cavities with onsite detunings, nearest-neighbour
hopping, onsite loss and input/output port couplings on the end sites is
completely described by a complex *symmetric* (transpose, not conjugate
transpose) tridiagonal matrix. This module builds that matrix from a
physical description, diagonalizes it under the unconjugated bilinear
inner product, and synthesizes reflection/transmission power spectra
either by direct linear solves or from the eigenmode expansion.

All internal frequencies are detunings in GHz about a reference
wavelength; wavelengths (nm) appear only through the first-order
conversion helpers :func:`to_wavelength` / :func:`to_detuning`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    SingularFrequencyError,
    ValidationError,
)

# Speed of light in nm*GHz (numerically equal to its m/s value).
SPEED_OF_LIGHT_NM_GHZ = 299_792_458.0

_REFLECTION = "reflection"
_TRANSMISSION = "transmission"


def _nm_per_ghz(ref_wavelength_nm: float) -> float:
    if not ref_wavelength_nm > 0:
        raise ValidationError("ref_wavelength must be positive")
    return ref_wavelength_nm * ref_wavelength_nm / SPEED_OF_LIGHT_NM_GHZ


def to_wavelength(detuning_ghz, ref_wavelength_nm):
    """Wavelength shift (nm) produced by a frequency detuning (GHz).

    First-order dispersion about the reference wavelength: a positive
    detuning shortens the wavelength, so the slope is negative.
    """
    return -_nm_per_ghz(ref_wavelength_nm) * np.asarray(detuning_ghz, dtype=float)


def to_detuning(wavelength_shift_nm, ref_wavelength_nm):
    """Inverse of :func:`to_wavelength`: wavelength shift (nm) to GHz."""
    return -np.asarray(wavelength_shift_nm, dtype=float) / _nm_per_ghz(ref_wavelength_nm)


@dataclass
class LatticeSpec:
    """Physical parameters of an N-site coupled cavity chain.

    Parameters
    ----------
    n_sites : int
        Number of cavities N (>= 1).
    mu : array_like, shape (N,)
        Onsite detunings in GHz relative to the reference frequency.
    hop : array_like, shape (N-1,)
        Nearest-neighbour hopping rates in GHz, real and strictly positive.
    kappa : array_like, shape (N,)
        Onsite loss rates in GHz, non-negative.
    gamma_in, gamma_out : float
        Port coupling rates (GHz) at site 0 and site N-1, non-negative.
    ref_wavelength : float
        Reference wavelength in nm used for unit conversions.
    """

    n_sites: int
    mu: np.ndarray
    hop: np.ndarray
    kappa: np.ndarray
    gamma_in: float
    gamma_out: float
    ref_wavelength: float = 1550.0

    def __post_init__(self):
        self.n_sites = int(self.n_sites)
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.hop = np.asarray(self.hop, dtype=float).reshape(-1)
        self.kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        self.gamma_in = float(self.gamma_in)
        self.gamma_out = float(self.gamma_out)
        self.ref_wavelength = float(self.ref_wavelength)
        n = self.n_sites
        if n < 1:
            raise ValidationError("n_sites must be >= 1")
        if self.mu.shape != (n,) or self.kappa.shape != (n,) or self.hop.shape != (n - 1,):
            raise ValidationError(
                "dimension mismatch: expected mu/kappa of length "
                f"{n} and hop of length {n - 1}, got {self.mu.size}/{self.kappa.size}/{self.hop.size}"
            )
        if np.any(self.kappa < 0):
            raise ValidationError("loss rates kappa must be non-negative")
        if self.gamma_in < 0 or self.gamma_out < 0:
            raise ValidationError("port coupling rates must be non-negative")
        if self.hop.size and not np.all(self.hop > 0):
            raise ValidationError("hopping rates must be real and strictly positive")
        if not self.ref_wavelength > 0:
            raise ValidationError("ref_wavelength must be positive")


@dataclass
class EffectiveHamiltonian:
    """Complex symmetric tridiagonal N x N matrix in GHz."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValidationError("Hamiltonian must be a square matrix")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > 1e-9 * scale:
            raise ValidationError("Hamiltonian must equal its transpose")
        band = np.tri(m.shape[0], k=1) * np.tri(m.shape[0], k=1).T
        if np.max(np.abs(m * (1 - band))) > 1e-9 * scale:
            raise ValidationError("Hamiltonian must be tridiagonal")
        self.entries = m

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    @property
    def hopping(self) -> np.ndarray:
        """Super-diagonal entries (length N-1)."""
        return np.diag(self.entries, k=1).copy()

    def shifted(self, diag_shift_ghz) -> "EffectiveHamiltonian":
        """New Hamiltonian with ``diag_shift_ghz`` added to the diagonal."""
        shift = np.asarray(diag_shift_ghz)
        if shift.shape != (self.dim,):
            raise ValidationError(
                f"diagonal shift must have length {self.dim}, got shape {shift.shape}"
            )
        out = self.entries.copy()
        out[np.diag_indices(self.dim)] += shift
        return EffectiveHamiltonian(out)


def build_hamiltonian(spec: LatticeSpec) -> EffectiveHamiltonian:
    """Assemble the effective Hamiltonian of a lossy two-port chain.

    Diagonal entry n is mu_n - j*kappa_n/2, with an additional
    -j*gamma_in/2 on site 0 and -j*gamma_out/2 on site N-1 (both land on
    the single site when N == 1). Off-diagonal entries are the hopping
    rates.
    """
    diag = spec.mu.astype(complex) - 0.5j * spec.kappa
    diag[0] -= 0.5j * spec.gamma_in
    diag[-1] -= 0.5j * spec.gamma_out
    m = np.diag(diag)
    idx = np.arange(spec.n_sites - 1)
    m[idx, idx + 1] = spec.hop
    m[idx + 1, idx] = spec.hop
    return EffectiveHamiltonian(m)


@dataclass
class EigenSystem:
    """Eigendecomposition under the unconjugated (transpose) inner product.

    Column alpha of ``eigenvectors`` holds the site amplitudes of mode
    alpha, rescaled so that the *unconjugated* self-product
    sum_n v_n**2 equals 1. ``condition_flags[alpha]`` marks modes whose
    raw self-product magnitude fell below the conditioning tolerance
    (quasi-defective); flagged modes keep their unit 2-norm instead.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    condition_flags: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.condition_flags is None:
            self.condition_flags = np.zeros(len(self.eigenvalues), dtype=bool)


def eig_complex_symmetric(
    h: EffectiveHamiltonian, tol: float = 1e-8, strict: bool = True
) -> EigenSystem:
    """Diagonalize a complex symmetric matrix with bilinear normalization.

    Uses a general dense eigensolver, sorts modes by ascending real part,
    and rescales each eigenvector so its unconjugated self-product is
    exactly 1. The remaining sign freedom is fixed by requiring a positive
    real part on the first non-negligible component, which makes repeated
    decompositions bit-stable.

    Parameters
    ----------
    h : EffectiveHamiltonian
    tol : float
        Conditioning threshold on the raw self-product magnitude of the
        unit 2-norm eigenvectors. Below it a mode counts as
        quasi-defective.
    strict : bool
        If True (default) raise :class:`DegenerateSpectrumError` on the
        first quasi-defective mode; if False, flag it and return.
    """
    eps, vecs = np.linalg.eig(h.entries)
    order = np.lexsort((eps.imag, eps.real))
    eps = eps[order]
    vecs = vecs[:, order]

    self_prod = np.sum(vecs * vecs, axis=0)
    flags = np.abs(self_prod) < tol
    if strict and flags.any():
        raise DegenerateSpectrumError(int(np.argmax(flags)))

    ok = ~flags
    vecs[:, ok] = vecs[:, ok] / np.sqrt(self_prod[ok])

    # Sign convention: positive real part of the first non-negligible component.
    mags = np.abs(vecs)
    lead_idx = np.argmax(mags > 1e-12 * np.max(mags, axis=0), axis=0)
    lead = vecs[lead_idx, np.arange(vecs.shape[1])]
    flip = (lead.real < 0) | ((lead.real == 0) & (lead.imag < 0))
    vecs[:, flip & ok] *= -1

    return EigenSystem(eps, vecs, flags)


@dataclass
class FrequencyGrid:
    """Strictly increasing probe detunings in GHz."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1)
        if p.size < 2:
            raise ValidationError("frequency grid needs at least 2 points")
        if not np.all(np.diff(p) > 0):
            raise ValidationError("frequency grid must be strictly increasing")
        self.points = p

    def __len__(self) -> int:
        return self.points.size

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    @classmethod
    def linspace(cls, lo: float, hi: float, n: int) -> "FrequencyGrid":
        return cls(np.linspace(lo, hi, int(n)))

    @classmethod
    def from_wavelengths(
        cls, lo_nm: float, hi_nm: float, n: int, ref_wavelength_nm: float
    ) -> "FrequencyGrid":
        """Uniform wavelength scan converted to ascending detunings."""
        wl = np.linspace(float(lo_nm), float(hi_nm), int(n))
        det = np.sort(to_detuning(wl - ref_wavelength_nm, ref_wavelength_nm))
        return cls(det)


@dataclass
class Spectrum:
    """Power spectrum |R|^2 or |T|^2 sampled on a frequency grid."""

    grid: FrequencyGrid
    values: np.ndarray
    kind: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != len(self.grid):
            raise ValidationError("spectrum length must match its grid")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("spectrum values must be finite and non-negative")
        if self.kind not in (_REFLECTION, _TRANSMISSION):
            raise ValidationError(f"unknown spectrum kind {self.kind!r}")
        self.values = v


def suggest_grid(h: EffectiveHamiltonian, points: int = 2001, pad_ghz: float | None = None) -> FrequencyGrid:
    """Probe grid covering every resonance of ``h`` with generous margin.

    The span is a Gershgorin bound on the real eigenvalue range, padded by
    ``pad_ghz`` (default: ten times the largest site linewidth, at least
    5 GHz) so fitted lineshapes are not truncated.
    """
    diag = np.diag(h.entries)
    radius = np.sum(np.abs(h.entries - np.diag(diag)), axis=1)
    if pad_ghz is None:
        pad_ghz = max(5.0, 10.0 * float(np.max(-diag.imag, initial=0.0)))
    lo = float(np.min(diag.real - radius)) - pad_ghz
    hi = float(np.max(diag.real + radius)) + pad_ghz
    return FrequencyGrid.linspace(lo, hi, points)


def _check_rates(gamma_in: float, gamma_out: float) -> tuple[float, float]:
    gi, go = float(gamma_in), float(gamma_out)
    if gi < 0 or go < 0:
        raise ValidationError("port coupling rates must be non-negative")
    return gi, go


def resolvent_response(
    h: EffectiveHamiltonian,
    gamma_in: float,
    gamma_out: float,
    grid: FrequencyGrid,
) -> tuple[Spectrum, Spectrum]:
    """Reflection and transmission spectra by direct linear solves.

    For every probe detuning omega the system (omega*I - H) x = e_0 is
    solved; the port amplitudes give |R|^2 = |1 - j*gamma_in*x_0|^2 and
    |T|^2 = gamma_in*gamma_out*|x_{N-1}|^2. The port rates must be the
    ones already folded into the diagonal of ``h``.
    """
    gi, go = _check_rates(gamma_in, gamma_out)
    n = h.dim
    w = grid.points
    a = -np.broadcast_to(h.entries, (w.size, n, n)).copy()
    a[:, np.arange(n), np.arange(n)] += w[:, None]
    rhs = np.zeros(n)
    rhs[0] = 1.0
    try:
        x = np.linalg.solve(a, np.broadcast_to(rhs, (w.size, n))[..., None])[..., 0]
    except np.linalg.LinAlgError:
        for k in range(w.size):
            try:
                np.linalg.solve(a[k], rhs)
            except np.linalg.LinAlgError:
                raise SingularFrequencyError(w[k]) from None
        raise
    finite = np.isfinite(x).all(axis=1)
    if not finite.all():
        raise SingularFrequencyError(w[int(np.argmin(finite))])

    refl = np.abs(1.0 - 1j * gi * x[:, 0]) ** 2
    trans = gi * go * np.abs(x[:, -1]) ** 2
    return Spectrum(grid, refl, _REFLECTION), Spectrum(grid, trans, _TRANSMISSION)


def modal_response(
    eig: EigenSystem,
    gamma_in: float,
    gamma_out: float,
    grid: FrequencyGrid,
) -> tuple[Spectrum, Spectrum]:
    """Reflection and transmission spectra from the eigenmode expansion.

    Equivalent to :func:`resolvent_response` whenever no mode is flagged
    quasi-defective; raises :class:`DegenerateSpectrumError` otherwise
    (the caller should fall back to the resolvent).
    """
    if eig.condition_flags.any():
        raise DegenerateSpectrumError(int(np.argmax(eig.condition_flags)))
    gi, go = _check_rates(gamma_in, gamma_out)
    w0 = eig.eigenvectors[0, :]
    wn = eig.eigenvectors[-1, :]
    denom = grid.points[:, None] - eig.eigenvalues[None, :]
    with np.errstate(divide="raise", invalid="raise"):
        try:
            refl_amp = 1.0 - 1j * gi * np.sum(w0 * w0 / denom, axis=1)
            trans_amp = -1j * np.sqrt(gi * go) * np.sum(wn * w0 / denom, axis=1)
        except FloatingPointError:
            bad = int(np.argmin(np.min(np.abs(denom), axis=1)))
            raise SingularFrequencyError(grid.points[bad]) from None
    return (
        Spectrum(grid, np.abs(refl_amp) ** 2, _REFLECTION),
        Spectrum(grid, np.abs(trans_amp) ** 2, _TRANSMISSION),
    )


def eigen_wavelengths(h: EffectiveHamiltonian, ref_wavelength_nm: float) -> np.ndarray:
    """Sorted eigen-wavelengths (nm) of ``h`` about the reference."""
    eig = eig_complex_symmetric(h)
    lam = ref_wavelength_nm + to_wavelength(eig.eigenvalues.real, ref_wavelength_nm)
    return np.sort(lam)
