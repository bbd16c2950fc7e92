import numpy as np
import pytest

from ccakit import (
    SPEED_OF_LIGHT_NM_GHZ,
    DegenerateSpectrumError,
    EffectiveHamiltonian,
    FrequencyGrid,
    LatticeSpec,
    SingularFrequencyError,
    Spectrum,
    ValidationError,
    build_hamiltonian,
    eig_complex_symmetric,
    modal_response,
    resolvent_response,
    suggest_grid,
    to_detuning,
    to_wavelength,
)
from util import random_hamiltonian, random_spec


class TestBuildHamiltonian:
    def test_two_site_symmetric(self):
        spec = LatticeSpec(2, [0.0, 0.0], [5.0], [0.0, 0.0], 0.0, 0.0)
        h = build_hamiltonian(spec)
        assert np.array_equal(h.entries, np.array([[0, 5], [5, 0]], dtype=complex))
        eig = eig_complex_symmetric(h)
        assert np.allclose(eig.eigenvalues, [-5.0, 5.0])

    def test_single_site_collects_all_half_rates(self):
        spec = LatticeSpec(1, [0.0], [], [1.0], 2.0, 0.0)
        h = build_hamiltonian(spec)
        assert h.entries[0, 0] == -1.5j

    def test_trace_matches_direct_summation(self):
        spec = random_spec(seed=42)
        h = build_hamiltonian(spec)
        # independent oracle: sum the contributions term by term
        expected = sum(spec.mu) - 0.5j * (
            sum(spec.kappa) + spec.gamma_in + spec.gamma_out
        )
        assert np.isclose(np.trace(h.entries), expected, rtol=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            LatticeSpec(3, [0, 0, 0], [1.0], [0, 0, 0], 0, 0)

    def test_negative_rates_rejected(self):
        with pytest.raises(ValidationError):
            LatticeSpec(2, [0, 0], [1.0], [-0.1, 0], 0, 0)
        with pytest.raises(ValidationError):
            LatticeSpec(2, [0, 0], [-1.0], [0, 0], 0, 0)


class TestEffectiveHamiltonian:
    def test_rejects_non_symmetric(self):
        m = np.array([[0, 1], [2, 0]], dtype=complex)
        with pytest.raises(ValidationError):
            EffectiveHamiltonian(m)

    def test_rejects_non_tridiagonal(self):
        m = np.zeros((3, 3), dtype=complex)
        m[0, 2] = m[2, 0] = 1.0
        with pytest.raises(ValidationError):
            EffectiveHamiltonian(m)

    def test_shifted_adds_to_diagonal(self):
        h, _ = random_hamiltonian(seed=7, n=4)
        shift = np.array([1.0, -2.0, 0.5, 0.0])
        h2 = h.shifted(shift)
        assert np.allclose(np.diag(h2.entries), np.diag(h.entries) + shift)
        assert np.allclose(h2.hopping, h.hopping)


class TestEigComplexSymmetric:
    def test_diagonal_matrix(self):
        h = EffectiveHamiltonian(np.diag([1 - 1j, 2 - 1j]))
        eig = eig_complex_symmetric(h)
        assert np.allclose(eig.eigenvalues, [1 - 1j, 2 - 1j])
        assert np.allclose(eig.eigenvectors, np.eye(2))

    def test_two_site_vectors(self):
        h = EffectiveHamiltonian(np.array([[0, 3], [3, 0]], dtype=complex))
        eig = eig_complex_symmetric(h)
        assert np.allclose(eig.eigenvalues, [-3.0, 3.0])
        s = 1 / np.sqrt(2)
        assert np.allclose(np.abs(eig.eigenvectors), s)
        # unconjugated self-products are exactly one
        assert np.allclose(np.sum(eig.eigenvectors**2, axis=0), 1.0)

    def test_trace_oracle_random_tridiagonal(self):
        h, _ = random_hamiltonian(seed=11)
        eig = eig_complex_symmetric(h)
        tr = np.trace(h.entries)
        assert abs(eig.eigenvalues.sum() - tr) <= 1e-10 * abs(tr)

    def test_completeness_and_spectral_reconstruction(self):
        h, _ = random_hamiltonian(seed=12)
        eig = eig_complex_symmetric(h)
        v = eig.eigenvectors
        assert np.allclose(v @ v.T, np.eye(h.dim), atol=1e-9)
        rebuilt = (v * eig.eigenvalues) @ v.T
        assert np.allclose(rebuilt, h.entries, atol=1e-9)

    def test_sign_convention_is_deterministic(self):
        h, _ = random_hamiltonian(seed=13)
        a = eig_complex_symmetric(h)
        b = eig_complex_symmetric(h)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)
        lead = a.eigenvectors[np.argmax(np.abs(a.eigenvectors) > 1e-12, axis=0),
                              np.arange(h.dim)]
        assert np.all(lead.real > 0)

    def test_degenerate_matrix_raises_with_mode_index(self):
        # classic 2x2 defective complex symmetric matrix: [[1, i], [i, -1]]
        m = np.array([[1.0, 1.0j], [1.0j, -1.0]])
        with pytest.raises(DegenerateSpectrumError) as exc:
            eig_complex_symmetric(EffectiveHamiltonian(m))
        assert exc.value.mode_index in (0, 1)
        flagged = eig_complex_symmetric(EffectiveHamiltonian(m), strict=False)
        assert flagged.condition_flags.any()


class TestConversions:
    def test_zero_maps_to_zero(self):
        assert to_wavelength(0.0, 1550.0) == 0.0

    def test_one_ghz_at_1550(self):
        # oracle: lambda^2/c with c in nm*GHz
        expected = -(1550.0**2) / SPEED_OF_LIGHT_NM_GHZ
        got = float(to_wavelength(1.0, 1550.0))
        assert got == pytest.approx(expected, rel=1e-15)
        assert got == pytest.approx(-0.008013877, rel=1e-6)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-500, 500, 100)
        back = np.asarray(to_detuning(to_wavelength(x, 1550.0), 1550.0))
        assert np.max(np.abs(back - x) / np.abs(x)) < 1e-12

    def test_invalid_reference(self):
        with pytest.raises(ValidationError):
            to_wavelength(1.0, 0.0)


class TestGridAndSpectrum:
    def test_grid_must_increase(self):
        with pytest.raises(ValidationError):
            FrequencyGrid(np.array([0.0, 0.0, 1.0]))
        with pytest.raises(ValidationError):
            FrequencyGrid(np.array([1.0]))

    def test_spectrum_validation(self):
        grid = FrequencyGrid.linspace(-1, 1, 5)
        with pytest.raises(ValidationError):
            Spectrum(grid, np.array([1, 2, 3]), "reflection")
        with pytest.raises(ValidationError):
            Spectrum(grid, -np.ones(5), "reflection")
        with pytest.raises(ValidationError):
            Spectrum(grid, np.ones(5), "emission")

    def test_grid_from_wavelength_range(self):
        grid = FrequencyGrid.from_wavelengths(1549.9, 1550.1, 51, 1550.0)
        assert len(grid) == 51
        assert np.all(np.diff(grid.points) > 0)
        # the wavelength endpoints map onto the grid ends (order reversed)
        assert grid.hi == pytest.approx(float(to_detuning(-0.1, 1550.0)), rel=1e-12)
        assert grid.lo == pytest.approx(float(to_detuning(0.1, 1550.0)), rel=1e-12)

    def test_suggest_grid_covers_eigenvalues(self):
        h, _ = random_hamiltonian(seed=21)
        grid = suggest_grid(h, 501)
        eig = eig_complex_symmetric(h)
        assert grid.lo < eig.eigenvalues.real.min()
        assert grid.hi > eig.eigenvalues.real.max()


class TestResolventResponse:
    def test_critical_coupling_null(self):
        spec = LatticeSpec(1, [3.0], [], [2.0], 2.0, 0.0)
        h = build_hamiltonian(spec)
        grid = FrequencyGrid(np.array([2.0, 3.0, 4.0]))
        refl, _ = resolvent_response(h, 2.0, 0.0, grid)
        assert refl.values[1] == 0.0

    def test_decoupled_port_gives_unit_reflection(self):
        h, _ = random_hamiltonian(seed=3, n=4)
        # rebuild without any input port contribution on the diagonal
        grid = suggest_grid(h, 64)
        refl, trans = resolvent_response(h, 0.0, 0.0, grid)
        assert np.allclose(refl.values, 1.0)
        assert np.allclose(trans.values, 0.0)

    def test_two_port_unitarity_lossless(self):
        spec = random_spec(seed=31, lossless=True)
        h = build_hamiltonian(spec)
        grid = suggest_grid(h, 800)
        refl, trans = resolvent_response(h, spec.gamma_in, spec.gamma_out, grid)
        assert np.max(np.abs(refl.values + trans.values - 1.0)) < 1e-9

    def test_singular_frequency_identified(self):
        spec = LatticeSpec(1, [0.0], [], [0.0], 0.0, 0.0)
        h = build_hamiltonian(spec)
        with pytest.raises(SingularFrequencyError) as exc:
            resolvent_response(h, 0.0, 0.0, FrequencyGrid(np.array([-1.0, 0.0, 1.0])))
        assert exc.value.omega == 0.0


class TestModalResponse:
    def test_single_mode_matches_closed_form(self):
        kappa, gamma = 1.0, 2.0
        spec = LatticeSpec(1, [0.0], [], [kappa], gamma, 0.0)
        h = build_hamiltonian(spec)
        eig = eig_complex_symmetric(h)
        grid = FrequencyGrid(np.array([-1.0, 0.0, 1.0]))
        refl, _ = modal_response(eig, gamma, 0.0, grid)
        beta = 0.5 * (kappa + gamma)
        assert refl.values[1] == pytest.approx((1 - gamma / beta) ** 2, rel=1e-12)

    def test_critical_coupling_null_single_mode(self):
        spec = LatticeSpec(1, [0.0], [], [2.0], 2.0, 0.0)
        h = build_hamiltonian(spec)
        eig = eig_complex_symmetric(h)
        refl, _ = modal_response(eig, 2.0, 0.0, FrequencyGrid(np.array([-1.0, 0.0, 1.0])))
        assert refl.values[1] < 1e-24

    def test_agrees_with_resolvent(self):
        spec = random_spec(seed=17)
        h = build_hamiltonian(spec)
        grid = suggest_grid(h, 700)
        r1, t1 = resolvent_response(h, spec.gamma_in, spec.gamma_out, grid)
        r2, t2 = modal_response(eig_complex_symmetric(h), spec.gamma_in, spec.gamma_out, grid)
        assert np.max(np.abs(r1.values - r2.values)) <= 1e-9 * np.max(r1.values)
        assert np.max(np.abs(t1.values - t2.values)) <= 1e-9 * max(np.max(t1.values), 1e-30)

    def test_lossless_two_site_peak_height(self):
        # closed form at resonance: T(+-J) = J^2 / (gamma^2/16 + J^2)
        j, gamma = 20.0, 0.2
        spec = LatticeSpec(2, [0.0, 0.0], [j], [0.0, 0.0], gamma, gamma)
        h = build_hamiltonian(spec)
        eig = eig_complex_symmetric(h)
        grid = FrequencyGrid(np.array([-j, 0.0, j]))
        _, trans = modal_response(eig, gamma, gamma, grid)
        expected = j**2 / (gamma**2 / 16 + j**2)
        assert trans.values[0] == pytest.approx(expected, rel=1e-10)
        assert trans.values[2] == pytest.approx(expected, rel=1e-10)
        assert expected > 1 - 1e-4  # unit-height limit as gamma -> 0+

    def test_flagged_modes_rejected(self):
        m = np.array([[1.0, 1.0j], [1.0j, -1.0]])
        eig = eig_complex_symmetric(EffectiveHamiltonian(m), strict=False)
        with pytest.raises(DegenerateSpectrumError):
            modal_response(eig, 1.0, 1.0, FrequencyGrid.linspace(-1, 1, 5))


class TestReciprocity:
    def test_transmission_invariant_under_reversal(self):
        spec = random_spec(seed=23, n=6)
        rev = LatticeSpec(
            6, spec.mu[::-1], spec.hop[::-1], spec.kappa[::-1],
            spec.gamma_out, spec.gamma_in,
        )
        ha, hb = build_hamiltonian(spec), build_hamiltonian(rev)
        grid = suggest_grid(ha, 300)
        _, ta = resolvent_response(ha, spec.gamma_in, spec.gamma_out, grid)
        _, tb = resolvent_response(hb, spec.gamma_out, spec.gamma_in, grid)
        assert np.max(np.abs(ta.values - tb.values)) < 1e-12


class TestResidueNormalization:
    def test_end_site_weights_sum_to_port_share(self):
        spec = random_spec(seed=29)
        h = build_hamiltonian(spec)
        eig = eig_complex_symmetric(h)
        w0 = eig.eigenvectors[0, :]
        total = np.sum(w0 * w0)
        assert total == pytest.approx(1.0, abs=1e-10)
        residues = spec.gamma_in * w0 * w0
        assert np.sum(residues) == pytest.approx(spec.gamma_in, abs=1e-9)
