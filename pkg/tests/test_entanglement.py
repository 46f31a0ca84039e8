"""Tests for the biorthogonal correlation matrix and entanglement entropy."""

import math

import numpy as np
import pytest

from src.core.errors import ComplexESWarning, EmptyOccupation
from src.core.model import build_hamiltonian
from src.core.spectral import decompose
from src.diagnostics.entanglement import (CorrelationSpectrum, OccupationRule, Subsystem, correlation_matrix,
                                          entanglement_entropy, entanglement_spectrum, entropy_from_xi,
                                          entropy_from_zeta, es_vs_energy_scan)
from tests.helpers import site_basis_decomposition

ENERGIES = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]


class TestCorrelationSpectrum:
    def test_pinned_spectrum_has_zero_entropy(self):
        result = entanglement_spectrum(np.diag([0.0, 1.0, 1.0, 0.0]).astype(complex))
        assert result.entropy == pytest.approx(0.0, abs=1e-12)
        assert result.pinned_fraction() == 1.0

    def test_half_filled_mode(self):
        result = entanglement_spectrum(np.array([[0.5]], dtype=complex))
        assert result.entropy == pytest.approx(math.log(2.0))
        assert result.xi[0] == pytest.approx(0.0, abs=1e-12)

    def test_entropy_from_xi_agrees(self):
        result = entanglement_spectrum(np.diag([0.2, 0.7, 0.4]).astype(complex))
        assert entropy_from_xi(result.xi) == pytest.approx(result.entropy, abs=1e-9)
        assert entropy_from_zeta(result.zeta) == pytest.approx(result.entropy)

    def test_complex_zeta_warns(self):
        C = np.array([[0.5, 1.0], [-1.0, 0.5]], dtype=complex)
        with pytest.warns(ComplexESWarning):
            result = entanglement_spectrum(C)
        assert result.complex_warning
        assert result.max_imag_zeta == pytest.approx(1.0)

    def test_clamped_xi_is_finite(self):
        result = entanglement_spectrum(np.diag([0.0, 1.0]).astype(complex))
        assert np.all(np.isfinite(result.xi))

    def test_empty(self):
        empty = CorrelationSpectrum.empty()
        assert empty.entropy == 0.0
        assert empty.zeta.size == 0
        assert empty.pinned_fraction() == 1.0


class TestCorrelationMatrix:
    def test_state_inside_subsystem(self):
        dec = site_basis_decomposition(ENERGIES)
        C = correlation_matrix(dec, OccupationRule.explicit([0]))
        assert C.shape == (4, 4)
        np.testing.assert_allclose(np.linalg.eigvals(C).real.max(), 1.0)
        assert entanglement_entropy(dec, OccupationRule.explicit([0])).entropy == pytest.approx(0.0, abs=1e-12)

    def test_state_outside_subsystem(self):
        dec = site_basis_decomposition(ENERGIES)
        C = correlation_matrix(dec, OccupationRule.explicit([7]))
        np.testing.assert_allclose(C, 0.0)

    def test_full_filling_gives_identity(self, hermitian_model3):
        dec = decompose(build_hamiltonian(hermitian_model3))
        C = correlation_matrix(dec, OccupationRule.explicit(range(dec.dim)))
        np.testing.assert_allclose(C, np.eye(C.shape[0]), atol=1e-8)

    def test_site_list_subsystem(self):
        dec = site_basis_decomposition(ENERGIES)
        C = correlation_matrix(dec, OccupationRule.explicit([6]), subsystem=[3])
        np.testing.assert_allclose(np.diag(C).real, [1.0, 0.0])

    def test_empty_occupation(self):
        dec = site_basis_decomposition(ENERGIES)
        with pytest.raises(EmptyOccupation):
            correlation_matrix(dec, OccupationRule.below(-1.0))
        assert entanglement_entropy(dec, OccupationRule.below(-1.0)).entropy == 0.0

    def test_explicit_out_of_range(self):
        dec = site_basis_decomposition(ENERGIES)
        with pytest.raises(IndexError):
            OccupationRule.explicit([8]).select(dec)

    def test_occupation_rules(self):
        dec = site_basis_decomposition([0.0, 1.0 - 1.0j, 1.0 + 1.0j, 2.0])
        np.testing.assert_array_equal(OccupationRule.below(1.5).select(dec), [0, 1, 2])
        np.testing.assert_array_equal(OccupationRule.all_real(1e-8).select(dec), [0, 3])

    def test_subsystem_rows(self):
        assert Subsystem.half_chain(8) == Subsystem(0, 4)
        np.testing.assert_array_equal(Subsystem(1, 3).rows(2), [2, 3, 4, 5])
        assert Subsystem(1, 3).complement(4) == [0, 3]


def _gap_cutoff(energies):
    """Re E cutoff in the widest gap near half filling."""
    re = np.sort(energies.real)
    mid = re.size // 2
    window = range(mid - 3, mid + 3)
    j = max(window, key=lambda k: re[k + 1] - re[k])
    return 0.5 * (re[j] + re[j + 1])


def test_hermitian_entropy_is_symmetric_between_halves(hermitian_model3):
    dec = decompose(build_hamiltonian(hermitian_model3))
    rule = OccupationRule.below(_gap_cutoff(dec.eigenvalues))
    s_a = entanglement_entropy(dec, rule, Subsystem(0, 4)).entropy
    s_b = entanglement_entropy(dec, rule, Subsystem(4, 8)).entropy
    assert s_a == pytest.approx(s_b, abs=1e-6)


def test_cutoff_scan(model2_small):
    dec = decompose(build_hamiltonian(model2_small))
    scan = es_vs_energy_scan(dec, n_cutoffs=9)
    assert len(scan) == 9
    first_cutoff, first = scan[0]
    assert first_cutoff == pytest.approx(dec.eigenvalues.real.min())
    assert first.entropy == 0.0 and first.zeta.size == 0
    assert all(result.entropy >= 0.0 for _, result in scan)

    parallel = es_vs_energy_scan(dec, n_cutoffs=9, workers=2)
    assert [c for c, _ in parallel] == [c for c, _ in scan]
    assert [r.entropy for _, r in parallel] == pytest.approx([r.entropy for _, r in scan])
