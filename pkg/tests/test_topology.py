"""Tests for flux-threaded winding numbers and base-energy selection."""

import math

import numpy as np
import pytest

from src.core.errors import BaseOnSpectrum, NoLocalizedStates, NonConvergent, SpecValidationError
from src.core.model import Boundary, ModelKind, build_hamiltonian, make_spec
from src.core.settings import TopologySettings
from src.core.spectral import decompose
from src.diagnostics.topology import (SpectrumSnapshot, hermitian_family, log_det, select_base_energies,
                                      step_off_level, winding_number, winding_pair, winding_trace, wrap_phase)


def test_log_det_matches_slogdet():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    sign, logabs = np.linalg.slogdet(a)
    result = log_det(a)
    assert result.log_abs == pytest.approx(logabs)
    assert np.exp(1j * result.phase) == pytest.approx(sign)
    assert -math.pi <= result.phase <= math.pi
    assert result.pivot_ratio > 0


def test_wrap_phase():
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_phase(-0.3) == pytest.approx(-0.3)


class TestWindingNumber:
    def test_nonreciprocal_ring_winds_twice(self, free_ring_model2):
        trace = winding_trace(free_ring_model2, 0.0)
        assert trace.winding == 2
        assert trace.turns[0] == 0.0
        assert trace.max_step_phase <= math.pi / 2

    def test_unidirectional_ring_winds_the_other_way(self):
        spec = make_spec(kind=ModelKind.MODEL1, J=1.0, V=0.0, L=8)
        assert winding_number(spec, 0.0) == -2

    def test_scalar_ring_winds_once(self):
        spec = make_spec(kind=ModelKind.ABELIAN, J=1.0, V=0.0, beta=0.5, L=8)
        assert winding_number(spec, 0.0) == 1

    def test_base_outside_loop(self, free_ring_model2):
        assert winding_number(free_ring_model2, 5.0) == 0

    def test_independent_of_grid(self, free_ring_model2):
        assert winding_number(free_ring_model2, 0.0, n_theta=32) == 2
        assert winding_number(free_ring_model2, 0.0, n_theta=512) == 2

    def test_stable_under_small_base_shift(self, free_ring_model2):
        assert winding_number(free_ring_model2, 1e-3) == winding_number(free_ring_model2, 0.0)

    def test_parallel_grid_matches_serial(self, free_ring_model2):
        serial = winding_trace(free_ring_model2, 0.2)
        parallel = winding_trace(free_ring_model2, 0.2, workers=3)
        np.testing.assert_array_equal(serial.thetas, parallel.thetas)
        np.testing.assert_array_equal(serial.turns, parallel.turns)

    def test_hermitian_family_has_zero_winding(self, hermitian_model3):
        assert hermitian_family(hermitian_model3)
        assert winding_trace(hermitian_model3, 0.1 + 0.5j).winding == 0
        assert winding_number(hermitian_model3, 0.0) == 0

    def test_pair_reuses_coincident_base(self, free_ring_model2):
        result = winding_pair(free_ring_model2, (0.0, 0.0))
        assert (result.w1, result.w2) == (2, 2)
        assert result.n_theta == 256


class TestWindingFailures:
    def test_open_chain_rejected(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=1.0, beta=0.2, L=8, boundary=Boundary.OBC)
        with pytest.raises(SpecValidationError) as info:
            winding_trace(spec, 0.0)
        assert info.value.key == "boundary"

    def test_base_crossed_by_spectrum(self):
        spec = make_spec(kind=ModelKind.ABELIAN, J=1.0, V=0.0, L=8)
        with pytest.raises(BaseOnSpectrum):
            winding_trace(spec, 1.9)

    def test_refinement_budget(self, free_ring_model2):
        settings = TopologySettings(n_theta=4, max_points=8, max_step_phase=0.1)
        with pytest.raises(NonConvergent):
            winding_trace(free_ring_model2, 0.0, settings)


def _snap(param, ipr, energies=None):
    ipr = np.asarray(ipr, dtype=float)
    energies = np.arange(ipr.size, dtype=float) if energies is None else np.asarray(energies, dtype=float)
    return SpectrumSnapshot(param=param, eigenvalues=energies.astype(complex), ipr=ipr)


EXT, LOC = 0.01, 0.9


class TestBaseEnergies:
    def sweep(self):
        return [
            _snap(0.0, [EXT, EXT, EXT, EXT]),
            _snap(1.0, [EXT, LOC, LOC, EXT]),
            _snap(2.0, [EXT, LOC, LOC, LOC], energies=[10.0, 11.0, 12.0, 13.0]),
            _snap(3.0, [LOC, LOC, LOC, LOC], energies=[20.0, 21.0, 22.0, 23.0]),
        ]

    def test_first_and_last_crossing_states(self):
        assert select_base_energies(self.sweep(), ipr_threshold=0.5) == (1.0, 20.0)

    def test_scan_follows_sweep_order_by_default(self):
        assert select_base_energies(self.sweep()[::-1], ipr_threshold=0.5) == (10.0, 2.0)

    def test_auto_orientation_scans_from_the_extended_end(self):
        assert select_base_energies(self.sweep()[::-1], ipr_threshold=0.5, orientation="auto") == (1.0, 20.0)

    def test_simultaneous_localization(self):
        sweep = [_snap(0.0, [EXT] * 4), _snap(1.0, [LOC] * 4, energies=[4.0, 5.0, 6.0, 7.0])]
        assert select_base_energies(sweep, ipr_threshold=0.5) == (4.0, 4.0)

    def test_simultaneous_delocalization(self):
        sweep = [_snap(0.0, [LOC] * 4), _snap(1.0, [EXT] * 4, energies=[5.0, 6.0, 7.0, 8.0])]
        assert select_base_energies(sweep, ipr_threshold=0.5) == (5.0, 5.0)

    def test_single_state_appearing_once(self):
        sweep = [_snap(0.0, [EXT] * 4), _snap(1.0, [EXT, LOC, EXT, EXT]), _snap(2.0, [EXT] * 4)]
        assert select_base_energies(sweep, ipr_threshold=0.5) == (1.0, 1.0)

    def test_crossings_ordered_by_real_energy(self):
        sweep = [_snap(0.0, [EXT] * 3, energies=[3.0, 1.0, 2.0]),
                 _snap(1.0, [LOC, EXT, LOC], energies=[3.0, 1.0, 2.0]),
                 _snap(2.0, [LOC] * 3, energies=[3.0, 1.0, 2.0])]
        assert select_base_energies(sweep, ipr_threshold=0.5) == (2.0, 1.0)

    def test_single_point_uses_its_localized_states(self):
        point = _snap(0.0, [EXT, LOC, LOC, EXT], energies=[0.5, 1.5, 2.5, 3.5])
        assert select_base_energies([point], ipr_threshold=0.5) == (1.5, 1.5)

    def test_default_threshold_scales_with_dimension(self):
        sweep = [_snap(0.0, [0.001] * 100), _snap(1.0, [0.5] * 100)]
        assert select_base_energies(sweep) == (0.0, 0.0)

    def test_no_localized_states(self):
        with pytest.raises(NoLocalizedStates):
            select_base_energies([_snap(0.0, [EXT] * 4), _snap(1.0, [EXT] * 4)], ipr_threshold=0.5)


class TestOffLevelBase:
    def test_step_into_gap_on_the_side_of_the_base(self):
        levels = np.array([0.0, 1.0, 3.0], dtype=complex)
        assert step_off_level(1.0, levels) == pytest.approx(2.0)
        assert step_off_level(0.9, levels) == pytest.approx(0.5)

    def test_step_inward_at_the_spectrum_edge(self):
        assert step_off_level(3.0, np.array([0.0, 1.0, 3.0], dtype=complex)) == pytest.approx(2.0)

    def test_conjugate_pairs_count_once(self):
        levels = np.array([1.0 + 1.0j, 1.0 - 1.0j, 2.0])
        assert step_off_level(1.0, levels) == pytest.approx(1.5)

    def test_base_on_a_level_of_the_ring(self, free_ring_model2, settings):
        edge = 2.0 * math.cosh(0.5)
        eigenvalues = decompose(build_hamiltonian(free_ring_model2), settings.spectral).eigenvalues
        result = winding_pair(free_ring_model2, (0.0, edge), eigenvalues=eigenvalues)
        assert (result.w1, result.w2) == (2, 2)
        assert result.base_energies[0] == 0.0
        assert result.base_energies[1] == pytest.approx(0.5 * edge * (1.0 + math.cos(math.pi / 4)))

    def test_off_level_base_is_kept(self, free_ring_model2, settings):
        eigenvalues = decompose(build_hamiltonian(free_ring_model2), settings.spectral).eigenvalues
        result = winding_pair(free_ring_model2, (0.3, 0.3), eigenvalues=eigenvalues)
        assert result.base_energies == (0.3, 0.3)
        assert result.w1 == 2
