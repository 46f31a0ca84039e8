"""Tests for Hamiltonian construction."""

import math

import numpy as np
import pytest

from src.cli.validate import multiset_distance
from src.core.errors import SpecValidationError
from src.core.model import (SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z, Boundary, ModelKind, abelian_critical_point,
                            build_abelian_chains, build_hamiltonian, build_momentum_hamiltonian,
                            fibonacci_approximant, make_spec, momentum_blocks, onsite_block, onsite_direct,
                            pt_operator_check, spec_from_mapping, spec_from_text, spec_to_text, theta_matrix,
                            theta_matrix_swapped)


class TestThetaMatrix:
    def test_zero_angle_is_identity(self):
        np.testing.assert_allclose(theta_matrix(0.0), SIGMA_0, atol=1e-15)

    def test_half_pi_is_minus_i_sigma_x(self):
        np.testing.assert_allclose(theta_matrix(math.pi / 2), -1j * SIGMA_X, atol=1e-15)

    def test_factors_do_not_commute_at_quarter_pi(self):
        commutator = theta_matrix(math.pi / 4) @ theta_matrix_swapped(math.pi / 4) \
            - theta_matrix_swapped(math.pi / 4) @ theta_matrix(math.pi / 4)
        assert np.abs(commutator).max() > 0.1

    def test_unitary_for_real_angle(self):
        theta = theta_matrix(0.37)
        np.testing.assert_allclose(theta @ theta.conj().T, SIGMA_0, atol=1e-14)


class TestOnsiteBlock:
    def test_zero_angles(self):
        block = onsite_block(0.0, 0.0)
        assert (block.d0, block.dx, block.dy, block.dz) == pytest.approx((2, 0, 0, 0))

    def test_quarter_pi_half_pi(self):
        block = onsite_block(math.pi / 4, math.pi / 2)
        assert block.d0 == pytest.approx(0, abs=1e-15)
        assert block.dx == pytest.approx(-1)
        assert block.dy == pytest.approx(1)
        assert block.dz == pytest.approx(1)

    def test_imaginary_angle(self):
        block = onsite_block(0.5j, math.pi / 2)
        assert block.d0 == pytest.approx(0, abs=1e-15)
        assert block.dx == pytest.approx(math.cosh(1.0) - 1.0)
        assert block.dy == pytest.approx(1j * math.sinh(1.0))
        assert block.dz == pytest.approx(block.dy)

    def test_reconstruction_matches_direct_evaluation(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            theta = rng.uniform(-math.pi, math.pi) + 1j * rng.uniform(-1.0, 1.0)
            phi = rng.uniform(-math.pi, math.pi)
            np.testing.assert_allclose(onsite_block(theta, phi).matrix(), onsite_direct(theta, phi),
                                       rtol=0, atol=1e-12)


class TestSpec:
    def test_fibonacci_approximant(self):
        assert fibonacci_approximant(610) == (377, 610)
        assert fibonacci_approximant(8) == (5, 8)

    def test_default_alpha_follows_L(self):
        spec = make_spec(kind=ModelKind.MODEL1, L=13)
        assert (spec.alpha_p, spec.alpha_q) == (8, 13)
        assert spec.with_updates(L=21).alpha_q == 21

    def test_beta_rejected_for_model1(self):
        with pytest.raises(SpecValidationError, match="beta"):
            make_spec(kind=ModelKind.MODEL1, beta=0.2)

    def test_phi_out_of_range_names_key(self):
        with pytest.raises(SpecValidationError) as info:
            make_spec(kind=ModelKind.MODEL1, phi=4.0)
        assert info.value.key == "phi"

    def test_flux_excludes_full_period(self):
        assert make_spec(kind=ModelKind.MODEL2, beta=0.2, flux=6.28).flux == 6.28
        with pytest.raises(SpecValidationError) as info:
            make_spec(kind=ModelKind.MODEL2, beta=0.2, flux=2 * math.pi)
        assert info.value.key == "flux"

    def test_unknown_key_named(self):
        with pytest.raises(SpecValidationError) as info:
            spec_from_mapping({"kind": "Model1", "delta": "1"})
        assert info.value.key == "delta"

    def test_text_form(self):
        spec = spec_from_text("kind = Model3\nJ = 1\nV = 0.5\nphi = pi/2\ngamma = 0.25\nL = 13\n")
        assert spec.phi == pytest.approx(math.pi / 2)
        assert spec_from_text(spec_to_text(spec)) == spec


class TestRealSpace:
    def test_hermitian_limit_model3(self, hermitian_model3):
        assert build_hamiltonian(hermitian_model3).is_hermitian(atol=1e-12)

    def test_hermitian_limit_model2(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=2.0, phi=0.7, beta=0.0, L=13)
        assert build_hamiltonian(spec).is_hermitian(atol=1e-12)

    def test_model2_phi_zero_is_spin_diagonal(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=6.0, phi=0.0, beta=0.7, L=13)
        h = build_hamiltonian(spec).matrix
        assert np.all(h[0::2, 1::2] == 0)
        assert np.all(h[1::2, 0::2] == 0)

    def test_hoppings_and_wrap(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=0.0, beta=0.4, L=5)
        h = build_hamiltonian(spec).matrix
        assert h[0, 2] == pytest.approx(math.exp(-0.4))
        assert h[2, 0] == pytest.approx(math.exp(0.4))
        assert h[8, 0] == pytest.approx(math.exp(-0.4))
        assert h[0, 8] == pytest.approx(math.exp(0.4))

    def test_model1_is_unidirectional(self):
        spec = make_spec(kind=ModelKind.MODEL1, J=0.7, V=0.0, L=5)
        h = build_hamiltonian(spec).matrix
        assert h[0, 2] == pytest.approx(0.7)
        assert h[2, 0] == 0

    def test_flux_twists_hoppings(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=0.0, beta=0.0, L=5)
        h = build_hamiltonian(spec, flux=math.pi).matrix
        assert h[0, 2] == pytest.approx(np.exp(-1j * math.pi / 5))
        assert h[2, 0] == pytest.approx(np.exp(1j * math.pi / 5))

    def test_scalar_chain_dimension(self):
        spec = make_spec(kind=ModelKind.ABELIAN, J=1.0, V=1.0, gamma=0.2, L=13)
        assert build_hamiltonian(spec).dim == 13

    def test_pbc_requires_ring_length(self):
        spec = make_spec(kind=ModelKind.MODEL1, L=6)
        with pytest.raises(SpecValidationError) as info:
            build_hamiltonian(spec)
        assert info.value.key == "L"

    def test_obc_rejects_flux(self):
        spec = make_spec(kind=ModelKind.MODEL1, L=6, boundary=Boundary.OBC)
        assert build_hamiltonian(spec).dim == 12
        with pytest.raises(SpecValidationError) as info:
            build_hamiltonian(spec, flux=0.5)
        assert info.value.key == "flux"

    def test_spectrum_closed_under_conjugation(self):
        for spec in (make_spec(kind=ModelKind.MODEL1, J=0.6, V=1.0, phi=math.pi / 10, L=8),
                     make_spec(kind=ModelKind.MODEL2, J=1.0, V=3.0, phi=math.pi / 2, beta=0.8, L=13),
                     make_spec(kind=ModelKind.MODEL3, J=1.0, V=0.5, phi=math.pi / 2, gamma=0.6, L=13)):
            eigs = np.linalg.eigvals(build_hamiltonian(spec).matrix)
            assert multiset_distance(eigs, eigs.conj()) < 1e-7


class TestMomentumSpace:
    @pytest.mark.parametrize("L", [5, 8, 13])
    def test_matches_real_space_model2(self, L):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=1.5, phi=math.pi / 3, beta=0.3, L=L)
        real = np.linalg.eigvals(build_hamiltonian(spec).matrix)
        mom = np.linalg.eigvals(build_momentum_hamiltonian(spec).matrix)
        assert multiset_distance(real, mom) < 1e-7

    def test_matches_real_space_model1(self):
        spec = make_spec(kind=ModelKind.MODEL1, J=0.5, V=1.0, phi=math.pi / 10, L=5)
        real = np.linalg.eigvals(build_hamiltonian(spec).matrix)
        mom = np.linalg.eigvals(build_momentum_hamiltonian(spec).matrix)
        assert multiset_distance(real, mom) < 1e-7

    def test_free_ring_cosine_band(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=0.0, phi=0.0, beta=0.0, L=8)
        eigs = np.sort(np.linalg.eigvalsh(build_momentum_hamiltonian(spec).matrix))
        band = 2.0 * np.cos(2 * math.pi * np.arange(8) / 8)
        np.testing.assert_allclose(eigs, np.sort(np.repeat(band, 2)), atol=1e-12)

    def test_xi_block(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=2.0, phi=math.pi / 2, L=5)
        _, xi = momentum_blocks(spec)
        np.testing.assert_allclose(xi, SIGMA_X - 1j * SIGMA_Y - 1j * SIGMA_Z, atol=1e-15)

    def test_rejects_model3_and_obc(self, hermitian_model3):
        with pytest.raises(SpecValidationError) as info:
            build_momentum_hamiltonian(hermitian_model3)
        assert info.value.key == "kind"
        obc = make_spec(kind=ModelKind.MODEL1, L=5, boundary=Boundary.OBC)
        with pytest.raises(SpecValidationError) as info:
            build_momentum_hamiltonian(obc)
        assert info.value.key == "boundary"


class TestAbelianLimit:
    def test_phi_zero_chains_identical(self):
        spec = make_spec(kind=ModelKind.MODEL2, J=1.0, V=6.0, phi=0.0, beta=0.5, L=13)
        up, down = build_abelian_chains(spec)
        np.testing.assert_allclose(up, down)

    @pytest.mark.parametrize("kind,extra", [(ModelKind.MODEL1, {}), (ModelKind.MODEL2, {"beta": 0.4}),
                                            (ModelKind.MODEL3, {"gamma": 0.3})])
    def test_union_matches_full_at_pi(self, kind, extra):
        spec = make_spec(kind=kind, J=0.5, V=1.0, phi=math.pi, L=5, **extra)
        up, down = build_abelian_chains(spec)
        union = np.concatenate([np.linalg.eigvals(up), np.linalg.eigvals(down)])
        full = np.linalg.eigvals(build_hamiltonian(spec).matrix)
        assert multiset_distance(union, full) < 1e-7

    def test_rejects_coupled_phi(self):
        spec = make_spec(kind=ModelKind.MODEL1, phi=math.pi / 10, L=5)
        with pytest.raises(SpecValidationError) as info:
            build_abelian_chains(spec)
        assert info.value.key == "phi"

    def test_critical_points(self):
        assert abelian_critical_point(make_spec(kind=ModelKind.MODEL1, V=1.0))["value"] == pytest.approx(0.5)
        assert abelian_critical_point(make_spec(kind=ModelKind.MODEL2, J=1.0, V=6.0))["value"] \
            == pytest.approx(math.log(3.0))
        assert abelian_critical_point(make_spec(kind=ModelKind.MODEL3, J=1.0, V=0.5))["value"] \
            == pytest.approx(math.log(4.0) / 2)
        scalar = make_spec(kind=ModelKind.ABELIAN, J=1.0, V=1.0, gamma=0.1)
        assert abelian_critical_point(scalar) == {"parameter": "gamma", "value": pytest.approx(math.log(2.0))}


def test_pt_operator_check():
    report = pt_operator_check()
    assert report["passed"], report["residuals"]
    assert report["checks"]["sigma_y_to_sigma_z"]
    assert report["checks"]["sigma_x_fixed"]
