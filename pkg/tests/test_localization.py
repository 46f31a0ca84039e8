"""Tests for participation ratios, eta and the mobility-edge table."""

import math

import numpy as np
import pytest

from src.core.model import ModelKind, build_hamiltonian, make_spec
from src.core.spectral import decompose
from src.diagnostics.localization import (EXTENDED, LOCALIZED, LocalizationProfile, classify_states,
                                          eta_critical_threshold, eta_floor, ipr_threshold, ipr_values,
                                          mobility_edge_table, mobility_edges, profile, profile_from_vectors)
from tests.helpers import site_basis_decomposition


def _profile(ipr):
    ipr = np.asarray(ipr, dtype=float)
    npr = 1.0 / (ipr.size * ipr)
    return LocalizationProfile(ipr=ipr, npr=npr, ipr_max=ipr.max(), ipr_min=ipr.min(),
                               ipr_avg=ipr.mean(), npr_avg=npr.mean(),
                               eta=math.log10(ipr.mean() * npr.mean()))


def test_single_site_state():
    prof = profile_from_vectors(np.eye(8, dtype=complex)[:, :1])
    assert prof.ipr[0] == pytest.approx(1.0)
    assert prof.npr[0] == pytest.approx(1.0 / 8)


def test_uniform_state():
    prof = profile_from_vectors(np.full((10, 1), 1.0 / math.sqrt(10), dtype=complex))
    assert prof.ipr[0] == pytest.approx(0.1)
    assert prof.npr[0] == pytest.approx(1.0)


def test_ipr_ignores_vector_norm():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((12, 3)) + 1j * rng.standard_normal((12, 3))
    np.testing.assert_allclose(ipr_values(v), ipr_values(5.0 * v))


def test_ipr_npr_product_and_permutation():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((16, 5)) + 1j * rng.standard_normal((16, 5))
    v /= np.linalg.norm(v, axis=0)
    prof = profile_from_vectors(v)
    np.testing.assert_allclose(prof.ipr * prof.npr * 16, 1.0)
    assert prof.ipr_min <= prof.ipr_avg <= prof.ipr_max

    perm = rng.permutation(16)
    np.testing.assert_allclose(ipr_values(v[perm]), prof.ipr)


def test_eta_of_pure_phases_is_near_floor():
    dim = 64
    extended = profile_from_vectors(np.full((dim, dim), 1.0 / 8.0, dtype=complex))
    localized = profile_from_vectors(np.eye(dim, dtype=complex))
    assert extended.eta == pytest.approx(eta_floor(dim))
    assert localized.eta == pytest.approx(eta_floor(dim))


def test_eta_threshold():
    assert ipr_threshold(1220) == pytest.approx(10 / 1220)
    assert eta_critical_threshold(1220) == pytest.approx(0.5 * (-math.log10(1220) + math.log10(0.25)))
    assert eta_critical_threshold(1220, margin=1.0) == pytest.approx(1.0 - math.log10(1220))


def test_mixture_raises_eta():
    dim = 64
    vectors = np.zeros((dim, dim), dtype=complex)
    vectors[:, : dim // 2] = 1.0 / 8.0
    vectors[:, dim // 2:] = np.eye(dim)[:, dim // 2:]
    prof = profile_from_vectors(vectors)
    assert prof.eta > eta_critical_threshold(dim)


def test_mobility_edges_between_runs():
    dec = site_basis_decomposition([0.0, 1.0, 2.0], n_components=1)
    intervals = mobility_edge_table(dec, _profile([0.9, 1e-4, 0.9]), threshold=0.01)
    assert [iv.label for iv in intervals] == [LOCALIZED, EXTENDED, LOCALIZED]
    assert [iv.n_states for iv in intervals] == [1, 1, 1]
    assert mobility_edges(intervals) == pytest.approx([0.5, 1.5])


def test_single_class_has_no_edges():
    dec = site_basis_decomposition([0.0, 1.0, 2.0, 3.0 + 1.0j], n_components=1)
    intervals = mobility_edge_table(dec, _profile([1e-4] * 4), threshold=0.01)
    assert len(intervals) == 1
    assert intervals[0].n_states == 4
    assert intervals[0].n_real == 3
    assert mobility_edges(intervals) == []


def test_classify_states():
    labels = classify_states(_profile([0.5, 0.001, 0.02]), threshold=0.01)
    assert list(labels) == [LOCALIZED, EXTENDED, LOCALIZED]


def test_deep_localized_model1_states():
    spec = make_spec(kind=ModelKind.MODEL1, J=0.1, V=1.0, phi=math.pi / 10, L=5)
    prof = profile(decompose(build_hamiltonian(spec)))
    assert prof.n_states == 10
    assert np.all(prof.ipr > 0.2)
