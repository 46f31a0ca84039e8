"""
Non-Hermitian eigendecomposition with biorthogonal left/right pairing,
plus the global spectral-realness measures.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import PairingFailure
from .model import HamiltonianMatrix
from .settings import SpectralSettings

logger = logging.getLogger(__name__)

# Smallest admissible singular value of a cluster's overlap matrix <L|R>.
OVERLAP_FLOOR = 1e-13


@dataclass(frozen=True)
class SpectralDecomposition:
    """
    Eigenvalues sorted by (Re E, Im E) with bi-normalized eigenvector pairs.

    Column j of right_vectors / left_vectors belongs to eigenvalues[j];
    left_eigenvalues[j] is the matched eigenvalue of H^dag (close to conj(E_j)).
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    left_eigenvalues: np.ndarray
    n_components: int = 2
    perturbed: bool = False
    norm: float = field(default=1.0)

    def __post_init__(self):
        for arr in (self.eigenvalues, self.right_vectors, self.left_vectors, self.left_eigenvalues):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_sites(self) -> int:
        return self.dim // self.n_components

    def biorthogonality_residual(self) -> float:
        overlap = self.left_vectors.conj().T @ self.right_vectors
        return float(np.abs(overlap - np.eye(self.dim)).max())

    def completeness_residual(self) -> float:
        identity = self.right_vectors @ self.left_vectors.conj().T
        return float(np.linalg.norm(identity - np.eye(self.dim), "fro"))

    def eigen_residual(self, matrix: np.ndarray) -> float:
        """max_j ||H r_j - E_j r_j|| (right vectors are unit-normalized)."""
        res = matrix @ self.right_vectors - self.right_vectors * self.eigenvalues[None, :]
        return float(np.linalg.norm(res, axis=0).max())


@dataclass(frozen=True)
class SpectralRealness:
    """Extrema of |Im E| and the fraction rho of complex eigenvalues."""

    e_imag_max: float
    e_imag_min: float
    rho: float
    tol_imag: float

    @property
    def real_fraction(self) -> float:
        return 1.0 - self.rho


MatrixLike = Union[HamiltonianMatrix, np.ndarray]


def _as_array(H: MatrixLike) -> Tuple[np.ndarray, int]:
    if isinstance(H, HamiltonianMatrix):
        return np.asarray(H.matrix, dtype=complex), H.n_components
    return np.asarray(H, dtype=complex), 1


def sort_order(eigenvalues: np.ndarray) -> np.ndarray:
    """Indices sorting eigenvalues by real part, then imaginary part."""
    return np.lexsort((eigenvalues.imag, eigenvalues.real))


def _clusters(values: np.ndarray, tol: float) -> np.ndarray:
    """Single-linkage cluster labels of complex numbers closer than tol."""
    close = np.abs(values[:, None] - values[None, :]) <= tol
    _, labels = connected_components(csr_matrix(close), directed=False)
    return labels


def _biorthonormalize(right: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Rescale/mix the left block so that left^H right = identity."""
    overlap = left.conj().T @ right
    smallest = sla.svdvals(overlap).min()
    if smallest < OVERLAP_FLOOR:
        raise PairingFailure(
            f"left/right overlap is singular (smallest singular value {smallest:.2e}); "
            f"the spectrum is too close to an exceptional point")
    return left @ np.linalg.inv(overlap).conj().T


def _pair_adjoint(a: np.ndarray, w: np.ndarray, vr: np.ndarray, scale: float,
                  settings: SpectralSettings) -> Tuple[np.ndarray, np.ndarray]:
    """Left vectors from a second decomposition of H^dag, matched cluster by cluster."""
    wl, vl = sla.eig(a.conj().T)
    target = wl.conj()
    match_tol = settings.match_tol_rel * scale
    labels = _clusters(w, match_tol)

    available = np.ones(len(wl), dtype=bool)
    left = np.empty_like(vr)
    matched = np.empty_like(w)
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        k = len(members)
        dist = np.abs(target[:, None] - w[None, members]).min(axis=1)
        dist[~available] = np.inf
        nearest = np.argsort(dist, kind="stable")[:k + 1]
        if dist[nearest[k - 1]] > match_tol:
            raise PairingFailure(
                f"no adjoint eigenvalue within {match_tol:.2e} of E={w[members[0]]:.6g} "
                f"(closest at {dist[nearest[k - 1]]:.2e})")
        if len(nearest) > k and dist[nearest[k]] <= match_tol:
            raise PairingFailure(
                f"ambiguous pairing near E={w[members[0]]:.6g}: "
                f"{k + 1} adjoint eigenvalues within {match_tol:.2e} for {k} states")
        chosen = nearest[:k]
        available[chosen] = False
        left[:, members] = _biorthonormalize(vr[:, members], vl[:, chosen])
        closest = np.abs(target[chosen][None, :] - w[members][:, None]).argmin(axis=1)
        matched[members] = wl[chosen][closest]
    return left, matched


def _pair_lapack(vl: np.ndarray, w: np.ndarray, vr: np.ndarray, scale: float,
                 settings: SpectralSettings) -> Tuple[np.ndarray, np.ndarray]:
    """Left vectors returned by the same LAPACK call, bi-normalized within degenerate clusters."""
    labels = _clusters(w, settings.degeneracy_tol_rel * scale)
    left = np.empty_like(vr)
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        left[:, members] = _biorthonormalize(vr[:, members], vl[:, members])
    return left, w.conj()


def _decompose_once(a: np.ndarray, n_components: int, settings: SpectralSettings,
                    scale: float, perturbed: bool) -> SpectralDecomposition:
    if settings.left_method == "lapack":
        w, vl, vr = sla.eig(a, left=True, right=True)
    else:
        w, vr = sla.eig(a)
        vl = None

    order = sort_order(w)
    w, vr = w[order], vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)[None, :]

    if vl is None:
        left, matched = _pair_adjoint(a, w, vr, scale, settings)
    else:
        left, matched = _pair_lapack(vl[:, order], w, vr, scale, settings)

    return SpectralDecomposition(
        eigenvalues=w,
        right_vectors=vr,
        left_vectors=left,
        left_eigenvalues=matched,
        n_components=n_components,
        perturbed=perturbed,
        norm=scale,
    )


def decompose(H: MatrixLike, settings: Optional[SpectralSettings] = None,
              seed: int = 0) -> SpectralDecomposition:
    """
    Full eigendecomposition with biorthogonal pairing.

    Args:
        H: Hamiltonian (HamiltonianMatrix or square array)
        settings: tolerances and left-vector method
        seed: seeds the optional perturbation retry

    Returns:
        SpectralDecomposition sorted by (Re E, Im E)

    Raises:
        PairingFailure: when pairing is ambiguous and no retry is allowed
    """
    settings = settings or SpectralSettings()
    a, n_components = _as_array(H)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")

    scale = max(float(np.linalg.norm(a, 1)), np.finfo(float).tiny)
    try:
        return _decompose_once(a, n_components, settings, scale, perturbed=False)
    except PairingFailure as e:
        if not settings.perturb_retry:
            raise
        logger.warning(f"Pairing failed ({e}); retrying with a {settings.perturb_scale:.0e} perturbation")
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape)
        perturbed = a + settings.perturb_scale * scale * noise / np.linalg.norm(noise, 1)
        return _decompose_once(perturbed, n_components, settings, scale, perturbed=True)


def default_tol_imag(eigenvalues: np.ndarray, rel: float = 1e-8) -> float:
    """Realness tolerance: rel times the spectral radius."""
    if eigenvalues.size == 0:
        return 0.0
    return rel * float(np.abs(eigenvalues).max())


def realness(dec: SpectralDecomposition, tol_imag: Optional[float] = None,
             tol_imag_rel: float = 1e-8) -> SpectralRealness:
    """E_I^max, E_I^min and rho (fraction of |Im E| above tol_imag)."""
    return realness_of(dec.eigenvalues, tol_imag, tol_imag_rel)


def realness_of(eigenvalues: np.ndarray, tol_imag: Optional[float] = None,
                tol_imag_rel: float = 1e-8) -> SpectralRealness:
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    if tol_imag is None:
        tol_imag = default_tol_imag(eigenvalues, tol_imag_rel)
    imag = np.abs(eigenvalues.imag)
    return SpectralRealness(
        e_imag_max=float(imag.max()),
        e_imag_min=float(imag.min()),
        rho=float(np.mean(imag > tol_imag)),
        tol_imag=float(tol_imag),
    )


def log_imag_extrema(real: SpectralRealness) -> Tuple[float, float]:
    """log10 of the |Im E| extrema, clamped at tol_imag."""
    floor = max(real.tol_imag, np.finfo(float).tiny)
    return (float(np.log10(max(real.e_imag_max, floor))),
            float(np.log10(max(real.e_imag_min, floor))))
