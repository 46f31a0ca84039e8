"""
Localization diagnostics: inverse and normalized participation ratios,
their extrema and averages, the critical-phase indicator eta, and the
mobility-edge table along Re E.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..core.spectral import SpectralDecomposition, default_tol_imag

logger = logging.getLogger(__name__)

EXTENDED = "extended"
LOCALIZED = "localized"


@dataclass(frozen=True)
class LocalizationProfile:
    """Per-state IPR/NPR over the right eigenvectors plus ensemble summaries."""

    ipr: np.ndarray
    npr: np.ndarray
    ipr_max: float
    ipr_min: float
    ipr_avg: float
    npr_avg: float
    eta: float

    @property
    def n_states(self) -> int:
        return self.ipr.shape[0]


@dataclass(frozen=True)
class EnergyInterval:
    """A maximal run of same-class states along Re E."""

    re_lo: float
    re_hi: float
    label: str
    n_states: int
    n_real: int


def ipr_values(vectors: np.ndarray) -> np.ndarray:
    """Sum of |psi|^4 per column, with each column normalized to unit length first."""
    weights = np.abs(np.asarray(vectors)) ** 2
    norms = weights.sum(axis=0)
    return (weights ** 2).sum(axis=0) / norms ** 2


def profile_from_vectors(vectors: np.ndarray) -> LocalizationProfile:
    ipr = ipr_values(vectors)
    dim = vectors.shape[0]
    npr = 1.0 / (dim * ipr)
    ipr_avg = float(ipr.mean())
    npr_avg = float(npr.mean())
    return LocalizationProfile(
        ipr=ipr,
        npr=npr,
        ipr_max=float(ipr.max()),
        ipr_min=float(ipr.min()),
        ipr_avg=ipr_avg,
        npr_avg=npr_avg,
        eta=float(np.log10(ipr_avg * npr_avg)),
    )


def profile(dec: SpectralDecomposition) -> LocalizationProfile:
    """
    Localization profile of a decomposition.

    Args:
        dec: decomposition with unit-normalized right vectors

    Returns:
        LocalizationProfile with ipr_j * npr_j * dim = 1 for every state
    """
    return profile_from_vectors(dec.right_vectors)


def ipr_threshold(dim: int, factor: float = 10.0) -> float:
    """IPR threshold tau = factor / dim separating extended (~1/dim) from localized (O(1)) states."""
    return factor / dim


def eta_floor(dim: int) -> float:
    """Value eta takes in a pure extended or pure localized phase, up to an O(1) constant."""
    return -math.log10(dim)


def eta_critical_threshold(dim: int, margin: Optional[float] = None) -> float:
    """
    eta above which a point is flagged critical.

    With no margin the threshold is the midpoint, in decades, between the
    floor -log10(dim) and log10(1/4), the largest value a half-localized,
    half-extended mixture can reach.
    """
    floor = eta_floor(dim)
    if margin is not None:
        return floor + margin
    return 0.5 * (floor + math.log10(0.25))


def classify_states(prof: LocalizationProfile, threshold: float) -> np.ndarray:
    return np.where(prof.ipr > threshold, LOCALIZED, EXTENDED)


def mobility_edge_table(dec: SpectralDecomposition, prof: LocalizationProfile,
                        tol_imag: Optional[float] = None,
                        threshold: Optional[float] = None) -> List[EnergyInterval]:
    """
    Classify states by IPR and merge maximal same-class runs along Re E.

    States are taken in the decomposition order, which is sorted by (Re E, Im E).
    n_real counts the states of each interval with |Im E| <= tol_imag.
    """
    energies = dec.eigenvalues
    if threshold is None:
        threshold = ipr_threshold(dec.dim)
    if tol_imag is None:
        tol_imag = default_tol_imag(energies)
    labels = classify_states(prof, threshold)
    real = np.abs(energies.imag) <= tol_imag

    intervals: List[EnergyInterval] = []
    start = 0
    for j in range(1, len(labels) + 1):
        if j == len(labels) or labels[j] != labels[start]:
            run = slice(start, j)
            intervals.append(EnergyInterval(
                re_lo=float(energies.real[start]),
                re_hi=float(energies.real[j - 1]),
                label=str(labels[start]),
                n_states=j - start,
                n_real=int(real[run].sum()),
            ))
            start = j
    return intervals


def mobility_edges(intervals: List[EnergyInterval]) -> List[float]:
    """Re E midpoints between adjacent opposite-class intervals."""
    return [0.5 * (left.re_hi + right.re_lo) for left, right in zip(intervals, intervals[1:])]
