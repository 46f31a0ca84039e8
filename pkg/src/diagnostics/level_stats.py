"""
Adjacent-gap-ratio statistics of the real parts of the eigenenergies.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numba import njit

from ..core.errors import TooFewLevels
from ..core.spectral import SpectralDecomposition, sort_order

logger = logging.getLogger(__name__)

jkwargs = dict(nogil=True, cache=True)

POISSON_MEAN_RATIO = 2.0 * math.log(2.0) - 1.0


@dataclass(frozen=True)
class AgrResult:
    g_values: np.ndarray
    g_mean: float
    n_dropped: int
    n_undefined: int = 0


@njit(**jkwargs)
def _gap_ratios(spacings):
    """min/max of consecutive spacings; pairs of zero spacings are skipped and counted."""
    n = spacings.shape[0] - 1
    out = np.empty(max(n, 0), dtype=np.float64)
    kept = 0
    undefined = 0
    for j in range(n):
        a = spacings[j]
        b = spacings[j + 1]
        hi = max(a, b)
        if hi <= 0.0:
            undefined += 1
            continue
        out[kept] = min(a, b) / hi
        kept += 1
    return out[:kept], undefined


def adjacent_gap_ratio(levels: Union[SpectralDecomposition, np.ndarray],
                       degenerate_rel: float = 1e-12) -> AgrResult:
    """
    Mean ratio of adjacent spacings of Re E.

    Levels are ordered by (Re E, Im E). A spacing is dropped when the two
    levels coincide as complex numbers within degenerate_rel times the
    spectral width (the spin doubling at phi = 0 or pi); equal real parts of
    a conjugate pair are kept as a zero spacing.

    Raises:
        TooFewLevels: with fewer than three levels, or no defined ratio left
    """
    energies = levels.eigenvalues if isinstance(levels, SpectralDecomposition) else np.asarray(levels)
    energies = np.asarray(energies, dtype=complex).ravel()
    if energies.size < 3:
        raise TooFewLevels(f"need at least 3 levels, got {energies.size}")
    energies = energies[sort_order(energies)]

    width = float(energies.real.max() - energies.real.min())
    tol = degenerate_rel * width
    duplicate = np.abs(np.diff(energies)) <= tol
    kept = energies[np.concatenate(([True], ~duplicate))]
    n_dropped = int(duplicate.sum())

    if kept.size < 3:
        raise TooFewLevels(f"only {kept.size} distinct levels after dropping {n_dropped} degenerate spacings")
    spacings = np.diff(kept.real)
    g_values, undefined = _gap_ratios(spacings)
    if g_values.size == 0:
        raise TooFewLevels("every adjacent gap ratio is 0/0")
    if n_dropped:
        logger.debug(f"Dropped {n_dropped} degenerate spacings, {undefined} undefined ratios")
    return AgrResult(g_values=g_values, g_mean=float(g_values.mean()),
                     n_dropped=n_dropped, n_undefined=int(undefined))


def poisson_levels(n: int, seed: int = 0) -> np.ndarray:
    """Levels with i.i.d. unit-mean exponential spacings."""
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.exponential(1.0, size=n))


def ratio_histogram(result: AgrResult, bins: int = 50):
    counts, edges = np.histogram(result.g_values, bins=bins, range=(0.0, 1.0))
    return counts, edges
