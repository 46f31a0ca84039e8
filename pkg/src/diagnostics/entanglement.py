"""
Biorthogonal single-particle correlation matrix, entanglement spectrum and
entanglement entropy for a contiguous block of sites.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.special import xlogy

from ..core.errors import ComplexESWarning, EmptyOccupation
from ..core.settings import EntanglementSettings
from ..core.spectral import SpectralDecomposition, default_tol_imag

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OccupationRule:
    """Which eigenstates are filled: below a Re E cutoff, all real energies, or an explicit set."""

    mode: str
    cutoff: Optional[float] = None
    tol_imag: Optional[float] = None
    indices: Tuple[int, ...] = ()

    @classmethod
    def below(cls, cutoff: float) -> "OccupationRule":
        return cls(mode="below_re_e", cutoff=float(cutoff))

    @classmethod
    def all_real(cls, tol_imag: Optional[float] = None) -> "OccupationRule":
        return cls(mode="all_real", tol_imag=tol_imag)

    @classmethod
    def explicit(cls, indices: Sequence[int]) -> "OccupationRule":
        return cls(mode="explicit", indices=tuple(int(i) for i in indices))

    def select(self, dec: SpectralDecomposition) -> np.ndarray:
        """Occupied state indices in decomposition order."""
        energies = dec.eigenvalues
        if self.mode == "below_re_e":
            return np.flatnonzero(energies.real < self.cutoff)
        if self.mode == "all_real":
            tol = self.tol_imag if self.tol_imag is not None else default_tol_imag(energies)
            return np.flatnonzero(np.abs(energies.imag) <= tol)
        if self.mode == "explicit":
            chosen = np.unique(np.asarray(self.indices, dtype=int))
            if chosen.size and (chosen.min() < 0 or chosen.max() >= dec.dim):
                raise IndexError(f"occupied index out of range for dimension {dec.dim}")
            return chosen
        raise ValueError(f"unknown occupation mode {self.mode!r}")


@dataclass(frozen=True)
class Subsystem:
    """Sites [start, stop) in 0-based lattice order; both ends are cuts on a ring."""

    start: int
    stop: int

    @classmethod
    def half_chain(cls, n_sites: int) -> "Subsystem":
        return cls(0, n_sites // 2)

    @property
    def n_sites(self) -> int:
        return self.stop - self.start

    def complement(self, n_sites: int) -> List[int]:
        return [n for n in range(n_sites) if not self.start <= n < self.stop]

    def rows(self, n_components: int) -> np.ndarray:
        sites = np.arange(self.start, self.stop)
        return (sites[:, None] * n_components + np.arange(n_components)[None, :]).ravel()


@dataclass(frozen=True)
class CorrelationSpectrum:
    zeta: np.ndarray
    xi: np.ndarray
    entropy: float
    zeta_raw: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    max_imag_zeta: float = 0.0
    max_range_deviation: float = 0.0
    complex_warning: bool = False

    @classmethod
    def empty(cls) -> "CorrelationSpectrum":
        return cls(zeta=np.zeros(0), xi=np.zeros(0), entropy=0.0)

    def pinned_fraction(self, tol: float = 1e-3) -> float:
        """Share of zeta within tol of 0 or 1."""
        if self.zeta.size == 0:
            return 1.0
        pinned = np.minimum(np.abs(self.zeta), np.abs(1.0 - self.zeta)) <= tol
        return float(pinned.mean())


def _rows_for(subsystem, n_components: int) -> np.ndarray:
    if isinstance(subsystem, Subsystem):
        return subsystem.rows(n_components)
    sites = np.asarray(list(subsystem), dtype=int)
    return (sites[:, None] * n_components + np.arange(n_components)[None, :]).ravel()


def correlation_matrix(dec: SpectralDecomposition, rule: OccupationRule,
                       subsystem=None) -> np.ndarray:
    """
    C[n, n'] = <n'|P|n> with P the biorthogonal projector onto the occupied states,
    over the composite (site, component) index of the subsystem.

    Args:
        dec: biorthonormal decomposition
        rule: occupation rule
        subsystem: Subsystem or iterable of site indices (default: the first half of the chain)

    Raises:
        EmptyOccupation: when the rule selects no state
    """
    occupied = rule.select(dec)
    if occupied.size == 0:
        raise EmptyOccupation(f"occupation rule {rule.mode} selected no states")
    if subsystem is None:
        subsystem = Subsystem.half_chain(dec.n_sites)
    rows = _rows_for(subsystem, dec.n_components)

    right = dec.right_vectors[np.ix_(rows, occupied)]
    left = dec.left_vectors[np.ix_(rows, occupied)]
    projector = right @ left.conj().T
    return projector.T


def entanglement_spectrum(C: np.ndarray, settings: Optional[EntanglementSettings] = None) -> CorrelationSpectrum:
    """
    Eigenvalues zeta of C, entanglement energies xi = ln(1/zeta - 1) and the entropy.

    Real parts are used once |Im zeta| is checked; a larger imaginary part is
    flagged with ComplexESWarning and carried in the result. The entropy uses
    zeta clipped to [0, 1] with 0 ln 0 = 0, xi uses zeta clipped to [eps, 1 - eps].
    """
    settings = settings or EntanglementSettings()
    if C.size == 0:
        return CorrelationSpectrum.empty()

    raw = sla.eigvals(C, check_finite=False)
    raw = raw[np.lexsort((raw.imag, raw.real))]
    max_imag = float(np.abs(raw.imag).max())
    complex_warning = max_imag >= settings.complex_tol
    if complex_warning:
        warnings.warn(f"correlation spectrum has |Im zeta| up to {max_imag:.2e}", ComplexESWarning)

    zeta = raw.real.copy()
    deviation = float(max(0.0, -zeta.min(), zeta.max() - 1.0))
    if deviation > 1e-6:
        logger.debug(f"Correlation eigenvalues leave [0, 1] by {deviation:.2e}")

    clipped = np.clip(zeta, 0.0, 1.0)
    entropy = float(-(xlogy(clipped, clipped) + xlogy(1.0 - clipped, 1.0 - clipped)).sum())
    eps = settings.clamp_eps
    clamped = np.clip(zeta, eps, 1.0 - eps)
    xi = np.log(1.0 / clamped - 1.0)

    return CorrelationSpectrum(
        zeta=zeta,
        xi=xi,
        entropy=max(entropy, 0.0),
        zeta_raw=raw,
        max_imag_zeta=max_imag,
        max_range_deviation=deviation,
        complex_warning=bool(complex_warning),
    )


def entropy_from_zeta(zeta: np.ndarray) -> float:
    z = np.clip(np.asarray(zeta, dtype=float), 0.0, 1.0)
    return float(-(xlogy(z, z) + xlogy(1.0 - z, 1.0 - z)).sum())


def entropy_from_xi(xi: np.ndarray) -> float:
    """Entropy recovered through the logistic map zeta = 1 / (1 + e^xi)."""
    return entropy_from_zeta(1.0 / (1.0 + np.exp(np.asarray(xi, dtype=float))))


def entanglement_entropy(dec: SpectralDecomposition, rule: OccupationRule, subsystem=None,
                         settings: Optional[EntanglementSettings] = None) -> CorrelationSpectrum:
    """Spectrum for one filling; an empty filling gives S = 0 with no zeta."""
    try:
        C = correlation_matrix(dec, rule, subsystem)
    except EmptyOccupation:
        logger.debug(f"Empty occupation ({rule.mode}); entropy set to 0")
        return CorrelationSpectrum.empty()
    return entanglement_spectrum(C, settings)


def scan_cutoffs(dec: SpectralDecomposition, n_cutoffs: int) -> np.ndarray:
    re = dec.eigenvalues.real
    return np.linspace(re.min(), re.max(), n_cutoffs)


def es_vs_energy_scan(dec: SpectralDecomposition, subsystem=None, n_cutoffs: Optional[int] = None,
                      settings: Optional[EntanglementSettings] = None,
                      workers: int = 1) -> List[Tuple[float, CorrelationSpectrum]]:
    """
    Entanglement spectrum for fillings below n_cutoffs Re E cutoffs spanning the spectrum.

    Cutoffs are evenly spaced from min Re E to max Re E and fill states strictly
    below the cutoff, so the first cutoff gives the empty filling.
    """
    settings = settings or EntanglementSettings()
    cutoffs = scan_cutoffs(dec, n_cutoffs or settings.n_cutoffs)

    def one(cutoff: float) -> Tuple[float, CorrelationSpectrum]:
        return float(cutoff), entanglement_entropy(dec, OccupationRule.below(cutoff), subsystem, settings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, cutoffs))
    return [one(c) for c in cutoffs]
