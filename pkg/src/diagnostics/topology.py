"""
Spectral winding numbers from flux-threaded determinant phases, and the
selection of the two base energies from a parameter sweep.

The determinant is never formed as a scalar: its phase and log-magnitude are
accumulated from the diagonal of an LU factorization.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla

from ..core.errors import BaseOnSpectrum, NoLocalizedStates, NonConvergent, SpecValidationError
from ..core.model import Boundary, ModelSpec, build_hamiltonian
from ..core.settings import TopologySettings
from ..core.spectral import SpectralDecomposition
from .localization import LocalizationProfile

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# Allowed distance of the accumulated phase from a multiple of 2 pi, in turns.
QUANTIZATION_TOL = 1e-3
# Flux intervals narrower than this that still jump in phase hold a zero of the determinant.
MIN_FLUX_STEP = 1e-10
# Reported next to every table of winding numbers.
WINDING_CONVENTION = ("w is the change of arg det[H(theta) - E] over one flux period, in turns, "
                      "counter-clockwise positive; compare |w| with magnitude-only conventions")
# Relative distance below which a base energy counts as a level of H(0).
ON_LEVEL_TOL = 1e-8


@dataclass(frozen=True)
class LogDet:
    phase: float
    log_abs: float
    pivot_ratio: float


@dataclass(frozen=True)
class WindingTrace:
    """Flux grid after refinement with the accumulated phase in units of 2 pi."""

    base_energy: complex
    thetas: np.ndarray
    turns: np.ndarray
    log_abs_det: np.ndarray
    max_step_phase: float

    @property
    def winding(self) -> int:
        return int(round(self.turns[-1]))

    @property
    def n_points(self) -> int:
        return self.thetas.shape[0]


@dataclass(frozen=True)
class WindingResult:
    w1: int
    w2: int
    base_energies: Tuple[float, float]
    n_theta: int
    max_step_phase: float


@dataclass(frozen=True)
class SpectrumSnapshot:
    """What base-energy selection needs from one sweep point."""

    param: float
    eigenvalues: np.ndarray
    ipr: np.ndarray

    @classmethod
    def from_decomposition(cls, param: float, dec: SpectralDecomposition,
                           prof: LocalizationProfile) -> "SpectrumSnapshot":
        return cls(param=float(param), eigenvalues=np.asarray(dec.eigenvalues), ipr=np.asarray(prof.ipr))


def log_det(a: np.ndarray) -> LogDet:
    """Phase (mod 2 pi) and log|det| of a square matrix from its LU factors."""
    lu, piv = sla.lu_factor(a, check_finite=False)
    diag = np.diag(lu)
    swaps = int(np.count_nonzero(piv != np.arange(piv.shape[0])))
    magnitudes = np.abs(diag)
    scale = max(float(np.abs(a).max()), np.finfo(float).tiny)
    smallest = float(magnitudes.min())
    if smallest == 0.0:
        return LogDet(phase=0.0, log_abs=-math.inf, pivot_ratio=0.0)
    phase = float(np.angle(diag).sum() + math.pi * swaps)
    return LogDet(phase=math.remainder(phase, TWO_PI), log_abs=float(np.log(magnitudes).sum()),
                  pivot_ratio=smallest / scale)


def wrap_phase(delta: float) -> float:
    """Principal value of a phase difference, in [-pi, pi]."""
    return math.remainder(delta, TWO_PI)


class _FluxEvaluator:
    def __init__(self, spec: ModelSpec, base_energy: complex, det_floor: float,
                 flux_divisor: Optional[float]):
        self.spec = spec
        self.base_energy = base_energy
        self.det_floor = det_floor
        self.flux_divisor = flux_divisor
        self.identity = np.eye(spec.dim, dtype=complex)

    def __call__(self, theta: float) -> LogDet:
        h = build_hamiltonian(self.spec, flux=theta, flux_divisor=self.flux_divisor).matrix
        result = log_det(h - self.base_energy * self.identity)
        if result.pivot_ratio < self.det_floor:
            raise BaseOnSpectrum(
                f"base energy {self.base_energy:.6g} lies on the spectrum of H(theta={theta:.6g}) "
                f"(smallest relative pivot {result.pivot_ratio:.2e})")
        return result


def winding_trace(spec: ModelSpec, base_energy: complex,
                  settings: Optional[TopologySettings] = None,
                  n_theta: Optional[int] = None, workers: int = 1) -> WindingTrace:
    """
    Accumulate the phase of det[H(theta) - E] over theta in [0, 2 pi].

    The initial grid has n_theta + 1 points; an interval is bisected while its
    principal-value increment exceeds max_step_phase.

    Raises:
        SpecValidationError: for open boundaries
        BaseOnSpectrum: when E is (numerically) an eigenvalue at some sampled theta
        NonConvergent: when refinement needs more than max_points points or the
            total does not land on an integer number of turns
    """
    settings = settings or TopologySettings()
    n_theta = n_theta or settings.n_theta
    if spec.boundary != Boundary.PBC:
        raise SpecValidationError("boundary", "winding numbers need a periodic ring (boundary=PBC)")

    evaluate = _FluxEvaluator(spec, complex(base_energy), settings.det_floor, settings.flux_divisor)
    thetas: List[float] = list(np.linspace(0.0, TWO_PI, n_theta + 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values: List[LogDet] = list(pool.map(evaluate, thetas))
    else:
        values = [evaluate(t) for t in thetas]

    i = 0
    while i < len(thetas) - 1:
        step = wrap_phase(values[i + 1].phase - values[i].phase)
        if abs(step) > settings.max_step_phase:
            if thetas[i + 1] - thetas[i] < MIN_FLUX_STEP:
                raise BaseOnSpectrum(
                    f"the spectrum of H(theta) crosses E={base_energy:.6g} near theta={thetas[i]:.6g}")
            if len(thetas) >= settings.max_points:
                raise NonConvergent(
                    f"flux refinement exceeded {settings.max_points} points near theta={thetas[i]:.6g} "
                    f"(E={base_energy:.6g})")
            mid = 0.5 * (thetas[i] + thetas[i + 1])
            thetas.insert(i + 1, mid)
            values.insert(i + 1, evaluate(mid))
            continue
        i += 1

    phases = np.array([v.phase for v in values])
    steps = np.array([wrap_phase(d) for d in np.diff(phases)])
    turns = np.concatenate(([0.0], np.cumsum(steps))) / TWO_PI
    if abs(turns[-1] - round(turns[-1])) > QUANTIZATION_TOL:
        raise NonConvergent(f"accumulated phase {turns[-1]:.6f} turns is not an integer (E={base_energy:.6g})")

    trace = WindingTrace(
        base_energy=complex(base_energy),
        thetas=np.asarray(thetas),
        turns=turns,
        log_abs_det=np.array([v.log_abs for v in values]),
        max_step_phase=float(np.abs(steps).max()) if steps.size else 0.0,
    )
    logger.debug(f"Winding around E={base_energy:.6g}: {trace.winding} "
                 f"({trace.n_points} flux points, max step {trace.max_step_phase:.3f})")
    return trace


def hermitian_family(spec: ModelSpec) -> bool:
    """True when H(theta) is Hermitian for every flux, which happens exactly when H(0) is."""
    return build_hamiltonian(spec, flux=0.0).is_hermitian()


def winding_number(spec: ModelSpec, base_energy: complex, n_theta: Optional[int] = None,
                   settings: Optional[TopologySettings] = None, workers: int = 1) -> int:
    """
    Integer winding of det[H(theta) - E] around the origin as the flux goes once around.

    Hermitian families have real eigenvalue paths that cannot encircle any base
    energy, so they return 0 without scanning the flux.
    """
    if hermitian_family(spec):
        return 0
    return winding_trace(spec, base_energy, settings, n_theta, workers).winding


def step_off_level(base_energy: float, eigenvalues: np.ndarray) -> float:
    """
    Move a real base energy off the levels of one spectrum.

    The base goes to the middle of the gap, in Re E, between its nearest level
    and the neighbouring level on the side the base already lies on. At the
    edge of the spectrum the inner gap is used.
    """
    levels = np.sort(np.asarray(eigenvalues).real)
    scale = max(1.0, float(np.abs(levels).max(initial=0.0)))
    levels = levels[np.concatenate(([True], np.diff(levels) > ON_LEVEL_TOL * scale))]
    if levels.size < 2:
        return float(base_energy) + 1e-3 * scale
    nearest = int(np.abs(levels - base_energy).argmin())
    side = 1 if base_energy >= levels[nearest] else -1
    neighbour = nearest + side
    if not 0 <= neighbour < levels.size:
        neighbour = nearest - side
    return float(0.5 * (levels[nearest] + levels[neighbour]))


def _on_level(base_energy: float, eigenvalues: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(eigenvalues).max(initial=0.0)))
    return bool(np.abs(eigenvalues - base_energy).min(initial=np.inf) <= ON_LEVEL_TOL * scale)


def _settled_trace(spec: ModelSpec, base_energy: float, settings: TopologySettings, workers: int,
                   eigenvalues: Optional[np.ndarray]) -> Tuple[float, WindingTrace]:
    """Winding trace around base_energy, stepped into a gap of eigenvalues when it sits on a level."""
    if eigenvalues is not None and _on_level(base_energy, eigenvalues):
        moved = step_off_level(base_energy, eigenvalues)
        logger.info(f"Base energy {base_energy:.6g} is a level of H(0); using {moved:.6g}")
        base_energy = moved
    try:
        return base_energy, winding_trace(spec, base_energy, settings, workers=workers)
    except (BaseOnSpectrum, NonConvergent) as e:
        if eigenvalues is None:
            raise
        moved = step_off_level(base_energy, eigenvalues)
        if moved == base_energy:
            raise
        logger.info(f"Winding around {base_energy:.6g} failed ({e}); retrying at {moved:.6g}")
        return moved, winding_trace(spec, moved, settings, workers=workers)


def winding_pair(spec: ModelSpec, base_energies: Tuple[float, float],
                 settings: Optional[TopologySettings] = None, workers: int = 1,
                 eigenvalues: Optional[np.ndarray] = None) -> WindingResult:
    """
    (w1, w2) for the two base energies; a coincident pair is evaluated once.

    When the spectrum of H(0) is passed as eigenvalues, a base energy that is
    one of its levels, or whose trace fails, is stepped into the adjacent gap
    once. The energies actually used are returned in base_energies.
    """
    settings = settings or TopologySettings()
    e1, e2 = float(base_energies[0]), float(base_energies[1])
    if hermitian_family(spec):
        logger.debug("Hermitian family: w1 = w2 = 0")
        return WindingResult(w1=0, w2=0, base_energies=(e1, e2), n_theta=settings.n_theta, max_step_phase=0.0)
    used1, first = _settled_trace(spec, e1, settings, workers, eigenvalues)
    if e2 == e1:
        used2, second = used1, first
    else:
        used2, second = _settled_trace(spec, e2, settings, workers, eigenvalues)
    return WindingResult(
        w1=first.winding,
        w2=second.winding,
        base_energies=(used1, used2),
        n_theta=settings.n_theta,
        max_step_phase=max(first.max_step_phase, second.max_step_phase),
    )


SweepPoint = Union[SpectrumSnapshot, Tuple[float, SpectralDecomposition, LocalizationProfile]]


def _as_snapshots(sweep: Iterable[SweepPoint]) -> List[SpectrumSnapshot]:
    snapshots = []
    for point in sweep:
        if not isinstance(point, SpectrumSnapshot):
            param, dec, prof = point
            point = SpectrumSnapshot.from_decomposition(param, dec, prof)
        snapshots.append(point)
    return snapshots


def _crossings(previous: Optional[np.ndarray], current: np.ndarray) -> np.ndarray:
    """Positions (in Re E order) whose localized flag differs from the previous point."""
    if previous is None:
        return np.zeros(0, dtype=int)
    if previous.shape != current.shape:
        return np.flatnonzero(current) if previous.sum() != current.sum() else np.zeros(0, dtype=int)
    return np.flatnonzero(previous != current)


def select_base_energies(sweep: Sequence[SweepPoint], ipr_threshold: Optional[float] = None,
                         orientation: str = "sweep",
                         threshold_factor: float = 10.0) -> Tuple[float, float]:
    """
    Base energies (E1, E2) from the states whose IPR crosses the threshold along a sweep.

    States at each point are ordered by (Re E, Im E). A crossing is a state
    whose localized flag differs from the same position at the previous point.
    Scanning the crossings point by point, then by Re E, E1 is Re E of the
    first crossing state and E2 of the last. When every crossing happens at one
    point the two coincide. A sweep without crossings (a single point, or a
    localized set that never changes) uses the localized states of the first
    point that has any.

    Args:
        sweep: SpectrumSnapshot items or (param, decomposition, profile) tuples
        ipr_threshold: fixed tau; by default threshold_factor / dim per point
        orientation: "sweep" scans in the given order; "auto" scans from the
            end holding fewer localized states

    Raises:
        NoLocalizedStates: when no state crosses the threshold anywhere
    """
    points = _as_snapshots(sweep)
    energies, masks = [], []
    for point in points:
        tau = ipr_threshold if ipr_threshold is not None else threshold_factor / point.ipr.shape[0]
        order = np.lexsort((point.eigenvalues.imag, point.eigenvalues.real))
        energies.append(point.eigenvalues.real[order])
        masks.append(point.ipr[order] > tau)
    counts = [int(m.sum()) for m in masks]
    if not any(counts):
        raise NoLocalizedStates("no state crosses the IPR threshold anywhere in the sweep")

    scan = list(range(len(points)))
    if orientation == "auto" and counts[0] > counts[-1]:
        scan.reverse()

    events: List[Tuple[int, float]] = []
    previous = None
    for k in scan:
        events.extend((k, float(energies[k][j])) for j in _crossings(previous, masks[k]))
        previous = masks[k]
    if not events:
        k = next(k for k in scan if counts[k] > 0)
        events = [(k, float(e)) for e in energies[k][masks[k]]]

    (k1, e1), (k2, e2) = events[0], events[-1]
    if k1 == k2:
        e2 = e1
    logger.info(f"Base energies E1={e1:.6g} (param {points[k1].param:.6g}), "
                f"E2={e2:.6g} (param {points[k2].param:.6g})")
    return e1, e2
