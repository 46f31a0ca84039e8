"""
Per-point evaluation: one decomposition shared by every requested diagnostic,
collected into a flat DiagnosticsRecord, plus phase labelling and the
transition locator used on sweep tables.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.errors import BaseOnSpectrum, NoLocalizedStates, NonConvergent, TooFewLevels
from ..core.model import ModelSpec, build_hamiltonian
from ..core.settings import LabSettings
from ..core.spectral import SpectralDecomposition, decompose, realness
from .entanglement import OccupationRule, entanglement_entropy
from .level_stats import adjacent_gap_ratio
from .localization import LocalizationProfile, eta_critical_threshold, ipr_threshold, profile
from .topology import SpectrumSnapshot, hermitian_family, select_base_energies, winding_pair

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DIAGNOSTICS = ("realness", "localization", "winding", "entanglement", "levelstat")

STATUS_OK = "ok"
STATUS_DEGRADED = "degraded"
STATUS_ERROR = "error"


@dataclass
class DiagnosticsRecord:
    """One row of a sweep. Diagnostics that were not requested or failed stay None."""

    params: Dict[str, float] = field(default_factory=dict)
    e_imag_max: Optional[float] = None
    e_imag_min: Optional[float] = None
    rho: Optional[float] = None
    real_fraction: Optional[float] = None
    ipr_max: Optional[float] = None
    ipr_min: Optional[float] = None
    ipr_avg: Optional[float] = None
    npr_avg: Optional[float] = None
    eta: Optional[float] = None
    w1: Optional[int] = None
    w2: Optional[int] = None
    base_e1: Optional[float] = None
    base_e2: Optional[float] = None
    S: Optional[float] = None
    g_mean: Optional[float] = None
    phase: Optional[str] = None
    pt_phase: Optional[str] = None
    tol_imag: Optional[float] = None
    ipr_threshold: Optional[float] = None
    n_theta: Optional[int] = None
    status: str = STATUS_OK
    error: Optional[str] = None
    wall_time: Optional[float] = None

    def to_row(self) -> Dict[str, Any]:
        """Flat row: axis parameters first, then diagnostics. Wall time is kept out."""
        data = asdict(self)
        params = data.pop("params")
        data.pop("wall_time")
        return {**params, **data}

    @classmethod
    def failed(cls, params: Dict[str, float], error: Exception) -> "DiagnosticsRecord":
        return cls(params=dict(params), status=STATUS_ERROR, error=f"{type(error).__name__}: {error}")

    def note(self, message: str) -> None:
        self.status = STATUS_DEGRADED if self.status == STATUS_OK else self.status
        self.error = message if not self.error else f"{self.error}; {message}"


@dataclass
class PointEvaluation:
    record: DiagnosticsRecord
    snapshot: Optional[SpectrumSnapshot] = None
    decomposition: Optional[SpectralDecomposition] = None
    localization: Optional[LocalizationProfile] = None


def _check_diagnostics(diagnostics: Iterable[str]) -> Tuple[str, ...]:
    chosen = tuple(diagnostics)
    unknown = [d for d in chosen if d not in DIAGNOSTICS]
    if unknown:
        raise ValueError(f"unknown diagnostics {unknown}; choose from {list(DIAGNOSTICS)}")
    return chosen


def classify_phase(record: DiagnosticsRecord) -> Tuple[Optional[str], Optional[str]]:
    """
    Localization phase from the IPR extrema against the record's threshold and the
    PT phase from the complex fraction rho.
    """
    phase = None
    if record.ipr_max is not None and record.ipr_threshold is not None:
        if record.ipr_max <= record.ipr_threshold:
            phase = "extended"
        elif record.ipr_min > record.ipr_threshold:
            phase = "localized"
        else:
            phase = "critical"
    pt_phase = None
    if record.rho is not None:
        if record.rho == 0.0:
            pt_phase = "pt_unbroken"
        elif record.rho == 1.0:
            pt_phase = "pt_broken"
        else:
            pt_phase = "pt_mixed"
    return phase, pt_phase


def is_eta_critical(record: DiagnosticsRecord, dim: int, margin: Optional[float] = None) -> bool:
    return record.eta is not None and record.eta > eta_critical_threshold(dim, margin)


def bases_for_point(snapshot: SpectrumSnapshot, settings: LabSettings) -> Tuple[float, float]:
    """Base energies when only one point is available (single diagnose or a one-point sweep)."""
    return select_base_energies([snapshot], orientation="sweep",
                                threshold_factor=settings.localization.ipr_threshold_factor)


def apply_winding(record: DiagnosticsRecord, spec: ModelSpec, base_energies: Optional[Tuple[float, float]],
                  settings: LabSettings, eigenvalues: Optional[np.ndarray] = None) -> None:
    """
    Fill w1/w2 in place; failures null them and degrade the row.

    With the point's eigenvalues, a base energy lying on a level is moved into
    the neighbouring gap and the record carries the energies actually used.
    """
    record.n_theta = settings.topology.n_theta
    if hermitian_family(spec):
        record.w1, record.w2 = 0, 0
        if base_energies is not None:
            record.base_e1, record.base_e2 = float(base_energies[0]), float(base_energies[1])
        return
    if base_energies is None:
        record.note("winding: no base energies (no localized state along the sweep)")
        return
    record.base_e1, record.base_e2 = float(base_energies[0]), float(base_energies[1])
    try:
        result = winding_pair(spec, base_energies, settings.topology, eigenvalues=eigenvalues)
    except (BaseOnSpectrum, NonConvergent) as e:
        logger.warning(f"Winding failed at {record.params}: {e}")
        record.note(f"winding: {type(e).__name__}: {e}")
        return
    record.w1, record.w2 = result.w1, result.w2
    record.base_e1, record.base_e2 = result.base_energies


def evaluate_point(spec: ModelSpec, diagnostics: Sequence[str] = DIAGNOSTICS,
                   settings: Optional[LabSettings] = None,
                   base_energies: Optional[Tuple[float, float]] = None,
                   params: Optional[Dict[str, float]] = None,
                   param: float = float("nan"), seed: int = 0,
                   keep_decomposition: bool = False) -> PointEvaluation:
    """
    Run the requested diagnostics on one spec with a single decomposition.

    Winding uses base_energies when given; otherwise they are selected from this
    point alone. The snapshot returned feeds base-energy selection along a sweep.
    """
    settings = settings or LabSettings()
    diagnostics = _check_diagnostics(diagnostics)
    started = time.perf_counter()
    record = DiagnosticsRecord(params=dict(params or {}))

    dec = decompose(build_hamiltonian(spec), settings.spectral, seed=seed)
    real = realness(dec, tol_imag_rel=settings.spectral.tol_imag_rel)
    record.tol_imag = real.tol_imag
    if "realness" in diagnostics:
        record.e_imag_max = real.e_imag_max
        record.e_imag_min = real.e_imag_min
        record.rho = real.rho
        record.real_fraction = real.real_fraction

    prof = profile(dec)
    record.ipr_threshold = ipr_threshold(dec.dim, settings.localization.ipr_threshold_factor)
    if "localization" in diagnostics:
        record.ipr_max = prof.ipr_max
        record.ipr_min = prof.ipr_min
        record.ipr_avg = prof.ipr_avg
        record.npr_avg = prof.npr_avg
        record.eta = prof.eta
    snapshot = SpectrumSnapshot.from_decomposition(param, dec, prof)

    if "entanglement" in diagnostics:
        rule = OccupationRule.all_real(real.tol_imag)
        record.S = entanglement_entropy(dec, rule, settings=settings.entanglement).entropy

    if "levelstat" in diagnostics:
        try:
            record.g_mean = adjacent_gap_ratio(dec, settings.level_stats.degenerate_rel).g_mean
        except TooFewLevels as e:
            record.note(f"levelstat: {e}")

    if "winding" in diagnostics:
        if base_energies is None:
            try:
                base_energies = bases_for_point(snapshot, settings)
            except NoLocalizedStates:
                base_energies = None
        apply_winding(record, spec, base_energies, settings, eigenvalues=dec.eigenvalues)

    record.phase, record.pt_phase = classify_phase(record)
    record.wall_time = time.perf_counter() - started
    return PointEvaluation(
        record=record,
        snapshot=snapshot,
        decomposition=dec if keep_decomposition else None,
        localization=prof if keep_decomposition else None,
    )


def records_frame(records: Sequence[DiagnosticsRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records])


def _plain(value: Any) -> Any:
    return value.item() if isinstance(value, np.generic) else value


def locate_transitions(frame: pd.DataFrame, column: str, axis: str,
                       threshold: Optional[float] = None, by: Optional[str] = None) -> List[Dict[str, Any]]:
    """
    Axis values where a column changes.

    Integer-like columns (w1, w2, labels) report every change of value; with a
    threshold the change of side (value > threshold) is reported instead. Each
    transition sits at the midpoint between the two neighbouring axis values.
    Rows with a null entry are skipped. With `by`, each slice of that column is
    scanned separately.
    """
    groups = [(None, frame)] if by is None else list(frame.groupby(by, sort=True))
    found: List[Dict[str, Any]] = []
    for key, group in groups:
        data = group[[axis, column]].dropna().sort_values(axis)
        values = data[column].to_numpy()
        if threshold is not None:
            values = values.astype(float) > threshold
        xs = data[axis].to_numpy(dtype=float)
        for i in np.flatnonzero(values[1:] != values[:-1]):
            entry = {"at": 0.5 * (xs[i] + xs[i + 1]), "before": _plain(values[i]), "after": _plain(values[i + 1])}
            if by is not None:
                entry[by] = key
            found.append(entry)
    return found
