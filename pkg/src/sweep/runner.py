"""
Sweep runner.

A sweep runs in three passes over the grid:
  1. every point is decomposed once and all non-winding diagnostics are recorded,
     together with a spectrum snapshot (eigenvalues and IPRs);
  2. base energies are selected along axis1, separately for each axis2 value;
  3. winding numbers are computed for every point against its slice's base energies.
Each pass checkpoints into SQLite, so an interrupted sweep resumes without
recomputing finished work. Rows are always emitted in grid order.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import pandas as pd
from tqdm import tqdm

from ..core.checkpoint_store import CheckpointStore
from ..core.errors import MemoryBudgetExceeded, NoLocalizedStates
from ..core.settings import LabSettings, save_settings
from ..diagnostics.records import (SCHEMA_VERSION, STATUS_DEGRADED, STATUS_ERROR, DiagnosticsRecord, apply_winding,
                                   evaluate_point, locate_transitions, records_frame)
from ..diagnostics.topology import WINDING_CONVENTION, SpectrumSnapshot, select_base_energies
from ..exports import write_csv, write_json
from .plan import SweepPlan, estimate_memory_bytes, memory_cap_bytes

logger = logging.getLogger(__name__)


@dataclass
class SweepResult:
    """Rows in grid order plus the base energies used for each axis2 slice."""

    plan: SweepPlan
    records: List[DiagnosticsRecord]
    base_energies: Dict[str, Optional[Tuple[float, float]]] = field(default_factory=dict)
    wall_times: List[Optional[float]] = field(default_factory=list)

    @property
    def frame(self) -> pd.DataFrame:
        return records_frame(self.records)

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.records if r.status == STATUS_ERROR)

    @property
    def n_degraded(self) -> int:
        return sum(1 for r in self.records if r.status == STATUS_DEGRADED)

    @property
    def complete(self) -> bool:
        """False when any row failed outright or lost a diagnostic."""
        return self.n_errors == 0 and self.n_degraded == 0

    def to_payload(self) -> Dict[str, Any]:
        rows = []
        for record in self.records:
            data = asdict(record)
            data.pop("wall_time")
            params = data.pop("params")
            rows.append({"params": params, "diagnostics": data})
        return {
            "schema_version": SCHEMA_VERSION,
            "plan": self.plan.model_dump(mode="json"),
            "winding_convention": WINDING_CONVENTION,
            "base_energies": {k: (list(v) if v is not None else None) for k, v in self.base_energies.items()},
            "rows": rows,
        }


def _record_to_store(record: DiagnosticsRecord) -> Dict[str, Any]:
    data = asdict(record)
    data.pop("wall_time")
    return data


def _record_from_store(data: Dict[str, Any]) -> DiagnosticsRecord:
    return DiagnosticsRecord(**data)


def _slice_key(plan: SweepPlan, point: Dict[str, Any]) -> str:
    if plan.axis2 is None:
        return "all"
    return f"{plan.axis2.name}={point[plan.axis2.name]!r}"


def check_memory(plan: SweepPlan, settings: LabSettings, workers: int) -> int:
    """Raise MemoryBudgetExceeded before any work when the plan will not fit."""
    needed = estimate_memory_bytes(plan, workers)
    cap = memory_cap_bytes(settings.sweep.memory_budget_gb)
    if needed > cap:
        raise MemoryBudgetExceeded(
            f"sweep needs about {needed / 1024 ** 3:.2f} GiB with {workers} workers, "
            f"budget is {cap / 1024 ** 3:.2f} GiB")
    logger.info(f"Memory estimate {needed / 1024 ** 2:.1f} MiB (cap {cap / 1024 ** 2:.0f} MiB)")
    return needed


class SweepRunner:
    """Executes one plan against a checkpoint store."""

    def __init__(self, plan: SweepPlan, settings: Optional[LabSettings] = None,
                 workers: Optional[int] = None, progress: bool = True):
        self.plan = plan
        self.settings = settings or LabSettings()
        self.workers = workers or self.settings.sweep.workers
        self.interval = plan.checkpoint_interval or self.settings.sweep.checkpoint_interval
        self.progress = progress
        self.paths = plan.paths()
        self.grid = plan.grid()
        self.store = CheckpointStore(str(self.paths["checkpoint"]), plan.fingerprint(self.settings))

    def _pool_map(self, todo: List[int], work: Callable[[int], Any], desc: str,
                  on_result: Callable[[int, Any], None]) -> None:
        if not todo:
            return
        with tqdm(total=len(todo), desc=desc, disable=not self.progress) as bar:
            if self.workers == 1:
                for idx in todo:
                    on_result(idx, work(idx))
                    bar.update(1)
                return
            pool = ThreadPoolExecutor(max_workers=self.workers)
            try:
                futures = {pool.submit(work, idx): idx for idx in todo}
                for future in as_completed(futures):
                    on_result(futures[future], future.result())
                    bar.update(1)
            except BaseException:
                # queued points are dropped; running ones finish unobserved
                pool.shutdown(wait=False, cancel_futures=True)
                raise
            pool.shutdown()

    def _evaluate(self, idx: int) -> Tuple[DiagnosticsRecord, Optional[SpectrumSnapshot]]:
        point = self.grid[idx]
        diagnostics = [d for d in self.plan.diagnostics if d != "winding"]
        try:
            spec = self.plan.spec_at(point)
            evaluation = evaluate_point(spec, diagnostics, self.settings, params=point,
                                        param=float(point[self.plan.axis1.name]), seed=self.plan.seed)
            return evaluation.record, evaluation.snapshot
        except Exception as e:
            logger.error(f"Point {idx} {point} failed: {e}")
            return DiagnosticsRecord.failed(point, e), None

    def run_points(self) -> None:
        done = set(self.store.completed_points())
        todo = [i for i in range(len(self.grid)) if i not in done]
        if done:
            logger.info(f"Resuming: {len(done)} of {len(self.grid)} points already checkpointed")

        def keep(idx: int, result: Tuple[DiagnosticsRecord, Optional[SpectrumSnapshot]]) -> None:
            record, snapshot = result
            waiting = self.store.add_point(
                idx, _record_to_store(record),
                None if snapshot is None else snapshot.eigenvalues,
                None if snapshot is None else snapshot.ipr,
                record.wall_time)
            if waiting >= self.interval:
                self.store.flush()

        try:
            self._pool_map(todo, self._evaluate, "points", keep)
        finally:
            self.store.flush()

    def select_bases(self, points: Dict[int, Dict[str, Any]]) -> Dict[str, Optional[Tuple[float, float]]]:
        stored = self.store.get_meta("base_energies")
        if stored is not None:
            return {k: (tuple(v) if v is not None else None) for k, v in stored.items()}

        slices: Dict[str, List[SpectrumSnapshot]] = {}
        for idx, point in enumerate(self.grid):
            slices.setdefault(_slice_key(self.plan, point), [])
            entry = points[idx]
            if entry["eigenvalues"] is None:
                continue
            slices[_slice_key(self.plan, point)].append(SpectrumSnapshot(
                param=float(point[self.plan.axis1.name]),
                eigenvalues=entry["eigenvalues"],
                ipr=entry["ipr"],
            ))

        bases: Dict[str, Optional[Tuple[float, float]]] = {}
        for key, snapshots in slices.items():
            try:
                bases[key] = select_base_energies(
                    snapshots,
                    orientation=self.settings.topology.scan_orientation,
                    threshold_factor=self.settings.localization.ipr_threshold_factor)
            except NoLocalizedStates:
                logger.warning(f"Slice {key}: no localized state, winding numbers left empty")
                bases[key] = None
        self.store.set_meta("base_energies", {k: (list(v) if v else None) for k, v in bases.items()})
        return bases

    def run_windings(self, points: Dict[int, Dict[str, Any]],
                     bases: Dict[str, Optional[Tuple[float, float]]]) -> None:
        done = set(self.store.get_windings())
        todo = [i for i in range(len(self.grid))
                if i not in done and points[i]["record"]["status"] != STATUS_ERROR]
        batch: List[Tuple[int, Dict[str, Any], Optional[float]]] = []

        def work(idx: int) -> Tuple[DiagnosticsRecord, float]:
            started = time.perf_counter()
            record = _record_from_store(points[idx]["record"])
            spec = self.plan.spec_at(self.grid[idx])
            apply_winding(record, spec, bases[_slice_key(self.plan, self.grid[idx])], self.settings,
                          eigenvalues=points[idx].get("eigenvalues"))
            return record, time.perf_counter() - started

        def keep(idx: int, result: Tuple[DiagnosticsRecord, float]) -> None:
            record, elapsed = result
            batch.append((idx, _record_to_store(record), elapsed))
            if len(batch) >= self.interval:
                self.store.add_windings(batch)
                batch.clear()

        try:
            self._pool_map(todo, work, "winding", keep)
        finally:
            self.store.add_windings(batch)

    def collect(self, bases: Dict[str, Optional[Tuple[float, float]]]) -> SweepResult:
        points = self.store.get_points()
        windings = self.store.get_windings()
        records, wall_times = [], []
        for idx in range(len(self.grid)):
            entry = points[idx]
            wall = entry["wall_time"]
            data = entry["record"]
            if idx in windings:
                data, extra = windings[idx]
                wall = None if wall is None else wall + (extra or 0.0)
            records.append(_record_from_store(data))
            wall_times.append(wall)
        return SweepResult(plan=self.plan, records=records, base_energies=bases, wall_times=wall_times)

    def log_transitions(self, result: SweepResult) -> None:
        frame = result.frame
        axis = self.plan.axis1.name
        by = self.plan.axis2.name if self.plan.axis2 is not None else None
        for column in ("w1", "w2", "phase", "pt_phase"):
            if column not in frame or frame[column].isna().all():
                continue
            for jump in locate_transitions(frame, column, axis, by=by):
                logger.info(f"{column} changes {jump['before']} -> {jump['after']} near {axis}={jump['at']:.6g}"
                            + (f" ({by}={jump[by]:.6g})" if by else ""))

    def run(self) -> SweepResult:
        check_memory(self.plan, self.settings, self.workers)
        logger.info(f"Sweep over {len(self.grid)} points with {self.workers} workers, "
                    f"diagnostics {list(self.plan.diagnostics)}")
        self.run_points()

        bases: Dict[str, Optional[Tuple[float, float]]] = {}
        if self.plan.runs_winding(self.settings):
            points = self.store.get_points()
            bases = self.select_bases(points)
            self.run_windings(points, bases)
        elif "winding" in self.plan.diagnostics:
            logger.info("Winding skipped for this 2D plan (set winding=true or sweep.winding_2d)")

        result = self.collect(bases)
        logger.info(f"Sweep finished: {len(result.records)} rows, {result.n_errors} failed, "
                    f"{result.n_degraded} degraded")
        self.log_transitions(result)
        return result


def write_result(result: SweepResult, settings: LabSettings) -> Dict[str, str]:
    """CSV, JSON, timings sidecar and effective settings next to the plan's output stem."""
    paths = result.plan.paths()
    write_csv(result.frame, paths["csv"])
    write_json(result.to_payload(), paths["json"])
    timings = pd.DataFrame([{**r.params, "status": r.status, "wall_time": w}
                            for r, w in zip(result.records, result.wall_times)])
    write_csv(timings, paths["timings"], schema=False)
    save_settings(settings, paths["settings"])
    return {k: str(v) for k, v in paths.items()}


def run_sweep(plan: SweepPlan, settings: Optional[LabSettings] = None, workers: Optional[int] = None,
              progress: bool = True, write: bool = True) -> SweepResult:
    """
    Run a plan with checkpointing and write its outputs.

    Args:
        plan: validated SweepPlan
        settings: numerical settings (defaults when omitted)
        workers: pool size override
        progress: show tqdm bars
        write: write CSV/JSON outputs when done

    Raises:
        MemoryBudgetExceeded: before any work when the plan does not fit
    """
    settings = settings or LabSettings()
    result = SweepRunner(plan, settings, workers, progress).run()
    if write:
        write_result(result, settings)
    return result
