"""
Sweep plans: a base ModelSpec, one or two parameter axes, the diagnostics to
run and where to write the results. Plans are read from flat key=value text
with dotted axis keys.
"""

import hashlib
import json
import logging
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import psutil
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..core.errors import PlanValidationError, SpecValidationError
from ..core.model import SPEC_KEYS, ModelSpec, spec_from_mapping
from ..core.settings import LabSettings, parse_angle, parse_key_value_text
from ..diagnostics.records import DIAGNOSTICS

logger = logging.getLogger(__name__)

AXIS_PARAMS = ("J", "V", "phi", "beta", "gamma", "flux", "L")
PLAN_KEYS = ("diagnostics", "output", "checkpoint_interval", "winding", "seed")
# Dense complex matrices alive per worker during one decomposition.
MATRICES_PER_WORKER = 6


class Axis(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    values: Tuple[float, ...]

    @field_validator("name")
    @classmethod
    def _known_param(cls, name: str) -> str:
        if name not in AXIS_PARAMS:
            raise ValueError(f"axis parameter must be one of {list(AXIS_PARAMS)}")
        return name

    @field_validator("values")
    @classmethod
    def _finite_values(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        if not values:
            raise ValueError("axis needs at least one value")
        if not all(np.isfinite(values)):
            raise ValueError("axis values must be finite")
        return values

    def cast(self, value: float) -> Any:
        return int(round(value)) if self.name == "L" else float(value)


class SweepPlan(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    base: ModelSpec
    axis1: Axis
    axis2: Optional[Axis] = None
    diagnostics: Tuple[str, ...] = DIAGNOSTICS
    output: str = "results/sweep"
    checkpoint_interval: Optional[int] = Field(None, ge=1)
    winding: Optional[bool] = None
    seed: int = 0

    @field_validator("diagnostics")
    @classmethod
    def _known_diagnostics(cls, values: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [v for v in values if v not in DIAGNOSTICS]
        if unknown:
            raise ValueError(f"unknown diagnostics {unknown}; choose from {list(DIAGNOSTICS)}")
        if not values:
            raise ValueError("at least one diagnostic is required")
        return tuple(dict.fromkeys(values))

    @property
    def axes(self) -> List[Axis]:
        return [self.axis1] + ([self.axis2] if self.axis2 is not None else [])

    @property
    def n_points(self) -> int:
        return int(np.prod([len(a.values) for a in self.axes]))

    def grid(self) -> List[Dict[str, Any]]:
        """Grid points in row order: axis2 outermost, axis1 innermost."""
        if self.axis2 is None:
            return [{self.axis1.name: self.axis1.cast(v)} for v in self.axis1.values]
        return [{self.axis1.name: self.axis1.cast(v1), self.axis2.name: self.axis2.cast(v2)}
                for v2, v1 in product(self.axis2.values, self.axis1.values)]

    def spec_at(self, point: Dict[str, Any]) -> ModelSpec:
        return self.base.with_updates(**point)

    def runs_winding(self, settings: LabSettings) -> bool:
        if "winding" not in self.diagnostics:
            return False
        if self.winding is not None:
            return self.winding
        return self.axis2 is None or settings.sweep.winding_2d

    def fingerprint(self, settings: LabSettings) -> str:
        """Hash of everything that changes row contents (pool size and checkpoint cadence do not)."""
        numerics = settings.model_dump(mode="json", exclude={"sweep"})
        numerics["winding"] = self.runs_winding(settings)
        payload = json.dumps({"plan": self.model_dump(mode="json", exclude={"checkpoint_interval"}),
                              "settings": numerics}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def paths(self) -> Dict[str, Path]:
        stem = Path(self.output)
        return {
            "csv": stem.with_suffix(".csv"),
            "json": stem.with_suffix(".json"),
            "timings": stem.parent / f"{stem.name}.timings.csv",
            "checkpoint": stem.parent / f"{stem.name}.ckpt.sqlite",
            "settings": stem.parent / f"{stem.name}.settings.json",
        }


def axis_values(start: float, stop: float, step: float) -> Tuple[float, ...]:
    """Inclusive arithmetic progression; the last value snaps to stop when it lands on it."""
    if step <= 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("stop must not be below start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    values = start + step * np.arange(n)
    if abs(values[-1] - stop) < 1e-9 * step:
        values[-1] = stop
    return tuple(float(v) for v in values)


def _parse_axis(prefix: str, entries: Dict[str, str]) -> Optional[Dict[str, Any]]:
    keys = {k[len(prefix) + 1:]: v for k, v in entries.items() if k.startswith(prefix + ".")}
    if not keys:
        return None
    unknown = set(keys) - {"name", "start", "stop", "step", "values"}
    if unknown:
        raise PlanValidationError(f"{prefix}.{sorted(unknown)[0]}", "unknown axis key")
    if "name" not in keys:
        raise PlanValidationError(f"{prefix}.name", "missing axis parameter name")
    try:
        if "values" in keys:
            if {"start", "stop", "step"} & set(keys):
                raise PlanValidationError(prefix, "give either values or start/stop/step")
            values = tuple(parse_angle(v) for v in keys["values"].split(",") if v.strip())
        else:
            missing = [k for k in ("start", "stop", "step") if k not in keys]
            if missing:
                raise PlanValidationError(f"{prefix}.{missing[0]}", "missing axis bound")
            values = axis_values(*(parse_angle(keys[k]) for k in ("start", "stop", "step")))
    except ValueError as e:
        raise PlanValidationError(prefix, str(e)) from e
    return {"name": keys["name"], "values": values}


def plan_from_text(text: str) -> SweepPlan:
    """
    Parse a plan file.

    Spec keys (kind, J, V, phi, ...) set the base point; axis1.* and axis2.*
    define the axes; diagnostics, output, checkpoint_interval, winding and
    seed are plan options.
    """
    try:
        entries = dict(parse_key_value_text(text))
    except SpecValidationError as e:
        raise PlanValidationError(e.key, str(e)) from e

    for key in entries:
        head = key.split(".", 1)[0]
        if key not in SPEC_KEYS and key not in PLAN_KEYS and head not in ("axis1", "axis2"):
            raise PlanValidationError(key, "unknown plan key")

    base_values = {k: v for k, v in entries.items() if k in SPEC_KEYS}
    data: Dict[str, Any] = {k: v for k, v in entries.items() if k in PLAN_KEYS}
    if "diagnostics" in data:
        data["diagnostics"] = tuple(d.strip() for d in data["diagnostics"].split(",") if d.strip())
    if "winding" in data:
        data["winding"] = data["winding"].lower() in ("true", "yes", "on", "1")

    axis1 = _parse_axis("axis1", entries)
    if axis1 is None:
        raise PlanValidationError("axis1.name", "a plan needs at least one axis")
    data["axis1"] = axis1
    axis2 = _parse_axis("axis2", entries)
    if axis2 is not None:
        data["axis2"] = axis2

    try:
        data["base"] = spec_from_mapping(base_values)
    except SpecValidationError as e:
        raise PlanValidationError(e.key, str(e)) from e
    return validate_plan(data)


def validate_plan(data: Dict[str, Any]) -> SweepPlan:
    """Validate plan data, including every grid point's ModelSpec."""
    try:
        plan = SweepPlan.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first.get("loc", ())) or None
        raise PlanValidationError(key, first.get("msg", str(e))) from e

    if plan.axis2 is not None and plan.axis2.name == plan.axis1.name:
        raise PlanValidationError("axis2.name", "both axes sweep the same parameter")
    for point in plan.grid():
        try:
            plan.spec_at(point)
        except SpecValidationError as e:
            raise PlanValidationError(e.key, f"at {point}: {e}") from e
    return plan


def load_plan(path: str) -> SweepPlan:
    with open(path, "r") as f:
        return plan_from_text(f.read())


def estimate_memory_bytes(plan: SweepPlan, workers: int) -> int:
    """Peak bytes: dense work matrices per worker plus the kept spectrum snapshots."""
    largest = max(plan.spec_at(p).dim for p in plan.grid())
    per_worker = MATRICES_PER_WORKER * largest * largest * 16
    snapshots = plan.n_points * largest * (16 + 8)
    return workers * per_worker + snapshots


def memory_cap_bytes(budget_gb: float) -> int:
    """Configured budget, capped by the memory currently available."""
    budget = int(budget_gb * 1024 ** 3)
    available = int(psutil.virtual_memory().available)
    return min(budget, available)
