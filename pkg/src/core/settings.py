"""
Configuration layer for the laboratory.
Loads numerical defaults from config/lab_config.json, applies overrides and
parses the flat key=value text used by spec and plan files.
"""

import json
import logging
import math
import os
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import SpecValidationError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path("config/lab_config.json")

_PI_EXPR = re.compile(
    r"^\s*(?P<sign>[-+]?)\s*(?P<num>\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*pi\s*(?:/\s*(?P<den>\d*\.?\d+))?\s*$"
)


class SpectralSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tol_imag_rel: float = Field(1e-8, gt=0)
    match_tol_rel: float = Field(1e-6, gt=0)
    degeneracy_tol_rel: float = Field(1e-8, gt=0)
    left_method: Literal["adjoint", "lapack"] = "adjoint"
    perturb_retry: bool = False
    perturb_scale: float = Field(1e-10, gt=0)


class LocalizationSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ipr_threshold_factor: float = Field(10.0, gt=1)
    eta_critical_margin: Optional[float] = None


class TopologySettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_theta: int = Field(256, ge=4)
    max_points: int = Field(16384, ge=8)
    max_step_phase: float = Field(math.pi / 2, gt=0, lt=math.pi)
    det_floor: float = Field(1e-300, gt=0)
    flux_divisor: Optional[float] = None
    scan_orientation: Literal["auto", "sweep"] = "sweep"


class EntanglementSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    clamp_eps: float = Field(1e-12, gt=0, lt=0.5)
    complex_tol: float = Field(1e-6, gt=0)
    n_cutoffs: int = Field(64, ge=1)


class LevelStatsSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    degenerate_rel: float = Field(1e-12, gt=0)


class SweepSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    workers: int = Field(default_factory=lambda: min(4, os.cpu_count() or 1), ge=1)
    checkpoint_interval: int = Field(10, ge=1)
    memory_budget_gb: float = Field(4.0, gt=0)
    winding_2d: bool = False


class LabSettings(BaseModel):
    """All numerical defaults, one section per module."""

    model_config = ConfigDict(extra="forbid")

    spectral: SpectralSettings = Field(default_factory=SpectralSettings)
    localization: LocalizationSettings = Field(default_factory=LocalizationSettings)
    topology: TopologySettings = Field(default_factory=TopologySettings)
    entanglement: EntanglementSettings = Field(default_factory=EntanglementSettings)
    level_stats: LevelStatsSettings = Field(default_factory=LevelStatsSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)


def _first_error_key(error: ValidationError) -> Optional[str]:
    first = error.errors()[0]
    return ".".join(str(part) for part in first.get("loc", ())) or None


def validate_settings(data: Dict[str, Any]) -> LabSettings:
    try:
        return LabSettings.model_validate(data)
    except ValidationError as e:
        raise SpecValidationError(_first_error_key(e), e.errors()[0].get("msg", str(e))) from e


def load_settings(path: Optional[Path] = None,
                  overrides: Optional[Iterable[str]] = None) -> LabSettings:
    """
    Load settings from JSON, falling back to built-in defaults when the file is missing.

    Args:
        path: JSON file (defaults to config/lab_config.json)
        overrides: "section.key=value" strings applied on top of the file

    Returns:
        Validated LabSettings
    """
    path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    data: Dict[str, Any] = {}
    if path.exists():
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise SpecValidationError(str(path), f"invalid JSON: {e}") from e
    else:
        logger.info(f"No settings file at {path}, using built-in defaults")

    for item in overrides or ():
        key, value = split_assignment(item)
        section, _, field = key.partition(".")
        if not field:
            raise SpecValidationError(key, "settings overrides use section.key=value")
        data.setdefault(section, {})
        if not isinstance(data[section], dict):
            raise SpecValidationError(section, "not a settings section")
        data[section][field] = parse_scalar(value)

    return validate_settings(data)


def save_settings(settings: LabSettings, path: Path) -> None:
    """Write settings as JSON (used to snapshot the effective configuration next to sweep outputs)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(settings.model_dump(), f, indent=2)


def parse_angle(text: Any) -> float:
    """Parse a number or a pi expression such as 'pi/10', '-pi/2', '0.5*pi', '2pi'."""
    if isinstance(text, (int, float)):
        return float(text)
    text = str(text).strip()
    try:
        return float(text)
    except ValueError:
        pass
    match = _PI_EXPR.match(text.lower())
    if not match:
        raise ValueError(f"cannot parse angle {text!r}")
    num = float(match.group("num")) if match.group("num") not in ("", ".") else 1.0
    den = float(match.group("den")) if match.group("den") else 1.0
    value = num * math.pi / den
    return -value if match.group("sign") == "-" else value


def parse_scalar(text: str) -> Any:
    """Best-effort typed value from config text: bool, int, float, pi expression, null or string."""
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("null", "none", ""):
        return None
    try:
        return int(lowered)
    except ValueError:
        pass
    try:
        return parse_angle(lowered)
    except ValueError:
        return text.strip()


def split_assignment(item: str) -> Tuple[str, str]:
    if "=" not in item:
        raise SpecValidationError(item, "expected key=value")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def parse_key_value_text(text: str) -> List[Tuple[str, str]]:
    """
    Flat structured text: one key=value per line, '#' comments, blank lines ignored.
    Duplicate keys are rejected.
    """
    pairs: List[Tuple[str, str]] = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecValidationError(f"line {lineno}", f"expected key=value, got {raw.strip()!r}")
        key, value = split_assignment(line)
        if key in seen:
            raise SpecValidationError(key, "duplicate key")
        seen.add(key)
        pairs.append((key, value))
    return pairs
