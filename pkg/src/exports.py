"""
Writers for spectra, per-state tables, entanglement scans, winding traces,
level-statistics histograms, sweep tables and raw eigenvector blobs.

Every file is written to a temporary sibling first and then renamed into place.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .core.spectral import SpectralDecomposition
from .diagnostics.entanglement import CorrelationSpectrum
from .diagnostics.level_stats import AgrResult, ratio_histogram
from .diagnostics.localization import LocalizationProfile, classify_states, ipr_threshold
from .diagnostics.records import SCHEMA_VERSION
from .diagnostics.topology import WindingTrace

logger = logging.getLogger(__name__)


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(frame: pd.DataFrame, path: Path, schema: bool = True) -> Path:
    """CSV with a '# schema_version=N' first line (read back with comment='#')."""
    body = frame.to_csv(index=False, lineterminator="\n")
    header = f"# schema_version={SCHEMA_VERSION}\n" if schema else ""
    path = atomic_write_text(path, header + body)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(payload: Dict[str, Any], path: Path) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=False) + "\n")


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def spectrum_frame(dec: SpectralDecomposition) -> pd.DataFrame:
    return pd.DataFrame({
        "index": np.arange(dec.dim),
        "re_E": dec.eigenvalues.real,
        "im_E": dec.eigenvalues.imag,
    })


def per_state_frame(dec: SpectralDecomposition, prof: LocalizationProfile,
                    threshold: Optional[float] = None) -> pd.DataFrame:
    threshold = ipr_threshold(dec.dim) if threshold is None else threshold
    frame = spectrum_frame(dec)
    frame["ipr"] = prof.ipr
    frame["npr"] = prof.npr
    frame["class"] = classify_states(prof, threshold)
    return frame


def es_scan_frame(scan: Sequence[Tuple[float, CorrelationSpectrum]]) -> pd.DataFrame:
    """One row per (cutoff, zeta); an empty filling contributes a single row with no zeta."""
    rows: List[Dict[str, Any]] = []
    for cutoff, spectrum in scan:
        if spectrum.zeta.size == 0:
            rows.append({"cutoff_re_E": cutoff, "zeta_index": None, "re_zeta": None, "im_zeta": None,
                         "xi": None, "entropy": spectrum.entropy})
            continue
        raw = spectrum.zeta_raw if spectrum.zeta_raw.size else spectrum.zeta.astype(complex)
        for j, (z, x) in enumerate(zip(raw, spectrum.xi)):
            rows.append({"cutoff_re_E": cutoff, "zeta_index": j, "re_zeta": float(z.real),
                         "im_zeta": float(z.imag), "xi": float(x), "entropy": spectrum.entropy})
    return pd.DataFrame(rows, columns=["cutoff_re_E", "zeta_index", "re_zeta", "im_zeta", "xi", "entropy"])


def winding_trace_frame(trace: WindingTrace) -> pd.DataFrame:
    return pd.DataFrame({
        "theta": trace.thetas,
        "turns": trace.turns,
        "log_abs_det": trace.log_abs_det,
    })


def histogram_frame(result: AgrResult, bins: int = 50) -> pd.DataFrame:
    counts, edges = ratio_histogram(result, bins)
    return pd.DataFrame({"g_lo": edges[:-1], "g_hi": edges[1:], "count": counts})


def write_eigenvector_blob(dec: SpectralDecomposition, path: Path) -> Tuple[Path, Path]:
    """
    Raw little-endian complex128 data, column-major: right vectors then left
    vectors, each dim x dim. A JSON sidecar records the layout.
    """
    path = Path(path)
    data = (np.asfortranarray(dec.right_vectors, dtype="<c16").tobytes(order="F")
            + np.asfortranarray(dec.left_vectors, dtype="<c16").tobytes(order="F"))
    atomic_write_bytes(path, data)
    sidecar = path.with_name(path.name + ".json")
    write_json({
        "dtype": "<c16",
        "order": "F",
        "shape": [dec.dim, dec.dim],
        "blocks": ["right", "left"],
        "n_components": dec.n_components,
        "eigenvalues_re": dec.eigenvalues.real.tolist(),
        "eigenvalues_im": dec.eigenvalues.imag.tolist(),
    }, sidecar)
    return path, sidecar


def read_eigenvector_blob(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path.with_name(path.name + ".json")) as f:
        meta = json.load(f)
    n, m = meta["shape"]
    raw = np.frombuffer(path.read_bytes(), dtype=meta["dtype"])
    right = raw[: n * m].reshape((n, m), order="F")
    left = raw[n * m:].reshape((n, m), order="F")
    return right, left
