"""
Checkpoint store for sweeps.
Handles SQLite persistence of finished grid points, their spectrum snapshots,
winding results and base energies so that an interrupted sweep can resume.
"""

import json
import logging
import sqlite3
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class CheckpointStore:
    """Thread-safe SQLite checkpoint store keyed by grid index."""

    def __init__(self, db_path: str, fingerprint: str):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.fingerprint = fingerprint
        self._lock = threading.Lock()
        self._pending: List[Tuple] = []
        self._init_database()

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path)

    def _init_database(self):
        """Create tables if they don't exist and reset the store if the plan changed."""
        with self._lock:
            conn = self._connect()
            conn.execute("""
                CREATE TABLE IF NOT EXISTS meta (
                    key TEXT PRIMARY KEY,
                    value TEXT NOT NULL
                )
            """)
            conn.execute("""
                CREATE TABLE IF NOT EXISTS points (
                    idx INTEGER PRIMARY KEY,
                    record TEXT NOT NULL,      -- JSON DiagnosticsRecord
                    eigenvalues BLOB,          -- complex128
                    ipr BLOB,                  -- float64
                    wall_time REAL
                )
            """)
            conn.execute("""
                CREATE TABLE IF NOT EXISTS windings (
                    idx INTEGER PRIMARY KEY,
                    record TEXT NOT NULL,      -- JSON DiagnosticsRecord after the winding pass
                    wall_time REAL
                )
            """)

            row = conn.execute("SELECT value FROM meta WHERE key = 'fingerprint'").fetchone()
            if row is not None and row[0] != self.fingerprint:
                logger.warning(f"Checkpoint {self.db_path} belongs to a different plan; starting over")
                conn.execute("DELETE FROM points")
                conn.execute("DELETE FROM windings")
                conn.execute("DELETE FROM meta")
                row = None
            if row is None:
                conn.execute("INSERT INTO meta (key, value) VALUES ('fingerprint', ?)", (self.fingerprint,))
            conn.commit()
            conn.close()

    def add_point(self, idx: int, record: Dict[str, Any], eigenvalues: Optional[np.ndarray],
                  ipr: Optional[np.ndarray], wall_time: Optional[float]) -> int:
        """Queue a finished point; returns the number of points waiting for a flush."""
        with self._lock:
            self._pending.append((
                idx,
                json.dumps(record),
                None if eigenvalues is None else np.ascontiguousarray(eigenvalues, dtype="<c16").tobytes(),
                None if ipr is None else np.ascontiguousarray(ipr, dtype="<f8").tobytes(),
                wall_time,
            ))
            return len(self._pending)

    def flush(self) -> int:
        """Commit queued points in one transaction."""
        with self._lock:
            if not self._pending:
                return 0
            conn = self._connect()
            conn.executemany("""
                INSERT OR REPLACE INTO points (idx, record, eigenvalues, ipr, wall_time)
                VALUES (?, ?, ?, ?, ?)
            """, self._pending)
            conn.commit()
            conn.close()
            count = len(self._pending)
            self._pending = []
        logger.info(f"Checkpoint: committed {count} points to {self.db_path}")
        return count

    def completed_points(self) -> List[int]:
        with self._lock:
            conn = self._connect()
            rows = conn.execute("SELECT idx FROM points ORDER BY idx").fetchall()
            conn.close()
        return [r[0] for r in rows]

    def get_points(self) -> Dict[int, Dict[str, Any]]:
        """Stored points: record, snapshot arrays and wall time, keyed by grid index."""
        with self._lock:
            conn = self._connect()
            rows = conn.execute(
                "SELECT idx, record, eigenvalues, ipr, wall_time FROM points ORDER BY idx").fetchall()
            conn.close()
        points = {}
        for idx, record, eigs, ipr, wall_time in rows:
            points[idx] = {
                "record": json.loads(record),
                "eigenvalues": None if eigs is None else np.frombuffer(eigs, dtype="<c16").copy(),
                "ipr": None if ipr is None else np.frombuffer(ipr, dtype="<f8").copy(),
                "wall_time": wall_time,
            }
        return points

    def add_windings(self, items: List[Tuple[int, Dict[str, Any], Optional[float]]]) -> None:
        if not items:
            return
        with self._lock:
            conn = self._connect()
            conn.executemany("INSERT OR REPLACE INTO windings (idx, record, wall_time) VALUES (?, ?, ?)",
                             [(idx, json.dumps(record), wt) for idx, record, wt in items])
            conn.commit()
            conn.close()
        logger.info(f"Checkpoint: committed {len(items)} winding rows")

    def get_windings(self) -> Dict[int, Tuple[Dict[str, Any], Optional[float]]]:
        with self._lock:
            conn = self._connect()
            rows = conn.execute("SELECT idx, record, wall_time FROM windings ORDER BY idx").fetchall()
            conn.close()
        return {idx: (json.loads(record), wt) for idx, record, wt in rows}

    def set_meta(self, key: str, value: Any) -> None:
        with self._lock:
            conn = self._connect()
            conn.execute("INSERT OR REPLACE INTO meta (key, value) VALUES (?, ?)", (key, json.dumps(value)))
            conn.commit()
            conn.close()

    def get_meta(self, key: str) -> Optional[Any]:
        with self._lock:
            conn = self._connect()
            row = conn.execute("SELECT value FROM meta WHERE key = ?", (key,)).fetchone()
            conn.close()
        if row is None or key == "fingerprint":
            return None if row is None else row[0]
        return json.loads(row[0])
