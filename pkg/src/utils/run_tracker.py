"""
Run history tracking and accuracy trend analysis.

Records every train/eval/sweep outcome so accuracy can be compared across
configs and seeds. Lives outside the deterministic artifacts: nothing here
feeds back into caches, checkpoints or CSVs.
"""

import sqlite3
import uuid
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.pipeline_config import PathSettings


@dataclass
class RunRecord:
    """Outcome of one CLI command."""
    run_id: str
    timestamp: datetime
    command: str
    config_hash: str
    net: str
    seed: int
    n_spheres: int
    accuracy: float
    detail: str = ""


class RunTracker:
    """
    Tracks command outcomes across runs.

    Stores history in SQLite for trend analysis and the `history` command.
    """

    def __init__(self, db_path: Optional[Path] = None):
        """
        Initialize run tracker.

        Args:
            db_path: Path to SQLite database (default: INSPHERE_RUN_DB or data/run_history.db)
        """
        self.db_path = Path(db_path) if db_path is not None else PathSettings.run_db()
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._init_db()

    def _init_db(self) -> None:
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    timestamp TEXT NOT NULL,
                    command TEXT NOT NULL,
                    config_hash TEXT NOT NULL,
                    net TEXT NOT NULL,
                    seed INTEGER NOT NULL,
                    n_spheres INTEGER NOT NULL,
                    accuracy REAL NOT NULL,
                    detail TEXT NOT NULL
                )
            """)
            conn.execute("""
                CREATE INDEX IF NOT EXISTS idx_runs_timestamp
                ON runs(timestamp)
            """)
            conn.execute("""
                CREATE INDEX IF NOT EXISTS idx_runs_command
                ON runs(command)
            """)
            conn.commit()

    def record_run(
        self,
        command: str,
        config_hash: str,
        net: str,
        seed: int,
        n_spheres: int,
        accuracy: float,
        detail: str = "",
        run_id: Optional[str] = None,
    ) -> RunRecord:
        """
        Record the outcome of a command.

        Args:
            command: CLI command name (train, eval, sweep)
            config_hash: Pipeline config hash
            net: Network preset
            seed: Run seed
            n_spheres: Spheres per object used for the score
            accuracy: Overall accuracy in [0, 1]
            detail: Free-form note (e.g. checkpoint path)
            run_id: Optional identifier (random when omitted)

        Returns:
            The stored RunRecord
        """
        record = RunRecord(
            run_id=run_id or uuid.uuid4().hex[:12],
            timestamp=datetime.now(),
            command=command,
            config_hash=config_hash,
            net=net,
            seed=seed,
            n_spheres=n_spheres,
            accuracy=accuracy,
            detail=detail,
        )
        with sqlite3.connect(self.db_path) as conn:
            conn.execute(
                """
                INSERT INTO runs
                (run_id, timestamp, command, config_hash, net, seed, n_spheres, accuracy, detail)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    record.run_id,
                    record.timestamp.isoformat(),
                    record.command,
                    record.config_hash,
                    record.net,
                    record.seed,
                    record.n_spheres,
                    record.accuracy,
                    record.detail,
                ),
            )
            conn.commit()
        return record

    def get_recent_runs(self, limit: int = 10, command: Optional[str] = None) -> List[RunRecord]:
        """
        Get recent run records.

        Args:
            limit: Maximum number of records to return
            command: Optional filter by command

        Returns:
            List of RunRecord objects, most recent first
        """
        query = """
            SELECT run_id, timestamp, command, config_hash, net, seed,
                   n_spheres, accuracy, detail
            FROM runs
        """
        params: List[Any] = []
        if command:
            query += " WHERE command = ?"
            params.append(command)
        query += " ORDER BY timestamp DESC, rowid DESC LIMIT ?"
        params.append(limit)

        with sqlite3.connect(self.db_path) as conn:
            rows = conn.execute(query, params).fetchall()

        return [
            RunRecord(
                run_id=row[0],
                timestamp=datetime.fromisoformat(row[1]),
                command=row[2],
                config_hash=row[3],
                net=row[4],
                seed=row[5],
                n_spheres=row[6],
                accuracy=row[7],
                detail=row[8],
            )
            for row in rows
        ]

    def get_accuracy_trend(self, command: str = "train", config_hash: Optional[str] = None) -> Dict[str, Any]:
        """
        Accuracy statistics for one command.

        Args:
            command: Command to summarize
            config_hash: Optional filter by config

        Returns:
            Dictionary with run count, mean/min/max accuracy and the chronological series
        """
        query = "SELECT accuracy FROM runs WHERE command = ?"
        params: List[Any] = [command]
        if config_hash:
            query += " AND config_hash = ?"
            params.append(config_hash)
        query += " ORDER BY timestamp, rowid"

        with sqlite3.connect(self.db_path) as conn:
            accuracies = [row[0] for row in conn.execute(query, params).fetchall()]

        if not accuracies:
            return {
                'total_runs': 0,
                'avg_accuracy': 0.0,
                'min_accuracy': 0.0,
                'max_accuracy': 0.0,
                'series': [],
            }
        return {
            'total_runs': len(accuracies),
            'avg_accuracy': sum(accuracies) / len(accuracies),
            'min_accuracy': min(accuracies),
            'max_accuracy': max(accuracies),
            'series': accuracies,
        }


# Global run tracker instance
_run_tracker: Optional[RunTracker] = None


def get_run_tracker() -> RunTracker:
    """Get global run tracker instance."""
    global _run_tracker
    if _run_tracker is None:
        _run_tracker = RunTracker()
    return _run_tracker


def reset_run_tracker() -> None:
    """Drop the global instance so the next call re-reads INSPHERE_RUN_DB."""
    global _run_tracker
    _run_tracker = None
