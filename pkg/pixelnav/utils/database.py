"""Run ledger for PixelNav"""

import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Optional
from datetime import datetime
import json


class RunDatabase:
    """SQLite ledger of CLI runs, per-epoch training rows and evaluation metrics"""

    def __init__(self, db_path: str = "data/pixelnav.db"):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.connection: Optional[sqlite3.Connection] = None
        self._create_tables()

    def connect(self) -> sqlite3.Connection:
        """Create database connection"""
        if self.connection is None:
            self.connection = sqlite3.connect(self.db_path)
            self.connection.row_factory = sqlite3.Row
        return self.connection

    def _create_tables(self) -> None:
        """Create database tables if they don't exist"""
        conn = self.connect()
        cursor = conn.cursor()

        # Runs table, one row per CLI command
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT UNIQUE NOT NULL,
                command TEXT NOT NULL,
                seed INTEGER NOT NULL,
                config_hash TEXT NOT NULL,
                corpus_hash TEXT,
                out_dir TEXT NOT NULL,
                status TEXT NOT NULL,
                manifest TEXT,
                started_at TEXT NOT NULL,
                finished_at TEXT
            )
        ''')

        # Epoch log table
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS epoch_log (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT NOT NULL,
                epoch INTEGER NOT NULL,
                critic1 REAL,
                critic2 REAL,
                cql_penalty REAL,
                policy REAL,
                bc REAL,
                magnitude REAL,
                learning_rates TEXT,
                wall_time REAL,
                created_at TEXT NOT NULL
            )
        ''')

        # Metrics table
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS metrics (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT NOT NULL,
                method TEXT NOT NULL,
                seed INTEGER,
                ade_mean REAL,
                ade_std REAL,
                fde_mean REAL,
                fde_std REAL,
                fd_mean REAL,
                fd_std REAL,
                trajectories INTEGER,
                created_at TEXT NOT NULL
            )
        ''')

        conn.commit()

    def insert_run(self, run_data: Dict[str, Any]) -> int:
        """Insert a new run"""
        conn = self.connect()
        cursor = conn.cursor()

        cursor.execute('''
            INSERT INTO runs (
                run_id, command, seed, config_hash, corpus_hash, out_dir,
                status, manifest, started_at
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (
            run_data['run_id'],
            run_data['command'],
            run_data['seed'],
            run_data['config_hash'],
            run_data.get('corpus_hash'),
            run_data['out_dir'],
            run_data.get('status', 'RUNNING'),
            json.dumps(run_data.get('manifest', {}), default=str),
            datetime.now().isoformat()
        ))

        conn.commit()
        return cursor.lastrowid

    def finish_run(self, run_id: str, status: str) -> None:
        """Mark a run as finished"""
        conn = self.connect()
        conn.execute('''
            UPDATE runs SET status = ?, finished_at = ? WHERE run_id = ?
        ''', (status, datetime.now().isoformat(), run_id))
        conn.commit()

    def insert_epoch(self, run_id: str, row: Dict[str, Any]) -> int:
        """Insert one training epoch row"""
        conn = self.connect()
        cursor = conn.cursor()

        cursor.execute('''
            INSERT INTO epoch_log (
                run_id, epoch, critic1, critic2, cql_penalty, policy, bc,
                magnitude, learning_rates, wall_time, created_at
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (
            run_id,
            row['epoch'],
            row.get('critic1'),
            row.get('critic2'),
            row.get('cql_penalty'),
            row.get('policy'),
            row.get('bc'),
            row.get('magnitude'),
            json.dumps(row.get('learning_rates', {})),
            row.get('wall_time'),
            datetime.now().isoformat()
        ))

        conn.commit()
        return cursor.lastrowid

    def insert_metrics(self, run_id: str, method: str, summary: Dict[str, Any], seed: Optional[int] = None) -> int:
        """Insert a corpus-level metrics summary"""
        conn = self.connect()
        cursor = conn.cursor()

        cursor.execute('''
            INSERT INTO metrics (
                run_id, method, seed, ade_mean, ade_std, fde_mean, fde_std,
                fd_mean, fd_std, trajectories, created_at
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (
            run_id,
            method,
            seed,
            summary.get('ade_mean'),
            summary.get('ade_std'),
            summary.get('fde_mean'),
            summary.get('fde_std'),
            summary.get('fd_mean'),
            summary.get('fd_std'),
            summary.get('trajectories'),
            datetime.now().isoformat()
        ))

        conn.commit()
        return cursor.lastrowid

    def get_runs(self, command: Optional[str] = None, limit: int = 100) -> List[Dict[str, Any]]:
        """Get runs, optionally filtered by command"""
        conn = self.connect()
        cursor = conn.cursor()

        if command:
            cursor.execute('''
                SELECT * FROM runs WHERE command = ? ORDER BY id DESC LIMIT ?
            ''', (command, limit))
        else:
            cursor.execute('''
                SELECT * FROM runs ORDER BY id DESC LIMIT ?
            ''', (limit,))

        return [dict(row) for row in cursor.fetchall()]

    def get_epochs(self, run_id: str) -> List[Dict[str, Any]]:
        """Epoch rows of one run in order"""
        cursor = self.connect().execute('''
            SELECT * FROM epoch_log WHERE run_id = ? ORDER BY epoch
        ''', (run_id,))
        return [dict(row) for row in cursor.fetchall()]

    def get_metrics(self, run_id: str) -> List[Dict[str, Any]]:
        cursor = self.connect().execute('''
            SELECT * FROM metrics WHERE run_id = ? ORDER BY id
        ''', (run_id,))
        return [dict(row) for row in cursor.fetchall()]

    def close(self) -> None:
        """Close database connection"""
        if self.connection:
            self.connection.close()
            self.connection = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
