import logging
import sqlite3
from pathlib import Path
from typing import Optional

from onespace.models import EmpiricalRecord

logger = logging.getLogger(__name__)


def get_db_connection(db_path: Path):
    """Creates a connection to the SQLite run archive."""
    conn = sqlite3.connect(db_path)
    # Rows are addressable by column name
    conn.row_factory = sqlite3.Row
    return conn


def init_db(db_path: Path):
    """Initializes the archive with the required tables."""
    conn = get_db_connection(db_path)
    cursor = conn.cursor()

    cursor.execute('''
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            created_at TEXT NOT NULL DEFAULT CURRENT_TIMESTAMP,
            model_kind TEXT NOT NULL,
            model_hash TEXT NOT NULL,
            seed TEXT NOT NULL,
            trials INTEGER NOT NULL,
            verdict TEXT,
            record TEXT NOT NULL
        )
    ''')

    conn.commit()
    conn.close()


def insert_record(conn: sqlite3.Connection, record: EmpiricalRecord, verdict: Optional[str] = None) -> int:
    """Stores a record with its analysis verdict and returns the run id."""
    sql = '''
        INSERT INTO runs
        (model_kind, model_hash, seed, trials, verdict, record)
        VALUES (?, ?, ?, ?, ?, ?)
    '''
    cursor = conn.cursor()
    # Seeds reach 2**64 - 1, past SQLite's signed integer range
    cursor.execute(sql, (
        record.model_kind, record.model_hash, str(record.seed),
        record.trials, verdict, record.model_dump_json(),
    ))
    conn.commit()
    logger.debug(f"Archived run {cursor.lastrowid} ({record.model_kind}, seed {record.seed})")
    return cursor.lastrowid


def list_records(conn: sqlite3.Connection) -> list[dict]:
    cursor = conn.execute('''
        SELECT id, created_at, model_kind, model_hash, seed, trials, verdict
        FROM runs ORDER BY id
    ''')
    return [{**dict(row), "seed": int(row["seed"])} for row in cursor.fetchall()]


def load_record(conn: sqlite3.Connection, run_id: int) -> EmpiricalRecord:
    row = conn.execute("SELECT record FROM runs WHERE id = ?", (run_id,)).fetchone()
    if row is None:
        raise KeyError(f"No archived run with id {run_id}")
    return EmpiricalRecord.model_validate_json(row["record"])
