import pytest

from onespace.database import get_db_connection, init_db, insert_record, list_records, load_record
from onespace.simulator import run_experiment


def test_archive_round_trip(tmp_path, source_model, three_setting_plan):
    """Stored records come back unchanged, listed in insertion order."""
    db_path = tmp_path / "runs.db"
    init_db(db_path)
    record = run_experiment(source_model, three_setting_plan)

    conn = get_db_connection(db_path)
    try:
        first = insert_record(conn, record, "feasible")
        second = insert_record(conn, record)
        rows = list_records(conn)
        assert [row["id"] for row in rows] == [first, second]
        assert rows[0]["verdict"] == "feasible"
        assert rows[1]["verdict"] is None
        assert rows[0]["model_hash"] == record.model_hash
        assert rows[0]["seed"] == record.seed
        assert rows[0]["created_at"]
        assert load_record(conn, first) == record
    finally:
        conn.close()


def test_large_seed_survives(tmp_path, source_model, three_setting_plan):
    db_path = tmp_path / "runs.db"
    init_db(db_path)
    plan = three_setting_plan.model_copy(update={"seed": 2**64 - 1, "trials": 100})
    record = run_experiment(source_model, plan)
    conn = get_db_connection(db_path)
    try:
        run_id = insert_record(conn, record)
        assert list_records(conn)[0]["seed"] == 2**64 - 1
        assert load_record(conn, run_id).seed == 2**64 - 1
    finally:
        conn.close()


def test_init_is_idempotent(tmp_path):
    db_path = tmp_path / "runs.db"
    init_db(db_path)
    init_db(db_path)
    conn = get_db_connection(db_path)
    try:
        assert list_records(conn) == []
        with pytest.raises(KeyError):
            load_record(conn, 1)
    finally:
        conn.close()
