import math

import pytest

from l1cert.database import DatabaseManager
from l1cert.sweep import SweepRecord


@pytest.fixture
def db(tmp_path):
    manager = DatabaseManager(f"sqlite:///{tmp_path / 'sweeps.db'}")
    manager.create_tables()
    return manager


@pytest.fixture
def records():
    return [
        SweepRecord(1, "bp", 0.0, None, 1e-12, 0.0, True, 3),
        SweepRecord(1, "lasso", 0.1, 0.2, 0.05, 0.7, True, 12),
        SweepRecord(1, "bpdn", 0.1, None, float("nan"), float("nan"), False, 0, "solver failed"),
    ]


def test_save_and_load(db, records):
    run_id = db.save_sweep("identity_e0", 1, records)
    loaded = db.load_sweep(run_id)

    assert [r.model for r in loaded] == ["bp", "lasso", "bpdn"]
    assert loaded[0] == records[0]
    assert loaded[1] == records[1]
    assert math.isnan(loaded[2].lhs) and math.isnan(loaded[2].bound)
    assert not loaded[2].satisfied
    assert loaded[2].error == "solver failed"


def test_list_runs(db, records):
    first = db.save_sweep("identity_e0", 1, records)
    db.save_sweep("paper_sec4", 2, records[:2])

    runs = db.list_runs()
    assert [r["id"] for r in runs] == [first, first + 1]
    assert runs[0]["status"] == "violations"
    assert runs[0]["n_violations"] == 1
    assert runs[0]["models"] == ["bp", "bpdn", "lasso"]

    only = db.list_runs("paper_sec4")
    assert len(only) == 1
    assert only[0]["status"] == "completed"
    assert only[0]["n_records"] == 2


def test_sweep_stats(db, records):
    db.save_sweep("identity_e0", 1, records)
    db.save_sweep("identity_e0", 2, records)
    stats = db.get_sweep_stats()
    assert stats["runs"] == 2
    assert stats["models"]["bp"] == {"total": 2, "satisfied": 2, "violated": 0}
    assert stats["models"]["bpdn"] == {"total": 2, "satisfied": 0, "violated": 2}


def test_load_unknown_run(db):
    assert db.load_sweep(99) == []


def test_database_url_required(monkeypatch):
    monkeypatch.delenv("L1CERT_DATABASE_URL", raising=False)
    with pytest.raises(ValueError):
        DatabaseManager()


def test_database_url_from_environment(monkeypatch, tmp_path):
    url = f"sqlite:///{tmp_path / 'env.db'}"
    monkeypatch.setenv("L1CERT_DATABASE_URL", url)
    assert DatabaseManager().database_url == url
