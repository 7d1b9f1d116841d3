import math

import numpy as np
import pandas as pd
import pytest

import l1cert.sweep
from l1cert.errors import InfeasibleError, InvalidCertificateError, InvalidInputError
from l1cert.logger import RunLogger
from l1cert.sweep import (
    ROW_MODELS,
    SWEEP_COLUMNS,
    SweepConfig,
    SweepRecord,
    SweepRunner,
    bound_satisfied,
    count_violations,
    records_to_frame,
    write_csv,
)


@pytest.fixture
def e0_records(e0):
    config = SweepConfig(noise_draws=3, delta_grid=(0.1, 0.0, 0.01), seed=5)
    return SweepRunner(e0, config).run()


def test_identity_sweep_rows(e0_records):
    # per draw: one bp row at delta 0, then six rows for each positive delta
    assert len(e0_records) == 3 * (1 + 6 + 6)
    assert count_violations(e0_records) == 0
    assert all(r.error is None for r in e0_records)
    assert {r.model for r in e0_records} == set(ROW_MODELS)


def test_sweep_row_order(e0_records):
    order = {model: k for k, model in enumerate(ROW_MODELS)}
    keys = [(r.seed, r.delta, order[r.model]) for r in e0_records]
    assert keys == sorted(keys)
    assert [r.seed for r in e0_records[:13]] == [5] * 13
    assert e0_records[0].model == "bp" and e0_records[0].bound == 0.0


def test_lasso_rows_use_C0_delta(e0, e0_records):
    lasso = [r for r in e0_records if r.model == "lasso"]
    assert lasso
    for r in lasso:
        assert r.lam == pytest.approx(math.sqrt(4 / 3) * r.delta)
    assert all(r.lam is None for r in e0_records if r.model.startswith("bpdn"))


def test_threaded_sweep_matches_serial(e0, e0_records):
    config = SweepConfig(noise_draws=3, delta_grid=(0.0, 0.01, 0.1), seed=5, max_workers=3)
    threaded = SweepRunner(e0, config).run()
    assert [(r.seed, r.model, r.delta) for r in threaded] == [(r.seed, r.model, r.delta) for r in e0_records]
    np.testing.assert_allclose([r.lhs for r in threaded], [r.lhs for r in e0_records], atol=1e-9)


def test_sweep_needs_unique_solution(segment):
    with pytest.raises(InvalidCertificateError):
        SweepRunner(segment, SweepConfig(noise_draws=1))


def test_approximately_sparse_sweep(approx):
    records = SweepRunner(approx, SweepConfig(noise_draws=2, delta_grid=(0.0, 0.01))).run()
    assert len(records) == 4
    assert {r.model for r in records} == {"bpdn-l2"}
    assert count_violations(records) == 0


def test_sweep_config_validation():
    with pytest.raises(InvalidInputError):
        SweepConfig(noise_draws=0)
    with pytest.raises(InvalidInputError):
        SweepConfig(delta_grid=(0.1, -0.1))
    assert SweepConfig(delta_grid=(0.1, 0.0)).delta_grid == (0.0, 0.1)


def test_bound_satisfied(tolerances):
    assert bound_satisfied(1.0, 1.0, tolerances)
    assert bound_satisfied(1.0 + 5e-7, 1.0, tolerances)
    assert not bound_satisfied(1.01, 1.0, tolerances)
    assert not bound_satisfied(float("nan"), 1.0, tolerances)


def test_csv_output(e0_records, tmp_path):
    path = tmp_path / "rows.csv"
    write_csv(e0_records, str(path))
    frame = pd.read_csv(path, float_precision="round_trip")
    assert list(frame.columns) == SWEEP_COLUMNS
    assert len(frame) == len(e0_records)
    assert frame["lhs"].tolist() == [r.lhs for r in e0_records]


def test_failed_rows_are_nan():
    record = SweepRecord(0, "bpdn", 0.1, None, float("nan"), float("nan"), False, 0, "infeasible")
    frame = records_to_frame([record])
    assert frame["lhs"].isna().all()
    assert not frame["satisfied"].iloc[0]
    assert count_violations([record]) == 1


def test_threaded_failures_are_tallied_once_per_solve(e0, monkeypatch):
    def broken(*args, **kwargs):
        raise InfeasibleError("no feasible point")

    monkeypatch.setattr(l1cert.sweep, "solve_bpdn", broken)
    run_logger = RunLogger()
    config = SweepConfig(noise_draws=4, delta_grid=(0.01, 0.1), seed=0, max_workers=4)
    records = SweepRunner(e0, config, run_logger).run()

    failed = [r for r in records if r.error is not None]
    assert {r.model for r in failed} == {"bpdn", "bpdn-bregman", "bpdn-l2"}
    assert all(math.isnan(r.lhs) for r in failed)
    assert run_logger.solver_failures == 4 * 2
    assert run_logger.sweep_counts["violated"] == len(failed)
