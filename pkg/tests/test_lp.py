import numpy as np
import pytest
from numpy.testing import assert_allclose

from l1cert.errors import InvalidInputError, UnboundedError
from l1cert.lp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    dual_value,
    solve_inf_norm_box,
    solve_inf_norm_eq,
    solve_linear_program,
)


def vertex_dual_oracle(A, a):
    """max <p, a> over ||A^T p||_1 <= 1 for two-row A, by enumerating the ball's vertices"""
    best = 0.0
    for j in range(A.shape[1]):
        p = np.array([-A[1, j], A[0, j]])
        denom = np.sum(np.abs(A.T @ p))
        if denom > 1e-12:
            best = max(best, abs(p @ a) / denom)
    return best


def test_single_row_closed_form():
    sol = solve_inf_norm_eq([[1.0, 1.0]], [1.0])
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(0.5, abs=1e-12)
    assert_allclose(sol.u, [0.5, 0.5], atol=1e-12)


def test_single_row_l1_formula(rng):
    a = rng.standard_normal(5)
    alpha = 1.7
    sol = solve_inf_norm_eq(a.reshape(1, -1), [alpha])
    assert sol.value == pytest.approx(alpha / np.sum(np.abs(a)), rel=1e-9)


def test_box_example():
    sol = solve_inf_norm_box([[1.0, 1.0]], [1.5], free_idx=[0], boxed_idx=[1])
    assert sol.value == pytest.approx(0.5, abs=1e-12)
    assert abs(sol.u[1]) <= 1.0 + 1e-12


def test_range_infeasible_has_certificate():
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    b = np.array([1.0, 2.0])
    sol = solve_inf_norm_eq(A, b)
    assert sol.status == INFEASIBLE
    q = sol.certificate
    assert np.max(np.abs(A.T @ q)) <= 1e-12
    assert q @ b > 0


@pytest.mark.parametrize("seed", range(5))
def test_strong_duality(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 6))
    a = rng.standard_normal(3)
    sol = solve_inf_norm_eq(A, a)
    assert sol.duality_gap <= 1e-8 * (1.0 + sol.value)
    assert dual_value(A, a) == pytest.approx(sol.value, abs=1e-8 * (1.0 + sol.value))


@pytest.mark.parametrize("seed", range(5))
def test_matches_vertex_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    A = rng.standard_normal((2, 4))
    a = rng.standard_normal(2)
    sol = solve_inf_norm_eq(A, a)
    assert sol.value == pytest.approx(vertex_dual_oracle(A, a), abs=1e-6)


def test_dual_value_unbounded_when_primal_infeasible():
    with pytest.raises(UnboundedError):
        dual_value([[1.0, 0.0], [1.0, 0.0]], [1.0, 2.0])


def test_dual_value_empty_rows():
    assert dual_value(np.zeros((0, 3)), np.zeros(0)) == 0.0


def test_generic_lp_statuses():
    res = solve_linear_program([-1.0], bounds=[(0.0, None)])
    assert res.status == UNBOUNDED

    res = solve_linear_program([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[2.0], bounds=[(0.0, None)] * 2)
    assert res.status == OPTIMAL
    assert res.value == pytest.approx(2.0)
    assert res.duality_gap <= 1e-9


def test_rank_deficient_equalities_are_reduced():
    # duplicated row: consistent but rank deficient
    res = solve_linear_program([1.0, 2.0], A_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[1.0, 2.0],
                               bounds=[(0.0, None)] * 2)
    assert res.status == OPTIMAL
    assert_allclose(res.x, [1.0, 0.0], atol=1e-10)
    assert res.eq_duals.shape == (2,)


def test_partition_must_cover_columns():
    with pytest.raises(InvalidInputError):
        solve_inf_norm_box([[1.0, 1.0, 1.0]], [1.0], free_idx=[0], boxed_idx=[1])
