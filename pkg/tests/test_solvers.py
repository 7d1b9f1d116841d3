import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from l1cert.errors import InfeasibleError, InvalidInputError
from l1cert.solvers import (
    lasso_kkt_residual,
    lasso_objective,
    solution_set_probe,
    solve,
    solve_bp,
    solve_bpdn,
    solve_lasso,
    uniqueness_oracle,
)


def split_lasso_oracle(phi, psi, b, lam):
    """Lasso value for invertible Psi via z = Psi^T x = p - q with p, q >= 0 and L-BFGS-B"""
    n = psi.shape[0]
    A = phi @ np.linalg.inv(psi.T)

    def f(v):
        p, q = v[:n], v[n:]
        r = A @ (p - q) - b
        value = r @ r + lam * np.sum(p + q)
        g = 2.0 * A.T @ r
        return value, np.concatenate([g + lam, -g + lam])

    res = minimize(f, np.zeros(2 * n), jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * (2 * n), options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    return res.fun


def test_bp_identity_instance(e0):
    res = solve_bp(e0.phi, e0.psi, e0.b)
    assert_allclose(res.x, [2.0, 0.0, 0.0], atol=1e-9)
    assert res.objective == pytest.approx(2.0)
    assert res.converged


def test_bp_infeasible():
    with pytest.raises(InfeasibleError):
        solve_bp([[1.0, 0.0], [1.0, 0.0]], np.eye(2), [1.0, 2.0])


def test_lasso_scalar():
    res = solve_lasso([[1.0]], [[1.0]], [3.0], 2.0)
    assert_allclose(res.x, [2.0], atol=1e-8)
    assert res.converged
    assert res.kkt_residual <= 1e-8


def test_lasso_large_penalty_gives_zero():
    res = solve_lasso([[1.0]], [[1.0]], [3.0], 10.0)
    assert_allclose(res.x, [0.0], atol=1e-10)


def test_lasso_identity_soft_threshold(e0):
    b = np.array([2.0, 0.3])
    res = solve_lasso(e0.phi, e0.psi, b, 0.4)
    assert_allclose(res.x, [1.8, 0.1, 0.0], atol=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_lasso_matches_split_oracle(seed):
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((3, 5))
    psi = np.eye(5) + 0.3 * rng.standard_normal((5, 5))
    b = rng.standard_normal(3)
    lam = 0.5
    res = solve_lasso(phi, psi, b, lam)
    oracle = split_lasso_oracle(phi, psi, b, lam)
    assert res.objective <= oracle + 1e-6 * (1.0 + abs(oracle))
    assert lasso_objective(phi, psi, b, lam, res.x) == pytest.approx(res.objective)


def test_lasso_rejects_non_positive_lambda():
    with pytest.raises(InvalidInputError):
        solve_lasso([[1.0]], [[1.0]], [1.0], 0.0)


def test_bpdn_identity_instance(e0):
    res = solve_bpdn(e0.phi, e0.psi, e0.b, 0.1)
    assert_allclose(res.x, [1.9, 0.0, 0.0], atol=1e-8)
    assert res.converged


def test_bpdn_special_cases(e0):
    res = solve_bpdn(e0.phi, e0.psi, e0.b, 0.0)
    assert_allclose(res.x, [2.0, 0.0, 0.0], atol=1e-9)
    assert res.model == "bpdn"

    res = solve_bpdn(e0.phi, e0.psi, e0.b, 5.0)
    assert_allclose(res.x, np.zeros(3))
    assert res.objective == 0.0


def test_bpdn_infeasible():
    with pytest.raises(InfeasibleError):
        solve_bpdn([[1.0], [1.0]], [[1.0]], [1.0, -1.0], 0.1)


def test_solve_dispatch(e0):
    assert solve("bp", e0.phi, e0.psi, e0.b).model == "bp"
    with pytest.raises(InvalidInputError):
        solve("lasso", e0.phi, e0.psi, e0.b)
    with pytest.raises(InvalidInputError):
        solve("omp", e0.phi, e0.psi, e0.b, 1.0)


def test_kkt_residual_detects_non_optimal_point():
    assert lasso_kkt_residual([[1.0]], [[1.0]], [3.0], 2.0, [2.0]) <= 1e-12
    assert lasso_kkt_residual([[1.0]], [[1.0]], [3.0], 2.0, [1.0]) > 0.5


def test_oracle_unique(e0):
    res = solve_bp(e0.phi, e0.psi, e0.b)
    verdict = uniqueness_oracle(e0.phi, e0.psi, e0.b, res.objective)
    assert verdict.unique
    assert verdict.face_diameter <= 1e-7
    assert verdict.witness_pair is None


def test_oracle_segment(segment):
    verdict = uniqueness_oracle(segment.phi, segment.psi, segment.b, 1.0)
    assert not verdict.unique
    assert verdict.face_diameter == pytest.approx(1.0, abs=1e-9)
    high, low = verdict.witness_pair
    assert np.linalg.norm(high - low) > 0.5
    assert_allclose(segment.phi @ high, segment.b, atol=1e-9)


def test_oracle_below_optimum_is_infeasible(e0):
    with pytest.raises(InfeasibleError):
        uniqueness_oracle(e0.phi, e0.psi, e0.b, 1.0)


@pytest.mark.parametrize("model, parameter", [("lasso", 0.5), ("bpdn", 0.1)])
def test_solution_set_invariants_on_non_unique_instance(segment, model, parameter):
    probe = solution_set_probe(segment.phi, segment.psi, segment.b, parameter, n_starts=5, model=model)
    assert len(probe.results) == 5
    assert probe.max_residual_spread <= 1e-7
    assert probe.max_objective_spread <= 1e-7


def test_probe_rejects_bp(segment):
    with pytest.raises(InvalidInputError):
        solution_set_probe(segment.phi, segment.psi, segment.b, 0.1, model="bp")


def test_oracle_tiny_face_is_ambiguous_without_witness():
    # minimizers form a segment whose coordinates spread by 5e-7
    verdict = uniqueness_oracle([[1.0, 1.0]], np.eye(2), [5e-7], 5e-7)
    assert verdict.ambiguous
    assert not verdict.unique
    assert verdict.witness_pair is None
    assert verdict.face_diameter == pytest.approx(5e-7, rel=1e-3)


def test_oracle_witness_is_well_separated(segment):
    verdict = uniqueness_oracle(segment.phi, segment.psi, segment.b, 1.0)
    high, low = verdict.witness_pair
    assert not verdict.ambiguous
    assert np.linalg.norm(high - low) > 1e-6
