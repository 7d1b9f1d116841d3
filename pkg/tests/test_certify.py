import numpy as np
import pytest
from numpy.testing import assert_allclose

from l1cert.certify import (
    MARGINAL,
    NOT_UNIQUE,
    UNIQUE,
    DualCertificate,
    ProblemInstance,
    SupportPattern,
    check_assumptions,
    check_kernel_condition,
    compute_beta,
    decide_verdict,
    dominant_support,
    extract_support,
    find_certificate,
    verify_condition1,
    verify_condition1_prime,
)
from l1cert.errors import AssumptionViolationError, InvalidInputError


def test_sec4_example_is_unique(sec4, tolerances):
    report = verify_condition1(sec4, sec4.x_star, tolerances)
    assert report.verdict == UNIQUE
    assert report.kernel_ok
    assert report.lp_value == pytest.approx(21 / 22, abs=1e-9)
    assert report.pattern.I == (0,)
    assert report.pattern.J == (1, 2)

    cert = report.certificate
    assert_allclose(cert.y, [1.0, -21 / 22, -21 / 22], atol=1e-9)
    assert_allclose(cert.beta, [-21 / 22, -21 / 22], atol=1e-9)
    assert cert.gap == pytest.approx(1 / 22, abs=1e-9)
    assert cert.sign_match
    assert cert.is_valid(tolerances, psi_norm=np.linalg.norm(sec4.psi, 2))


def test_segment_fails_kernel_condition(segment):
    report = verify_condition1(segment, segment.x_star)
    assert report.verdict == NOT_UNIQUE
    assert not report.kernel_ok
    assert_allclose(report.kernel_witness, np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-12)
    assert_allclose(segment.phi @ report.kernel_witness, [0.0], atol=1e-12)


def test_identity_instance_certificate(e0):
    report = verify_condition1(e0, e0.x_star)
    assert report.verdict == UNIQUE
    assert report.lp_value == pytest.approx(0.0, abs=1e-12)
    assert_allclose(report.certificate.y, [1.0, 0.0, 0.0], atol=1e-12)
    assert_allclose(report.certificate.beta, [1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("x, verdict, lp_value", [
    ([0.0, 1.0], UNIQUE, 0.5),
    ([1.0, 0.0], NOT_UNIQUE, 2.0),
])
def test_weighted_row_verdicts(make_instance, x, verdict, lp_value):
    instance = make_instance([[1.0, 2.0]], np.eye(2), x)
    report = verify_condition1(instance, x)
    assert report.verdict == verdict
    assert report.lp_value == pytest.approx(lp_value, abs=1e-9)
    if verdict == NOT_UNIQUE:
        assert report.certificate is None


def test_marginal_verdict(make_instance):
    instance = make_instance([[1.0, 1.0]], np.eye(2), [1.0, 0.0])
    report = verify_condition1(instance, [1.0, 0.0])
    assert report.verdict == MARGINAL
    assert report.lp_value == pytest.approx(1.0, abs=1e-9)


def test_verdict_rule(tolerances):
    assert decide_verdict(True, 0.5, tolerances) == UNIQUE
    assert decide_verdict(False, 0.5, tolerances) == NOT_UNIQUE
    assert decide_verdict(True, 1.0 + 1e-12, tolerances) == MARGINAL
    assert decide_verdict(False, 1.0, tolerances) == MARGINAL
    assert decide_verdict(True, float("inf"), tolerances) == NOT_UNIQUE


def test_verdict_invariant_under_psi_scaling(sec4):
    scaled = ProblemInstance(sec4.phi, 1e6 * sec4.psi, sec4.b, x_star=sec4.x_star)
    base = verify_condition1(sec4, sec4.x_star)
    report = verify_condition1(scaled, sec4.x_star)
    assert report.verdict == base.verdict
    assert report.lp_value == pytest.approx(base.lp_value, abs=1e-9)


def test_boxed_variant(sec4):
    report = verify_condition1_prime(sec4, sec4.x_star, J=[1])
    assert report.pattern.K == (2,)
    assert report.verdict == UNIQUE
    assert report.lp_value == pytest.approx(0.5, abs=1e-9)
    assert abs(report.certificate.y[2]) <= 1.0 + 1e-9


def test_boxed_variant_validates_J(sec4):
    with pytest.raises(InvalidInputError):
        verify_condition1_prime(sec4, sec4.x_star, J=[0])
    with pytest.raises(InvalidInputError):
        verify_condition1_prime(sec4, sec4.x_star, J=[])


def test_extract_support_is_relative():
    pattern = extract_support(np.eye(3), [1e6, 1.0, 1e-3], supp_tol=1e-8)
    assert pattern.I == (0, 1)
    assert pattern.J == (2,)
    assert_allclose(pattern.sign_I, [1.0, 1.0])


def test_extract_support_of_zero():
    pattern = extract_support(np.eye(3), np.zeros(3))
    assert pattern.I == ()
    assert pattern.J == (0, 1, 2)


def test_dominant_support_breaks_ties_by_index():
    pattern = dominant_support(np.eye(3), [1.0, -1.0, 0.5], 1)
    assert pattern.I == (0,)
    pattern = dominant_support(np.eye(3), [0.5, -1.0, 1.0], 2)
    assert pattern.I == (1, 2)
    assert_allclose(pattern.sign_I, [-1.0, 1.0])


def test_support_pattern_validation():
    with pytest.raises(InvalidInputError):
        SupportPattern((0,), (0, 1), (), np.ones(1), 2)
    with pytest.raises(InvalidInputError):
        SupportPattern((0,), (1,), (), np.ones(1), 3)
    with pytest.raises(InvalidInputError):
        SupportPattern((0,), (1,), (), np.array([0.5]), 2)


def test_kernel_condition_trivial_kernel():
    check = check_kernel_condition(np.eye(2), np.eye(2), [0, 1])
    assert check.ok
    assert check.sigma_min == float("inf")


def test_find_certificate_range_condition(sec4):
    pattern = extract_support(sec4.psi, sec4.x_star)
    cert = find_certificate(sec4.phi, sec4.psi, pattern)
    assert isinstance(cert, DualCertificate)
    # Psi y lies in the row space of Phi
    assert_allclose(sec4.phi.T @ cert.beta, sec4.psi @ cert.y, atol=1e-9)


def test_compute_beta_needs_full_row_rank():
    with pytest.raises(AssumptionViolationError):
        compute_beta([[1.0, 0.0], [2.0, 0.0]], np.eye(2), [1.0, 0.0])


def test_assumptions(sec4, e0):
    report = check_assumptions(sec4.phi, sec4.psi)
    assert report.a1 and report.a3
    assert not report.a2
    report = check_assumptions(e0.phi, e0.psi)
    assert report.a1 and report.a2 and report.a3
    assert report.psi_scale == pytest.approx(1.0)


def test_instance_validation():
    with pytest.raises(InvalidInputError):
        ProblemInstance(np.eye(2), np.eye(3), np.zeros(2))
    with pytest.raises(InvalidInputError):
        ProblemInstance(np.eye(2), np.eye(2), np.zeros(3))
    with pytest.raises(InvalidInputError):
        ProblemInstance(np.eye(2), np.eye(2), np.zeros(2), delta=-1.0)
