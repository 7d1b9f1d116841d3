import numpy as np
import pytest
from numpy.testing import assert_allclose

from l1cert.certify import UNIQUE, extract_support, verify_condition1
from l1cert.compare import (
    Condition5Result,
    eval_condition2,
    eval_condition3,
    eval_condition4_IC,
    eval_condition5_RC,
    implication_tests,
)
from l1cert.errors import InvalidInputError, KernelConditionError, UnsupportedError
from l1cert.instances import InstanceGenerator


def test_sec4_prior_conditions_fail(sec4):
    pattern = extract_support(sec4.psi, sec4.x_star)

    cond2 = eval_condition2(sec4.phi, sec4.psi, pattern)
    assert cond2.value == pytest.approx(105 / 101, abs=1e-9)
    assert cond2.rank_ok
    assert not cond2.holds

    cond4 = eval_condition4_IC(sec4.phi, sec4.psi, pattern)
    assert cond4.ic == pytest.approx(105 / 101, abs=1e-9)
    assert_allclose(np.abs(cond4.omega[:, 0]), [10.5 / 101, 105 / 101], atol=1e-9)
    assert not cond4.holds

    cond5 = eval_condition5_RC(sec4.phi, sec4.psi, pattern.I, pattern.J)
    assert cond5.rc == pytest.approx(105 / 101, abs=1e-9)
    assert cond5.vertices_evaluated == 1
    assert not cond5.holds


def test_sec4_condition3_fails_at_certificate(sec4):
    y = verify_condition1(sec4, sec4.x_star).certificate.y
    cond3 = eval_condition3(sec4.phi, sec4.psi, y, 0.9)
    assert cond3.I_t == (0, 1, 2)
    assert not cond3.holds


def test_sec4_report_has_no_violations(sec4):
    report = implication_tests(sec4, sec4.x_star)
    assert report.ok
    assert report.condition1.verdict == UNIQUE
    assert not report.cond2.holds
    assert not report.cond4.holds
    data = report.to_dict(noise_norm=0.01)
    assert data["cond2"]["value"] == pytest.approx(105 / 101, abs=1e-9)
    assert data["cond5"]["suggested_lambda"] is None


def test_identity_instance_everything_holds(e0):
    report = implication_tests(e0, e0.x_star)
    assert report.ok
    assert report.cond2.holds
    assert report.cond3.holds
    assert report.cond4.holds and report.cond4.ic == pytest.approx(0.0, abs=1e-12)
    assert report.cond5.holds and report.cond5.rc == pytest.approx(0.0, abs=1e-12)
    assert report.cond5.c_J == pytest.approx(1.0)


def test_suggested_lambda():
    cond5 = Condition5Result(holds=True, rc=0.5, c_J=2.0)
    assert cond5.suggested_lambda(0.1) == pytest.approx(2.0 * 0.1 * 2.0 / (2.0 * 0.5))
    assert cond5.suggested_lambda(0.1, rho_factor=3.0) == pytest.approx(3.0 * 0.1 * 2.0 / 1.0)
    with pytest.raises(InvalidInputError):
        cond5.suggested_lambda(0.1, rho_factor=1.0)
    assert Condition5Result(holds=False, rc=1.2, c_J=1.0).suggested_lambda(0.1) is None


def test_rc_vertex_budget(e0):
    with pytest.raises(UnsupportedError) as info:
        eval_condition5_RC(e0.phi, e0.psi, [0], [1, 2], max_support=0)
    assert info.value.lower_bound == pytest.approx(0.0, abs=1e-12)


def test_condition4_needs_kernel_condition(segment):
    pattern = extract_support(segment.psi, segment.x_star)
    with pytest.raises(KernelConditionError):
        eval_condition4_IC(segment.phi, segment.psi, pattern)


def test_condition3_t_range(e0):
    with pytest.raises(InvalidInputError):
        eval_condition3(e0.phi, e0.psi, np.ones(3), 1.0)


def test_condition3_empty_threshold_set(e0):
    cond3 = eval_condition3(e0.phi, e0.psi, np.array([0.5, 0.0, 0.0]), 0.6)
    assert cond3.holds
    assert cond3.I_t == ()


@pytest.mark.parametrize("seed", range(8))
def test_implications_on_random_instances(seed):
    instance = InstanceGenerator(seed).generate(m=4, n=6, l=6, sparsity=2)
    report = implication_tests(instance, instance.x_star)
    assert report.violations == []
    if np.isfinite(report.cond5.rc) and np.isfinite(report.cond4.ic):
        assert report.cond5.rc >= report.cond4.ic - 1e-10
