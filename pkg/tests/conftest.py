import numpy as np
import pytest

from l1cert.certify import ProblemInstance
from l1cert.config import Tolerances
from l1cert.instances import load_fixture


@pytest.fixture
def tolerances():
    return Tolerances()


@pytest.fixture
def sec4():
    """3x3 example where the least-squares certificate and IC both exceed 1 but x* is unique"""
    return load_fixture("paper_sec4")


@pytest.fixture
def e0():
    return load_fixture("identity_e0")


@pytest.fixture
def segment():
    return load_fixture("segment")


@pytest.fixture
def approx():
    return load_fixture("approx_sparse")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_instance():
    def build(phi, psi, x):
        phi = np.asarray(phi, dtype=float)
        x = np.asarray(x, dtype=float)
        return ProblemInstance(phi=phi, psi=np.asarray(psi, dtype=float), b=phi @ x, x_star=x)
    return build
