import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from l1cert.certify import dominant_support
from l1cert.constants import tail_l1
from l1cert.errors import InstanceFileError, InvalidInputError
from l1cert.instances import (
    FIXTURES,
    InstanceGenerator,
    dumps,
    format_float,
    instance_from_dict,
    instance_to_dict,
    load_fixture,
    load_instance,
    save_instance,
)
from l1cert.linalg import matrix_metrics


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_load(name):
    instance = load_fixture(name)
    assert instance.name == name
    assert instance.x_star is not None


def test_unknown_fixture():
    with pytest.raises(InstanceFileError):
        load_fixture("nope")


def test_save_load_is_bit_exact(tmp_path):
    instance = InstanceGenerator(7).generate(m=3, n=5, l=5, sparsity=2, delta=0.05)
    path = tmp_path / "instance.json"
    save_instance(instance, str(path))
    loaded = load_instance(str(path))
    assert_array_equal(loaded.phi, instance.phi)
    assert_array_equal(loaded.psi, instance.psi)
    assert_array_equal(loaded.b, instance.b)
    assert_array_equal(loaded.x_star, instance.x_star)
    assert loaded.delta == instance.delta
    assert loaded.seed == 7


def test_float_format():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(float("nan")) == "null"
    assert float(format_float(1 / 3)) == 1 / 3


def test_dumps_keeps_matrix_rows_on_one_line():
    text = dumps({"phi": [[1.0, 2.0], [3.0, 4.0]]})
    assert "[1, 2]" in text
    assert json.loads(text) == {"phi": [[1, 2], [3, 4]]}


def test_missing_file(tmp_path):
    with pytest.raises(InstanceFileError):
        load_instance(str(tmp_path / "missing.json"))


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "phi": [[1, 2]],\n  "psi": oops\n}\n')
    with pytest.raises(InstanceFileError) as info:
        load_instance(str(path))
    assert info.value.line == 3
    assert info.value.column is not None


@pytest.mark.parametrize("data", [
    {"phi": [[1.0]], "psi": [[1.0]]},
    {"phi": [[1.0, 2.0], [3.0]], "psi": [[1.0, 0.0], [0.0, 1.0]], "b": [1.0, 2.0]},
    {"phi": [[1.0]], "psi": [[1.0, 0.0], [0.0, 1.0]], "b": [1.0]},
    {"phi": [[1.0]], "psi": [[1.0]], "b": ["x"]},
])
def test_invalid_documents(data):
    with pytest.raises(InstanceFileError):
        instance_from_dict(data)


def test_dict_round_trip_keeps_optional_keys(approx):
    data = instance_to_dict(approx)
    assert data["support_size"] == 2
    assert data["delta"] == 0.01
    assert instance_from_dict(data).support_size == 2


def test_generator_is_deterministic():
    a = InstanceGenerator(3).generate(m=4, n=8, l=8, sparsity=2)
    b = InstanceGenerator(3).generate(m=4, n=8, l=8, sparsity=2)
    assert dumps(instance_to_dict(a)) == dumps(instance_to_dict(b))


def test_identity_signal_has_requested_sparsity():
    instance = InstanceGenerator(0).generate(m=4, n=8, l=8, sparsity=2)
    assert np.count_nonzero(instance.x_star) == 2
    assert np.allclose(np.linalg.norm(instance.phi, axis=1), 1.0)


def test_tight_frame_is_normalized():
    instance = InstanceGenerator(5).generate(m=3, n=4, l=6, sparsity=3, psi_kind="tight-frame")
    assert matrix_metrics(instance.psi).lambda_max_MMt == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(instance.psi @ instance.psi.T, np.eye(4), atol=1e-10)


def test_generator_rejects_bad_shapes():
    gen = InstanceGenerator(0)
    with pytest.raises(InvalidInputError):
        gen.generate(m=5, n=4, l=4, sparsity=1)
    with pytest.raises(InvalidInputError):
        gen.generate(m=2, n=4, l=4, sparsity=5)
    with pytest.raises(InvalidInputError):
        gen.generate(m=2, n=4, l=5, sparsity=1, psi_kind="identity")


@pytest.mark.parametrize("tail_mass", [1e-3, 1e-2])
def test_approximately_sparse_tail(tail_mass):
    instance = InstanceGenerator(11).approximately_sparse(m=4, n=6, l=6, sparsity=2, tail_mass=tail_mass)
    pattern = dominant_support(instance.psi, instance.x_star, 2)
    assert instance.support_size == 2
    assert tail_l1(instance.psi, instance.x_star, pattern.I) == pytest.approx(tail_mass, rel=1e-9)
