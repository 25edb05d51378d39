import json

import numpy as np
import pytest

from wiretap import serialize
from wiretap.errors import SchemaError, ValidationError
from wiretap.netkit import NetSpec, Node, evaluate_quantum
from wiretap.probkit import Alphabet, Channel, Dist, random_dist
from wiretap.quantkit import random_density_matrix
from wiretap.region import AuxiliaryModel, as_channel, bsc_wiretap


def roundtrip(obj, tmp_path):
    path = tmp_path / "doc.json"
    serialize.dump(obj, path)
    return serialize.load(path)


def test_dist_roundtrip_with_labels(tmp_path):
    d = Dist([("x", Alphabet(("a", "b"))), ("y", 3)], random_dist(np.random.default_rng(0), ["x", "y"], [2, 3]).weights)
    back = roundtrip(d, tmp_path)
    assert back.names == ("x", "y") and back.alphabet("x").labels == ("a", "b")
    assert np.array_equal(back.weights, d.weights)


def test_product_labels_roundtrip(tmp_path):
    d = Dist([("xy", Alphabet.product(Alphabet.of(2), Alphabet(("p", "q"))))], [0.25] * 4)
    assert roundtrip(d, tmp_path).alphabet("xy").labels == d.alphabet("xy").labels


def test_channel_and_aux_roundtrip(tmp_path):
    c = as_channel(bsc_wiretap(0.1, 0.2))
    back = roundtrip(c, tmp_path)
    assert isinstance(back, Channel) and np.array_equal(back.kernel, c.kernel)
    aux = AuxiliaryModel(np.array([0.4, 0.6]), np.eye(2), np.array([[0.9, 0.1], [0.2, 0.8]]))
    b = roundtrip(aux, tmp_path)
    assert np.array_equal(b.p_x_given_v, aux.p_x_given_v)


def test_density_matrix_roundtrip(tmp_path):
    rho = random_density_matrix(np.random.default_rng(1), ["a", "b"], [2, 3])
    back = roundtrip(rho, tmp_path)
    assert back.names == ("a", "b") and np.array_equal(back.matrix, rho.matrix)


def test_net_roundtrip(tmp_path):
    net = NetSpec([Node.amplitude("x", 2, np.array([0.6, 0.8j])), Node.amplitude("r", 2, np.eye(2), ("x",))],
                  ("r",), ("x",))
    back = roundtrip(net, tmp_path)
    assert np.array_equal(evaluate_quantum(back).matrix, evaluate_quantum(net).matrix)


def test_schema_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError, match="malformed"):
        serialize.load(path)
    with pytest.raises(SchemaError, match="cannot read"):
        serialize.load(tmp_path / "missing.json")
    doc = serialize.to_json(Dist.uniform("x", 2))
    with pytest.raises(SchemaError, match="schema_version"):
        serialize.from_json({**doc, "schema_version": 2})
    with pytest.raises(SchemaError, match="missing field"):
        serialize.from_json({k: v for k, v in doc.items() if k != "weights"})
    with pytest.raises(SchemaError, match="unknown document type"):
        serialize.from_json({**doc, "type": "mystery"})
    with pytest.raises(SchemaError):
        serialize.from_json({**doc, "axes": [{"labels": [0, 1]}]})
    with pytest.raises(SchemaError):
        serialize.to_json(42)


def test_schema_error_is_validation_error():
    assert issubclass(SchemaError, ValidationError)


def test_semantic_validation_after_parse():
    doc = serialize.to_json(Dist.uniform("x", 2))
    doc["weights"] = [0.9, 0.9]
    with pytest.raises(ValidationError):
        serialize.from_json(doc)


def test_shipped_samples_load():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "data"
    for path in sorted(root.glob("*.json")):
        assert json.loads(path.read_text())["schema_version"] == 1
        serialize.load(path)
