import json

import numpy as np
import pytest

from relupath.network import OutputActivation, canonicalize, evaluate
from relupath.serialize import (
    FormatError,
    dump_json,
    format_float,
    load_net,
    load_points,
    load_samples,
    net_from_json,
    net_to_json,
)
from relupath.variation import normalize

from conftest import random_general_net, random_inputs


def roundtrip(net):
    return net_from_json(json.loads(dump_json(net_to_json(net))))


def test_float_format():
    assert format_float(8.0) == "8.0"
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1e300) == "1.0000000000000001e+300"
    for x in np.random.default_rng(0).normal(size=200):
        assert float(format_float(x)) == x


@pytest.mark.parametrize("kind", ["general", "canonical", "normalized"])
def test_network_roundtrip_exact(rng, kind):
    net = random_general_net(rng, 3, 2, output=OutputActivation.clipped(2.0))
    if kind != "general":
        net = canonicalize(net)
    if kind == "normalized":
        net = normalize(net)
    back = roundtrip(net)
    assert type(back) is type(net)
    X = random_inputs(rng, 20, 2)
    np.testing.assert_array_equal(evaluate(back, X), evaluate(net, X))


def test_general_json_layout(v8_net):
    obj = net_to_json(v8_net)
    assert obj["orientation"] == "inner_first" and obj["L"] == 2 and obj["d"] == 2
    assert obj["layers"][0]["weights"].tolist() == [[3.0, 0.0], [1.0, 1.0]]
    assert obj["output"] == {"kind": "linear"}


def test_strict_keys(v8_net):
    obj = json.loads(dump_json(net_to_json(v8_net)))
    obj["colour"] = 1
    with pytest.raises(FormatError) as err:
        net_from_json(obj)
    assert err.value.field == "colour"
    obj = json.loads(dump_json(net_to_json(v8_net)))
    obj["layers"][1]["bias"] = [0]
    with pytest.raises(FormatError) as err:
        net_from_json(obj)
    assert err.value.field == "layers[1].bias"
    obj = json.loads(dump_json(net_to_json(v8_net)))
    obj["L"] = 3
    with pytest.raises(FormatError):
        net_from_json(obj)
    obj["L"] = 2
    obj["orientation"] = "outer_first"
    with pytest.raises(FormatError):
        net_from_json(obj)


def test_canonical_sign_tags_checked(v8_net):
    obj = json.loads(dump_json(net_to_json(canonicalize(v8_net))))
    obj["layers"][0]["signs"][0] = -1.0
    with pytest.raises(FormatError):
        net_from_json(obj)


def test_loaders(tmp_path):
    p = tmp_path / "pts.json"
    p.write_text(json.dumps({"points": [[1, 1], [-1, -1]], "symmetric": True}))
    A = load_points(p)
    assert A.symmetric and A.points.shape == (2, 2)
    p.write_text(json.dumps([[1, 2, 3]]))
    assert load_points(p).n == 3
    p.write_text(json.dumps({"pts": []}))
    with pytest.raises(FormatError):
        load_points(p)
    s = tmp_path / "s.json"
    s.write_text(json.dumps({"values": [[0, 1], [1, 0]]}))
    assert load_samples(s).shape == (2, 2)
    s.write_text("{not json")
    with pytest.raises(ValueError):
        load_samples(s)
    n = tmp_path / "n.json"
    n.write_text("[")
    with pytest.raises(FormatError):
        load_net(n)
