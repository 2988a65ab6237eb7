"""JSON file formats for networks, point sets and function samples.

Networks are stored innermost layer first (``"orientation": "inner_first"``)
so the layer list reads in evaluation order.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .network import CanonicalNet, GeneralReLUNet, OutputActivation
from .variation import NormalizedNet

__all__ = [
    "FormatError",
    "net_to_json",
    "net_from_json",
    "load_net",
    "dump_json",
    "format_float",
    "load_points",
    "load_samples",
]


class FormatError(ValueError):
    """Malformed input file; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


def format_float(x):
    """17 significant digits, always with a decimal point or exponent."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".e"):
        s += ".0"
    return s


def _encode(obj):
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj) -> str:
    """Deterministic JSON with every float written to 17 significant digits."""
    return _encode(obj)


def net_to_json(net) -> dict:
    base = {"orientation": "inner_first", "d": net.d, "L": net.L}
    if isinstance(net, GeneralReLUNet):
        layers = [{"weights": w, "offsets": b} for w, b in zip(net.weights, net.offsets)]
    elif isinstance(net, CanonicalNet):
        base["canonical"] = True
        signs = net.signs
        layers = [
            {"weights": w, "signs": signs[k]} if k < net.L - 1 else {"weights": w}
            for k, w in enumerate(net.weights)
        ]
    elif isinstance(net, NormalizedNet):
        base["normalized"] = True
        base["V"] = net.V
        signs = net.signs
        layers = [
            {"probs": p, "signs": signs[k], "dead": net.dead[k]} if k < net.L - 1 else {"probs": p}
            for k, p in enumerate(net.probs)
        ]
    else:
        raise TypeError(f"unsupported network type {type(net).__name__}")
    base["layers"] = layers
    base["output"] = net.output.to_json()
    return base


_NET_KEYS = {"orientation", "d", "L", "layers", "output", "canonical", "normalized", "V"}


def _matrix(obj, where):
    try:
        a = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(where, "not a numeric matrix") from exc
    return a


def net_from_json(obj):
    """Parse any of the three network kinds; unknown keys are rejected."""
    if not isinstance(obj, dict):
        raise FormatError("network", "must be an object")
    for key in obj:
        if key not in _NET_KEYS:
            raise FormatError(key, "unknown key")
    if obj.get("orientation", "inner_first") != "inner_first":
        raise FormatError("orientation", "only 'inner_first' is supported")
    for key in ("d", "layers"):
        if key not in obj:
            raise FormatError(key, "required key missing")
    d = obj["d"]
    layers = obj["layers"]
    if not isinstance(layers, list) or not layers:
        raise FormatError("layers", "must be a nonempty list")
    if "L" in obj and obj["L"] != len(layers):
        raise FormatError("L", f"says {obj['L']} but {len(layers)} layers are listed")
    try:
        output = OutputActivation.from_json(obj.get("output"))
    except ValueError as exc:
        raise FormatError("output", str(exc)) from exc

    def layer_keys(allowed, required):
        for k, layer in enumerate(layers):
            if not isinstance(layer, dict):
                raise FormatError(f"layers[{k}]", "must be an object")
            for key in layer:
                if key not in allowed:
                    raise FormatError(f"layers[{k}].{key}", "unknown key")
            if required not in layer:
                raise FormatError(f"layers[{k}].{required}", "required key missing")

    try:
        if obj.get("normalized"):
            layer_keys({"probs", "signs", "dead"}, "probs")
            if "V" not in obj:
                raise FormatError("V", "required key missing")
            probs = [_matrix(layer["probs"], f"layers[{k}].probs") for k, layer in enumerate(layers)]
            dead = tuple(np.array(layer.get("dead", []), dtype=bool) for layer in layers[:-1])
            if any(m.size == 0 for m in dead):
                dead = ()
            return NormalizedNet(d, obj["V"], tuple(probs), dead, output)
        if obj.get("canonical"):
            layer_keys({"weights", "signs"}, "weights")
            ws = [_matrix(layer["weights"], f"layers[{k}].weights") for k, layer in enumerate(layers)]
            net = CanonicalNet(d, ws, output)
            for k, layer in enumerate(layers[:-1]):
                if "signs" in layer and not np.array_equal(np.asarray(layer["signs"], float), net.signs[k]):
                    raise FormatError(f"layers[{k}].signs", "do not match the canonical layout")
            return net
        layer_keys({"weights", "offsets"}, "weights")
        ws, bs = [], []
        for k, layer in enumerate(layers):
            w = np.atleast_2d(_matrix(layer["weights"], f"layers[{k}].weights"))
            ws.append(w)
            bs.append(np.atleast_1d(_matrix(layer.get("offsets", np.zeros(w.shape[0])), f"layers[{k}].offsets")))
        return GeneralReLUNet(d, ws, bs, output)
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError("layers", str(exc)) from exc


def load_net(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(str(path), f"invalid JSON ({exc})") from exc
    return net_from_json(obj)


def load_points(path):
    """``{"points": [[...], ...], "symmetric": bool}`` -> FinitePointSet."""
    from .complexity import FinitePointSet

    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, list):
        obj = {"points": obj}
    for key in obj:
        if key not in ("points", "symmetric"):
            raise FormatError(key, "unknown key")
    if "points" not in obj:
        raise FormatError("points", "required key missing")
    try:
        return FinitePointSet(_matrix(obj["points"], "points"), bool(obj.get("symmetric", False)))
    except ValueError as exc:
        raise FormatError("points", str(exc)) from exc


def load_samples(path):
    """``{"values": [[...], ...]}`` (or a bare list) -> 2-d array of function samples."""
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        for key in obj:
            if key != "values":
                raise FormatError(key, "unknown key")
        if "values" not in obj:
            raise FormatError("values", "required key missing")
        obj = obj["values"]
    vals = np.atleast_2d(_matrix(obj, "values"))
    if vals.ndim != 2 or vals.shape[0] == 0:
        raise FormatError("values", "must be a nonempty list of equal-length vectors")
    return vals
