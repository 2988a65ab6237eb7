"""Layered ReLU networks and their canonical nonnegative form.

Layers are numbered ``ell = 1`` (outermost, feeding the output) to
``ell = L`` (innermost, reading the inputs). Internally every weight list is
stored innermost-first, i.e. in evaluation order: ``weights[0]`` reads the
inputs and ``weights[-1]`` is the single output row. A depth-``L`` network
therefore has ``L`` weight matrices and ``L - 1`` hidden layers.

Canonical layout of a level with ``h`` real units (inputs: ``h = d``)::

    [u_1 .. u_h, lock+, -u_1 .. -u_h, lock-]

The second half repeats the incoming weights of the first half and applies
``-(z)_+`` instead of ``(z)_+``. ``lock+`` evaluates to ``+1`` and ``lock-``
to ``-1``; offsets are routed through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "DomainError",
    "OutputActivation",
    "InputPoint",
    "GeneralReLUNet",
    "CanonicalNet",
    "canonicalize",
    "evaluate",
    "doubled_input",
    "shift_output",
    "relu",
    "clip",
]

DOMAIN_SLACK = 1e-12


class DimensionMismatchError(ValueError):
    """Weight, offset or input shapes do not chain."""


class DomainError(ValueError):
    """An input lies outside ``[-1, 1]^d``."""


def relu(z):
    return np.maximum(z, 0.0)


def clip(z, B):
    return np.clip(z, -B, B)


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class OutputActivation:
    """Final output map: identity (``"linear"``) or ``clip(B)``."""

    kind: str = "linear"
    B: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "clip"):
            raise ValueError(f"unknown output activation {self.kind!r}")
        if self.kind == "clip":
            if self.B is None or not np.isfinite(self.B) or self.B <= 0:
                raise ValueError("clip output needs a finite B > 0")
            object.__setattr__(self, "B", float(self.B))
        elif self.B is not None:
            raise ValueError("B is only meaningful for clip output")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def clipped(cls, B):
        return cls("clip", B)

    def __call__(self, z):
        if self.kind == "clip":
            return clip(z, self.B)
        return z

    def to_json(self):
        if self.kind == "clip":
            return {"kind": "clip", "B": self.B}
        return {"kind": "linear"}

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj or {"kind": "linear"})
        unknown = set(obj) - {"kind", "B"}
        if unknown:
            raise ValueError(f"unknown output field {sorted(unknown)[0]!r}")
        return cls(obj.get("kind", "linear"), obj.get("B"))


@dataclass(frozen=True)
class InputPoint:
    """A point of the input cube ``[-1, 1]^d``."""

    x: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x)
        if x.ndim != 1:
            raise DimensionMismatchError("an input point is a 1-d vector")
        if not np.all(np.abs(x) <= 1.0):
            raise DomainError("input coordinates must lie in [-1, 1]")
        object.__setattr__(self, "x", x)

    def __len__(self):
        return len(self.x)


def _as_batch(x, d):
    """Return ``(X, single)`` with ``X`` of shape ``(m, d)``."""
    if isinstance(x, InputPoint):
        x = x.x
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != d:
        raise DimensionMismatchError(f"expected inputs of dimension {d}, got shape {np.shape(x)}")
    if X.size and np.max(np.abs(X)) > 1.0 + DOMAIN_SLACK:
        raise DomainError("input coordinates must lie in [-1, 1]")
    return X, single


def doubled_input(X):
    """Map inputs ``(m, d)`` to the canonical input level ``[x, 1, -x, -1]``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    half = np.hstack([X, np.ones((X.shape[0], 1))])
    return np.hstack([half, -half])


def _layer_signs(h):
    return np.concatenate([np.ones(h + 1), -np.ones(h + 1)])


@dataclass(frozen=True)
class GeneralReLUNet:
    """Arbitrary signed ReLU network with offsets.

    Parameters
    ----------
    d : int
        Input dimension.
    weights : sequence of 2-d arrays
        Innermost-first. ``weights[k]`` maps level ``k`` outputs to level
        ``k + 1`` inputs; the last matrix has exactly one row.
    offsets : sequence of 1-d arrays
        One per weight matrix, matching its row count.
    output : OutputActivation
    """

    d: int
    weights: tuple
    offsets: tuple
    output: OutputActivation = field(default_factory=OutputActivation)

    def __post_init__(self):
        if int(self.d) < 1:
            raise DimensionMismatchError("input dimension must be positive")
        object.__setattr__(self, "d", int(self.d))
        ws = tuple(_frozen(w) for w in self.weights)
        if self.offsets is None:
            bs = tuple(_frozen(np.zeros(w.shape[0])) for w in ws)
        else:
            bs = tuple(_frozen(b) for b in self.offsets)
        if not ws:
            raise DimensionMismatchError("a network needs at least one layer")
        if len(bs) != len(ws):
            raise DimensionMismatchError("one offset vector per layer is required")
        prev = self.d
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or w.shape[1] != prev or w.shape[0] < 1:
                raise DimensionMismatchError(
                    f"layer {k} (inner-first) has shape {w.shape}, expected (*, {prev})"
                )
            if b.shape != (w.shape[0],):
                raise DimensionMismatchError(f"layer {k} offsets have shape {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("weights and offsets must be finite")
            prev = w.shape[0]
        if prev != 1:
            raise DimensionMismatchError("the outermost layer must have a single output row")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "offsets", bs)

    @property
    def L(self):
        return len(self.weights)

    @property
    def layer_widths(self):
        """Hidden widths ``d_1, ..., d_{L-1}`` (outermost first) followed by ``d``."""
        return tuple(w.shape[0] for w in reversed(self.weights[:-1])) + (self.d,)

    def forward(self, X):
        z = X
        for w, b in zip(self.weights[:-1], self.offsets[:-1]):
            z = relu(z @ w.T + b)
        out = z @ self.weights[-1][0] + self.offsets[-1][0]
        return self.output(out)


@dataclass(frozen=True)
class CanonicalNet:
    """Nonnegative network with signed duplicate units and locked units.

    Parameters
    ----------
    d : int
        Raw input dimension; the input level has ``2 (d + 1)`` coordinates.
    weights : sequence of 2-d arrays
        Innermost-first, all entries nonnegative. Hidden matrices have
        ``2 (h + 1)`` rows; the last has one row.
    output : OutputActivation
    """

    d: int
    weights: tuple
    output: OutputActivation = field(default_factory=OutputActivation)

    def __post_init__(self):
        object.__setattr__(self, "d", int(self.d))
        ws = tuple(_frozen(w) for w in self.weights)
        object.__setattr__(self, "weights", ws)
        self._validate()

    def _validate(self):
        ws = self.weights
        if not ws:
            raise DimensionMismatchError("a network needs at least one layer")
        prev = 2 * (self.d + 1)
        for k, w in enumerate(ws):
            if w.ndim != 2 or w.shape[1] != prev:
                raise DimensionMismatchError(
                    f"layer {k} (inner-first) has shape {w.shape}, expected (*, {prev})"
                )
            if not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite")
            if np.any(w < 0):
                raise ValueError("canonical weights must be nonnegative")
            last = k == len(ws) - 1
            if last:
                if w.shape[0] != 1:
                    raise DimensionMismatchError("the outermost layer must have a single output row")
                break
            rows = w.shape[0]
            if rows < 2 or rows % 2:
                raise DimensionMismatchError(f"hidden layer {k} must have 2(h+1) rows")
            half = rows // 2
            if not np.array_equal(w[:half], w[half:]):
                raise ValueError(f"layer {k}: duplicate units must repeat the first-half weights")
            lock_row = np.zeros(prev)
            lock_row[prev // 2 - 1] = 1.0
            if not np.allclose(w[half - 1], lock_row, rtol=0, atol=1e-12):
                raise ValueError(f"layer {k}: locked unit must read only the previous locked unit")
            prev = rows

    @property
    def L(self):
        return len(self.weights)

    @property
    def signs(self):
        """Unit-sign tags per hidden layer, innermost-first."""
        return tuple(_layer_signs(w.shape[0] // 2 - 1) for w in self.weights[:-1])

    @property
    def layer_widths(self):
        """Canonical widths, outermost hidden layer first, ending with the input level."""
        return tuple(w.shape[1] for w in reversed(self.weights))

    @property
    def path_count(self):
        return int(np.prod([w.shape[1] for w in self.weights], dtype=object))

    def forward(self, X):
        z = doubled_input(X)
        for w, s in zip(self.weights[:-1], self.signs):
            z = s * relu(z @ w.T)
        return self.output(z @ self.weights[-1][0])

    def with_output(self, output):
        return CanonicalNet(self.d, self.weights, output)

    def scaled(self, c):
        """Multiply the output row by ``c >= 0``."""
        if c < 0:
            raise ValueError("scale must be nonnegative")
        ws = list(self.weights)
        ws[-1] = ws[-1] * c
        return CanonicalNet(self.d, ws, self.output)


def _canonical_layer(w, b, hidden):
    rows, p = w.shape
    out = np.zeros((2 * (rows + 1) if hidden else 1, 2 * (p + 1)))
    block = out[:rows]
    block[:, :p] = np.maximum(w, 0.0)
    block[:, p + 1:2 * p + 1] = np.maximum(-w, 0.0)
    block[:, p] = np.maximum(b, 0.0)
    block[:, 2 * p + 1] = np.maximum(-b, 0.0)
    if hidden:
        out[rows, p] = 1.0
        out[rows + 1:] = out[:rows + 1]
    return out


def canonicalize(net: GeneralReLUNet) -> CanonicalNet:
    """Rewrite a signed network with nonnegative weights only.

    Each signed weight moves onto the matching ``+`` or ``-`` duplicate and
    each offset ``b`` becomes weight ``|b|`` on ``lock+`` or ``lock-``. Every
    width ``d_ell`` becomes ``2 (d_ell + 1)``.
    """
    if not isinstance(net, GeneralReLUNet):
        raise TypeError("canonicalize expects a GeneralReLUNet")
    last = net.L - 1
    layers = [
        _canonical_layer(w, b, hidden=k < last)
        for k, (w, b) in enumerate(zip(net.weights, net.offsets))
    ]
    return CanonicalNet(net.d, layers, net.output)


def shift_output(net: CanonicalNet, c: float) -> CanonicalNet:
    """Return ``net + c`` by adding ``|c|`` to the top-level locked weight."""
    ws = list(net.weights)
    top = ws[-1].copy()
    half = top.shape[1] // 2
    top[0, half - 1 if c >= 0 else 2 * half - 1] += abs(c)
    ws[-1] = top
    return CanonicalNet(net.d, ws, net.output)


def evaluate(net, x):
    """Forward pass of any network type.

    Parameters
    ----------
    net : GeneralReLUNet, CanonicalNet or NormalizedNet
    x : InputPoint or array of shape ``(d,)`` or ``(m, d)``

    Returns
    -------
    float for a single point, array of shape ``(m,)`` for a batch.
    """
    X, single = _as_batch(x, net.d)
    out = np.asarray(net.forward(X), dtype=np.float64)
    return float(out[0]) if single else out


def general_from_layers(d: int, layers: Sequence[tuple], output=None) -> GeneralReLUNet:
    """Small convenience: ``layers`` is innermost-first ``(weights, offsets)`` pairs."""
    ws = [np.atleast_2d(np.asarray(w, dtype=np.float64)) for w, _ in layers]
    bs = [np.atleast_1d(np.asarray(b, dtype=np.float64)) for _, b in layers]
    return GeneralReLUNet(d, ws, bs, output or OutputActivation())
