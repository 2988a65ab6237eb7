"""Total path variation, subnetwork variations and the probabilistic rebalancing.

For a canonical network the subnetwork variation of a unit is the sum, over
all paths from that unit down to the inputs, of the product of the weights
along the path. It obeys the backward recursion

    V_unit = sum_k w[unit, k] * V_k,     V_input = 1,

and the total variation ``V`` is the same recursion applied to the output
row. Rebalancing replaces each weight row by the probabilities
``w[unit, k] * V_k / V_unit`` and multiplies the inputs by ``V``; positive
homogeneity of ``+-(z)_+`` keeps the represented function unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .network import CanonicalNet, OutputActivation, _frozen, _layer_signs, doubled_input, relu

__all__ = [
    "PreconditionError",
    "PathCountError",
    "DegenerateNetworkError",
    "SubnetworkVariations",
    "NormalizedNet",
    "subnetwork_variations",
    "path_variation",
    "path_variation_bruteforce",
    "input_path_mass",
    "normalize",
    "random_normalized_net",
]

DEFAULT_PATH_CAP = 10**6


class PreconditionError(ValueError):
    """Input violates an operation's precondition."""


class PathCountError(PreconditionError):
    """Brute-force enumeration refused because there are too many paths."""

    def __init__(self, count, cap):
        self.count = count
        self.cap = cap
        super().__init__(f"network has {count} paths, more than the cap of {cap}")


class DegenerateNetworkError(PreconditionError):
    """Total variation is zero, so no probabilistic form exists."""


def _require_canonical(net):
    if not isinstance(net, CanonicalNet):
        raise PreconditionError("expected a CanonicalNet; call canonicalize() first")
    for w in net.weights:
        if np.any(w < 0):
            raise PreconditionError("canonical weights must be nonnegative")


@dataclass(frozen=True)
class SubnetworkVariations:
    """Per-level subnetwork variations.

    ``inner_first[0]`` is the input level (all ones) and ``inner_first[-1]``
    the units feeding the output. Indexing with ``sv[ell]`` follows the
    outermost-first numbering ``ell = 1 .. L``.
    """

    inner_first: tuple
    total: float

    @property
    def L(self):
        return len(self.inner_first)

    def __getitem__(self, ell):
        if not 1 <= ell <= self.L:
            raise IndexError(f"layer index must be in 1..{self.L}")
        return self.inner_first[self.L - ell]

    def to_json(self):
        return {
            "V": self.total,
            "layers_outer_first": [self[ell].tolist() for ell in range(1, self.L + 1)],
        }


def subnetwork_variations(net: CanonicalNet) -> SubnetworkVariations:
    _require_canonical(net)
    levels = [np.ones(net.weights[0].shape[1])]
    for w in net.weights[:-1]:
        levels.append(w @ levels[-1])
    total = float(net.weights[-1][0] @ levels[-1])
    return SubnetworkVariations(tuple(_frozen(v) for v in levels), total)


def path_variation(net: CanonicalNet) -> float:
    """ell_1 path norm, by the backward recursion (linear in the edge count)."""
    return subnetwork_variations(net).total


def path_variation_bruteforce(net: CanonicalNet, cap: int = DEFAULT_PATH_CAP) -> float:
    """ell_1 path norm by explicit enumeration of every path. Test oracle."""
    _require_canonical(net)
    count = net.path_count
    if count > cap:
        raise PathCountError(count, cap)
    return float(kernels.path_product_sum(list(reversed(net.weights))))


def input_path_mass(net: CanonicalNet) -> np.ndarray:
    """Total path weight ending at each input coordinate (outer-to-inner sweep).

    Sums to ``path_variation(net)``; the entries at ``d`` and ``2d + 1`` are
    the mass carried by offsets.
    """
    _require_canonical(net)
    mass = net.weights[-1][0]
    for w in reversed(net.weights[:-1]):
        mass = mass @ w
    return mass


@dataclass(frozen=True)
class NormalizedNet:
    """Network whose weight rows are probability vectors, inputs scaled by ``V``.

    ``probs`` is innermost-first with the same shapes as the canonical
    weights; ``probs[-1][0]`` holds the top-level probabilities. ``dead``
    flags, per hidden layer, units whose subnetwork variation was zero; their
    rows are uniform and they receive zero probability from above.
    """

    d: int
    V: float
    probs: tuple
    dead: tuple = ()
    output: OutputActivation = field(default_factory=OutputActivation)

    def __post_init__(self):
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "V", float(self.V))
        ps = tuple(_frozen(p) for p in self.probs)
        object.__setattr__(self, "probs", ps)
        if not self.dead:
            dead = tuple(_frozen(np.zeros(p.shape[0], dtype=bool), dtype=bool) for p in ps[:-1])
        else:
            dead = tuple(_frozen(m, dtype=bool) for m in self.dead)
        object.__setattr__(self, "dead", dead)
        if self.V < 0 or not np.isfinite(self.V):
            raise ValueError("V must be finite and nonnegative")
        prev = 2 * (self.d + 1)
        for p in ps:
            if p.ndim != 2 or p.shape[1] != prev:
                raise ValueError("probability tables do not chain")
            if np.any(p < 0):
                raise ValueError("probabilities must be nonnegative")
            prev = p.shape[0]
        if prev != 1:
            raise ValueError("top-level table must have one row")

    @property
    def L(self):
        return len(self.probs)

    @property
    def signs(self):
        return tuple(_layer_signs(p.shape[0] // 2 - 1) for p in self.probs[:-1])

    def row_sums(self):
        return [p.sum(axis=1) for p in self.probs]

    def forward(self, X):
        z = self.V * doubled_input(X)
        for p, s in zip(self.probs[:-1], self.signs):
            z = s * relu(z @ p.T)
        return self.output(z @ self.probs[-1][0])

    def to_canonical(self) -> CanonicalNet:
        """Fold ``V`` into the output row; same function, variation ``V``."""
        ws = list(self.probs)
        ws[-1] = ws[-1] * self.V
        return CanonicalNet(self.d, ws, self.output)


def _proportional_rows(w, v_below):
    weighted = w * v_below
    sums = weighted.sum(axis=1)
    dead = sums <= 0.0
    rows = np.empty_like(weighted)
    live = ~dead
    rows[live] = weighted[live] / sums[live, None]
    rows[dead] = 1.0 / w.shape[1]
    return rows, dead


def normalize(net: CanonicalNet) -> NormalizedNet:
    """Rebalance into probabilities ``a[unit, k] ∝ w[unit, k] * V_k`` plus scale ``V``.

    Rows of units with zero subnetwork variation are set uniform and
    flagged dead; such units carry zero probability from above, so the
    function is unaffected.

    Raises
    ------
    DegenerateNetworkError
        If the total variation is zero.
    """
    sv = subnetwork_variations(net)
    if not sv.total > 0.0:
        raise DegenerateNetworkError("total path variation is zero")
    probs, dead = [], []
    for k, w in enumerate(net.weights):
        rows, dmask = _proportional_rows(w, sv.inner_first[k])
        probs.append(rows)
        if k < net.L - 1:
            dead.append(dmask)
    return NormalizedNet(net.d, sv.total, tuple(probs), tuple(dead), net.output)


def random_normalized_net(L, d, width, rng, *, V=1.0, alpha=0.5, output=None) -> NormalizedNet:
    """Random probabilistic network: each real unit's row is Dirichlet(alpha).

    Locked units read only the previous locked unit, duplicates copy the
    first half. Every subnetwork variation is 1, so the total is ``V``.
    """
    if L < 1 or d < 1:
        raise ValueError("L and d must be positive")
    if L > 1 and width < 1:
        raise ValueError("hidden width must be positive")
    probs = []
    prev = 2 * (d + 1)
    for _ in range(L - 1):
        rows = np.zeros((2 * (width + 1), prev))
        rows[:width] = rng.dirichlet(np.full(prev, alpha), size=width)
        rows[width, prev // 2 - 1] = 1.0
        rows[width + 1:] = rows[:width + 1]
        probs.append(rows)
        prev = rows.shape[0]
    probs.append(rng.dirichlet(np.full(prev, alpha))[None, :])
    return NormalizedNet(d, V, tuple(probs), output=output or OutputActivation())
