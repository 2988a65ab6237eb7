"""Metric entropy from risk bounds, and a greedy packing estimator.

Natural logarithms throughout. Risks use the ``1/n``-normalized squared
Euclidean norm; packings can use either that normalization or the plain
Euclidean metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels

__all__ = [
    "RiskProfile",
    "PackingResult",
    "fano_risk_lower",
    "fano_entropy_upper",
    "corollary5_entropy",
    "relu_risk_constant",
    "relu_entropy_bound",
    "RELU_ENTROPY_K",
    "rate_form_risk",
    "cumulative_risk",
    "greedy_packing",
]

LOG2 = math.log(2.0)
# 16 * C_F^2 with C_F = 8 V sqrt(2 (L log 2 + log 2d)) gives 16 * 64 * 2.
RELU_ENTROPY_K = 2048.0


@dataclass(frozen=True)
class RiskProfile:
    """Risk ingredients for a location or regression problem.

    ``r_n`` bounds the batch risk, ``r_n_star`` the average risk of a
    predictive (online) estimator.
    """

    n: int
    sigma: float
    r_n: float = 0.0
    r_n_star: float = 0.0
    B: float = 0.0
    C_F: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        for name in ("r_n", "r_n_star", "B", "C_F"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class PackingResult:
    epsilon: float
    count: int
    centers: np.ndarray
    metric: str
    order: np.ndarray

    @property
    def log_count(self):
        return math.log(self.count)


def _information_term(p: RiskProfile):
    return p.n * p.r_n_star / (2.0 * p.sigma ** 2) + LOG2


def fano_risk_lower(profile: RiskProfile, epsilon: float, logN: float) -> float:
    """Lower bound on the batch risk given an ``epsilon``-packing of log size ``logN``.

    May be negative, in which case it is vacuous.
    """
    if not logN > 0:
        raise ValueError("logN must be positive")
    return epsilon ** 2 / 4.0 * (1.0 - _information_term(profile) / logN)


def fano_entropy_upper(profile: RiskProfile, epsilon: float) -> float:
    """Upper bound on ``log N(epsilon)`` from the batch and predictive risks.

    Requires ``epsilon^2 > 4 r_n``.
    """
    ratio = 4.0 * profile.r_n / epsilon ** 2
    if not ratio < 1.0:
        raise ValueError("bound undefined unless epsilon^2 > 4 r_n")
    value = _information_term(profile) / (1.0 - ratio)
    if epsilon ** 2 >= 8.0 * profile.r_n:
        simple = profile.n * profile.r_n_star / profile.sigma ** 2 + 2.0 * LOG2
        assert value <= simple * (1.0 + 1e-12), (value, simple)
    return value


def corollary5_entropy(C_F: float, epsilon: float) -> float:
    """``16 C_F^2 / eps^2 + 2 log 2`` for classes with risk ``(B + sigma) C_F / sqrt(m)``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if C_F < 0:
        raise ValueError("C_F must be nonnegative")
    return 16.0 * C_F ** 2 / epsilon ** 2 + 2.0 * LOG2


def relu_risk_constant(V, L, d) -> float:
    """``C_F = 8 V sqrt(2 (L log 2 + log 2d))`` for depth-L networks of variation V."""
    return 8.0 * V * math.sqrt(2.0 * (L * LOG2 + math.log(2.0 * d)))


def relu_entropy_bound(V, L, d, epsilon) -> float:
    """``K V^2 (L log 2 + log 2d) / eps^2 + 2 log 2`` with ``K = 2048``."""
    if V < 0 or L < 1 or d < 1 or not epsilon > 0:
        raise ValueError("need V >= 0, positive L, d and epsilon")
    return RELU_ENTROPY_K * V ** 2 * (L * LOG2 + math.log(2.0 * d)) / epsilon ** 2 + 2.0 * LOG2


def rate_form_risk(m, C_F, B, sigma):
    """``(B + sigma) C_F / sqrt(max(m, 1))``: the m-sample risk of the rate form."""
    m = np.asarray(m, dtype=np.float64)
    return (B + sigma) * C_F / np.sqrt(np.maximum(m, 1.0))


def cumulative_risk(n_max, C_F, B, sigma):
    """``n r*_n = sum_{m<n} r_m`` for every ``n = 1 .. n_max``, as an array."""
    return np.cumsum(rate_form_risk(np.arange(n_max), C_F, B, sigma))


def greedy_packing(values, epsilon, metric="normalized", *, shuffle_seed=None) -> PackingResult:
    """Greedy maximal packing of the rows of ``values``.

    Rows are visited in input order (or a seeded shuffle) and admitted when
    their distance to every admitted row exceeds ``epsilon``. With
    ``metric="normalized"`` distances are ``sqrt(mean((a - b)^2))``.
    """
    vals = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if vals.shape[0] == 0:
        raise ValueError("need at least one vector")
    if metric not in ("normalized", "euclidean"):
        raise ValueError(f"unknown metric {metric!r}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    order = np.arange(vals.shape[0])
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(order)
    scaled = vals[order]
    if metric == "normalized":
        scaled = scaled / math.sqrt(vals.shape[1])
    picked = kernels.greedy_pack(np.ascontiguousarray(scaled), float(epsilon) ** 2)
    centers = order[picked]
    return PackingResult(float(epsilon), int(len(centers)), centers, metric, order)
