"""Rademacher and Gaussian complexities of finite sets, layer operations and bounds.

For a finite ``A`` in R^n and i.i.d. symmetric perturbations ``xi``, the
moment ``M(A) = E[sup_a psi((xi . a)_+)]`` is computed either exactly, by
enumerating all 2^n Rademacher sign patterns, or by Monte Carlo. The
complexity is ``psi^{-1}(M(A))``; for ``psi(z) = exp(lam z)`` that is
``log(M) / lam``. Exponential moments are carried in log space throughout.

Exact enumeration uses a meet-in-the-middle split: partial sums over the
low and high halves of the coordinates are accumulated once, and the hot
kernel only adds the two halves and takes the max over ``A``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._backend import kernels
from .network import evaluate
from .variation import PreconditionError, input_path_mass, path_variation

__all__ = [
    "FinitePointSet",
    "PerturbationLaw",
    "PsiSpec",
    "Contraction",
    "RELU",
    "IDENTITY",
    "clip_contraction",
    "square_contraction",
    "Moment",
    "ComplexityEstimate",
    "ComplexityBound",
    "ContractionReport",
    "EnumerationTooLargeError",
    "UnsupportedExactError",
    "exact_moment",
    "mc_moment",
    "mu_complexity_exact",
    "mu_complexity_mc",
    "layer_op",
    "iterate_layer_op",
    "contraction_check",
    "relu_class_complexity_bound",
    "massart_bound",
    "class_values",
    "effective_input_dim",
    "empirical_class_complexity",
]

MAX_EXACT_N = 22
MIN_REPLICATES = 100
MC_CHUNK = 4096
# Rounding slack for exact inequality checks: moments computed on different
# point sets go through different float sums.
FLOAT_SLACK = 1e-12


class EnumerationTooLargeError(ValueError):
    pass


class UnsupportedExactError(ValueError):
    pass


@dataclass(frozen=True)
class FinitePointSet:
    """Finite subset of R^n stored as rows of ``points``."""

    points: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError("a point set needs at least one point of positive length")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts = pts + 0.0  # -0.0 -> 0.0 so bitwise comparisons behave
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.symmetric:
            keys = {row.tobytes() for row in pts}
            neg = -pts + 0.0
            if any(row.tobytes() not in keys for row in neg):
                raise ValueError("symmetric flag set but the set is not closed under negation")

    @classmethod
    def symmetrized(cls, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls(_dedup(np.vstack([pts, -pts])), symmetric=True)

    @property
    def n(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class PerturbationLaw:
    kind: str = "rademacher"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rademacher", "gaussian"):
            raise ValueError(f"unknown perturbation law {self.kind!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.kind == "rademacher" and self.sigma != 1.0:
            raise ValueError("sigma applies to the gaussian law only")

    @classmethod
    def rademacher(cls):
        return cls("rademacher")

    @classmethod
    def gaussian(cls, sigma=1.0):
        return cls("gaussian", float(sigma))

    def sample(self, rng, shape):
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        return rng.standard_normal(shape) * self.sigma


@dataclass(frozen=True)
class PsiSpec:
    kind: str = "identity"
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "exponential"):
            raise ValueError(f"unknown psi {self.kind!r}")
        if self.kind == "exponential":
            if self.lam is None or not self.lam > 0:
                raise ValueError("exponential psi needs lambda > 0")
            object.__setattr__(self, "lam", float(self.lam))
        elif self.lam is not None:
            raise ValueError("lambda applies to exponential psi only")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def exponential(cls, lam):
        return cls("exponential", lam)

    @property
    def log_scale(self):
        return self.kind == "exponential"


@dataclass(frozen=True)
class Contraction:
    """1-Lipschitz map with ``phi(0) = 0``."""

    name: str
    fn: Callable

    def __call__(self, z):
        return self.fn(z)


RELU = Contraction("relu", lambda z: np.maximum(z, 0.0))
IDENTITY = Contraction("identity", lambda z: z)


def clip_contraction(B=1.0):
    return Contraction(f"clip({B:g})", lambda z: np.clip(z, -B, B))


def square_contraction(B):
    """``z -> z^2 / (4B)``, a contraction on ``[-2B, 2B]``."""
    return Contraction(f"square/{4 * B:g}", lambda z: z * z / (4.0 * B))


@dataclass(frozen=True)
class Moment:
    """``M(A)`` stored as ``value`` (identity psi) or ``log M`` (exponential psi)."""

    value: float
    std_error: float
    psi: PsiSpec
    exact: bool

    @property
    def complexity(self):
        if self.psi.log_scale:
            return self.value / self.psi.lam
        return self.value

    @property
    def complexity_se(self):
        return self.std_error / self.psi.lam if self.psi.log_scale else self.std_error

    def doubled(self):
        """Moment of ``2 M`` in the same scale."""
        if self.psi.log_scale:
            return Moment(self.value + math.log(2.0), self.std_error, self.psi, self.exact)
        return Moment(2.0 * self.value, 2.0 * self.std_error, self.psi, self.exact)


@dataclass(frozen=True)
class ComplexityEstimate:
    estimate: float
    std_error: float
    exact: bool
    replicates: int = 0
    jensen_biased: bool = False


@dataclass(frozen=True)
class ComplexityBound:
    bound: float
    lambda_opt: float | None


def _dedup(pts):
    pts = np.ascontiguousarray(pts + 0.0)
    seen, keep = set(), []
    for i, row in enumerate(pts):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return pts[keep]


def _as_set(A):
    return A if isinstance(A, FinitePointSet) else FinitePointSet(A)


def _sign_block(bits):
    idx = np.arange(1 << bits)[:, None]
    return 1.0 - 2.0 * ((idx >> np.arange(bits)) & 1).astype(np.float64)


def _partial_sums(signs, cols):
    # sequential accumulation keeps xi.(-a) == -(xi.a) bit for bit
    out = np.zeros((signs.shape[0], cols.shape[0]))
    for i in range(cols.shape[1]):
        out += signs[:, i:i + 1] * cols[:, i]
    return out


def _pattern_sups(pts):
    n = pts.shape[1]
    n_lo = (n + 1) // 2
    lo = _partial_sums(_sign_block(n_lo), pts[:, :n_lo])
    hi = _partial_sums(_sign_block(n - n_lo), pts[:, n_lo:])
    return kernels.pattern_sups(np.ascontiguousarray(lo), np.ascontiguousarray(hi))


def _moment_from_sups(sups, psi, positive_part=True):
    s = np.maximum(sups, 0.0) if positive_part else sups
    r = len(s)
    if not psi.log_scale:
        mean = float(s.mean())
        se = float(s.std(ddof=1) / math.sqrt(r)) if r > 1 else 0.0
        return mean, se
    t = psi.lam * s
    top = float(t.max())
    e = np.exp(t - top)
    m = float(e.mean())
    log_m = top + math.log(m)
    se = float(e.std(ddof=1) / (math.sqrt(r) * m)) if r > 1 else 0.0
    return log_m, se


def exact_moment(A, law=None, psi=None, *, positive_part=True) -> Moment:
    """``M(A)`` by enumerating all 2^n Rademacher sign patterns."""
    A = _as_set(A)
    law = law or PerturbationLaw()
    psi = psi or PsiSpec()
    if law.kind != "rademacher":
        raise UnsupportedExactError("exact enumeration exists only for the Rademacher law")
    if A.n > MAX_EXACT_N:
        raise EnumerationTooLargeError(
            f"n = {A.n} exceeds {MAX_EXACT_N}; use mu_complexity_mc instead"
        )
    value, _ = _moment_from_sups(_pattern_sups(A.points), psi, positive_part)
    return Moment(value, 0.0, psi, True)


def mu_complexity_exact(A, law=None, psi=None) -> float:
    return exact_moment(A, law, psi).complexity


def _chunk_sups(pts, law, seed, chunk, size):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    xi = law.sample(rng, (size, pts.shape[1]))
    return (xi @ pts.T).max(axis=1)


def _mc_sups(pts, law, replicates, seed, threads):
    sizes = [min(MC_CHUNK, replicates - s) for s in range(0, replicates, MC_CHUNK)]
    work = [(k, size) for k, size in enumerate(sizes)]
    if threads > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ks: _chunk_sups(pts, law, seed, *ks), work))
    else:
        parts = [_chunk_sups(pts, law, seed, *ks) for ks in work]
    return np.concatenate(parts)


def mc_moment(A, law=None, psi=None, replicates=10_000, seed=0, *, threads=1) -> Moment:
    """Monte Carlo ``M(A)`` with a replicate-variance standard error.

    Replicates are drawn in fixed-size chunks whose generators are keyed by
    ``(seed, chunk index)``, so results do not depend on ``threads``.
    """
    A = _as_set(A)
    law = law or PerturbationLaw()
    psi = psi or PsiSpec()
    if replicates < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} replicates")
    if not np.any(A.points):
        return Moment(0.0, 0.0, psi, False)
    sups = _mc_sups(A.points, law, int(replicates), int(seed), int(threads))
    value, se = _moment_from_sups(sups, psi)
    return Moment(value, se, psi, False)


def mu_complexity_mc(A, law=None, psi=None, replicates=10_000, seed=0, *, threads=1):
    """Monte Carlo complexity.

    Returns
    -------
    ComplexityEstimate
        For exponential psi the plug-in ``log(mean) / lam`` is biased upward
        (Jensen) and ``jensen_biased`` is set.
    """
    psi = psi or PsiSpec()
    m = mc_moment(A, law, psi, replicates, seed, threads=threads)
    return ComplexityEstimate(
        m.complexity, m.complexity_se, False, int(replicates), jensen_biased=psi.log_scale
    )


def layer_op(A, phi: Contraction = RELU) -> FinitePointSet:
    """Extreme points of ``conv{+-phi(a) : a in A}``.

    Duplicates are removed by bitwise comparison, and the zero vector is
    dropped whenever another point exists (it is the midpoint of any
    ``+-v`` pair, so it never affects a supremum over the hull).
    """
    A = _as_set(A)
    img = np.asarray(phi(A.points), dtype=np.float64)
    pts = _dedup(np.vstack([img, -img]))
    nonzero = np.any(pts != 0.0, axis=1)
    if nonzero.any():
        pts = pts[nonzero]
    return FinitePointSet(pts, symmetric=True)


def iterate_layer_op(A, layers, phi: Contraction = RELU) -> list:
    """``[A, A', A'', ...]`` with ``layers`` applications."""
    out = [_as_set(A)]
    for _ in range(layers):
        out.append(layer_op(out[-1], phi))
    return out


def _hull_samples(pts, count, rng, signed):
    if count <= 0:
        return pts
    weights = rng.dirichlet(np.ones(len(pts)), size=count)
    if signed:
        weights = weights * rng.choice([-1.0, 1.0], size=weights.shape)
    return np.vstack([pts, weights @ pts])


def _leq(a: Moment, b: Moment, k_se=0.0):
    slack = FLOAT_SLACK * max(1.0, abs(b.value))
    return a.value <= b.value + slack + k_se * math.hypot(a.std_error, b.std_error)


@dataclass(frozen=True)
class ContractionReport:
    """Moments around one layer operation, with the three contraction verdicts.

    Moments are on the linear scale for identity psi and the log scale for
    exponential psi (``scale`` says which).
    """

    m_phi: Moment
    m_base: Moment
    m_conv: Moment
    m_layer: Moment
    two_m_base: Moment
    phi_ok: bool
    conv_ok: bool
    layer_ok: bool
    exact: bool

    @property
    def scale(self):
        return "log" if self.m_base.psi.log_scale else "linear"

    @property
    def passed(self):
        return self.phi_ok and self.conv_ok and self.layer_ok


def contraction_check(
    A,
    phi: Contraction = RELU,
    law=None,
    psi=None,
    *,
    hull_samples=16,
    replicates=20_000,
    seed=0,
    threads=1,
) -> ContractionReport:
    """Compare ``M(phi o A)``, ``M(conv A)`` and ``M(conv{+-phi o A})`` with ``M(A)``.

    Hull moments are taken over the extreme points plus ``hull_samples``
    random (signed) convex combinations, which must not raise the supremum.
    Exact enumeration is used for the Rademacher law when ``n`` allows;
    otherwise all moments share one Monte Carlo seed and inequalities are
    accepted within 3 combined standard errors.
    """
    A = _as_set(A)
    law = law or PerturbationLaw()
    psi = psi or PsiSpec()
    rng = np.random.default_rng(seed)
    phi_pts = np.asarray(phi(A.points), dtype=np.float64)
    conv_pts = _hull_samples(A.points, hull_samples, rng, signed=False)
    layer = layer_op(A, phi)
    layer_pts = _hull_samples(layer.points, hull_samples, rng, signed=True)

    exact = law.kind == "rademacher" and A.n <= MAX_EXACT_N
    if exact:
        moment = lambda P: exact_moment(FinitePointSet(P), law, psi)  # noqa: E731
        k = 0.0
    else:
        moment = lambda P: mc_moment(  # noqa: E731
            FinitePointSet(P), law, psi, replicates, seed, threads=threads
        )
        k = 3.0
    m_base = moment(A.points)
    m_phi = moment(phi_pts)
    m_conv = moment(conv_pts)
    m_layer = moment(layer_pts)
    two = m_base.doubled()
    return ContractionReport(
        m_phi=m_phi,
        m_base=m_base,
        m_conv=m_conv,
        m_layer=m_layer,
        two_m_base=two,
        phi_ok=_leq(m_phi, m_base, k),
        conv_ok=_leq(m_conv, m_base, k),
        layer_ok=_leq(m_layer, two, k),
        exact=exact,
    )


def relu_class_complexity_bound(V, L, d, n, law=None) -> ComplexityBound:
    """Closed-form complexity bound ``V sqrt(2 n (L log 2 + log 2d))`` for depth-L nets.

    Gaussian perturbations with scale sigma multiply the bound by sigma.
    ``lambda_opt`` is the exponential-psi parameter that attains it.
    """
    law = law or PerturbationLaw()
    if V < 0 or L < 1 or d < 1 or n < 1:
        raise ValueError("need V >= 0 and positive L, d, n")
    if V == 0:
        return ComplexityBound(0.0, None)
    log_card = L * math.log(2.0) + math.log(2.0 * d)
    bound = V * math.sqrt(2.0 * n * log_card)
    lam = math.sqrt(2.0 * log_card / (V * V * n))
    if law.kind == "gaussian":
        bound *= law.sigma
        lam /= law.sigma
    return ComplexityBound(bound, lam)


def massart_bound(A, law=None) -> ComplexityBound:
    """Finite-class bound ``R sqrt(2 log N)`` on the complexity of ``A``.

    ``R`` is the largest Euclidean norm in ``A``; ``N`` counts ``A`` plus the
    origin unless ``A`` is symmetric (the positive part is then free).
    """
    A = _as_set(A)
    law = law or PerturbationLaw()
    R = float(np.sqrt((A.points ** 2).sum(axis=1)).max())
    N = len(A) if A.symmetric else len(A) + 1
    if R == 0.0 or N < 2:
        return ComplexityBound(0.0, None)
    bound = R * math.sqrt(2.0 * math.log(N))
    lam = math.sqrt(2.0 * math.log(N)) / R
    if law.kind == "gaussian":
        bound *= law.sigma
        lam /= law.sigma
    return ComplexityBound(bound, lam)


def class_values(nets: Sequence, X) -> np.ndarray:
    """Rows ``(f(X_1), ..., f(X_n))`` for each network."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.vstack([np.atleast_1d(evaluate(f, X)) for f in nets])


def effective_input_dim(nets) -> int:
    """Input count seen by the bound: ``d``, plus the locked coordinate if any offset path is used."""
    d = nets[0].d
    for f in nets:
        mass = input_path_mass(f)
        if mass[d] > 0 or mass[2 * d + 1] > 0:
            return d + 1
    return d


@dataclass(frozen=True)
class ClassComplexity:
    estimate: float
    std_error: float
    exact: bool
    bound: float
    lambda_opt: float | None
    d_eff: int


def empirical_class_complexity(
    nets,
    X,
    law=None,
    psi=None,
    *,
    V_cap=None,
    replicates=20_000,
    seed=0,
    threads=1,
) -> ClassComplexity:
    """Complexity of ``{(f(X_1), ..., f(X_n)) : f in nets}`` and the matching class bound.

    Exact for the Rademacher law when ``n <= 22``, Monte Carlo otherwise.
    """
    nets = list(nets)
    if not nets:
        raise ValueError("need at least one network")
    law = law or PerturbationLaw()
    psi = psi or PsiSpec()
    d = nets[0].d
    if any(f.d != d for f in nets):
        raise PreconditionError("all networks must share the input dimension")
    if len({f.L for f in nets}) != 1:
        raise PreconditionError("all networks must share the depth")
    Vs = [path_variation(f) for f in nets]
    if V_cap is None:
        V_cap = max(Vs)
    elif max(Vs) > V_cap * (1 + 1e-10):
        raise PreconditionError(f"a network has variation {max(Vs):.6g} > V_cap = {V_cap:.6g}")
    A = FinitePointSet(class_values(nets, X))
    if law.kind == "rademacher" and A.n <= MAX_EXACT_N:
        m = exact_moment(A, law, psi)
        est, se, exact = m.complexity, 0.0, True
    else:
        m = mc_moment(A, law, psi, replicates, seed, threads=threads)
        est, se, exact = m.complexity, m.complexity_se, False
    d_eff = effective_input_dim(nets)
    b = relu_class_complexity_bound(V_cap, nets[0].L, d_eff, A.n, law)
    return ClassComplexity(est, se, exact, b.bound, b.lambda_opt, d_eff)
