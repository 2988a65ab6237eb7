"""Desk-scale least squares over finite families of ReLU networks.

The estimators here never train by gradient descent. ``erm_constrained`` and
``erm_penalized`` scan an explicit finite cover. ``erm_hull`` solves the
convex problem over the signed convex hull of the cover (scaled to a
variation budget), which is itself a set of depth-L networks with variation
at most the budget; its minimizer is returned as one stacked network.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .network import CanonicalNet, OutputActivation, _as_batch, clip
from .serialize import format_float
from .variation import PreconditionError, path_variation, random_normalized_net

__all__ = [
    "NOISE_KINDS",
    "InputLaw",
    "RegressionTask",
    "Dataset",
    "NetworkCover",
    "Selection",
    "HullFit",
    "generate_data",
    "build_cover",
    "erm_constrained",
    "erm_penalized",
    "erm_hull",
    "stack_nets",
    "lambda_n",
    "default_lambda_constant",
    "theorem2_bound",
    "risk_mc",
    "ConfigError",
    "ExperimentConfig",
    "RiskReport",
    "run_experiment",
    "reports_to_csv",
    "CSV_COLUMNS",
]

NOISE_KINDS = ("gaussian", "rademacher_scaled", "uniform")
V_TOL = 1e-10


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def _noise(kind, sigma, rng, size):
    # sigma is the sub-Gaussian scale in every case
    if kind == "gaussian":
        return sigma * rng.standard_normal(size)
    if kind == "rademacher_scaled":
        return sigma * (2.0 * rng.integers(0, 2, size=size) - 1.0)
    if kind == "uniform":
        return rng.uniform(-sigma, sigma, size=size)
    raise ValueError(f"unknown noise kind {kind!r}")


@dataclass(frozen=True)
class InputLaw:
    """Product law on ``[-1, 1]^d``; ``marginal(rng, size)`` draws one coordinate."""

    marginal: Callable | None = None

    def sample(self, rng, m, d):
        if self.marginal is None:
            return rng.uniform(-1.0, 1.0, size=(m, d))
        X = np.column_stack([np.asarray(self.marginal(rng, m), dtype=np.float64) for _ in range(d)])
        if np.max(np.abs(X)) > 1.0:
            raise ValueError("input marginal must stay within [-1, 1]")
        return X


UNIFORM = InputLaw()


def _values(f, X):
    if isinstance(f, CanonicalNet) or hasattr(f, "forward"):
        Xb, _ = _as_batch(X, f.d)
        return np.asarray(f.forward(Xb), dtype=np.float64)
    return np.asarray(f(X), dtype=np.float64)


@dataclass(frozen=True)
class RegressionTask:
    target: CanonicalNet
    B: float
    sigma: float
    n: int
    seed: int = 0
    noise: str = "gaussian"
    input_law: InputLaw = field(default_factory=InputLaw)
    check_points: int = 10_000

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        X = self.input_law.sample(_rng(self.seed, 5), self.check_points, self.d)
        top = float(np.max(np.abs(_values(self.target, X))))
        if top > self.B * (1 + 1e-12):
            raise ValueError(f"target reaches {top:.6g}, above B = {self.B}")

    @property
    def d(self):
        return self.target.d

    @property
    def V_star(self):
        return path_variation(self.target)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    @property
    def n(self):
        return len(self.Y)

    def permuted(self, perm):
        return Dataset(self.X[perm], self.Y[perm])


def generate_data(task: RegressionTask, rep=0) -> Dataset:
    """Draw ``(X_i, Y_i)``, ``i = 1..n``; identical for identical ``(seed, rep)``.

    ``rep`` is an int or a tuple of ints keying independent replications.
    """
    key = tuple(rep) if isinstance(rep, tuple) else (rep,)
    rng = _rng(task.seed, 2, *key)
    X = task.input_law.sample(rng, task.n, task.d)
    Y = _values(task.target, X) + _noise(task.noise, task.sigma, rng, task.n)
    return Dataset(X, Y)


@dataclass(frozen=True)
class NetworkCover:
    """Finite list of canonical networks sharing ``L`` and ``d``."""

    members: tuple
    epsilon_n: float | None = None
    variations: np.ndarray = field(default=None, compare=False)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, compare=False, repr=False)

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a cover needs at least one member")
        if len({(f.L, f.d) for f in members}) != 1:
            raise ValueError("cover members must share L and d")
        object.__setattr__(self, "members", members)
        if self.variations is None:
            vs = np.array([path_variation(f) for f in members])
            vs.flags.writeable = False
            object.__setattr__(self, "variations", vs)

    @property
    def L(self):
        return self.members[0].L

    @property
    def d(self):
        return self.members[0].d

    def __len__(self):
        return len(self.members)

    def with_member(self, net):
        return NetworkCover(self.members + (net,), self.epsilon_n)

    def predict(self, X) -> np.ndarray:
        """Member outputs on ``X`` (ignoring output activations), shape ``(members, m)``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        key = hashlib.sha1(X.tobytes()).hexdigest() + str(X.shape)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = np.vstack([_values(f.with_output(OutputActivation()), X) for f in self.members])
        out.flags.writeable = False
        with self._lock:
            if len(self._cache) >= 8:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = out
        return out


def build_cover(L, d, V_grid, width, count_per_V, seed, *, alpha=0.5) -> NetworkCover:
    """Random networks with variation exactly equal to each grid value.

    Every member is a random probabilistic network (Dirichlet rows) with its
    scale set to the grid value; variations are re-checked by the backward
    recursion.
    """
    grid = [float(v) for v in V_grid]
    if not grid or any(v <= 0 for v in grid) or grid != sorted(grid):
        raise ValueError("V_grid must be positive and ascending")
    if width < 1:
        raise ValueError("width must be positive")
    if count_per_V < 1:
        raise ValueError("count_per_V must be positive")
    rng = _rng(seed, 1)
    members = []
    for V in grid:
        for _ in range(count_per_V):
            net = random_normalized_net(L, d, width, rng, V=V, alpha=alpha).to_canonical()
            got = path_variation(net)
            if abs(got - V) > V_TOL * max(1.0, V):
                raise AssertionError(f"cover member has variation {got!r}, wanted {V!r}")
            members.append(net)
    return NetworkCover(tuple(members))


@dataclass(frozen=True)
class Selection:
    index: int
    net: CanonicalNet
    loss: float
    V: float
    objective: float


def _clipped(P, B):
    return P if B is None else clip(P, B)


def erm_constrained(data: Dataset, cover: NetworkCover, V_cap, B) -> Selection:
    """Least squares over members with ``V(f) <= V_cap``, each wrapped in ``clip(B)``.

    Ties go to the smallest member index.
    """
    keep = np.flatnonzero(cover.variations <= V_cap * (1 + V_TOL))
    if keep.size == 0:
        raise PreconditionError(f"no cover member has variation <= {V_cap}")
    P = _clipped(cover.predict(data.X)[keep], B)
    losses = ((data.Y - P) ** 2).mean(axis=1)
    j = int(np.argmin(losses))
    i = int(keep[j])
    net = cover.members[i]
    if B is not None:
        net = net.with_output(OutputActivation.clipped(B))
    return Selection(i, net, float(losses[j]), float(cover.variations[i]), float(losses[j]))


def erm_penalized(data: Dataset, cover: NetworkCover, lambda_n, B=None) -> Selection:
    """Minimize empirical loss plus ``V(f) * lambda_n`` over the whole cover.

    Ties go to smaller variation, then smaller index.
    """
    if lambda_n < 0:
        raise ValueError("lambda_n must be nonnegative")
    P = _clipped(cover.predict(data.X), B)
    losses = ((data.Y - P) ** 2).mean(axis=1)
    objective = losses + cover.variations * lambda_n
    idx = np.arange(len(cover))
    i = int(np.lexsort((idx, cover.variations, objective))[0])
    net = cover.members[i]
    if B is not None:
        net = net.with_output(OutputActivation.clipped(B))
    return Selection(i, net, float(losses[i]), float(cover.variations[i]), float(objective[i]))


def _flip_halves(row):
    half = row.shape[-1] // 2
    return np.concatenate([row[..., half:], row[..., :half]], axis=-1)


def stack_nets(nets: Sequence[CanonicalNet], coefs, output=None) -> CanonicalNet:
    """One canonical network computing ``sum_k coefs[k] * nets[k]``.

    Hidden units are placed side by side and share one locked unit per
    layer; negative coefficients read the sign-flipped duplicates. The
    variation of the result is ``sum_k |coefs[k]| V(nets[k])``.
    """
    pairs = [(f, float(c)) for f, c in zip(nets, coefs) if c != 0.0]
    if not pairs:
        pairs = [(nets[0], 0.0)]
    L, d = pairs[0][0].L, pairs[0][0].d
    if any(f.L != L or f.d != d for f, _ in pairs):
        raise ValueError("stacked networks must share L and d")
    # column maps from each member's previous level into the combined one
    colmaps = [np.arange(2 * (d + 1)) for _ in pairs]
    P = d
    layers = []
    for k in range(L - 1):
        reals = [f.weights[k].shape[0] // 2 - 1 for f, _ in pairs]
        H = sum(reals)
        W = np.zeros((2 * (H + 1), 2 * (P + 1)))
        new_maps, off = [], 0
        for (f, _), h, cmap in zip(pairs, reals, colmaps):
            W[off:off + h][:, cmap] = f.weights[k][:h]
            own = np.empty(2 * (h + 1), dtype=np.intp)
            own[:h] = off + np.arange(h)
            own[h] = H
            own[h + 1:2 * h + 1] = H + 1 + off + np.arange(h)
            own[2 * h + 1] = 2 * H + 1
            new_maps.append(own)
            off += h
        W[H, P] = 1.0
        W[H + 1:] = W[:H + 1]
        layers.append(W)
        colmaps, P = new_maps, H
    top = np.zeros((1, 2 * (P + 1)))
    for (f, c), cmap in zip(pairs, colmaps):
        row = f.weights[-1]
        if c < 0:
            row = _flip_halves(row)
        np.add.at(top[0], cmap, abs(c) * row[0])
    layers.append(top)
    return CanonicalNet(d, layers, output or OutputActivation())


def _project_l1(v, radius):
    if np.abs(v).sum() <= radius:
        return v
    u = np.sort(np.abs(v))[::-1]
    cs = np.cumsum(u)
    k = np.arange(1, len(u) + 1)
    rho = np.flatnonzero(u * k > cs - radius)[-1]
    theta = (cs[rho] - radius) / (rho + 1)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


@dataclass(frozen=True)
class HullFit:
    net: CanonicalNet
    coefficients: np.ndarray
    V: float
    loss: float
    gap: float
    iterations: int


def erm_hull(
    data: Dataset, cover: NetworkCover, V_cap, B=None, *, rtol=1e-5, atol=1e-12, max_iter=50_000
) -> HullFit:
    """Least squares over ``{sum_k u_k f_k / V(f_k) : sum |u_k| <= V_cap}``.

    Solved by accelerated projected gradient on the ``l1`` ball; ``gap`` is
    the Frank-Wolfe duality gap of the returned point, an upper bound on its
    suboptimality in mean squared error. Iteration stops once
    ``gap <= rtol * loss + atol``.
    """
    keep = np.flatnonzero(cover.variations > 0)
    if keep.size == 0:
        raise PreconditionError("cover has no member with positive variation")
    H = cover.predict(data.X)[keep] / cover.variations[keep, None]
    n = data.n
    G = H @ H.T / n
    b = H @ data.Y / n
    yy = float(data.Y @ data.Y / n)
    lip = 2.0 * float(np.linalg.eigvalsh(G)[-1])
    step = 1.0 / lip if lip > 0 else 1.0
    u = np.zeros(len(keep))
    y, t, gap, it = u.copy(), 1.0, math.inf, 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (G @ y - b)
        u_next = _project_l1(y - step * grad, V_cap)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = u_next + (t - 1.0) / t_next * (u_next - u)
        u, t = u_next, t_next
        if it % 25 == 0:
            g = 2.0 * (G @ u - b)
            gap = float(g @ u + V_cap * np.abs(g).max())
            loss = float(u @ G @ u - 2.0 * b @ u + yy)
            if gap <= rtol * loss + atol:
                break
    g = 2.0 * (G @ u - b)
    gap = float(g @ u + V_cap * np.abs(g).max())
    coefs = u / cover.variations[keep]
    members = [cover.members[i] for i in keep]
    output = OutputActivation.clipped(B) if B is not None else OutputActivation()
    net = stack_nets(members, coefs, output)
    loss = float(((data.Y - u @ H) ** 2).mean())
    return HullFit(net, u, float(np.abs(u).sum()), loss, gap, it)


def default_lambda_constant(sigma, B):
    """``2 sqrt(2) (sigma + 4B)``, the multiplier in the constrained-risk rate."""
    return 2.0 * math.sqrt(2.0) * (sigma + 4.0 * B)


def lambda_n(L, d, n, c):
    """Penalty level ``c sqrt((L + log d) / n)``."""
    if L < 1 or d < 1 or n < 1 or c < 0:
        raise ValueError("need positive L, d, n and c >= 0")
    return c * math.sqrt((L + math.log(d)) / n)


def theorem2_bound(V, sigma, B, L, d, n):
    """Risk bound ``2 V (sigma + 4B) sqrt(2 (L log 2 + log 2d) / n)`` for constrained least squares."""
    if V < 0 or sigma < 0 or B < 0 or L < 1 or d < 1 or n < 1:
        raise ValueError("invalid arguments")
    return 2.0 * V * (sigma + 4.0 * B) * math.sqrt(2.0 * (L * math.log(2.0) + math.log(2.0 * d)) / n)


def risk_mc(f_hat, f_star, input_law=None, m_eval=20_000, seed=0, *, d=None):
    """Monte Carlo ``||f_hat - f_star||^2`` in ``L2(P_X)`` with its standard error."""
    if m_eval < 1000:
        raise ValueError("m_eval must be at least 1000")
    law = input_law or UNIFORM
    d = d if d is not None else getattr(f_star, "d", None) or getattr(f_hat, "d")
    X = law.sample(_rng(seed, 3), int(m_eval), d)
    sq = (_values(f_hat, X) - _values(f_star, X)) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(len(sq)))


# ---------------------------------------------------------------- experiments


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


_TASK_KEYS = {
    "L": int, "d": int, "V_star": float, "target_width": int, "target": str,
    "B": float, "sigma": float, "noise": str, "n": list, "m_eval": int,
}
_COVER_KEYS = {
    "V_grid": list, "width": int, "count_per_V": int, "V_cap": float,
    "estimator": str, "alpha": float,
}
_TOP_KEYS = {"task", "cover", "lambda", "replications", "seeds", "output", "run_id"}

_TASK_DEFAULTS = {
    "target_width": 8, "target": "in_cover", "noise": "gaussian", "m_eval": 20_000,
}
_COVER_DEFAULTS = {"estimator": "hull", "alpha": 0.5, "V_cap": None}


def _section(obj, name, spec, defaults):
    if not isinstance(obj, dict):
        raise ConfigError(name, "must be an object")
    out = dict(defaults)
    for key, value in obj.items():
        if key not in spec:
            raise ConfigError(f"{name}.{key}", "unknown config key")
        kind = spec[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if value is None and key in defaults:
            out[key] = None
            continue
        if not isinstance(value, kind) or isinstance(value, bool):
            raise ConfigError(f"{name}.{key}", f"expected {kind.__name__}")
        out[key] = value
    for key in spec:
        if key not in out:
            raise ConfigError(f"{name}.{key}", "required key missing")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    L: int
    d: int
    V_star: float
    target_width: int
    target: str
    B: float
    sigma: float
    noise: str
    n: tuple
    m_eval: int
    V_grid: tuple
    width: int
    count_per_V: int
    V_cap: float
    estimator: str
    alpha: float
    c: float | None
    replications: int
    seed: int
    output: str | None = None
    run_id: str = "run"

    @classmethod
    def from_dict(cls, obj):
        """Strictly parse the JSON config; unknown keys raise :class:`ConfigError`."""
        if not isinstance(obj, dict):
            raise ConfigError("config", "must be an object")
        for key in obj:
            if key not in _TOP_KEYS:
                raise ConfigError(key, "unknown config key")
        for key in ("task", "cover", "replications"):
            if key not in obj:
                raise ConfigError(key, "required key missing")
        task = _section(obj["task"], "task", _TASK_KEYS, _TASK_DEFAULTS)
        cover = _section(obj["cover"], "cover", _COVER_KEYS, _COVER_DEFAULTS)
        lam = _section(obj.get("lambda", {}), "lambda", {"c": float}, {"c": None})
        seeds = _section(obj.get("seeds", {}), "seeds", {"master": int}, {"master": 0})
        reps = obj["replications"]
        if not isinstance(reps, int) or isinstance(reps, bool) or reps < 2:
            raise ConfigError("replications", "must be an integer >= 2")
        if task["target"] not in ("in_cover", "external"):
            raise ConfigError("task.target", "must be 'in_cover' or 'external'")
        if task["noise"] not in NOISE_KINDS:
            raise ConfigError("task.noise", f"must be one of {NOISE_KINDS}")
        if cover["estimator"] not in ("hull", "enumerate"):
            raise ConfigError("cover.estimator", "must be 'hull' or 'enumerate'")
        ns = task["n"]
        if not ns or not all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in ns):
            raise ConfigError("task.n", "must be a nonempty list of positive integers")
        grid = cover["V_grid"]
        if not grid or not all(isinstance(v, (int, float)) and v > 0 for v in grid):
            raise ConfigError("cover.V_grid", "must be a nonempty list of positive numbers")
        if [float(v) for v in grid] != sorted(float(v) for v in grid):
            raise ConfigError("cover.V_grid", "must be ascending")
        for key in ("L", "d", "target_width", "m_eval"):
            if task[key] < 1:
                raise ConfigError(f"task.{key}", "must be positive")
        if task["m_eval"] < 1000:
            raise ConfigError("task.m_eval", "must be at least 1000")
        for key in ("V_star", "B", "sigma"):
            if not task[key] > 0:
                raise ConfigError(f"task.{key}", "must be positive")
        for key in ("width", "count_per_V"):
            if cover[key] < 1:
                raise ConfigError(f"cover.{key}", "must be positive")
        output = obj.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError("output", "must be a path string")
        run_id = obj.get("run_id", "run")
        if not isinstance(run_id, str):
            raise ConfigError("run_id", "must be a string")
        V_cap = cover["V_cap"] if cover["V_cap"] is not None else task["V_star"]
        if not V_cap > 0:
            raise ConfigError("cover.V_cap", "must be positive")
        return cls(
            L=task["L"], d=task["d"], V_star=task["V_star"], target_width=task["target_width"],
            target=task["target"], B=task["B"], sigma=task["sigma"], noise=task["noise"],
            n=tuple(ns), m_eval=task["m_eval"], V_grid=tuple(float(v) for v in grid),
            width=cover["width"], count_per_V=cover["count_per_V"], V_cap=float(V_cap),
            estimator=cover["estimator"], alpha=cover["alpha"], c=lam["c"],
            replications=reps, seed=seeds["master"], output=output, run_id=run_id,
        )


CSV_COLUMNS = (
    "run_id", "n", "V_star", "V_cap", "sigma", "B", "L", "d", "emp_risk", "emp_risk_se",
    "thm2_bound", "lambda_n", "selected_V", "pass_thm2", "pass_adaptive",
)


@dataclass(frozen=True)
class RiskReport:
    """One sample size of an experiment.

    ``emp_risk`` is the mean Monte Carlo risk of the constrained estimator
    over replications. The adaptive check compares the penalized estimator's
    mean risk with ``min_f (risk(f) + V(f) lambda_n)`` over the cover (a
    cover-restricted surrogate of the infimum over all networks).
    """

    run_id: str
    n: int
    V_star: float
    V_cap: float
    sigma: float
    B: float
    L: int
    d: int
    emp_risk: float
    emp_risk_se: float
    thm2_bound: float
    lambda_n: float
    selected_V: float
    pass_thm2: bool | None
    pass_adaptive: bool
    adaptive_risk: float = 0.0
    adaptive_risk_se: float = 0.0
    adaptive_rhs: float = 0.0
    adaptive_rhs_se: float = 0.0
    adaptive_selected_V: float = 0.0
    estimator: str = "hull"
    risks: tuple = ()

    def row(self):
        return {name: getattr(self, name) for name in CSV_COLUMNS}


def _target_net(cfg):
    rng = _rng(cfg.seed, 0)
    return random_normalized_net(
        cfg.L, cfg.d, cfg.target_width, rng, V=cfg.V_star, alpha=cfg.alpha
    ).to_canonical()


def _one_replication(cfg, task, cover, lam, rep, n_index, eval_pred, eval_target):
    data = generate_data(task, rep=(n_index, rep))
    if cfg.estimator == "hull":
        fit = erm_hull(data, cover, cfg.V_cap, cfg.B)
        f_hat, V_hat = fit.net, fit.V
    else:
        fit = erm_constrained(data, cover, cfg.V_cap, cfg.B)
        f_hat, V_hat = fit.net, fit.V
    eval_seed = int(np.random.SeedSequence(cfg.seed, spawn_key=(4, n_index, rep)).generate_state(1)[0])
    risk, _ = risk_mc(f_hat, task.target, task.input_law, cfg.m_eval, eval_seed)
    sel = erm_penalized(data, cover, lam, cfg.B)
    pen_risk = float(((eval_pred[sel.index] - eval_target) ** 2).mean())
    return risk, pen_risk, V_hat, sel.V


def run_experiment(config, *, threads=1) -> list:
    """Run every sample size of ``config`` and return one :class:`RiskReport` each.

    Bounds use ``d + 1`` inputs because generated networks route offsets
    through the locked input coordinate.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    target = _target_net(cfg)
    cover = build_cover(cfg.L, cfg.d, cfg.V_grid, cfg.width, cfg.count_per_V, cfg.seed, alpha=cfg.alpha)
    if cfg.target == "in_cover":
        cover = cover.with_member(target)
    d_eff = cfg.d + 1
    c = cfg.c if cfg.c is not None else default_lambda_constant(cfg.sigma, cfg.B)
    V_star = path_variation(target)
    applicable = V_star <= cfg.V_cap * (1 + V_TOL)
    Xe = UNIFORM.sample(_rng(cfg.seed, 6), cfg.m_eval, cfg.d)
    eval_target = _values(target, Xe)
    eval_pred = _clipped(cover.predict(Xe), cfg.B)
    sq = (eval_pred - eval_target) ** 2
    member_risk = sq.mean(axis=1)
    member_se = sq.std(axis=1, ddof=1) / math.sqrt(sq.shape[1])
    reports = []
    for n_index, n in enumerate(cfg.n):
        task = RegressionTask(target, cfg.B, cfg.sigma, n, seed=cfg.seed, noise=cfg.noise)
        lam = lambda_n(cfg.L, d_eff, n, c)
        work = list(range(cfg.replications))
        def run(rep, task=task, lam=lam, n_index=n_index):
            return _one_replication(cfg, task, cover, lam, rep, n_index, eval_pred, eval_target)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run, work))
        else:
            results = [run(rep) for rep in work]
        risks = np.array([r[0] for r in results])
        pen = np.array([r[1] for r in results])
        selV = np.array([r[2] for r in results])
        penV = np.array([r[3] for r in results])
        R = len(results)
        emp, emp_se = float(risks.mean()), float(risks.std(ddof=1) / math.sqrt(R))
        bound = theorem2_bound(cfg.V_cap, cfg.sigma, cfg.B, cfg.L, d_eff, n)

        rhs_all = member_risk + cover.variations * lam
        j = int(np.argmin(rhs_all))
        rhs, rhs_se = float(rhs_all[j]), float(member_se[j])
        pen_mean, pen_se = float(pen.mean()), float(pen.std(ddof=1) / math.sqrt(R))
        pass_adaptive = pen_mean <= rhs + 3.0 * math.hypot(pen_se, rhs_se)
        reports.append(RiskReport(
            run_id=cfg.run_id, n=n, V_star=V_star, V_cap=cfg.V_cap, sigma=cfg.sigma, B=cfg.B,
            L=cfg.L, d=cfg.d, emp_risk=emp, emp_risk_se=emp_se, thm2_bound=bound,
            lambda_n=lam, selected_V=float(selV.mean()),
            pass_thm2=(emp <= bound) if applicable else None,
            pass_adaptive=bool(pass_adaptive), adaptive_risk=pen_mean, adaptive_risk_se=pen_se,
            adaptive_rhs=rhs, adaptive_rhs_se=rhs_se, adaptive_selected_V=float(penV.mean()),
            estimator=cfg.estimator,
            risks=tuple(float(r) for r in risks),
        ))
    return reports


def _cell(v):
    if v is None:
        return "na"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow([_cell(v) for v in r.row().values()])
    return buf.getvalue()
