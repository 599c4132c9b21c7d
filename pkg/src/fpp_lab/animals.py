"""Greedy lattice animals: exact ``N_n`` by rooted enumeration, a greedy lower bound, growth curves."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from . import distributions as dists
from .estimators import replica_rng
from .geodesics import EdgeConfig, geodesic_report, path_weight, sample_config
from .lattice import LatticeWindow

EXACT_CAP = {2: 10, 3: 7}


class ExactCapError(ValueError):
    """``n`` is beyond the exact enumeration cap; use :func:`greedy_Nn`."""


class PartialAnimalWarning(UserWarning):
    pass


def animal_window(d: int, n: int) -> LatticeWindow:
    """``[-n, n]^d``: holds every edge animal of size ``n`` touching the origin."""
    return LatticeWindow((-n,) * d, (n,) * d)


@dataclass(frozen=True)
class AnimalInstance:
    window: LatticeWindow
    w: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.w, dtype=float)
        if w.shape != (self.window.n_edges,):
            raise ValueError(f"expected {self.window.n_edges} weights, got {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("animal weights must be finite and non-negative")
        if not self.window.is_interior((0,) * self.window.d):
            raise ValueError("the origin must be interior to the window")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_config(cls, config: EdgeConfig) -> "AnimalInstance":
        if config.dist is None:
            raise ValueError("animal weights need the configuration's distribution")
        return cls(config.window, dists.animal_weight(config.dist, config.weights))

    def origin_edges(self) -> list[int]:
        indptr, _, eid = self.window.adjacency
        o = self.window.vertex_index((0,) * self.window.d)
        return sorted(int(e) for e in eid[indptr[o]:indptr[o + 1]])

    def edge_neighbours(self) -> list[list[int]]:
        """Edges sharing an endpoint with each edge."""
        win = self.window
        indptr, _, eid = win.adjacency
        out = []
        for k in range(win.n_edges):
            around = set()
            for v in (int(win.edge_tail[k]), int(win.edge_head[k])):
                around.update(int(e) for e in eid[indptr[v]:indptr[v + 1]])
            around.discard(k)
            out.append(sorted(around))
        return out

    def animal_weight(self, edges) -> float:
        return float(np.sum(self.w[np.asarray(sorted(edges), dtype=np.int64)])) if len(edges) else 0.0


def exact_cap(d: int) -> int:
    return EXACT_CAP.get(d, 0)


def _check_reach(instance: AnimalInstance, n: int):
    if n < 1:
        raise ValueError("animal size must be at least 1")
    win = instance.window
    if any(lo > -n or hi < n for lo, hi in zip(win.lo, win.hi)):
        raise ValueError(f"window must contain [-{n}, {n}]^d")


def exact_animal(instance: AnimalInstance, n: int, cap: int | None = None) -> tuple[float, tuple[int, ...]]:
    """Maximum-weight connected edge set of size ``n`` with the origin as an endpoint.

    Rooted Redelmeier enumeration (each animal is visited once, rooted at its
    lowest-indexed origin edge), pruned by the current weight plus the ``k``
    largest weights still available.  The greedy animal seeds the incumbent.
    """
    cap = exact_cap(instance.window.d) if cap is None else cap
    if n > cap:
        raise ExactCapError(f"n={n} exceeds the exact cap {cap}; use greedy_Nn")
    _check_reach(instance, n)
    w = instance.w.tolist()
    nbrs = instance.edge_neighbours()
    top = np.concatenate([[0.0], np.cumsum(np.sort(instance.w)[::-1][:n])]).tolist()
    g = greedy_animal(instance, n)
    best = [g.value, tuple(sorted(g.edges))]
    seen = [False] * len(w)
    chosen: list[int] = []

    def grow(untried: list[int], size: int, weight: float):
        if size == n:
            if weight > best[0]:
                best[0], best[1] = weight, tuple(sorted(chosen))
            return
        if weight + top[n - size] <= best[0]:
            return
        untried = list(untried)
        while untried:
            e = untried.pop()
            fresh = [f for f in nbrs[e] if not seen[f]]
            for f in fresh:
                seen[f] = True
            chosen.append(e)
            grow(untried + fresh, size + 1, weight + w[e])
            chosen.pop()
            for f in fresh:
                seen[f] = False

    roots = instance.origin_edges()
    for i, r in enumerate(roots):
        for e in roots[: i + 1]:
            seen[e] = True
        grow([r], 0, 0.0)
        for e in roots[: i + 1]:
            seen[e] = False
    # re-sum in canonical order so equal animals give identical floats
    return instance.animal_weight(best[1]), best[1]


def exact_Nn(instance: AnimalInstance, n: int, cap: int | None = None) -> float:
    """``N_n``: the largest total weight of a connected ``n``-edge set with ``0`` as an endpoint."""
    return exact_animal(instance, n, cap)[0]


@dataclass(frozen=True)
class GreedyAnimal:
    value: float
    edges: tuple[int, ...]
    partial: bool


def greedy_animal(instance: AnimalInstance, n: int) -> GreedyAnimal:
    """Grow from the origin, always adding the heaviest frontier edge (lowest index on ties)."""
    if n < 1:
        raise ValueError("animal size must be at least 1")
    nbrs = instance.edge_neighbours()
    w = instance.w
    frontier = set(instance.origin_edges())
    taken: list[int] = []
    inside: set[int] = set()
    while len(taken) < n and frontier:
        e = min(frontier, key=lambda k: (-w[k], k))
        frontier.discard(e)
        taken.append(e)
        inside.add(e)
        frontier.update(f for f in nbrs[e] if f not in inside)
    return GreedyAnimal(instance.animal_weight(taken), tuple(taken), len(taken) < n)


def greedy_Nn(instance: AnimalInstance, n: int) -> float:
    """Greedy lower bound for ``N_n`` (a partial animal is returned with a warning if the window runs out)."""
    g = greedy_animal(instance, n)
    if g.partial:
        warnings.warn(f"window exhausted after {len(g.edges)} of {n} edges", PartialAnimalWarning, stacklevel=2)
    return g.value


def brute_force_Nn(instance: AnimalInstance, n: int) -> float:
    """Unpruned oracle: grow every connected set level by level, deduplicated as frozensets."""
    _check_reach(instance, n)
    nbrs = instance.edge_neighbours()
    level = {frozenset([e]) for e in instance.origin_edges()}
    for _ in range(n - 1):
        level = {s | {f} for s in level for e in s for f in nbrs[e] if f not in s}
    return max(instance.animal_weight(s) for s in level)


# --------------------------------------------------------------------------
# growth statistics


@dataclass(frozen=True)
class GrowthRow:
    n: int
    beta: float
    mean_ratio: float
    log_mgf_over_n: float
    stderr: float
    exact_or_greedy: str


def log_mgf_over_n(values: np.ndarray, beta: float, n: int) -> tuple[float, float]:
    """``log(mean e^{beta N}) / n`` pivoted at the extreme value, and its delta-method standard error."""
    v = np.asarray(values, dtype=float)
    top = float(np.max(v) if beta >= 0 else np.min(v))
    g = np.exp(beta * (v - top))
    mean = float(np.mean(g))
    value = beta * (top / n) + math.log(mean) / n
    se = float(np.std(g, ddof=1) / (math.sqrt(len(g)) * mean * n)) if len(g) > 1 else float("nan")
    return value, se


def animal_growth_stats(dist: dists.WeightDistribution, d: int, n_range: Sequence[int], replicas: int,
                        beta_grid: Sequence[float], seed: int, method: str = "auto",
                        J: int = dists.DEFAULT_BIT_DEPTH) -> list[GrowthRow]:
    """Monte Carlo ``N_n`` over sampled weights ``w_e = 1 - log F(t_e)``.

    ``method`` is ``"exact"``, ``"greedy"`` or ``"auto"`` (exact up to the cap,
    greedy beyond it; greedy rows are lower bounds and labelled so).
    """
    if method not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    n_range = sorted(set(int(n) for n in n_range))
    if not n_range or n_range[0] < 1 or replicas < 1:
        raise ValueError("need n >= 1 and replicas >= 1")
    cap = exact_cap(d)
    if method == "exact" and n_range[-1] > cap:
        raise ExactCapError(f"n={n_range[-1]} exceeds the exact cap {cap}")
    window = animal_window(d, n_range[-1])
    N = np.empty((replicas, len(n_range)))
    for i in range(replicas):
        config = sample_config(dist, window, replica_rng(seed, i), J)
        inst = AnimalInstance.from_config(config)
        for j, n in enumerate(n_range):
            use_exact = method == "exact" or (method == "auto" and n <= cap)
            N[i, j] = exact_Nn(inst, n) if use_exact else greedy_animal(inst, n).value
    rows = []
    for j, n in enumerate(n_range):
        label = "exact" if (method == "exact" or (method == "auto" and n <= cap)) else "greedy"
        for beta in beta_grid:
            val, se = log_mgf_over_n(N[:, j], float(beta), n)
            rows.append(GrowthRow(n, float(beta), float(np.mean(N[:, j]) / n), val, se, label))
    return rows


# --------------------------------------------------------------------------
# geodesics as animals


@dataclass(frozen=True)
class DecayPoint:
    n: float
    fraction: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class GeodesicAnimalCurve:
    a_hat: float
    points: list
    samples: int


def geodesic_animal_curve(dist: dists.WeightDistribution, x: Sequence[int], replicas: int,
                          n_grid: Sequence[float], seed: int, a_hat: float | None = None,
                          margin: int = 8, J: int = dists.DEFAULT_BIT_DEPTH) -> GeodesicAnimalCurve:
    """Fraction of sampled geodesics ``gamma`` from 0 to ``x`` with ``N(gamma) >= n`` and ``T(gamma) < a N(gamma)``.

    ``a_hat`` defaults to the sample median of ``T(gamma) / N(gamma)``.
    """
    x = tuple(int(c) for c in x)
    window = LatticeWindow(tuple(min(0, c) - margin for c in x), tuple(max(0, c) + margin for c in x))
    TN = np.empty((replicas, 2))
    for i in range(replicas):
        config = sample_config(dist, window, replica_rng(seed, i), J)
        rep = geodesic_report(config, (0,) * len(x), x)
        w = dists.animal_weight(dist, config.weights[np.asarray(rep.path, dtype=np.int64)])
        TN[i] = path_weight(config, rep.path), float(np.sum(w))
    T, Nv = TN[:, 0], TN[:, 1]
    if a_hat is None:
        a_hat = float(np.median(T / Nv))
    pts = []
    for n in n_grid:
        k = int(np.sum((Nv >= n) & (T < a_hat * Nv)))
        ci = stats.binomtest(k, replicas).proportion_ci(method="wilson")
        pts.append(DecayPoint(float(n), k / replicas, float(ci.low), float(ci.high)))
    return GeodesicAnimalCurve(a_hat, pts, replicas)
