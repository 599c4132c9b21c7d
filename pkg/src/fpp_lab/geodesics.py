"""Passage times, geodesics, Geo sets and edge-criticality on a sampled box.

Shortest paths use a binary-heap label-setting kernel with lazy deletion
(compiled with numba).  Queries never mutate an :class:`EdgeConfig`; the
"change one edge" configurations ``(t_{e^c}, r)`` are passed to the kernel as
an overlay ``(edge, value)``, with ``value = inf`` meaning the edge is removed.
"""
from __future__ import annotations

import heapq
import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .distributions import (
    DEFAULT_BIT_DEPTH,
    BernoulliEncoding,
    WeightDistribution,
    animal_weight,
    draw_words,
    from_spec,
    word_to_uniform,
)
from .lattice import LatticeWindow

REL_TOL = 1e-9
SNAPSHOT_VERSION = 1
EXACT_G_STEP_BUDGET = 2_000_000


class ApproximationWarning(UserWarning):
    """A returned geodesic length is a lower bound, not the exact maximum."""


@numba.njit(cache=True)
def _dijkstra(indptr, nbr, eid, weights, source, skip_edge, skip_value):
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    dist[source] = 0.0
    heap = [(0.0, np.int64(source))]
    while len(heap) > 0:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for p in range(indptr[u], indptr[u + 1]):
            e = eid[p]
            w = skip_value if e == skip_edge else weights[e]
            if w == np.inf:
                continue
            v = nbr[p]
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = e
                heapq.heappush(heap, (nd, v))
    return dist, pred


@dataclass(frozen=True)
class EdgeConfig:
    """One weight per window edge (canonical edge order) plus the bits behind them."""

    window: LatticeWindow
    weights: np.ndarray
    dist: WeightDistribution | None = None
    encodings: BernoulliEncoding | None = None
    seed: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.shape != (self.window.n_edges,):
            raise ValueError(f"expected {self.window.n_edges} weights, got {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def weight(self, a, b) -> float:
        return float(self.weights[self.window.edge_index(a, b)])

    def replace(self, edge: int, value: float) -> "EdgeConfig":
        """Copy with one weight changed (encodings dropped: they no longer match)."""
        w = self.weights.copy()
        w[edge] = value
        return EdgeConfig(self.window, w, self.dist, None, dict(self.seed))


def constant_config(window: LatticeWindow, value: float = 1.0) -> EdgeConfig:
    return EdgeConfig(window, np.full(window.n_edges, float(value)))


def sample_config(dist: WeightDistribution, window: LatticeWindow, rng: np.random.Generator,
                  J: int = DEFAULT_BIT_DEPTH, seed: dict | None = None) -> EdgeConfig:
    words = draw_words(rng, window.n_edges, J)
    enc = BernoulliEncoding(J, words)
    weights = np.asarray(dist.inverse_cdf(word_to_uniform(words, J)), dtype=float).reshape(-1)
    return EdgeConfig(window, weights, dist, enc, dict(seed or {}))


def edge_map(small: LatticeWindow, big: LatticeWindow) -> np.ndarray:
    """Index in ``big`` of every edge of ``small`` (``small`` must sit inside ``big``)."""
    tails = small.vertex_coords[small.edge_tail] - np.asarray(big.lo)
    tail_big = np.ravel_multi_index(tuple(tails.T), big.shape)
    ids = big._edge_arrays[3][tail_big, small.edge_axis]
    if np.any(ids < 0):
        raise ValueError("window is not contained in the target window")
    return ids


def extend_config(config: EdgeConfig, big: LatticeWindow, rng: np.random.Generator) -> EdgeConfig:
    """Embed ``config`` in ``big``, keeping shared weights and sampling the new edges from ``rng``."""
    if config.dist is None:
        raise ValueError("extension needs the configuration's distribution")
    J = config.encodings.bit_depth if config.encodings is not None else DEFAULT_BIT_DEPTH
    ids = edge_map(config.window, big)
    words = draw_words(rng, big.n_edges, J)
    if config.encodings is not None:
        words[ids] = config.encodings.words
    weights = np.asarray(config.dist.inverse_cdf(word_to_uniform(words, J)), dtype=float).reshape(-1)
    weights[ids] = config.weights
    enc = BernoulliEncoding(J, words) if config.encodings is not None else None
    return EdgeConfig(big, weights, config.dist, enc, dict(config.seed))


# --------------------------------------------------------------------------
# distance fields


@dataclass(frozen=True)
class DistanceField:
    source: tuple[int, ...]
    dist: np.ndarray
    pred: np.ndarray = field(repr=False)

    def at(self, window: LatticeWindow, v) -> float:
        return float(self.dist[window.vertex_index(v)])


def distance_field(config: EdgeConfig, source, overlay: tuple[int, float] | None = None) -> DistanceField:
    win = config.window
    indptr, nbr, eid = win.adjacency
    skip_edge, skip_value = (-1, 0.0) if overlay is None else (int(overlay[0]), float(overlay[1]))
    if skip_value < 0 or math.isnan(skip_value):
        raise ValueError("overlay weight must be non-negative")
    d, p = _dijkstra(indptr, nbr, eid, config.weights, win.vertex_index(source), skip_edge, skip_value)
    return DistanceField(tuple(source), d, p)


def _overlay_weights(config: EdgeConfig, overlay) -> np.ndarray:
    if overlay is None:
        return config.weights
    w = config.weights.copy()
    w[int(overlay[0])] = float(overlay[1])
    return w


def _tol(T: float) -> float:
    return REL_TOL * abs(T)


def _touches_boundary(win: LatticeWindow, fwd: np.ndarray, bwd: np.ndarray, T: float) -> bool:
    on_geo = fwd + bwd <= T + _tol(T)
    return bool(np.any(on_geo & win.boundary_mask))


@dataclass(frozen=True)
class Passage:
    T: float
    field: DistanceField
    boundary_touched: bool

    def __iter__(self):
        yield self.T
        yield self.field


def passage_time(config: EdgeConfig, u, v, overlay: tuple[int, float] | None = None) -> Passage:
    """``T(u, v)`` over paths inside the window, the field from ``u`` and a boundary flag.

    ``boundary_touched`` is set when some optimal path visits a vertex on the
    window boundary (so the infinite-lattice value may be smaller).
    """
    fwd = distance_field(config, u, overlay)
    bwd = distance_field(config, v, overlay)
    T = fwd.at(config.window, v)
    return Passage(T, fwd, _touches_boundary(config.window, fwd.dist, bwd.dist, T))


def _path_edges(win: LatticeWindow, fwd: DistanceField, target: int) -> list[int]:
    tail, head = win.edge_tail, win.edge_head
    src = win.vertex_index(fwd.source)
    out = []
    v = target
    while v != src:
        e = int(fwd.pred[v])
        if e < 0:
            raise RuntimeError("target unreachable")
        out.append(e)
        v = int(tail[e]) if int(head[e]) == v else int(head[e])
    out.reverse()
    return out


@dataclass
class TightGraph:
    """Arcs ``a -> b`` with ``T(u,a) + t_ab + T(b,v) = T(u,v)``: the union of all geodesics, oriented."""

    source: int
    target: int
    arcs: list[tuple[int, int, int]]  # (from, to, edge)

    @property
    def edges(self) -> set[int]:
        return {e for _, _, e in self.arcs}

    def reaches(self, skip_edge: int = -1) -> bool:
        out: dict[int, list[tuple[int, int]]] = {}
        for a, b, e in self.arcs:
            out.setdefault(a, []).append((b, e))
        seen = {self.source}
        queue = deque([self.source])
        while queue:
            a = queue.popleft()
            if a == self.target:
                return True
            for b, e in out.get(a, ()):
                if e != skip_edge and b not in seen:
                    seen.add(b)
                    queue.append(b)
        return False

    def is_simple_path(self) -> bool:
        outdeg: dict[int, int] = {}
        indeg: dict[int, int] = {}
        for a, b, _ in self.arcs:
            outdeg[a] = outdeg.get(a, 0) + 1
            indeg[b] = indeg.get(b, 0) + 1
        return all(c <= 1 for c in outdeg.values()) and all(c <= 1 for c in indeg.values())


def tight_graph(config: EdgeConfig, fwd: np.ndarray, bwd: np.ndarray, s: int, t: int,
                weights: np.ndarray | None = None) -> TightGraph:
    win = config.window
    w = config.weights if weights is None else weights
    T = float(fwd[t])
    lim = T + _tol(T)
    tail, head = win.edge_tail, win.edge_head
    finite = np.isfinite(w)
    forward = finite & (fwd[tail] + w + bwd[head] <= lim)
    backward = finite & (fwd[head] + w + bwd[tail] <= lim)
    arcs = [(int(tail[e]), int(head[e]), int(e)) for e in np.flatnonzero(forward)]
    arcs += [(int(head[e]), int(tail[e]), int(e)) for e in np.flatnonzero(backward)]
    return TightGraph(s, t, arcs)


@dataclass(frozen=True)
class GeodesicReport:
    T: float
    path: tuple[int, ...]
    geo_set: frozenset[int]
    G: int
    G_exact: bool
    boundary_touched: bool


class _Query:
    """Shared fields for one ``(u, v)`` query, optionally under an overlay."""

    def __init__(self, config: EdgeConfig, u, v, overlay=None):
        self.config = config
        self.win = config.window
        self.s = self.win.vertex_index(u)
        self.t = self.win.vertex_index(v)
        self.overlay = overlay
        self.fwd = distance_field(config, u, overlay)
        self.bwd = distance_field(config, v, overlay)
        self.T = float(self.fwd.dist[self.t])
        self.weights = _overlay_weights(config, overlay)
        self._tight = None

    @property
    def tight(self) -> TightGraph:
        if self._tight is None:
            self._tight = tight_graph(self.config, self.fwd.dist, self.bwd.dist, self.s, self.t, self.weights)
        return self._tight

    def path(self) -> list[int]:
        return _path_edges(self.win, self.fwd, self.t)

    def geo_set(self) -> frozenset[int]:
        if self.s == self.t:
            return frozenset()
        path = self.path()
        tg = self.tight
        if tg.is_simple_path():
            return frozenset(path)
        return frozenset(e for e in path if not tg.reaches(skip_edge=e))

    def geo_set_requery(self) -> frozenset[int]:
        if self.s == self.t:
            return frozenset()
        out = set()
        lim = self.T + _tol(self.T)
        for e in self.path():
            if self.overlay is not None and int(self.overlay[0]) == e:
                continue
            w = self.weights.copy()
            w[e] = np.inf
            indptr, nbr, eid = self.win.adjacency
            d, _ = _dijkstra(indptr, nbr, eid, w, self.s, -1, 0.0)
            if d[self.t] > lim:
                out.add(e)
        return frozenset(out)

    def max_length(self) -> tuple[int, bool]:
        if self.s == self.t:
            return 0, True
        return _longest_tight_path(self.tight, len(self.path()))

    def boundary_touched(self) -> bool:
        return _touches_boundary(self.win, self.fwd.dist, self.bwd.dist, self.T)


def _longest_tight_path(tg: TightGraph, floor: int) -> tuple[int, bool]:
    """Maximum edge count over simple ``source -> target`` paths of the tight graph."""
    out: dict[int, list[int]] = {}
    indeg: dict[int, int] = {}
    nodes = set()
    for a, b, _ in tg.arcs:
        out.setdefault(a, []).append(b)
        indeg[b] = indeg.get(b, 0) + 1
        nodes.update((a, b))
    order = []
    queue = deque(n for n in nodes if indeg.get(n, 0) == 0)
    remaining = dict(indeg)
    while queue:
        a = queue.popleft()
        order.append(a)
        for b in out.get(a, ()):
            remaining[b] -= 1
            if remaining[b] == 0:
                queue.append(b)
    if len(order) == len(nodes):
        best = {tg.source: 0}
        for a in order:
            if a not in best:
                continue
            for b in out.get(a, ()):
                if best[a] + 1 > best.get(b, -1):
                    best[b] = best[a] + 1
        return best[tg.target], True
    # zero-weight cycles: enumerate simple paths with a step budget
    best_len = floor
    steps = 0
    on_path = {tg.source}
    stack = [(tg.source, iter(out.get(tg.source, ())), 0)]
    while stack:
        a, it, depth = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            on_path.discard(a)
            continue
        steps += 1
        if steps > EXACT_G_STEP_BUDGET:
            return best_len, False
        if nxt in on_path:
            continue
        if nxt == tg.target:
            best_len = max(best_len, depth + 1)
            continue
        on_path.add(nxt)
        stack.append((nxt, iter(out.get(nxt, ())), depth + 1))
    return best_len, True


def geodesic_intersection(config: EdgeConfig, u, v, method: str = "tight",
                          overlay: tuple[int, float] | None = None) -> frozenset[int]:
    """Edge ids lying on every geodesic from ``u`` to ``v``.

    ``method="tight"`` tests each edge of one geodesic for being a cut edge of
    the oriented tight subgraph; ``method="requery"`` removes it and checks
    that ``T`` strictly increases (relative tolerance ``1e-9``).
    """
    q = _Query(config, u, v, overlay)
    if method == "tight":
        return q.geo_set()
    if method == "requery":
        return q.geo_set_requery()
    raise ValueError(f"unknown method {method!r}")


def max_geodesic_length(config: EdgeConfig, u, v, overlay=None) -> int:
    """Maximal edge count of a self-avoiding geodesic.

    Exact by longest-path over the oriented tight subgraph when it is acyclic,
    otherwise by budgeted enumeration; when the budget runs out the returned
    value is a lower bound and an :class:`ApproximationWarning` is emitted.
    """
    G, exact = _Query(config, u, v, overlay).max_length()
    if not exact:
        warnings.warn("geodesic length enumeration exceeded its budget; returning a lower bound",
                      ApproximationWarning, stacklevel=2)
    return G


def geodesic_report(config: EdgeConfig, u, v, overlay=None) -> GeodesicReport:
    q = _Query(config, u, v, overlay)
    G, exact = q.max_length()
    return GeodesicReport(
        T=q.T,
        path=tuple(q.path()) if q.s != q.t else (),
        geo_set=q.geo_set(),
        G=G,
        G_exact=exact,
        boundary_touched=q.boundary_touched(),
    )


def critical_value(config: EdgeConfig, e: int, z, x) -> float:
    """``D_{z,e}``: the largest value of ``t_e`` keeping ``e`` on a geodesic ``z -> z+x``.

    ``A`` is the cheapest route through ``e`` not counting ``t_e``, ``B`` the
    cheapest route avoiding ``e``; the result is ``(B - A)_+`` and does not
    depend on ``t_e``.
    """
    target = tuple(a + b for a, b in zip(z, x))
    win = config.window
    fwd = distance_field(config, z, (e, np.inf)).dist
    bwd = distance_field(config, target, (e, np.inf)).dist
    a, b = int(win.edge_tail[e]), int(win.edge_head[e])
    A = min(fwd[a] + bwd[b], fwd[b] + bwd[a])
    B = float(fwd[win.vertex_index(target)])
    return float(max(B - A, 0.0))


def kesten_indicator(config: EdgeConfig, x, a: float) -> int:
    """``G(0,x)`` if ``T(0,x) < a G(0,x)``, else 0."""
    if a <= 0:
        raise ValueError("rate a must be positive")
    origin = (0,) * len(x)
    q = _Query(config, origin, tuple(x))
    G, _ = q.max_length()
    return int(G) if q.T < a * G else 0


def kesten_value(T: float, G: int, a: float) -> int:
    return int(G) if T < a * G else 0


def geodesic_log_weight(config: EdgeConfig, z, x, geo: frozenset[int] | None = None) -> float:
    """Sum of ``1 - log F(t_e)`` over ``Geo(z, z+x)``."""
    if config.dist is None:
        raise ValueError("animal weights need the configuration's distribution")
    if geo is None:
        target = tuple(a + b for a, b in zip(z, x))
        geo = geodesic_intersection(config, z, target)
    if not geo:
        return 0.0
    ids = np.fromiter(sorted(geo), dtype=np.int64)
    return float(np.sum(animal_weight(config.dist, config.weights[ids])))


def path_weight(config: EdgeConfig, path: Sequence[int]) -> float:
    return float(np.sum(config.weights[np.asarray(path, dtype=np.int64)])) if len(path) else 0.0


def is_displacement_covered(window: LatticeWindow, z, x) -> bool:
    target = tuple(a + b for a, b in zip(z, x))
    return window.contains(z) and window.contains(target)


# --------------------------------------------------------------------------
# snapshots: one JSON header line, then little-endian float64 weights


def write_snapshot(config: EdgeConfig, path) -> None:
    J = config.encodings.bit_depth if config.encodings is not None else None
    header = {
        "format_version": SNAPSHOT_VERSION,
        **config.window.to_dict(),
        "dist": config.dist.spec() if config.dist is not None else None,
        "seed": config.seed,
        "J": J,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.asarray(config.weights, dtype="<f8").tobytes())


def read_snapshot(path) -> EdgeConfig:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        body = fh.read()
    if header.get("format_version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {header.get('format_version')}")
    win = LatticeWindow.from_dict(header)
    weights = np.frombuffer(body, dtype="<f8").astype(float)
    dist = from_spec(header["dist"]) if header.get("dist") else None
    return EdgeConfig(win, weights, dist, None, header.get("seed") or {})

