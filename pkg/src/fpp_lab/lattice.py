"""Finite boxes of Z^d with a canonical edge order, and l1 balls."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Iterable, Sequence

import numpy as np

Vertex = tuple[int, ...]
Edge = tuple[Vertex, Vertex]


@dataclass(frozen=True)
class LatticeWindow:
    """The box ``[lo, hi]`` (inclusive) of Z^d.

    Vertices are numbered in lexicographic (C) order of their coordinates.
    Edges are numbered by lexicographic order of their smaller endpoint, then
    by axis; this order is the edge filtration used everywhere else and is
    frozen into the snapshot format.
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi) or len(lo) < 1:
            raise ValueError("lo and hi must have the same positive length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("need lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_edges(self) -> int:
        return len(self.edge_axis)

    def contains(self, v: Sequence[int]) -> bool:
        return len(v) == self.d and all(a <= c <= b for a, c, b in zip(self.lo, v, self.hi))

    def vertex_index(self, v: Sequence[int]) -> int:
        if not self.contains(v):
            raise ValueError(f"vertex {tuple(v)} outside window {self.lo}..{self.hi}")
        return int(np.ravel_multi_index(tuple(c - a for c, a in zip(v, self.lo)), self.shape))

    def vertex(self, idx: int) -> Vertex:
        return tuple(int(c) + a for c, a in zip(np.unravel_index(int(idx), self.shape), self.lo))

    @cached_property
    def vertex_coords(self) -> np.ndarray:
        """``(n_vertices, d)`` integer coordinates in index order."""
        grid = np.indices(self.shape).reshape(self.d, -1).T
        return grid + np.asarray(self.lo)

    @cached_property
    def _edge_arrays(self):
        shape = self.shape
        idx = np.arange(self.n_vertices).reshape(shape)
        tails, axes = [], []
        for k in range(self.d):
            sl = [slice(None)] * self.d
            sl[k] = slice(0, shape[k] - 1)
            t = idx[tuple(sl)].ravel()
            tails.append(t)
            axes.append(np.full(t.shape, k, dtype=np.int64))
        tail = np.concatenate(tails)
        axis = np.concatenate(axes)
        order = np.lexsort((axis, tail))
        tail, axis = tail[order], axis[order]
        strides = np.array([int(np.prod(shape[k + 1:])) for k in range(self.d)], dtype=np.int64)
        head = tail + strides[axis]
        lookup = np.full((self.n_vertices, self.d), -1, dtype=np.int64)
        lookup[tail, axis] = np.arange(len(tail))
        return tail.astype(np.int64), head.astype(np.int64), axis, lookup

    @property
    def edge_tail(self) -> np.ndarray:
        """Smaller endpoint (vertex index) of each edge."""
        return self._edge_arrays[0]

    @property
    def edge_head(self) -> np.ndarray:
        return self._edge_arrays[1]

    @property
    def edge_axis(self) -> np.ndarray:
        return self._edge_arrays[2]

    def edge(self, k: int) -> Edge:
        return self.vertex(self.edge_tail[k]), self.vertex(self.edge_head[k])

    def edge_index(self, a: Sequence[int], b: Sequence[int]) -> int:
        a, b = tuple(a), tuple(b)
        diff = [y - x for x, y in zip(a, b)]
        if sorted(map(abs, diff)) != [0] * (self.d - 1) + [1]:
            raise ValueError(f"{a} and {b} are not nearest neighbours")
        axis = next(i for i, v in enumerate(diff) if v)
        tail = a if diff[axis] == 1 else b
        k = int(self._edge_arrays[3][self.vertex_index(tail), axis])
        if k < 0:
            raise ValueError(f"edge {a}-{b} not inside the window")
        return k

    @cached_property
    def adjacency(self):
        """CSR adjacency ``(indptr, neighbour, edge_id)`` over vertex indices."""
        tail, head = self.edge_tail, self.edge_head
        eid = np.arange(len(tail), dtype=np.int64)
        src = np.concatenate([tail, head])
        dst = np.concatenate([head, tail])
        ids = np.concatenate([eid, eid])
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n_vertices), out=indptr[1:])
        return indptr, dst[order].astype(np.int64), ids[order]

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        c = self.vertex_coords
        return np.any((c == np.asarray(self.lo)) | (c == np.asarray(self.hi)), axis=1)

    def is_interior(self, v: Sequence[int]) -> bool:
        return all(a < c < b for a, c, b in zip(self.lo, v, self.hi))

    def expanded(self, by: int) -> "LatticeWindow":
        return LatticeWindow(tuple(a - by for a in self.lo), tuple(b + by for b in self.hi))

    def to_dict(self) -> dict:
        return {"d": self.d, "lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeWindow":
        win = cls(tuple(data["lo"]), tuple(data["hi"]))
        if "d" in data and data["d"] != win.d:
            raise ValueError("window dimension does not match its corners")
        return win


def enumerate_edges(window: LatticeWindow) -> list[Edge]:
    """All window edges in canonical order."""
    return [window.edge(k) for k in range(window.n_edges)]


@dataclass(frozen=True)
class Ball:
    d: int
    m: int
    vertices: tuple[Vertex, ...]

    def __len__(self) -> int:
        return len(self.vertices)


def ball(d: int, m: int) -> Ball:
    """``B_m = {y in Z^d : |y|_1 <= m}``, vertices in lexicographic order."""
    if m < 0:
        raise ValueError("radius must be non-negative")
    verts = [v for v in itertools.product(range(-m, m + 1), repeat=d) if sum(map(abs, v)) <= m]
    return Ball(d, m, tuple(verts))


def ball_size(d: int, m: int) -> int:
    """Closed form ``sum_k 2^k C(d,k) C(m,k)``."""
    return sum(2 ** k * comb(d, k) * comb(m, k) for k in range(min(d, m) + 1))


def l1(v: Iterable[int]) -> int:
    return sum(abs(int(c)) for c in v)


def window_for(x: Sequence[int], m: int, margin: int) -> LatticeWindow:
    """Smallest box holding ``B_m`` and ``x + B_m``, padded by ``margin`` on every side."""
    if m < 0 or margin < 0:
        raise ValueError("m and margin must be non-negative")
    lo = tuple(min(0, c) - m - margin for c in x)
    hi = tuple(max(0, c) + m + margin for c in x)
    return LatticeWindow(lo, hi)
