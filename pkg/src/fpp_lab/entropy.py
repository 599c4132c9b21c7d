"""Exact enumeration of small product spaces and the entropy-method inequalities.

Probabilities and rational functionals are carried as :class:`fractions.Fraction`;
anything that needs ``exp`` or ``log`` is evaluated with mpmath at
:data:`DPS` significant digits.  Inequalities on irrational quantities are
accepted up to a relative slack of ``1e-30``, far below the ``1e-9`` a double
precision computation could promise.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np

from .distributions import WeightDistribution
from .lattice import LatticeWindow, ball

DPS = 50
MAX_STATES = 2 ** 24
MAX_BITS = 4
LSI_RANGE_GUARD = 30
REL_SLACK = mpmath.mpf("1e-30")

Number = Fraction | mpmath.mpf


def _mp(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _exact(x) -> bool:
    return isinstance(x, (Fraction, int))


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


def _is_exact_array(arr: np.ndarray) -> bool:
    return all(isinstance(v, Fraction) for v in arr.flat)


# --------------------------------------------------------------------------
# product spaces


@dataclass(frozen=True)
class DiscreteSystem:
    """A finite product of independent coordinates grouped into edges.

    ``outcomes[c]`` / ``probs[c]`` describe coordinate ``c``; ``groups[e]``
    lists the (contiguous) coordinates that determine edge ``e`` and
    ``edge_values`` maps one state (a tuple of outcome indices) to the tuple of
    edge weights.  Edge-per-coordinate systems come from :meth:`from_supports`,
    bit-driven systems (``J`` fair bits per edge) from :meth:`from_bits`.
    """

    outcomes: tuple[tuple, ...]
    probs: tuple[tuple[Fraction, ...], ...]
    groups: tuple[tuple[int, ...], ...]
    edge_values: Callable = field(repr=False, compare=False)
    descriptor: dict = field(default_factory=dict, compare=False)
    bit_depth: int | None = None

    def __post_init__(self):
        for ps in self.probs:
            if sum(ps) != 1 or any(p < 0 for p in ps):
                raise ValueError("coordinate probabilities must be non-negative and sum to 1")
        if self.n_states > MAX_STATES:
            raise ValueError(f"{self.n_states} states exceed the enumeration limit {MAX_STATES}")
        flat = [c for g in self.groups for c in g]
        if flat != list(range(len(self.outcomes))):
            raise ValueError("edge groups must cover the coordinates in order")

    @classmethod
    def from_supports(cls, supports: Sequence[Sequence[tuple]], descriptor: dict | None = None) -> "DiscreteSystem":
        """One coordinate per edge; ``supports[e]`` is a list of ``(value, probability)``."""
        if not 1 <= len(supports) <= 24:
            raise ValueError("need between 1 and 24 edges")
        outcomes = tuple(tuple(_frac(v) for v, _ in sup) for sup in supports)
        probs = tuple(tuple(_frac(p) for _, p in sup) for sup in supports)
        for vals in outcomes:
            if any(v < 0 for v in vals):
                raise ValueError("edge weights must be non-negative")
        groups = tuple((e,) for e in range(len(supports)))

        def edge_values(state):
            return tuple(outcomes[e][i] for e, i in enumerate(state))

        desc = {"kind": "supports", "supports": [[[str(v), str(p)] for v, p in zip(o, ps)]
                                                 for o, ps in zip(outcomes, probs)]}
        return cls(outcomes, probs, groups, edge_values, {**desc, **(descriptor or {})})

    @classmethod
    def from_bits(cls, dist: WeightDistribution, n_edges: int, J: int,
                  descriptor: dict | None = None) -> "DiscreteSystem":
        """``J`` fair bits per edge, pushed through ``F^{-1}`` of ``dist`` (most significant bit first)."""
        if not 1 <= J <= MAX_BITS:
            raise ValueError(f"bit depth must be in [1, {MAX_BITS}]")
        half = (Fraction(1, 2), Fraction(1, 2))
        n_coords = n_edges * J
        table = {}
        for word in range(2 ** J):
            u = Fraction(word, 2 ** J)
            table[word] = _frac(dist.inverse_cdf(float(u)))
        groups = tuple(tuple(range(e * J, (e + 1) * J)) for e in range(n_edges))

        def edge_values(state):
            out = []
            for e in range(n_edges):
                word = 0
                for c in groups[e]:
                    word = 2 * word + state[c]
                out.append(table[word])
            return tuple(out)

        desc = {"kind": "bits", "dist": dist.spec(), "edges": n_edges, "J": J}
        return cls(((0, 1),) * n_coords, (half,) * n_coords, groups, edge_values,
                   {**desc, **(descriptor or {})}, J)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(o) for o in self.outcomes)

    @property
    def n_states(self) -> int:
        return math.prod(self.shape)

    @property
    def n_edges(self) -> int:
        return len(self.groups)

    def edge_marginal(self, e: int) -> list[tuple[Fraction, Fraction]]:
        """Law of the weight of edge ``e`` as sorted ``(value, probability)`` pairs."""
        law: dict[Fraction, Fraction] = {}
        g = self.groups[e]
        for sub in itertools.product(*(range(len(self.outcomes[c])) for c in g)):
            state = [0] * len(self.outcomes)
            p = Fraction(1)
            for c, i in zip(g, sub):
                state[c] = i
                p *= self.probs[c][i]
            v = self.edge_values(tuple(state))[e]
            law[v] = law.get(v, Fraction(0)) + p
        return sorted(law.items())

    def marginal_cdf(self, e: int, t) -> Fraction:
        return sum((p for v, p in self.edge_marginal(e) if v <= t), Fraction(0))

    def evaluate(self, fn: Callable) -> np.ndarray:
        """Array (shape :attr:`shape`) of ``fn(edge_values)`` over every state."""
        out = np.empty(self.shape, dtype=object)
        with mpmath.workdps(DPS):
            for state in itertools.product(*(range(n) for n in self.shape)):
                out[state] = fn(self.edge_values(state))
        return out

    def joint(self) -> np.ndarray:
        p = np.ones((), dtype=object)
        p[()] = Fraction(1)
        for ps in self.probs:
            p = np.multiply.outer(p, np.array(ps, dtype=object))
        return p

    def _rv(self, X) -> np.ndarray:
        arr = self.evaluate(X) if callable(X) else np.asarray(X, dtype=object)
        if arr.shape != self.shape:
            raise ValueError(f"random variable has shape {arr.shape}, expected {self.shape}")
        return arr

    def average(self, arr: np.ndarray, axes: Sequence[int]) -> np.ndarray:
        """Integrate out ``axes`` (kept as length-one dimensions)."""
        out = arr
        for ax in sorted(axes, reverse=True):
            p = np.array(self.probs[ax], dtype=object)
            out = np.expand_dims(np.tensordot(out, p, axes=([ax], [0])), ax)
        return out

    def expect(self, arr: np.ndarray):
        return self.average(arr, range(arr.ndim)).reshape(()).item()

    def cond_expect(self, arr: np.ndarray, k: int) -> np.ndarray:
        """``E[arr | F_k]`` for the edge filtration (first ``k`` edges known), full shape."""
        first = sum(len(g) for g in self.groups[:k])
        return np.broadcast_to(self.average(arr, range(first, arr.ndim)), arr.shape)


def _map(arr: np.ndarray, fn) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = fn(v)
    return out


def _xlogx(v):
    v = _mp(v)
    return mpmath.mpf(0) if v == 0 else v * mpmath.log(v)


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    system: dict
    lhs: Number
    rhs: Number
    relation: str  # "<=", ">=" or "=="
    exact: bool
    extra: dict = field(default_factory=dict)

    @property
    def margin(self):
        if self.relation == "<=":
            return self.rhs - self.lhs
        if self.relation == ">=":
            return self.lhs - self.rhs
        return -abs(self.lhs - self.rhs)

    @property
    def slack(self):
        if self.exact:
            return 0
        scale = max(abs(_mp(self.lhs)), abs(_mp(self.rhs)), mpmath.mpf(1))
        return REL_SLACK * scale

    @property
    def holds(self) -> bool:
        return bool(self.margin >= -self.slack)

    def to_json(self) -> dict:
        out = {
            "check_name": self.check_name,
            "system_descriptor": self.system,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "relation": self.relation,
            "margin": float(self.margin),
            "exact": self.exact,
            "holds": self.holds,
        }
        if self.exact:
            out["lhs_exact"], out["rhs_exact"] = str(self.lhs), str(self.rhs)
        out.update({k: (float(v) if isinstance(v, (Fraction, mpmath.mpf)) else v) for k, v in self.extra.items()})
        return out


def _report(name, system, lhs, rhs, relation, **extra) -> CheckReport:
    exact = _exact(lhs) and _exact(rhs)
    if not exact:
        lhs, rhs = _mp(lhs), _mp(rhs)
    return CheckReport(name, system.descriptor if isinstance(system, DiscreteSystem) else dict(system),
                       lhs, rhs, relation, exact, extra)


# --------------------------------------------------------------------------
# entropy and its variational form


def entropy(values, probs=None) -> mpmath.mpf:
    """``Ent X = E X log X - E X log E X`` for a finite law (``0 log 0 = 0``)."""
    vals = list(values.flat) if isinstance(values, np.ndarray) else list(values)
    if probs is None:
        ps = [Fraction(1, len(vals))] * len(vals)
    else:
        ps = list(probs.flat) if isinstance(probs, np.ndarray) else list(probs)
    if len(ps) != len(vals) or not vals:
        raise ValueError("values and probabilities must have the same non-zero length")
    if any(v < 0 for v in vals):
        raise ValueError("entropy needs a non-negative variable")
    with mpmath.workdps(DPS):
        mean = sum((_mp(p) * _mp(v) for v, p in zip(vals, ps)), mpmath.mpf(0))
        if mean <= 0:
            raise ValueError("entropy needs E X > 0")
        exlogx = sum((_mp(p) * _xlogx(v) for v, p in zip(vals, ps)), mpmath.mpf(0))
        ent = exlogx - mean * mpmath.log(mean)
        # constants give exactly zero up to rounding in the last digits
        if abs(ent) <= REL_SLACK * max(abs(exlogx), mpmath.mpf(1)):
            return mpmath.mpf(0)
        return ent


def _ent_or_zero(arr: np.ndarray, joint: np.ndarray) -> mpmath.mpf:
    if all(v == 0 for v in arr.flat):
        return mpmath.mpf(0)
    return entropy(arr, joint)


def system_entropy(system: DiscreteSystem, X) -> mpmath.mpf:
    return entropy(system._rv(X), system.joint())


@dataclass(frozen=True)
class VariationalResult:
    value: mpmath.mpf
    exp_moment: mpmath.mpf  # E e^{Y*}, equal to 1


def variational_entropy(system: DiscreteSystem, X) -> VariationalResult:
    """``E[X Y*]`` at the optimiser ``Y* = log(X / E X)``, with ``E e^{Y*}`` for feasibility."""
    arr = system._rv(X)
    if any(v < 0 for v in arr.flat):
        raise ValueError("entropy needs a non-negative variable")
    joint = system.joint()
    with mpmath.workdps(DPS):
        mean = _mp(system.expect(arr))
        if mean <= 0:
            raise ValueError("entropy needs E X > 0")
        exy = mpmath.mpf(0)
        eey = mpmath.mpf(0)
        for x, p in zip(arr.flat, joint.flat):
            if x == 0:
                continue  # Y* = -inf on {X = 0}: X Y* = 0 and e^{Y*} = 0
            ystar = mpmath.log(_mp(x) / mean)
            exy += _mp(p) * _mp(x) * ystar
            eey += _mp(p) * mpmath.exp(ystar)
        return VariationalResult(exy, eey)


def variational_pair(system: DiscreteSystem, X, Y) -> tuple[mpmath.mpf, mpmath.mpf]:
    """``(E[X Y], E e^Y)`` for a candidate ``Y`` (any feasible ``Y`` has ``E X Y <= Ent X``)."""
    arr, yarr = system._rv(X), system._rv(Y)
    joint = system.joint()
    with mpmath.workdps(DPS):
        exy = sum((_mp(p) * _mp(x) * _mp(y) for x, y, p in zip(arr.flat, yarr.flat, joint.flat)), mpmath.mpf(0))
        eey = sum((_mp(p) * mpmath.exp(_mp(y)) for y, p in zip(yarr.flat, joint.flat)), mpmath.mpf(0))
        return exy, eey


def tensorization_check(system: DiscreteSystem, X) -> CheckReport:
    """``Ent X <= sum_e E Ent_e X``, ``Ent_e`` taken over edge ``e`` with the others frozen."""
    arr = system._rv(X)
    joint = system.joint()
    with mpmath.workdps(DPS):
        lhs = entropy(arr, joint)
        xlx = _map(arr, _xlogx)
        rhs = mpmath.mpf(0)
        for g in system.groups:
            inner = system.average(xlx, g)
            mean = system.average(arr, g)
            cond = _map(inner, _mp) - _map(mean, _xlogx)
            rhs += _mp(system.expect(np.broadcast_to(cond, arr.shape)))
        return _report("tensorization", system, lhs, rhs, "<=")


# --------------------------------------------------------------------------
# martingale increments along the edge filtration


def martingale_decomposition(system: DiscreteSystem, G) -> list[np.ndarray]:
    """``V_k = E[G | F_k] - E[G | F_{k-1}]`` for ``k = 1..#edges`` as full-shape arrays."""
    arr = system._rv(G)
    with mpmath.workdps(DPS):
        levels = [system.cond_expect(arr, k) for k in range(system.n_edges + 1)]
        return [np.array(levels[k] - levels[k - 1], dtype=object) for k in range(1, system.n_edges + 1)]


def martingale_checks(system: DiscreteSystem, G) -> list[CheckReport]:
    """Telescoping, pairwise orthogonality and ``Var G = sum E V_k^2``."""
    arr = system._rv(G)
    with mpmath.workdps(DPS):
        V = martingale_decomposition(system, arr)
        mean = system.expect(arr)
        total = sum(V[1:], V[0].copy())
        worst = max(abs(a - (g - mean)) for a, g in zip(total.flat, arr.flat))
        reports = [_report("martingale_telescoping", system, worst, 0, "==")]
        cross = Fraction(0) if _is_exact_array(arr) else mpmath.mpf(0)
        for j, k in itertools.combinations(range(len(V)), 2):
            c = system.expect(V[j] * V[k])
            cross = max(cross, abs(c))
        reports.append(_report("martingale_orthogonality", system, cross, 0, "=="))
        var = system.expect(arr * arr) - mean * mean
        reports.append(_report("martingale_variance", system, var, sum(system.expect(v * v) for v in V), "=="))
        return reports


def variance(system: DiscreteSystem, G):
    arr = system._rv(G)
    with mpmath.workdps(DPS):
        m = system.expect(arr)
        return system.expect(arr * arr) - m * m


def falik_samorodnitsky_check(system: DiscreteSystem, G) -> CheckReport:
    """``sum Ent(V_k^2) >= Var G log(Var G / sum (E|V_k|)^2)``; ``Var G = 0`` gives ``(0, 0)``."""
    arr = system._rv(G)
    joint = system.joint()
    with mpmath.workdps(DPS):
        var = variance(system, arr)
        if var == 0:
            return _report("falik_samorodnitsky", system, Fraction(0), Fraction(0), ">=")
        V = martingale_decomposition(system, arr)
        lhs = sum((_ent_or_zero(v * v, joint) for v in V), mpmath.mpf(0))
        infl = sum(_mp(system.expect(_map(v, abs))) ** 2 for v in V)
        rhs = _mp(var) * mpmath.log(_mp(var) / infl)
        return _report("falik_samorodnitsky", system, lhs, rhs, ">=", influence=infl, variance=var)


@dataclass(frozen=True)
class InfluenceResult:
    total: Number
    per_edge: list  # E|V_k|
    resampling: list  # E|G - G^(k)|


def influence_sum(system: DiscreteSystem, G) -> InfluenceResult:
    """``sum_k (E|V_k|)^2`` with the resampling bound ``E|G - G^(k)|`` for each edge."""
    arr = system._rv(G)
    with mpmath.workdps(DPS):
        V = martingale_decomposition(system, arr)
        per = [system.expect(_map(v, abs)) for v in V]
        joint = system.joint()
        res = []
        for g in system.groups:
            pre = math.prod(system.shape[: g[0]])
            K = math.prod(system.shape[c] for c in g)
            a = arr.reshape(pre, K, -1)
            prest = joint.reshape(pre, K, -1).sum(axis=1)
            q = [math.prod(ps) for ps in itertools.product(*(system.probs[c] for c in g))]
            tot = 0
            for i, j in itertools.permutations(range(K), 2):
                tot += q[i] * q[j] * np.sum(_map(a[:, i, :] - a[:, j, :], abs) * prest)
            res.append(tot)
        return InfluenceResult(sum(p * p for p in per), per, res)


# --------------------------------------------------------------------------
# Bernoulli discrete derivatives


def bit_derivative(system: DiscreteSystem, arr: np.ndarray, coord: int) -> np.ndarray:
    """``Delta_{e,j} G`` for the bit at ``coord``: value with the bit set minus value with it cleared."""
    hi = np.take(arr, [1], axis=coord)
    lo = np.take(arr, [0], axis=coord)
    return np.broadcast_to(hi - lo, arr.shape)


def discrete_derivative_sum(system: DiscreteSystem, G) -> CheckReport:
    """Compare ``sum_k Ent(V_k^2)`` (edge filtration) with ``sum_{e,j} E (Delta_{e,j} G)^2``."""
    if system.bit_depth is None:
        raise ValueError("discrete derivatives need a bit-driven system")
    arr = system._rv(G)
    joint = system.joint()
    with mpmath.workdps(DPS):
        rhs = sum(system.expect(bit_derivative(system, arr, c) ** 2) for c in range(len(system.shape)))
        V = martingale_decomposition(system, arr)
        lhs = sum((_ent_or_zero(v * v, joint) for v in V), mpmath.mpf(0))
        return _report("bernoulli_derivatives", system, lhs, rhs, "<=")


# --------------------------------------------------------------------------
# symmetrized log-Sobolev inequality


def _q(x):
    return x * (mpmath.exp(x) - 1)


def symmetrized_lsi_check(system: DiscreteSystem, X, lam) -> CheckReport:
    """``Ent e^{lam X} <= E[e^{lam X} q(lam (X' - X)_+)]`` with ``X'`` an independent copy."""
    arr = system._rv(X)
    joint = system.joint()
    law: dict = {}
    for x, p in zip(arr.flat, joint.flat):
        law[x] = law.get(x, 0) + p
    vals = list(law)
    if abs(float(lam)) * float(max(vals) - min(vals)) > LSI_RANGE_GUARD:
        raise OverflowError("|lambda| * range(X) exceeds the guard")
    with mpmath.workdps(DPS):
        lam = _mp(lam)
        if lam == 0 or len(vals) == 1:
            return _report("symmetrized_lsi", system, Fraction(0), Fraction(0), "<=", lam=float(lam))
        ex = {x: mpmath.exp(lam * _mp(x)) for x in vals}
        lhs = entropy([ex[x] for x in vals], [law[x] for x in vals])
        rhs = mpmath.mpf(0)
        for x in vals:
            for y in vals:
                if y > x:
                    rhs += _mp(law[x]) * _mp(law[y]) * ex[x] * _q(lam * _mp(y - x))
        return _report("symmetrized_lsi", system, lhs, rhs, "<=", lam=float(lam))


# --------------------------------------------------------------------------
# small passage-time functionals


def _self_avoiding_paths(window: LatticeWindow, u, v) -> list[tuple[int, ...]]:
    indptr, nbr, eid = window.adjacency
    s, t = window.vertex_index(u), window.vertex_index(v)
    out = []
    seen = {s}

    def walk(a, edges):
        if a == t:
            out.append(tuple(edges))
            return
        for p in range(indptr[a], indptr[a + 1]):
            b = int(nbr[p])
            if b not in seen:
                seen.add(b)
                edges.append(int(eid[p]))
                walk(b, edges)
                edges.pop()
                seen.discard(b)

    walk(s, [])
    return out


@dataclass(frozen=True)
class PathFamily:
    """Passage time as the minimum, over a fixed list of edge sets, of the summed weights."""

    paths: tuple[tuple[int, ...], ...]

    def passage(self, t) -> Number:
        return min(sum((t[e] for e in p), Fraction(0)) for p in self.paths)

    def geo(self, t) -> frozenset[int]:
        costs = [sum((t[e] for e in p), Fraction(0)) for p in self.paths]
        best = min(costs)
        sets = [set(p) for p, c in zip(self.paths, costs) if c == best]
        return frozenset(set.intersection(*sets))


@dataclass(frozen=True)
class MiniFPP:
    """``F_m`` on a tiny window: one :class:`PathFamily` per ``z`` in ``B_m``."""

    families: tuple[PathFamily, ...]
    descriptor: dict = field(default_factory=dict, compare=False)

    @classmethod
    def on_window(cls, window: LatticeWindow, x, m: int = 0) -> "MiniFPP":
        fams = []
        for z in ball(window.d, m).vertices:
            zx = tuple(a + b for a, b in zip(z, x))
            if not (window.contains(z) and window.contains(zx)):
                raise ValueError("window must contain B_m and x + B_m")
            fams.append(PathFamily(tuple(_self_avoiding_paths(window, z, zx))))
        return cls(tuple(fams), {"window": window.to_dict(), "x": list(x), "m": m})

    @classmethod
    def from_paths(cls, paths, descriptor: dict | None = None) -> "MiniFPP":
        return cls((PathFamily(tuple(tuple(p) for p in paths)),), dict(descriptor or {"paths": [list(p) for p in paths]}))

    def F(self, t) -> Fraction:
        return sum((f.passage(t) for f in self.families), Fraction(0)) / len(self.families)

    def exp(self, lam) -> Callable:
        lam = _frac(lam)
        return lambda t: mpmath.exp(_mp(lam * self.F(t)))


def geodesic_weight_bound_check(system: DiscreteSystem, fpp: MiniFPP, lam) -> CheckReport:
    """``sum Ent(V_k^2)`` for ``G = e^{lam F_m}`` against ``lam^2 avg_z E[e^{2 lam F_m} sum_{Geo} (1 - log F(t_e))]``.

    ``F`` is the marginal CDF of the enumerated law.  No constant is asserted:
    the report carries ``ratio = lhs / rhs`` (0 when ``lam = 0``).
    """
    lam = _frac(lam)
    joint = system.joint()
    cdfs = [{v: system.marginal_cdf(e, v) for v, _ in system.edge_marginal(e)} for e in range(system.n_edges)]
    with mpmath.workdps(DPS):
        G = system.evaluate(fpp.exp(lam))
        V = martingale_decomposition(system, G)
        lhs = sum((_ent_or_zero(v * v, joint) for v in V), mpmath.mpf(0))

        def weight(t):
            e2 = mpmath.exp(_mp(2 * lam * fpp.F(t)))
            acc = mpmath.mpf(0)
            for fam in fpp.families:
                acc += sum((1 - mpmath.log(_mp(cdfs[e][t[e]])) for e in fam.geo(t)), mpmath.mpf(0))
            return e2 * acc / len(fpp.families)

        rhs = _mp(lam) ** 2 * _mp(system.expect(system.evaluate(weight)))
        ratio = lhs / rhs if rhs > 0 else mpmath.mpf(0)
        rep = _report("geodesic_weight_bound", {**system.descriptor, **fpp.descriptor}, lhs, rhs, "<=",
                      lam=float(lam), ratio=ratio)
        return rep


# --------------------------------------------------------------------------
# step-function quadrature


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on ``[0, 1]``: ``values[i]`` on ``[breaks[i], breaks[i+1])``."""

    breaks: tuple[Fraction, ...]
    values: tuple[Fraction, ...]

    def __post_init__(self):
        b = tuple(_frac(v) for v in self.breaks)
        v = tuple(_frac(x) for x in self.values)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)
        if not b or b[0] != 0 or len(b) != len(v):
            raise ValueError("breaks must start at 0 and match values in length")
        if any(x >= y for x, y in zip(b, b[1:])) or b[-1] >= 1:
            raise ValueError("breaks must be strictly increasing inside [0, 1)")

    def __call__(self, x) -> Fraction:
        i = 0
        while i + 1 < len(self.breaks) and self.breaks[i + 1] <= x:
            i += 1
        return self.values[i]

    @property
    def non_decreasing(self) -> bool:
        return all(a <= b for a, b in zip(self.values, self.values[1:]))

    @property
    def non_negative(self) -> bool:
        return all(v >= 0 for v in self.values)

    def constant_from(self, a) -> bool:
        return all(b <= a or v == self.values[i - 1] for i, (b, v) in enumerate(zip(self.breaks, self.values)) if i)

    @classmethod
    def indicator_from(cls, c) -> "StepFunction":
        c = _frac(c)
        return cls((Fraction(0), c), (Fraction(0), Fraction(1))) if c > 0 else cls((Fraction(0),), (Fraction(1),))

    @classmethod
    def constant(cls, c) -> "StepFunction":
        return cls((Fraction(0),), (_frac(c),))


@dataclass(frozen=True)
class StepFunctionPair:
    h: StepFunction
    f: StepFunction
    a: Fraction
    tau: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", _frac(self.a))
        object.__setattr__(self, "tau", _frac(self.tau))
        if not (0 <= self.a <= 1 and 0 < self.tau <= 1):
            raise ValueError("need a in [0, 1] and tau in (0, 1]")
        for name, g in (("h", self.h), ("f", self.f)):
            if not (g.non_decreasing and g.non_negative):
                raise ValueError(f"{name} must be non-negative and non-decreasing")
        if not self.f.constant_from(self.a):
            raise ValueError("f must be constant on [a, 1]")


def _integrate(fn, points, lo: Fraction, hi: Fraction) -> Fraction:
    cuts = sorted({lo, hi, *(p for p in points if lo < p < hi)})
    return sum(((b - a) * fn(a) for a, b in zip(cuts, cuts[1:])), Fraction(0))


@dataclass(frozen=True)
class QuadratureResult:
    lhs: Fraction
    bound: Fraction
    case: str

    @property
    def holds(self) -> bool:
        return self.lhs <= self.bound


CASES = ("a>1/2", "a<tau", "tau<=a")


def select_case(a: Fraction, tau: Fraction) -> str:
    if a > Fraction(1, 2):
        return "a>1/2"
    return "a<tau" if a < tau else "tau<=a"


def uniformvar_quadrature(pair: StepFunctionPair, case: str | None = None) -> QuadratureResult:
    """Exact ``int_tau^1 h(x)(f(x) - f(x - tau))^2 dx`` and the bound of the selected case.

    ``"a>1/2"`` bounds by ``int h f^2 1{x >= 1 - tau}``, ``"a<tau"`` by
    ``2a int h f^2`` and ``"tau<=a"`` by ``2 tau int h f^2``.  Without an
    explicit ``case`` it is chosen from ``(a, tau)``, ties going to ``"tau<=a"``.
    """
    h, f, a, tau = pair.h, pair.f, pair.a, pair.tau
    if tau > Fraction(1, 2):
        raise ValueError("the quadrature bounds need tau <= 1/2")
    case = case or select_case(a, tau)
    if case == "a<tau" and not a <= tau <= Fraction(1, 2):
        raise ValueError("case a<tau needs a <= tau <= 1/2")
    if case == "tau<=a" and not tau <= a <= Fraction(1, 2):
        raise ValueError("case tau<=a needs tau <= a <= 1/2")
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    pts = set(h.breaks) | set(f.breaks) | {b + tau for b in f.breaks}
    lhs = _integrate(lambda x: h(x) * (f(x) - f(x - tau)) ** 2, pts, tau, Fraction(1))
    hf2 = lambda x: h(x) * f(x) ** 2  # noqa: E731
    if case == "a>1/2":
        bound = _integrate(hf2, pts, 1 - tau, Fraction(1))
    else:
        full = _integrate(hf2, pts, Fraction(0), Fraction(1))
        bound = 2 * (a if case == "a<tau" else tau) * full
    return QuadratureResult(lhs, bound, case)


def random_step_pair(rng: np.random.Generator, case: str, denominator: int = 64) -> StepFunctionPair:
    """Random rational pair satisfying the hypotheses of ``case``."""
    D = denominator
    half = D // 2
    if case == "a>1/2":
        tau = Fraction(int(rng.integers(1, half + 1)), D)
        a = Fraction(int(rng.integers(0, D + 1)), D)
    elif case == "a<tau":
        t = int(rng.integers(1, half + 1))
        tau, a = Fraction(t, D), Fraction(int(rng.integers(0, t + 1)), D)
    elif case == "tau<=a":
        t = int(rng.integers(1, half + 1))
        tau, a = Fraction(t, D), Fraction(int(rng.integers(t, half + 1)), D)
    else:
        raise ValueError(f"unknown case {case!r}")

    def steps(limit: Fraction) -> StepFunction:
        top = int(limit * D)
        k = int(rng.integers(0, 5))
        cuts = sorted(set(int(c) for c in rng.integers(1, top + 1, size=k))) if top >= 1 else []
        cuts = [c for c in cuts if c < D]
        vals = np.cumsum(rng.integers(0, 4, size=len(cuts) + 1))
        return StepFunction((Fraction(0), *(Fraction(c, D) for c in cuts)), tuple(Fraction(int(v)) for v in vals))

    return StepFunctionPair(steps(Fraction(1)), steps(a), a, tau)


# --------------------------------------------------------------------------
# random systems for sweeps


def random_supports_system(rng: np.random.Generator, max_edges: int = 3, max_support: int = 3) -> DiscreteSystem:
    n = int(rng.integers(1, max_edges + 1))
    sups = []
    for _ in range(n):
        k = int(rng.integers(1, max_support + 1))
        vals = sorted(set(int(v) for v in rng.integers(0, 8, size=k)))
        w = [int(v) for v in rng.integers(1, 5, size=len(vals))]
        sups.append([(Fraction(v, 2), Fraction(c, sum(w))) for v, c in zip(vals, w)])
    return DiscreteSystem.from_supports(sups)


def random_paths(rng: np.random.Generator, n_edges: int) -> list[tuple[int, ...]]:
    """A few random non-empty edge subsets, always covering every edge."""
    k = int(rng.integers(1, 4))
    edges = list(range(n_edges))
    paths = []
    for _ in range(k):
        size = int(rng.integers(1, n_edges + 1))
        paths.append(tuple(sorted(int(e) for e in rng.choice(edges, size=size, replace=False))))
    paths[0] = tuple(sorted(set(paths[0]) | set(edges) - set().union(*map(set, paths[1:])))) if k > 1 else tuple(edges)
    return paths
