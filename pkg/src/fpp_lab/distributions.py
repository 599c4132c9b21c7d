"""Edge-weight laws, dyadic Bernoulli encodings and lattice-animal weights.

Every weight in the package is produced by pushing a finite string of fair
bits through the right-continuous inverse CDF::

    u = sum_j bits[j] * 2**-(j+1),   t = F^{-1}(u)

so that sampling and the bit-level discrete derivatives in :mod:`fpp_lab.entropy`
share a single code path.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_BIT_DEPTH = 32
MAX_BIT_DEPTH = 53  # float64 represents k / 2**J exactly up to here


class InfiniteWeightError(ValueError):
    """Raised when ``1 - log F(t)`` is requested at a point with ``F(t) = 0``."""


class UnsupportedDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class WeightDistribution:
    """A marginal law on ``[0, inf)`` given by its CDF and right-continuous inverse.

    ``cdf`` and ``inverse_cdf`` are vectorised (they accept and return numpy
    arrays as well as scalars).  ``params`` is the ``{kind, ...}`` mapping used
    in run configs and is enough to rebuild the law with :func:`from_spec`.
    """

    name: str
    cdf: Callable = field(repr=False, compare=False)
    inverse_cdf_fn: Callable = field(repr=False, compare=False)
    support_infimum: float
    atom_at_zero: float
    exp_moment_alpha: float | None = None
    has_two_log_moment: bool = True
    atoms: tuple[tuple[float, float], ...] | None = None
    params: dict = field(default_factory=dict, compare=True, hash=False)

    def inverse_cdf(self, u):
        return inverse_cdf(self, u)

    @property
    def is_atomic(self) -> bool:
        return self.atoms is not None

    def spec(self) -> dict:
        return dict(self.params)


def inverse_cdf(dist: WeightDistribution, u):
    """``inf{x : F(x) >= u}`` for ``u`` in ``[0, 1)``.

    ``u = 0`` maps to the support infimum (the literal infimum would be
    ``-inf`` because ``F`` vanishes on the negative axis).
    """
    arr = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ValueError("inverse_cdf is defined for u in [0, 1)")
    out = np.asarray(dist.inverse_cdf_fn(arr), dtype=float)
    if out.ndim == 0:
        return float(out)
    return out


def encode_uniform(bits: Sequence[int], J: int) -> float:
    """Dyadic value ``sum_{j<=J} bits_j 2^-j`` of the first ``J`` bits."""
    if J < 1:
        raise ValueError("bit depth must be positive")
    if len(bits) < J:
        raise ValueError(f"need at least {J} bits, got {len(bits)}")
    word = 0
    for b in bits[:J]:
        word = (word << 1) | (1 if b else 0)
    return word / float(1 << J)


def word_to_uniform(words, J: int):
    """Vectorised :func:`encode_uniform` for bit strings packed MSB-first into integers."""
    return np.asarray(words, dtype=np.uint64).astype(float) / float(1 << J)


def word_bits(word: int, J: int) -> tuple[int, ...]:
    return tuple((int(word) >> (J - 1 - j)) & 1 for j in range(J))


def bits_word(bits: Sequence[int]) -> int:
    word = 0
    for b in bits:
        word = (word << 1) | (1 if b else 0)
    return word


@dataclass(frozen=True)
class BernoulliEncoding:
    """Fair-bit record behind one or more sampled weights.

    ``words[k]`` packs the ``J`` bits of edge ``k`` with bit 1 as the most
    significant, so ``words[k] / 2**J`` is the encoded uniform.
    """

    bit_depth: int
    words: np.ndarray

    def bits(self, k: int = 0) -> tuple[int, ...]:
        return word_bits(int(self.words[k]), self.bit_depth)

    def uniforms(self) -> np.ndarray:
        return word_to_uniform(self.words, self.bit_depth)


def draw_words(rng: np.random.Generator, size: int, J: int = DEFAULT_BIT_DEPTH) -> np.ndarray:
    """Draw ``size`` independent ``J``-bit words (``J`` fair bits each)."""
    if not 1 <= J <= MAX_BIT_DEPTH:
        raise ValueError(f"bit depth must be in [1, {MAX_BIT_DEPTH}]")
    return rng.integers(0, 1 << J, size=size, dtype=np.uint64)


def sample_weight(dist: WeightDistribution, rng: np.random.Generator, J: int = DEFAULT_BIT_DEPTH):
    """Draw one weight and the encoding that produced it."""
    words = draw_words(rng, 1, J)
    enc = BernoulliEncoding(J, words)
    return float(dist.inverse_cdf(enc.uniforms()[0])), enc


def sample_weights(dist: WeightDistribution, rng: np.random.Generator, size: int,
                   J: int = DEFAULT_BIT_DEPTH):
    """Vectorised :func:`sample_weight`: returns ``(weights, BernoulliEncoding)``."""
    words = draw_words(rng, size, J)
    enc = BernoulliEncoding(J, words)
    return np.asarray(dist.inverse_cdf(enc.uniforms()), dtype=float).reshape(size), enc


def animal_weight(dist: WeightDistribution, t):
    """``1 - log F(t)`` (natural log); at least 1 wherever it is finite."""
    F = np.asarray(dist.cdf(np.asarray(t, dtype=float)), dtype=float)
    if np.any(F <= 0.0):
        raise InfiniteWeightError("F(t) = 0: animal weight is infinite")
    w = 1.0 - np.log(F)
    if w.ndim == 0:
        return float(w)
    return w


# Rigorous lower bounds p_c(d) >= 1/(2d - 1) (self-avoiding walk counting), except
# the exact planar value.
_PC_LOWER = {2: 0.5, 3: 1 / 5, 4: 1 / 7, 5: 1 / 9, 6: 1 / 11}


def critical_probability(d: int) -> float:
    if d < 2:
        raise UnsupportedDimensionError("dimension must be at least 2")
    try:
        return _PC_LOWER[d]
    except KeyError:
        raise UnsupportedDimensionError(f"no bundled p_c bound for d={d}") from None


def validate_subcritical(dist: WeightDistribution, d: int) -> bool:
    return dist.atom_at_zero < critical_probability(d)


# --------------------------------------------------------------------------
# bundled laws


def uniform() -> WeightDistribution:
    return WeightDistribution(
        name="uniform",
        cdf=lambda t: np.clip(np.asarray(t, dtype=float), 0.0, 1.0),
        inverse_cdf_fn=lambda u: np.asarray(u, dtype=float),
        support_infimum=0.0,
        atom_at_zero=0.0,
        exp_moment_alpha=math.inf,
        params={"kind": "uniform"},
    )


def exponential(rate: float = 1.0) -> WeightDistribution:
    if rate <= 0:
        raise ValueError("rate must be positive")

    def cdf(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, 0.0, -np.expm1(-rate * np.maximum(t, 0.0)))

    return WeightDistribution(
        name="exponential",
        cdf=cdf,
        inverse_cdf_fn=lambda u: -np.log1p(-np.asarray(u, dtype=float)) / rate,
        support_infimum=0.0,
        atom_at_zero=0.0,
        exp_moment_alpha=rate / 4,  # E exp(2 alpha t) < inf needs alpha < rate / 2
        params={"kind": "exponential", "rate": float(rate)},
    )


def _discrete(name: str, atoms: Sequence[tuple[float, float]], params: dict) -> WeightDistribution:
    values = np.array([a for a, _ in atoms], dtype=float)
    probs = np.array([p for _, p in atoms], dtype=float)
    if np.any(np.diff(values) <= 0) or values[0] < 0:
        raise ValueError("atoms must be non-negative and strictly increasing")
    if np.any(probs <= 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-12):
        raise ValueError("atom probabilities must be positive and sum to 1")
    cum = np.cumsum(probs)
    cum[-1] = 1.0

    def cdf(t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(values, t, side="right")
        return np.where(idx == 0, 0.0, cum[np.maximum(idx - 1, 0)])

    def inv(u):
        u = np.asarray(u, dtype=float)
        return values[np.minimum(np.searchsorted(cum, u, side="left"), len(values) - 1)]

    return WeightDistribution(
        name=name,
        cdf=cdf,
        inverse_cdf_fn=inv,
        support_infimum=float(values[0]),
        atom_at_zero=float(probs[0]) if values[0] == 0 else 0.0,
        exp_moment_alpha=math.inf,
        atoms=tuple((float(v), float(p)) for v, p in zip(values, probs)),
        params=params,
    )


def two_point(a: float, b: float, p: float = 0.5) -> WeightDistribution:
    """Mass ``p`` at ``a`` and ``1 - p`` at ``b > a``."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    return _discrete("two_point", [(a, p), (b, 1 - p)],
                     {"kind": "two_point", "a": float(a), "b": float(b), "p": float(p)})


def bernoulli(p_zero: float) -> WeightDistribution:
    """Weights in ``{0, 1}`` with mass ``p_zero`` at 0."""
    return _discrete("bernoulli", [(0.0, p_zero), (1.0, 1 - p_zero)],
                     {"kind": "bernoulli", "p_zero": float(p_zero)})


def point_mass(c: float = 1.0) -> WeightDistribution:
    return _discrete("point_mass", [(c, 1.0)], {"kind": "point_mass", "c": float(c)})


def piecewise_linear(ts: Sequence[float], Fs: Sequence[float], name: str = "piecewise") -> WeightDistribution:
    """CDF interpolating the table ``(t_i, F(t_i))``; an initial ``F(t_0) > 0`` is an atom at ``t_0``."""
    t = np.asarray(ts, dtype=float)
    F = np.asarray(Fs, dtype=float)
    if t.ndim != 1 or t.shape != F.shape or len(t) < 2:
        raise ValueError("need matching 1-d tables with at least two rows")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t column must be strictly increasing")
    if t[0] < 0 or np.any(np.diff(F) < 0) or F[0] < 0 or not math.isclose(F[-1], 1.0):
        raise ValueError("F column must be non-decreasing from >= 0 up to 1")
    F = F.copy()
    F[-1] = 1.0

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < t[0], 0.0, np.interp(x, t, F))

    def inv(u):
        u = np.asarray(u, dtype=float)
        i = np.clip(np.searchsorted(F, u, side="left"), 1, len(t) - 1)
        lo_F, hi_F = F[i - 1], F[i]
        span = np.where(hi_F > lo_F, hi_F - lo_F, 1.0)
        x = t[i - 1] + (u - lo_F) / span * (t[i] - t[i - 1])
        return np.where(u <= F[0], t[0], x)

    return WeightDistribution(
        name=name,
        cdf=cdf,
        inverse_cdf_fn=inv,
        support_infimum=float(t[max(int(np.argmax(F > 0)) - 1, 0)]),
        atom_at_zero=float(F[0]) if t[0] == 0 else 0.0,
        exp_moment_alpha=math.inf,
        params={"kind": "piecewise", "t": [float(v) for v in t], "F": [float(v) for v in F]},
    )


def read_cdf_table(path) -> tuple[list[float], list[float]]:
    """Read a two-column ``t,F`` CSV (an optional non-numeric header row is skipped)."""
    ts, Fs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                t, F = float(row[0]), float(row[1])
            except ValueError:
                if not ts:
                    continue
                raise
            ts.append(t)
            Fs.append(F)
    return ts, Fs


_FACTORIES = {
    "uniform": lambda p: uniform(),
    "exponential": lambda p: exponential(p.get("rate", 1.0)),
    "two_point": lambda p: two_point(p["a"], p["b"], p.get("p", 0.5)),
    "bernoulli": lambda p: bernoulli(p["p_zero"]),
    "point_mass": lambda p: point_mass(p.get("c", 1.0)),
}


def from_spec(spec) -> WeightDistribution:
    """Build a law from ``"uniform"`` or a ``{kind, ...params}`` mapping.

    The ``piecewise`` kind takes either ``t``/``F`` lists or a ``csv`` path.
    """
    if isinstance(spec, WeightDistribution):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "piecewise":
        if "csv" in spec:
            ts, Fs = read_cdf_table(spec["csv"])
        else:
            ts, Fs = spec["t"], spec["F"]
        return piecewise_linear(ts, Fs)
    if kind not in _FACTORIES:
        raise ValueError(f"unknown distribution kind {kind!r}")
    allowed = {
        "uniform": set(), "exponential": {"rate"}, "two_point": {"a", "b", "p"},
        "bernoulli": {"p_zero"}, "point_mass": {"c"},
    }[kind]
    extra = set(spec) - allowed
    if extra:
        raise ValueError(f"unknown parameters for {kind}: {sorted(extra)}")
    return _FACTORIES[kind](spec)
