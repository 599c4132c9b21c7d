"""Seeded Monte Carlo campaigns for T(0,x), the ball average F_m and related statistics.

Each replica ``i`` draws its weights from ``SeedSequence(master_seed, spawn_key=(i,))``
so the record is a pure function of the :class:`RunConfig`, whatever the
number of worker processes.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import distributions as dists
from .geodesics import (
    EdgeConfig,
    _longest_tight_path,
    _path_edges,
    _touches_boundary,
    distance_field,
    extend_config,
    geodesic_log_weight,
    kesten_value,
    sample_config,
    tight_graph,
)
from .lattice import ball, l1, window_for

FORMAT_VERSION = 1
REPLICA_COLUMNS = ("replica", "T", "F_m", "G", "Y_x", "Ylog", "censored", "Z")
DEFAULT_LAMBDA_GRID = tuple(np.arange(0.5, 4.01, 0.5).round(10).tolist())


class CampaignError(RuntimeError):
    pass


class InsufficientDataError(ValueError):
    pass


class EntropyRangeError(OverflowError):
    pass


def averaging_radius(norm: int, zeta: float) -> int:
    """``floor(norm ** zeta)``, robust to the float landing just below an integer."""
    m = int(math.floor(norm ** zeta))
    while (m + 1) ** (1.0 / zeta) <= norm * (1 + 1e-12):
        m += 1
    return m


@dataclass(frozen=True)
class RunConfig:
    dist: dict
    d: int
    x: tuple[int, ...]
    zeta: float | None = None
    replicas: int = 100
    master_seed: int = 0
    margin_min: int = 8
    margin_frac: float = 0.5
    max_doublings: int = 3
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    J: int = dists.DEFAULT_BIT_DEPTH
    kesten_a: float = 0.1
    z_threshold: float | None = None
    censor_limit: float = 0.01
    allow_supercritical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(c) for c in self.x))
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        if isinstance(self.dist, str):
            object.__setattr__(self, "dist", {"kind": self.dist})
        if self.zeta is None:
            object.__setattr__(self, "zeta", 1.0 / (4 * self.d))
        if self.d < 2 or len(self.x) != self.d:
            raise ValueError("x must have d >= 2 coordinates")
        if not 0 < self.zeta <= 0.25:
            raise ValueError("zeta must lie in (0, 1/4]")
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if l1(self.x) < 1:
            raise ValueError("x must be non-zero")
        if self.margin_min < 0 or self.margin_frac < 0 or self.max_doublings < 0:
            raise ValueError("margin policy values must be non-negative")
        if not 1 <= self.J <= dists.MAX_BIT_DEPTH:
            raise ValueError(f"J must be in [1, {dists.MAX_BIT_DEPTH}]")
        if self.kesten_a <= 0:
            raise ValueError("kesten_a must be positive")

    @property
    def norm(self) -> int:
        return l1(self.x)

    @property
    def m(self) -> int:
        return averaging_radius(self.norm, self.zeta)

    @property
    def margin(self) -> int:
        return max(self.margin_min, math.ceil(self.margin_frac * self.norm))

    def distribution(self) -> dists.WeightDistribution:
        return dists.from_spec(self.dist)

    def echo(self) -> dict:
        out = asdict(self)
        out["x"] = list(self.x)
        out["lambda_grid"] = list(self.lambda_grid)
        return out


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(replica,))))


# --------------------------------------------------------------------------
# per-configuration quantities


@dataclass
class BallPassage:
    """Everything computed from one config for the ball average around ``0 -> x``."""

    m: int
    T: float
    F_m: float
    T_z: dict
    subadditive_bound: float
    touched: bool
    geo: frozenset
    path: list
    G: int
    G_exact: bool


def _ball_passage(config: EdgeConfig, x, m: int, with_geodesic: bool = True) -> BallPassage:
    win = config.window
    d = len(x)
    origin = (0,) * d
    zs = ball(d, m).vertices
    for z in zs:
        zx = tuple(a + b for a, b in zip(z, x))
        if not (win.contains(z) and win.contains(zx)):
            raise ValueError(f"window does not contain B_{m} and x + B_{m}")
    fields = {}

    def field_at(v):
        if v not in fields:
            fields[v] = distance_field(config, v)
        return fields[v].dist

    T_z = {}
    touched = False
    for z in zs:
        zx = tuple(a + b for a, b in zip(z, x))
        fz, fzx = field_at(z), field_at(zx)
        T_z[z] = float(fz[win.vertex_index(zx)])
        touched |= _touches_boundary(win, fz, fzx, T_z[z])
    F_m = float(np.mean([T_z[z] for z in zs]))
    f0, fx = field_at(origin), field_at(tuple(x))
    bound = float(np.mean([f0[win.vertex_index(z)] + fx[win.vertex_index(tuple(a + b for a, b in zip(z, x)))]
                           for z in zs]))
    T = T_z[origin]
    geo, path, G, G_exact = frozenset(), [], 0, True
    if with_geodesic:
        s, t = win.vertex_index(origin), win.vertex_index(tuple(x))
        path = _path_edges(win, fields[origin], t)
        tg = tight_graph(config, f0, fx, s, t)
        geo = frozenset(path) if tg.is_simple_path() else frozenset(e for e in path if not tg.reaches(e))
        G, G_exact = _longest_tight_path(tg, len(path))
    return BallPassage(m, T, F_m, T_z, bound, touched, geo, path, G, G_exact)


def averaged_passage_time(config: EdgeConfig, x, zeta: float) -> float:
    """``F_m``: the mean of ``T(z, z+x)`` over ``z`` in ``B_m``, ``m = floor(|x|_1^zeta)``."""
    m = averaging_radius(l1(x), zeta)
    return _ball_passage(config, tuple(x), m, with_geodesic=False).F_m


def _replica(run: RunConfig, i: int) -> dict:
    dist = run.distribution()
    rng = replica_rng(run.master_seed, i)
    margin = run.margin
    config = sample_config(dist, window_for(run.x, run.m, margin), rng, run.J,
                           seed={"master_seed": run.master_seed, "replica": i})
    prev = None
    for level in range(run.max_doublings + 1):
        bp = _ball_passage(config, run.x, run.m)
        stable = prev is not None and all(
            math.isclose(prev.T_z[z], bp.T_z[z], rel_tol=1e-12, abs_tol=0.0) for z in bp.T_z)
        if not bp.touched or stable:
            break
        if level == run.max_doublings:
            return {"replica": i, "censored": True, "level": level}
        prev = bp
        margin *= 2
        config = extend_config(config, window_for(run.x, run.m, margin), rng)
    Ylog = geodesic_log_weight(config, (0,) * run.d, run.x, geo=bp.geo)
    Z = float("nan")
    if run.z_threshold is not None:
        Z = Ylog if Ylog > run.z_threshold * bp.T else 0.0
    return {
        "replica": i,
        "censored": False,
        "level": level,
        "T": bp.T,
        "F_m": bp.F_m,
        "G": bp.G,
        "G_exact": bp.G_exact,
        "Y_x": kesten_value(bp.T, bp.G, run.kesten_a),
        "Ylog": Ylog,
        "Z": Z,
        "subadditive_bound": bp.subadditive_bound,
    }


def _replica_chunk(args) -> list[dict]:
    run, indices = args
    return [_replica(run, i) for i in indices]


@dataclass
class RunRecord:
    config: RunConfig
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    tails: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)

    @property
    def used(self) -> list[dict]:
        return [r for r in self.rows if not r["censored"]]

    @property
    def censored(self) -> int:
        return sum(1 for r in self.rows if r["censored"])

    @property
    def n_used(self) -> int:
        return len(self.rows) - self.censored

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.used], dtype=float)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.echo(),
            "replicas": len(self.rows),
            "n_used": self.n_used,
            "censored": self.censored,
            "m": self.config.m,
            "summary": self.summary,
            "fits": self.fits,
            "timestamps": self.timestamps,
        }


def jackknife_variance_se(samples) -> float:
    """Delete-one jackknife standard error of the unbiased sample variance."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 3:
        return float("nan")
    s1, s2 = x.sum(), (x * x).sum()
    loo_mean = (s1 - x) / (n - 1)
    loo_var = ((s2 - x * x) - (n - 1) * loo_mean ** 2) / (n - 2)
    return float(math.sqrt((n - 1) / n * np.sum((loo_var - loo_var.mean()) ** 2)))


def summarize(samples) -> dict:
    x = np.asarray(samples, dtype=float)
    n = len(x)
    var = float(np.var(x, ddof=1)) if n > 1 else 0.0
    return {
        "n": n,
        "mean": float(np.mean(x)) if n else float("nan"),
        "variance": max(var, 0.0),
        "se_mean": math.sqrt(var / n) if n > 1 else float("nan"),
        "se_variance": jackknife_variance_se(x),
    }


def run_campaign(run: RunConfig, workers: int = 1, chunk: int = 64) -> RunRecord:
    """Sample ``run.replicas`` independent configurations and collect per-replica statistics."""
    dist = run.distribution()
    if not dists.validate_subcritical(dist, run.d) and not run.allow_supercritical:
        raise CampaignError(f"{dist.name}: atom at zero {dist.atom_at_zero} is not below p_c({run.d})")
    started = time.time()
    chunks = [(run, list(range(s, min(s + chunk, run.replicas)))) for s in range(0, run.replicas, chunk)]
    if workers <= 1:
        parts = [_replica_chunk(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_replica_chunk, chunks))
    rows = sorted((r for part in parts for r in part), key=lambda r: r["replica"])
    record = RunRecord(run, rows)
    if record.n_used == 0:
        raise CampaignError("every replica was censored")
    if record.censored > run.censor_limit * run.replicas:
        raise CampaignError(f"{record.censored} of {run.replicas} replicas censored "
                            f"(limit {run.censor_limit:.0%})")
    record.summary = {name: summarize(record.column(name)) for name in ("T", "F_m", "G", "Y_x", "Ylog")}
    if record.n_used >= 100 and run.norm > 1:
        record.tails = {t: tail_profile(record, run.lambda_grid, tail=t) for t in ("both", "upper", "lower")}
        for t, prof in record.tails.items():
            try:
                record.fits[t] = asdict(fit_exponential_rate(prof, record.n_used))
            except InsufficientDataError as exc:
                record.fits[t] = {"error": str(exc)}
    record.timestamps = {"started": started, "finished": time.time()}
    return record


# --------------------------------------------------------------------------
# tails and rate fits


@dataclass(frozen=True)
class TailPoint:
    lam: float
    p_hat: float
    ci_lo: float
    ci_hi: float
    count: int
    n: int


def fluctuation_scale(norm: float) -> float:
    """``sqrt(|x|_1 / log |x|_1)``."""
    if norm <= 1:
        raise ValueError("need |x|_1 > 1")
    return math.sqrt(norm / math.log(norm))


def exceedance_profile(samples, scale: float, lambda_grid: Sequence[float], tail: str = "both",
                       center: float | None = None, confidence: float = 0.95) -> list[TailPoint]:
    x = np.asarray(samples, dtype=float)
    n = len(x)
    mu = float(np.mean(x)) if center is None else center
    dev = x - mu
    out = []
    for lam in lambda_grid:
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        thr = lam * scale
        if tail == "both":
            k = int(np.sum(np.abs(dev) >= thr))
        elif tail == "upper":
            k = int(np.sum(dev >= thr))
        elif tail == "lower":
            k = int(np.sum(dev <= -thr))
        else:
            raise ValueError(f"unknown tail {tail!r}")
        ci = stats.binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
        out.append(TailPoint(float(lam), k / n, float(ci.low), float(ci.high), k, n))
    return out


def tail_profile(record: RunRecord, lambda_grid: Sequence[float], tail: str = "both",
                 column: str = "T") -> list[TailPoint]:
    """Empirical ``P(|T - mean| >= lam * c_x)`` with Wilson intervals (centred at the sample mean)."""
    if record.n_used < 100:
        raise InsufficientDataError("tail profiles need at least 100 samples")
    return exceedance_profile(record.column(column), fluctuation_scale(record.config.norm), lambda_grid, tail)


@dataclass(frozen=True)
class ExpFit:
    c1: float
    c2: float
    r2: float
    points: int
    flagged: bool


R2_FLAG = 0.99


def fit_exponential_rate(profile: Sequence[TailPoint], replicas: int | None = None) -> ExpFit:
    """Least-squares line through ``(lam, log p)``; returns ``c1 = exp(intercept)``, ``c2 = -slope``."""
    n = replicas if replicas is not None else (profile[0].n if profile else 0)
    floor = 10.0 / n if n else 0.0
    pts = [(p.lam, p.p_hat) for p in profile if 0 < p.p_hat < 1 and p.p_hat > floor]
    if len(pts) < 4:
        raise InsufficientDataError(f"only {len(pts)} usable tail points (need 4)")
    lam, p = np.array(pts).T
    fit = stats.linregress(lam, np.log(p))
    r2 = float(fit.rvalue ** 2)
    return ExpFit(float(math.exp(fit.intercept)), float(-fit.slope), r2, len(pts), r2 < R2_FLAG)


def log_convexity_violations(profile: Sequence[TailPoint], replicas: int | None = None) -> list[float]:
    """Grid points where ``log p`` is concave beyond what the Wilson intervals allow."""
    n = replicas if replicas is not None else (profile[0].n if profile else 0)
    pts = [p for p in profile if 0 < p.p_hat < 1 and p.p_hat > (10.0 / n if n else 0.0)]
    bad = []
    for left, mid, right in zip(pts, pts[1:], pts[2:]):
        w = (right.lam - mid.lam) / (right.lam - left.lam)
        chord = w * math.log(left.ci_hi) + (1 - w) * math.log(right.ci_hi)
        if math.log(mid.ci_lo) > chord:
            bad.append(mid.lam)
    return bad


# --------------------------------------------------------------------------
# variance scaling and entropy of exp(lambda F_m)


@dataclass(frozen=True)
class VariancePoint:
    n: int
    variance: float
    ratio: float
    ratio_se: float
    reliable: bool


def variance_ratio(n: int, variance: float) -> float:
    return variance * math.log(n) / n


def variance_scaling(template: RunConfig, sizes: Sequence[int], workers: int = 1,
                     records: dict | None = None) -> list[VariancePoint]:
    """One campaign per ``n`` along the first axis; ``Var T * log n / n`` with jackknife errors."""
    sizes = list(sizes)
    if len(set(sizes)) < 2 or any(n <= 1 for n in sizes):
        raise ValueError("need at least two distinct sizes, each > 1")
    out = []
    for n in sizes:
        x = (n,) + (0,) * (template.d - 1)
        run = RunConfig(**{**template.echo(), "x": x})
        rec = run_campaign(run, workers=workers)
        if records is not None:
            records[n] = rec
        s = rec.summary["T"]
        se = s["se_variance"]
        reliable = rec.n_used >= 3 and math.isfinite(se)
        factor = math.log(n) / n
        out.append(VariancePoint(n, s["variance"], s["variance"] * factor,
                                 se * factor if reliable else float("nan"), reliable))
    return out


@dataclass(frozen=True)
class MgfEntropy:
    lam: float
    entropy: float
    bound: float
    entropy_ci: tuple[float, float]
    bound_ci: tuple[float, float]


def plugin_entropy_exp(samples, lam: float, weights=None) -> float:
    """Plug-in ``Ent e^{lam X}`` for an empirical (or weighted exact) law of ``X``."""
    x = np.asarray(samples, dtype=float)
    p = np.full(len(x), 1.0 / len(x)) if weights is None else np.asarray(weights, dtype=float)
    if lam == 0 or np.ptp(x) == 0:
        return 0.0  # constant variable: Ent is exactly zero
    y = lam * x
    shift = float(np.max(y))
    g = np.exp(y - shift)
    mean_g = float(np.dot(p, g))
    # Ent(c Y) = c Ent(Y): factor out e^{shift}
    ent = float(np.dot(p, g * (y - shift))) - mean_g * math.log(mean_g)
    return max(ent, 0.0) * math.exp(shift)


def mgf_entropy_estimate(record: RunRecord, lam: float, column: str = "F_m",
                         n_boot: int = 500, seed: int = 0) -> MgfEntropy:
    """Both sides of ``Ent e^{lam F_m} <= C lam^2 |x|_1 E e^{lam F_m}`` (the constant is not estimated)."""
    x = record.column(column)
    if abs(lam) * float(np.max(np.abs(x))) >= 50:
        raise EntropyRangeError("lambda * max sample exceeds the overflow guard (50)")
    norm = record.config.norm

    def both(sample):
        return plugin_entropy_exp(sample, lam), lam * lam * norm * float(np.mean(np.exp(lam * sample)))

    ent, bound = both(x)
    rng = np.random.default_rng(seed)
    boot = np.array([both(x[rng.integers(0, len(x), len(x))]) for _ in range(n_boot)])
    lo, hi = np.percentile(boot, [2.5, 97.5], axis=0)
    return MgfEntropy(lam, ent, bound, (float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])))


def log_mean_exp(values, beta: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(logsumexp(beta * v) - math.log(len(v)))
