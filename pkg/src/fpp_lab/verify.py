"""Self-checking suite: identities and inequalities evaluated exactly on random small inputs."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import distributions as dists
from . import entropy as en
from .geodesics import (
    EdgeConfig,
    critical_value,
    distance_field,
    geodesic_intersection,
    sample_config,
)
from .lattice import LatticeWindow

FORMAT_VERSION = 1
IDENTITY_TOL = 1e-9
LAMBDAS = (Fraction(-1), Fraction(-1, 2), Fraction(-1, 4), Fraction(1, 4), Fraction(1, 2), Fraction(1))


@dataclass
class CheckOutcome:
    name: str
    descriptor: dict
    holds: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"check_name": self.name, "holds": self.holds, "system_descriptor": self.descriptor, **self.detail}


def _from_report(rep: en.CheckReport) -> CheckOutcome:
    js = rep.to_json()
    return CheckOutcome(rep.check_name, js.pop("system_descriptor"), rep.holds,
                        {k: v for k, v in js.items() if k not in ("check_name", "holds")})


# --------------------------------------------------------------------------
# critical value identity on sampled windows


VERIFY_LAWS = {
    "uniform": dists.uniform(),
    "exponential": dists.exponential(1.0),
    "two_point": dists.two_point(1.0, 2.0, 0.5),
}


@dataclass(frozen=True)
class IdentityCase:
    law: str
    seed: int
    edge: int
    z: tuple[int, ...]
    x: tuple[int, ...]
    s: float
    t: float


def critical_value_case(config: EdgeConfig, e: int, z, x, s: float, t: float) -> dict:
    """``T(t) - T(s)`` against ``min(t - s, (D - s)_+)`` and Geo membership of ``e`` when ``s < D``."""
    target = tuple(a + b for a, b in zip(z, x))
    D = critical_value(config, e, z, x)
    v = config.window.vertex_index(target)
    Tt = float(distance_field(config, z, (e, t)).dist[v])
    Ts = float(distance_field(config, z, (e, s)).dist[v])
    lhs = Tt - Ts
    rhs = min(t - s, max(D - s, 0.0))
    ok_identity = abs(lhs - rhs) <= IDENTITY_TOL * max(1.0, abs(Tt))
    in_geo = None
    if s < D:
        in_geo = e in geodesic_intersection(config, z, target, overlay=(e, s))
    return {"D": D, "lhs": lhs, "rhs": rhs, "identity": ok_identity, "in_geo": in_geo,
            "holds": ok_identity and in_geo is not False}


def random_identity_case(rng: np.random.Generator, window: LatticeWindow) -> tuple[EdgeConfig, IdentityCase]:
    law = list(VERIFY_LAWS)[int(rng.integers(len(VERIFY_LAWS)))]
    seed = int(rng.integers(2 ** 63))
    config = sample_config(VERIFY_LAWS[law], window, np.random.default_rng(seed), seed={"seed": seed})
    while True:
        z = window.vertex(int(rng.integers(window.n_vertices)))
        target = window.vertex(int(rng.integers(window.n_vertices)))
        if z != target:
            break
    x = tuple(b - a for a, b in zip(z, target))
    e = int(rng.integers(window.n_edges))
    scale = 2.5 if law != "exponential" else 4.0
    s, t = sorted(float(v) for v in rng.uniform(0, scale, size=2))
    return config, IdentityCase(law, seed, e, z, x, s, t)


def check_critical_identity(rng: np.random.Generator, count: int) -> list[CheckOutcome]:
    window = LatticeWindow((-1, -1), (3, 2))
    out = []
    for _ in range(count):
        config, c = random_identity_case(rng, window)
        r = critical_value_case(config, c.edge, c.z, c.x, c.s, c.t)
        desc = {"law": c.law, "seed": c.seed, "window": window.to_dict(), "edge": c.edge,
                "z": list(c.z), "x": list(c.x), "s": c.s, "t": c.t}
        out.append(CheckOutcome("critical_value_identity", desc, r["holds"],
                                {k: r[k] for k in ("D", "lhs", "rhs", "in_geo")}))
    return out


# --------------------------------------------------------------------------
# random exact systems


def random_system(rng: np.random.Generator, bits: bool | None = None) -> en.DiscreteSystem:
    if bits is None:
        bits = bool(rng.integers(2))
    if not bits:
        return en.random_supports_system(rng)
    law = list(VERIFY_LAWS)[int(rng.integers(len(VERIFY_LAWS)))]
    n_edges = int(rng.integers(1, 4))
    J = int(rng.integers(1, 3)) if n_edges < 3 else 1
    return en.DiscreteSystem.from_bits(VERIFY_LAWS[law], n_edges, J, {"law": law})


def random_functional(rng: np.random.Generator, system: en.DiscreteSystem) -> tuple[Callable, dict]:
    """``e^{lam T}`` for a random path family, or the rational ``T + 1/2``."""
    paths = en.random_paths(rng, system.n_edges)
    fpp = en.MiniFPP.from_paths(paths)
    if rng.integers(3) == 0:
        return (lambda t: fpp.F(t) + Fraction(1, 2)), {"paths": [list(p) for p in paths], "functional": "T+1/2"}
    lam = LAMBDAS[int(rng.integers(len(LAMBDAS)))]
    return fpp.exp(lam), {"paths": [list(p) for p in paths], "functional": "exp", "lam": str(lam)}


def _system_checks(rng: np.random.Generator, count: int, run: Callable, bits: bool | None = None) -> list[CheckOutcome]:
    out = []
    for _ in range(count):
        system = random_system(rng, bits)
        fn, fdesc = random_functional(rng, system)
        for item in run(system, fn):
            item.descriptor = {**item.descriptor, **fdesc}
            out.append(item)
    return out


def check_tensorization(rng, count):
    return _system_checks(rng, count, lambda s, f: [_from_report(en.tensorization_check(s, f))])


def check_variational(rng, count):
    def run(system, fn):
        res = en.variational_entropy(system, fn)
        ent = en.system_entropy(system, fn)
        diff = abs(res.value - ent)
        ok = diff <= 1e-12 * max(1, abs(ent)) and abs(res.exp_moment - 1) <= 1e-12
        # random feasible candidates never beat the optimiser
        arr = system.evaluate(fn)
        worst = None
        for _ in range(5):
            y = rng.normal(size=system.shape).astype(object)
            with en.mpmath.workdps(en.DPS):
                _, ez = en.variational_pair(system, arr, y)
                y = y - en.mpmath.log(ez)  # now E e^Y = 1
                exy, _ = en.variational_pair(system, arr, y)
            gap = ent - exy
            worst = gap if worst is None else min(worst, gap)
            ok &= gap >= -en.REL_SLACK * max(1, abs(ent))
        return [CheckOutcome("variational", system.descriptor, bool(ok),
                             {"lhs": float(res.value), "rhs": float(ent), "diff": float(diff),
                              "min_dominance_gap": float(worst)})]
    return _system_checks(rng, count, run)


def check_falik_samorodnitsky(rng, count):
    return _system_checks(rng, count, lambda s, f: [_from_report(en.falik_samorodnitsky_check(s, f))])


def check_martingale(rng, count):
    return _system_checks(rng, count, lambda s, f: [_from_report(r) for r in en.martingale_checks(s, f)])


def check_bernoulli_derivatives(rng, count):
    return _system_checks(rng, count, lambda s, f: [_from_report(en.discrete_derivative_sum(s, f))], bits=True)


def check_symmetrized_lsi(rng, count):
    out = []
    for _ in range(count):
        system = random_system(rng)
        paths = en.random_paths(rng, system.n_edges)
        X = system.evaluate(en.MiniFPP.from_paths(paths).F)
        lam = LAMBDAS[int(rng.integers(len(LAMBDAS)))]
        rep = _from_report(en.symmetrized_lsi_check(system, X, lam))
        rep.descriptor = {**rep.descriptor, "paths": [list(p) for p in paths], "functional": "T"}
        out.append(rep)
    return out


def check_quadrature(rng, count):
    out = []
    for case in en.CASES:
        for _ in range(count):
            pair = en.random_step_pair(rng, case)
            q = en.uniformvar_quadrature(pair, case)
            desc = {"case": case, "a": str(pair.a), "tau": str(pair.tau),
                    "h": [[str(b), str(v)] for b, v in zip(pair.h.breaks, pair.h.values)],
                    "f": [[str(b), str(v)] for b, v in zip(pair.f.breaks, pair.f.values)]}
            out.append(CheckOutcome("quadrature", desc, q.holds, {"lhs": str(q.lhs), "bound": str(q.bound)}))
    return out


CHECKS: dict[str, tuple[Callable, int]] = {
    "critical_value_identity": (check_critical_identity, 2000),
    "tensorization": (check_tensorization, 100),
    "variational": (check_variational, 100),
    "falik_samorodnitsky": (check_falik_samorodnitsky, 100),
    "martingale": (check_martingale, 100),
    "bernoulli_derivatives": (check_bernoulli_derivatives, 100),
    "symmetrized_lsi": (check_symmetrized_lsi, 100),
    "quadrature": (check_quadrature, 500),
}


@dataclass
class SuiteReport:
    seed: int
    results: dict[str, list[CheckOutcome]]
    warnings: list[str] = field(default_factory=list)

    @property
    def n_checks(self) -> int:
        return sum(len(v) for v in self.results.values())

    @property
    def failures(self) -> list[CheckOutcome]:
        return [o for v in self.results.values() for o in v if not o.holds]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "seed": self.seed,
            "n_checks": self.n_checks,
            "n_failures": len(self.failures),
            "warnings": self.warnings,
            "checks": {name: {"count": len(v), "failures": sum(not o.holds for o in v)}
                       for name, v in self.results.items()},
            "failures": [o.to_json() for o in self.failures],
        }


def run_suite(selection=None, seed: int = 0, counts: dict | None = None,
              inject_failure: str | None = None) -> SuiteReport:
    """Run the named checks (all when ``selection`` is None); each gets its own seeded stream.

    ``inject_failure`` is a test hook: the first outcome of that check is
    flipped to a failure so harness behaviour can be exercised.
    """
    names = list(CHECKS) if selection is None else list(selection)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    report = SuiteReport(seed, {})
    if not names:
        report.warnings.append("0 checks selected")
        return report
    for i, name in enumerate(CHECKS):
        if name not in names:
            continue
        fn, default = CHECKS[name]
        n = (counts or {}).get(name, default)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))
        outcomes = fn(rng, n)
        if inject_failure == name and outcomes:
            outcomes[0].holds = False
            outcomes[0].detail["injected"] = True
        report.results[name] = outcomes
    return report


def replay_identity(desc: dict) -> dict:
    """Recompute one ``critical_value_identity`` outcome from its descriptor."""
    window = LatticeWindow.from_dict(desc["window"])
    config = sample_config(VERIFY_LAWS[desc["law"]], window, np.random.default_rng(desc["seed"]))
    return critical_value_case(config, desc["edge"], tuple(desc["z"]), tuple(desc["x"]), desc["s"], desc["t"])
