"""``fpp-lab`` command line: campaigns, tail profiles, exact checks and persisted outputs.

Exit codes: 0 success, 1 a check failed, 2 usage or config error, 3 runtime or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import animals as an
from . import entropy as en
from . import estimators as est
from . import verify
from .config import ConfigError, ResolvedConfig, parse_config
from .geodesics import geodesic_report, sample_config, write_snapshot
from .lattice import LatticeWindow, window_for

FORMAT_VERSION = 1
OUTDIR_ENV = "FPP_LAB_OUTDIR"
DEFAULT_OUTDIR = "fpp_runs"

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


# --------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _dist_label(dist_spec) -> str:
    spec = dist_spec if isinstance(dist_spec, dict) else {"kind": dist_spec}
    return re.sub(r"[^A-Za-z0-9_.-]", "", str(spec.get("kind", "dist")))


def output_dir(root, subcommand: str, norm: int | None = None, dist=None, seed: int | None = None) -> Path:
    """``<root>/<subcommand>[_n<|x|>][_<dist>][_s<seed>]``; an existing name gets ``_v2``, ``_v3``, ..."""
    parts = [subcommand]
    if norm is not None:
        parts.append(f"n{norm}")
    if dist is not None:
        parts.append(_dist_label(dist))
    if seed is not None:
        parts.append(f"s{seed}")
    base = Path(root) / "_".join(parts)
    path, k = base, 1
    while path.exists():
        k += 1
        path = base.with_name(f"{base.name}_v{k}")
    path.mkdir(parents=True)
    return path


def _header(echo: dict) -> str:
    return (f"# format_version: {FORMAT_VERSION}\n"
            f"# config: {json.dumps(echo, sort_keys=True)}\n")


def replicas_csv(record: est.RunRecord) -> str:
    buf = io.StringIO()
    buf.write(_header(record.config.echo()))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(est.REPLICA_COLUMNS)
    for r in record.rows:
        if r["censored"]:
            w.writerow([r["replica"], "", "", "", "", "", 1, ""])
        else:
            w.writerow([_fmt(r["replica"]), _fmt(r["T"]), _fmt(r["F_m"]), _fmt(r["G"]), _fmt(r["Y_x"]),
                        _fmt(r["Ylog"]), 0, _fmt(r["Z"])])
    return buf.getvalue()


def tails_csv(profile, echo: dict) -> str:
    buf = io.StringIO()
    buf.write(_header(echo))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "p_hat", "ci_lo", "ci_hi"])
    for p in profile:
        w.writerow([_fmt(p.lam), _fmt(p.p_hat), _fmt(p.ci_lo), _fmt(p.ci_hi)])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _json(path: Path, data) -> Path:
    return _write(path, json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, tuple):
        return list(v)
    return str(v)


def read_replicas_csv(path) -> tuple[dict, list[dict]]:
    """Config echo and rows of a ``replicas.csv``."""
    echo = {}
    body = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# config: "):
                echo = json.loads(line[len("# config: "):])
            elif not line.startswith("#"):
                body.append(line)
    rows = []
    for r in csv.DictReader(body):
        censored = r["censored"] == "1"
        row = {"replica": int(r["replica"]), "censored": censored}
        if not censored:
            row.update({k: float(r[k]) for k in ("T", "F_m", "Ylog", "Z")})
            row.update({k: int(r[k]) for k in ("G", "Y_x")})
        rows.append(row)
    return echo, rows


def emit_campaign(record: est.RunRecord, outdir: Path) -> list[Path]:
    echo = record.config.echo()
    files = [_json(outdir / "run.json", record.to_json()),
             _write(outdir / "replicas.csv", replicas_csv(record))]
    if record.tails:
        files.append(_write(outdir / "tails.csv", tails_csv(record.tails["both"], echo)))
        files.append(_write(outdir / "tails_upper.csv", tails_csv(record.tails["upper"], echo)))
        files.append(_write(outdir / "tails_lower.csv", tails_csv(record.tails["lower"], echo)))
    return files


# --------------------------------------------------------------------------
# subcommands


def _resolve(args, require_run=True) -> ResolvedConfig:
    dist = args.dist
    if dist is not None:
        try:
            parsed = yaml.safe_load(dist)
        except yaml.YAMLError as exc:
            raise ConfigError(f"--dist: {exc}") from exc
        dist = parsed if isinstance(parsed, dict) else str(dist)
    x = None
    if args.x is not None:
        try:
            x = [int(v) for v in args.x.split(",")]
        except ValueError as exc:
            raise ConfigError("--x expects comma-separated integers") from exc
    overrides = {"master_seed": args.seed, "replicas": args.replicas, "x": x, "dist": dist}
    return parse_config(args.config, overrides, require_run=require_run)


def _outroot(args) -> Path:
    return Path(args.outdir or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR)


def cmd_sample(args) -> int:
    run = _resolve(args).run
    dist = run.distribution()
    config = sample_config(dist, window_for(run.x, run.m, run.margin), est.replica_rng(run.master_seed, 0),
                           run.J, seed={"master_seed": run.master_seed, "replica": 0})
    rep = geodesic_report(config, (0,) * run.d, run.x)
    out = output_dir(_outroot(args), "sample", run.norm, run.dist, run.master_seed)
    write_snapshot(config, out / "config.bin")
    _json(out / "sample.json", {
        "format_version": FORMAT_VERSION, "config": run.echo(), "T": rep.T, "G": rep.G, "G_exact": rep.G_exact,
        "path": list(rep.path), "geo_set": sorted(rep.geo_set), "boundary_touched": rep.boundary_touched,
        "F_m": est.averaged_passage_time(config, run.x, run.zeta), "window": config.window.to_dict()})
    print(f"T={rep.T!r} G={rep.G} |Geo|={len(rep.geo_set)} -> {out}")
    return EXIT_OK


def cmd_campaign(args) -> int:
    run = _resolve(args).run
    record = est.run_campaign(run, workers=args.workers)
    out = output_dir(_outroot(args), "campaign", run.norm, run.dist, run.master_seed)
    emit_campaign(record, out)
    s = record.summary["T"]
    print(f"{record.n_used} replicas ({record.censored} censored): mean T={s['mean']:.6g} "
          f"var T={s['variance']:.6g} -> {out}")
    return EXIT_OK


def cmd_tails(args) -> int:
    if args.from_csv:
        echo, rows = read_replicas_csv(args.from_csv)
        run = parse_config(None, echo).run
        grid = run.lambda_grid if args.lambdas is None else tuple(float(v) for v in args.lambdas.split(","))
        record = est.RunRecord(run, rows)
    else:
        run = _resolve(args).run
        grid = run.lambda_grid if args.lambdas is None else tuple(float(v) for v in args.lambdas.split(","))
        record = est.run_campaign(run, workers=args.workers)
    out = output_dir(_outroot(args), "tails", run.norm, run.dist, run.master_seed)
    fits = {}
    for tail, name in (("both", "tails.csv"), ("upper", "tails_upper.csv"), ("lower", "tails_lower.csv")):
        prof = est.tail_profile(record, grid, tail=tail)
        _write(out / name, tails_csv(prof, run.echo()))
        try:
            fit = est.fit_exponential_rate(prof, record.n_used)
            fits[tail] = {**asdict(fit), "log_convexity_violations": est.log_convexity_violations(prof, record.n_used)}
        except est.InsufficientDataError as exc:
            fits[tail] = {"error": str(exc)}
    _json(out / "fits.json", {"format_version": FORMAT_VERSION, "config": run.echo(), "fits": fits})
    for tail, f in fits.items():
        print(f"{tail}: " + (f["error"] if "error" in f else f"c1={f['c1']:.4g} c2={f['c2']:.4g} R2={f['r2']:.4f}"))
    print(f"-> {out}")
    return EXIT_OK


def cmd_variance_scaling(args) -> int:
    resolved = _resolve(args)
    run = resolved.run
    sizes = resolved.options.get("sizes") or [8, 16, 32, 64]
    records: dict = {}
    points = est.variance_scaling(run, sizes, workers=args.workers, records=records)
    out = output_dir(_outroot(args), "variance-scaling", None, run.dist, run.master_seed)
    buf = io.StringIO()
    buf.write(_header(resolved.echo()))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "variance", "ratio", "ratio_se", "reliable"])
    for p in points:
        w.writerow([p.n, _fmt(p.variance), _fmt(p.ratio), _fmt(p.ratio_se), int(p.reliable)])
        print(f"n={p.n}: var={p.variance:.5g} ratio={p.ratio:.5g} +- {p.ratio_se:.2g}")
    _write(out / "variance.csv", buf.getvalue())
    _json(out / "run.json", {"format_version": FORMAT_VERSION, "config": resolved.echo(),
                             "campaigns": {str(n): r.to_json() for n, r in records.items()}})
    print(f"-> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    resolved = _resolve(args, require_run=False)
    if args.checks is not None:
        selection = [c for c in args.checks.split(",") if c]
    else:
        selection = resolved.options.get("checks")
    seed = args.suite_seed if args.suite_seed is not None else resolved.options.get("suite_seed", 0)
    counts = {}
    for item in args.count or []:
        name, _, n = item.partition("=")
        counts[name] = int(n)
    try:
        report = verify.run_suite(selection, seed=seed, counts=counts, inject_failure=args.inject_failure)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    out = output_dir(_outroot(args), "verify-lemmas", None, None, seed)
    _json(out / "verify.json", report.to_json())
    for w in report.warnings:
        print(f"warning: {w}")
    for name, outcomes in report.results.items():
        bad = sum(not o.holds for o in outcomes)
        print(f"{'PASS' if not bad else 'FAIL'} {name}: {len(outcomes) - bad}/{len(outcomes)}")
    for f in report.failures[:20]:
        print(f"  failed {f.name}: {json.dumps(f.descriptor, default=_jsonable)}")
    print(f"{report.n_checks} checks, {len(report.failures)} failures -> {out}")
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_animals(args) -> int:
    resolved = _resolve(args)
    run, opt = resolved.run, resolved.options
    n_range = opt.get("n_range") or list(range(1, 7))
    betas = opt.get("beta_grid") or [0.0, 0.1]
    reps = opt.get("animal_replicas") or run.replicas
    rows = an.animal_growth_stats(run.distribution(), run.d, n_range, reps, betas, run.master_seed,
                                  method=opt.get("animal_method", "auto"), J=run.J)
    out = output_dir(_outroot(args), "animals", None, run.dist, run.master_seed)
    buf = io.StringIO()
    buf.write(_header(resolved.echo()))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "beta", "mean_ratio", "log_mgf_over_n", "stderr", "exact_or_greedy"])
    for r in rows:
        w.writerow([r.n, _fmt(r.beta), _fmt(r.mean_ratio), _fmt(r.log_mgf_over_n), _fmt(r.stderr), r.exact_or_greedy])
    _write(out / "animals.csv", buf.getvalue())
    print(f"{len(rows)} rows -> {out}")
    return EXIT_OK


def geodesic_weight_sweep(seed: int, count: int = 20, lambdas=(Fraction(-1, 4), Fraction(1, 4))) -> list[dict]:
    """Exact ratio of the two sides on random two-point mini windows."""
    rng = np.random.default_rng(seed)
    window = LatticeWindow((0, 0), (2, 1))
    fpp = en.MiniFPP.on_window(window, (2, 1))
    out = []
    for i in range(count):
        sups = []
        for _ in range(window.n_edges):
            a, b = sorted(rng.choice(np.arange(1, 6), size=2, replace=False))
            p = Fraction(int(rng.integers(1, 4)), 4)
            sups.append([(Fraction(int(a), 2), p), (Fraction(int(b), 2), 1 - p)])
        system = en.DiscreteSystem.from_supports(sups)
        for lam in lambdas:
            rep = en.geodesic_weight_bound_check(system, fpp, lam)
            out.append({"instance": i, "lam": float(lam), "lhs": float(rep.lhs), "rhs": float(rep.rhs),
                        "ratio": float(rep.extra["ratio"])})
    return out


def cmd_entropy(args) -> int:
    resolved = _resolve(args, require_run=False)
    seed = args.suite_seed if args.suite_seed is not None else resolved.options.get("suite_seed", 0)
    sweep = geodesic_weight_sweep(seed)
    result = {"format_version": FORMAT_VERSION, "config": resolved.echo(), "geodesic_weight_ratios": sweep,
              "max_ratio": max(r["ratio"] for r in sweep)}
    run = resolved.run
    if run is not None:
        record = est.run_campaign(run, workers=args.workers)
        lams = resolved.options.get("entropy_lambdas") or [-0.25, 0.0, 0.25]
        estimates = []
        for lam in lams:
            try:
                estimates.append(asdict(est.mgf_entropy_estimate(record, float(lam))))
            except est.EntropyRangeError as exc:
                estimates.append({"lam": lam, "error": str(exc)})
        result["mgf_entropy"] = estimates
    out = output_dir(_outroot(args), "entropy-checks", run.norm if run else None, run.dist if run else None, seed)
    _json(out / "entropy.json", result)
    print(f"max geodesic-weight ratio {result['max_ratio']:.4g} over {len(sweep)} systems -> {out}")
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "campaign": cmd_campaign,
    "tails": cmd_tails,
    "variance-scaling": cmd_variance_scaling,
    "verify-lemmas": cmd_verify,
    "animals": cmd_animals,
    "entropy-checks": cmd_entropy,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpp-lab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML config file")
    common.add_argument("--outdir", help=f"output root (default ${OUTDIR_ENV} or ./{DEFAULT_OUTDIR})")
    common.add_argument("--seed", type=int, help="master seed (overrides the file)")
    common.add_argument("--replicas", type=int)
    common.add_argument("--x", help="displacement, e.g. 16,0")
    common.add_argument("--dist", help="kind name or inline mapping, e.g. '{kind: exponential, rate: 2}'")
    common.add_argument("--workers", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "tails":
            sp.add_argument("--from-csv", help="existing replicas.csv instead of a new campaign")
            sp.add_argument("--lambdas", help="comma-separated grid")
        if name in ("verify-lemmas", "entropy-checks"):
            sp.add_argument("--suite-seed", type=int)
        if name == "verify-lemmas":
            sp.add_argument("--checks", help=f"comma-separated subset of: {', '.join(verify.CHECKS)}")
            sp.add_argument("--count", action="append", metavar="NAME=N", help="instances for one check")
            sp.add_argument("--inject-failure", metavar="NAME", help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (est.CampaignError, est.InsufficientDataError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
