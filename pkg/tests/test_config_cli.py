import json

import pytest
import yaml

from fpp_lab import cli
from fpp_lab import verify
from fpp_lab.config import ConfigError, dump_config, parse_config


def write_cfg(tmp_path, data, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


MINIMAL = {"d": 2, "x": [16, 0], "dist": "uniform"}


def test_minimal_config_defaults(tmp_path):
    run = parse_config(write_cfg(tmp_path, MINIMAL)).run
    assert run.zeta == 0.125
    assert run.J == 32
    assert run.margin == 8
    assert run.m == 1


@pytest.mark.parametrize("bad", [{"zeta": 0.3}, {"replicas": 0}, {"dist": "cauchy"}, {"x": [0, 0]}])
def test_invalid_values_rejected(tmp_path, bad):
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, {**MINIMAL, **bad}))


def test_unknown_and_missing_keys(tmp_path):
    with pytest.raises(ConfigError, match="replicaz"):
        parse_config(write_cfg(tmp_path, {**MINIMAL, "replicaz": 4}))
    with pytest.raises(ConfigError, match="dist"):
        parse_config(write_cfg(tmp_path, {"d": 2, "x": [4, 0]}))
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.yaml")


def test_override_precedence(tmp_path):
    p = write_cfg(tmp_path, {**MINIMAL, "seed": 3})
    assert parse_config(p).run.master_seed == 3
    assert parse_config(p, {"master_seed": 7}).run.master_seed == 7
    assert parse_config(p, {"master_seed": None}).run.master_seed == 3


def test_roundtrip(tmp_path):
    resolved = parse_config(write_cfg(tmp_path, {**MINIMAL, "sizes": [8, 16], "replicas": 12}))
    again = parse_config(write_cfg(tmp_path, yaml.safe_load(dump_config(resolved)), "echo.yaml"))
    assert again.run == resolved.run
    assert again.options == resolved.options


def test_suite_only_config():
    resolved = parse_config(None, {"checks": ["quadrature"]}, require_run=False)
    assert resolved.run is None and resolved.options["checks"] == ["quadrature"]


def test_output_dir_collision(tmp_path):
    a = cli.output_dir(tmp_path, "campaign", 16, "uniform", 0)
    b = cli.output_dir(tmp_path, "campaign", 16, "uniform", 0)
    assert a.name == "campaign_n16_uniform_s0"
    assert b.name == "campaign_n16_uniform_s0_v2"
    assert a.exists() and b.exists()


def _only_dir(root):
    (d,) = [p for p in root.iterdir() if p.is_dir()]
    return d


def test_campaign_outputs_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, {**MINIMAL, "x": [6, 0], "replicas": 120, "seed": 5})
    for k in range(2):
        rc = cli.main(["campaign", "--config", str(cfg), "--outdir", str(tmp_path / f"o{k}"), "--workers", str(1 + k)])
        assert rc == cli.EXIT_OK
    d0, d1 = _only_dir(tmp_path / "o0"), _only_dir(tmp_path / "o1")
    assert d0.name == "campaign_n6_uniform_s5"
    assert {p.name for p in d0.iterdir()} == {"run.json", "replicas.csv", "tails.csv",
                                              "tails_upper.csv", "tails_lower.csv"}
    for name in ("replicas.csv", "tails.csv"):
        assert (d0 / name).read_bytes() == (d1 / name).read_bytes()
    run = json.loads((d0 / "run.json").read_text())
    assert run["format_version"] == 1 and run["config"]["master_seed"] == 5
    echo, rows = cli.read_replicas_csv(d0 / "replicas.csv")
    assert echo["x"] == [6, 0] and len(rows) == 120
    head = (d0 / "replicas.csv").read_text().splitlines()
    assert head[0] == "# format_version: 1"
    assert head[2] == "replica,T,F_m,G,Y_x,Ylog,censored,Z"


def test_tails_from_csv(tmp_path):
    cfg = write_cfg(tmp_path, {**MINIMAL, "x": [6, 0], "replicas": 120})
    assert cli.main(["campaign", "--config", str(cfg), "--outdir", str(tmp_path / "c")]) == 0
    csv_path = _only_dir(tmp_path / "c") / "replicas.csv"
    assert cli.main(["tails", "--from-csv", str(csv_path), "--outdir", str(tmp_path / "t"),
                     "--lambdas", "0,0.5,1"]) == 0
    d = _only_dir(tmp_path / "t")
    lines = (d / "tails.csv").read_text().splitlines()
    assert lines[2] == "lambda,p_hat,ci_lo,ci_hi"
    assert lines[3].split(",")[1] == "1.0"
    assert "both" in json.loads((d / "fits.json").read_text())["fits"]


def test_cli_overrides(tmp_path):
    rc = cli.main(["sample", "--dist", "{kind: exponential, rate: 2}", "--x", "4,0", "--seed", "9",
                   "--outdir", str(tmp_path), "--config", str(write_cfg(tmp_path, {"d": 2, "x": [2, 0],
                                                                                   "dist": "uniform"}))])
    assert rc == 0
    d = _only_dir(tmp_path)
    assert d.name == "sample_n4_exponential_s9"
    data = json.loads((d / "sample.json").read_text())
    assert data["config"]["dist"] == {"kind": "exponential", "rate": 2}
    assert (d / "config.bin").exists()


def test_exit_codes(tmp_path, capsys):
    bad = write_cfg(tmp_path, {**MINIMAL, "replicaz": 4})
    assert cli.main(["campaign", "--config", str(bad), "--outdir", str(tmp_path)]) == cli.EXIT_USAGE
    assert "replicaz" in capsys.readouterr().err
    supercritical = write_cfg(tmp_path, {**MINIMAL, "dist": {"kind": "bernoulli", "p_zero": 0.7}}, "s.yaml")
    assert cli.main(["campaign", "--config", str(supercritical), "--outdir", str(tmp_path)]) == cli.EXIT_RUNTIME
    assert cli.main(["verify-lemmas", "--checks", "nope", "--outdir", str(tmp_path)]) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-command"])
    assert exc.value.code == 2


def test_verify_small_suite_and_injection(tmp_path, capsys):
    args = ["verify-lemmas", "--outdir", str(tmp_path / "a"), "--checks", "quadrature,tensorization",
            "--count", "quadrature=20", "--count", "tensorization=10"]
    assert cli.main(args) == cli.EXIT_OK
    report = json.loads((_only_dir(tmp_path / "a") / "verify.json").read_text())
    # quadrature draws its count once per case
    assert report["n_checks"] == 3 * 20 + 10 and report["n_failures"] == 0
    args[2] = str(tmp_path / "b")
    assert cli.main(args + ["--inject-failure", "quadrature"]) == cli.EXIT_CHECK
    out = capsys.readouterr().out
    assert "FAIL quadrature" in out
    report = json.loads((_only_dir(tmp_path / "b") / "verify.json").read_text())
    assert report["n_failures"] == 1 and report["failures"][0]["check_name"] == "quadrature"


def test_verify_empty_selection(tmp_path, capsys):
    assert cli.main(["verify-lemmas", "--checks", "", "--outdir", str(tmp_path)]) == cli.EXIT_OK
    assert "0 checks" in capsys.readouterr().out
    assert verify.run_suite([]).warnings == ["0 checks selected"]


def test_verify_default_suite_small_counts():
    counts = {name: 5 for name in verify.CHECKS}
    report = verify.run_suite(seed=1, counts=counts)
    # quadrature runs three cases and martingale emits three identities per system
    assert report.passed and report.n_checks == 5 * (len(verify.CHECKS) + 4)


def test_identity_replay():
    report = verify.run_suite(["critical_value_identity"], seed=2, counts={"critical_value_identity": 3})
    for o in report.results["critical_value_identity"]:
        again = verify.replay_identity(o.descriptor)
        assert again["holds"] == o.holds


def test_animals_and_entropy_commands(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path))
    cfg = write_cfg(tmp_path, {**MINIMAL, "x": [4, 0], "replicas": 3, "n_range": [1, 2], "beta_grid": [0.0, 0.2]})
    assert cli.main(["animals", "--config", str(cfg)]) == 0
    (d,) = tmp_path.glob("animals_*")
    lines = (d / "animals.csv").read_text().splitlines()
    assert lines[2] == "n,beta,mean_ratio,log_mgf_over_n,stderr,exact_or_greedy"
    assert len(lines) == 3 + 4
    assert cli.main(["entropy-checks", "--config", str(cfg)]) == 0
    (d,) = tmp_path.glob("entropy-checks_*")
    data = json.loads((d / "entropy.json").read_text())
    assert data["max_ratio"] >= 0 and len(data["mgf_entropy"]) == 3


def test_variance_scaling_command(tmp_path):
    cfg = write_cfg(tmp_path, {**MINIMAL, "replicas": 4, "sizes": [2, 4]})
    assert cli.main(["variance-scaling", "--config", str(cfg), "--outdir", str(tmp_path / "v")]) == 0
    lines = (_only_dir(tmp_path / "v") / "variance.csv").read_text().splitlines()
    assert lines[2] == "n,variance,ratio,ratio_se,reliable" and len(lines) == 5
