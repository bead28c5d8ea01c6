import json

import pytest

from randpursuit import cli
from randpursuit.bench import ConfigError, ExperimentConfig


def parse(argv):
    return cli.build_parser().parse_args(argv)


def resolve(argv, monkeypatch=None):
    if monkeypatch is not None:
        monkeypatch.delenv("RP_SEED", raising=False)
    return cli.resolve_config(parse(argv))


# -- configuration plumbing ---------------------------------------------------

def test_flag_defaults_round_trip(monkeypatch):
    monkeypatch.delenv("RP_SEED", raising=False)
    cfg = resolve(["run"])
    assert cfg == ExperimentConfig()
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_config_file_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv("RP_SEED", raising=False)
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# comment line\n"
        "function = f4\n"
        "n = 6          # inline comment\n"
        "ell = 1e3\n"
        "seed = 5\n"
        "reuse = off\n"
        "capacity = none\n"
        "transform = true\n",
        encoding="utf-8")
    cfg = resolve(["run", "--config", str(path), "--n", "7"])
    assert cfg.function == "f4"
    assert cfg.n == 7            # flag wins over file
    assert cfg.ell == 1000.0
    assert cfg.seed == 5
    assert cfg.reuse is False
    assert cfg.capacity is None
    assert cfg.transform is True


def test_config_file_errors(tmp_path):
    bad_line = tmp_path / "a.cfg"
    bad_line.write_text("function f3\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="key = value"):
        cli._parse_config_file(bad_line)
    unknown = tmp_path / "b.cfg"
    unknown.write_text("budget = 3\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="budget"):
        cli._parse_config_file(unknown)
    not_bool = tmp_path / "c.cfg"
    not_bool.write_text("reuse = maybe\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="reuse"):
        cli._parse_config_file(not_bool)
    with pytest.raises(ConfigError, match="cannot read"):
        cli._parse_config_file(tmp_path / "missing.cfg")


def test_ellpow_shorthand(monkeypatch):
    monkeypatch.delenv("RP_SEED", raising=False)
    cfg = resolve(["run", "--function", "f3", "--ellpow", "4"])
    assert cfg.ell == 10_000.0
    with pytest.raises(ConfigError):
        parse(["run", "--ell", "10", "--ellpow", "1"])  # mutually exclusive


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("RP_SEED", "99")
    assert resolve(["run"]).seed == 99
    assert resolve(["run", "--seed", "3"]).seed == 3  # flag beats env
    monkeypatch.setenv("RP_SEED", "abc")
    with pytest.raises(ConfigError, match="RP_SEED"):
        resolve(["run"])


def test_main_exit_code_on_bad_usage(capsys):
    assert cli.main(["run", "--n", "1"]) == 1
    assert "n:" in capsys.readouterr().err
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["verify", "nonsense"]) == 1


def test_main_exit_code_on_runtime_failure(tmp_path, capsys):
    code = cli.main(["run", "--function", "f3", "--n", "4", "--ell", "10",
                     "--init", "file:/nonexistent/b0.txt", "--algo", "vrp",
                     "--trials", "1", "--seed", "1", "--max-iterations", "5",
                     "--output", str(tmp_path / "out")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


# -- run artifacts ------------------------------------------------------------

RUN_ARGS = ["run", "--function", "f3", "--n", "5", "--ell", "10",
            "--algo", "frp", "--ls", "exact", "--trials", "2", "--seed", "7",
            "--max-iterations", "60"]


def test_cmd_run_writes_artifacts(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("RP_SEED", raising=False)
    out = tmp_path / "results"
    assert cli.main(RUN_ARGS + ["--output", str(out)]) == 0
    assert "wrote" in capsys.readouterr().out
    for name in ("trajectories.csv", "summary.json", "gap_curve.csv",
                 "timings.json"):
        assert (out / name).exists()

    header = (out / "trajectories.csv").read_text().splitlines()[0]
    assert header == "trial,iter,fes,fval,gap,kappa_BinvH,reserved1,reserved2"

    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema"] == cli.SUMMARY_SCHEMA
    assert len(summary["per_trial"]) == 2
    assert summary["config"]["function"] == "f3"
    assert 0.0 <= summary["reached_fraction"] <= 1.0
    assert sum(summary["stop_reasons"].values()) == 2
    # per-n^2 normalization of the decade table
    for key, cell in summary["decade_table"].items():
        assert summary["decade_fes_per_n2"][key] == cell["mean_fes"] / 25.0
    # emitted config round-trips into the validated dataclass
    cfg = ExperimentConfig.from_dict(summary["config"]).validate()
    assert cfg.n == 5 and cfg.trials == 2


def test_cmd_run_reruns_byte_identical(tmp_path, monkeypatch):
    # same config, including the output path, so the embedded config matches
    monkeypatch.delenv("RP_SEED", raising=False)
    out, kept = tmp_path / "out", tmp_path / "first"
    assert cli.main(RUN_ARGS + ["--output", str(out)]) == 0
    out.rename(kept)
    assert cli.main(RUN_ARGS + ["--output", str(out)]) == 0
    for name in ("trajectories.csv", "summary.json", "gap_curve.csv"):
        assert (out / name).read_bytes() == (kept / name).read_bytes()


def test_cmd_run_json_format_and_phase_field(tmp_path, monkeypatch):
    monkeypatch.delenv("RP_SEED", raising=False)
    out = tmp_path / "vrp"
    code = cli.main(["run", "--function", "f3", "--n", "6", "--ell", "100",
                     "--algo", "vrp", "--update", "store", "--trials", "1",
                     "--seed", "2", "--max-iterations", "150",
                     "--format", "json", "--output", str(out)])
    assert code == 0
    traj = json.loads((out / "trajectories.json").read_text())
    assert traj["columns"][:3] == ["trial", "iter", "fes"]
    summary = json.loads((out / "summary.json").read_text())
    trial = summary["per_trial"][0]
    assert len(traj["rows"]) == trial["iterations"] + 1  # plus the x0 record
    assert "learning_phase_iterations" in trial
    assert "wall_time" not in trial  # timings live in the sidecar only
    timings = json.loads((out / "timings.json").read_text())
    assert len(timings["wall_time_per_trial"]) == 1


# -- verify -------------------------------------------------------------------

def test_cmd_verify_success(tmp_path, capsys):
    report_path = tmp_path / "report.json"
    assert cli.main(["verify", "diag", "--output", str(report_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == cli.VERIFY_SCHEMA
    assert report["passed"] is True
    assert report["checks"][0]["name"] == "diagonalization-product"
    assert json.loads(report_path.read_text()) == report


def test_cmd_verify_failure_exit_code(monkeypatch, capsys):
    def fake_suite(name, seed=None, samples=None):
        return [{"name": "synthetic", "passed": False, "measured": 9.0,
                 "tolerance": 3.0, "detail": ""}]

    monkeypatch.setattr(cli.verify_suites, "run_suite", fake_suite)
    assert cli.main(["verify", "moments"]) == 3
    assert json.loads(capsys.readouterr().out)["passed"] is False


# -- table --------------------------------------------------------------------

def fake_summary(path, n, decades, function="f3", algorithm="frp",
                 linesearch="exact", update="store", ell=100.0, i=1):
    payload = {
        "schema": cli.SUMMARY_SCHEMA,
        "config": {"function": function, "n": n, "ell": ell, "i": i,
                   "algorithm": algorithm, "linesearch": linesearch,
                   "update": update},
        "decade_fes_per_n2": decades,
    }
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_cmd_table_text_with_dashes(tmp_path, capsys):
    s = fake_summary(tmp_path / "s.json", 10, {"1e+01": 4.0, "1e+00": 12.5})
    assert cli.main(["table", str(s)]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0].split()[:3] == ["config", "1e+01", "1e+00"]
    row = lines[1].split()
    assert row[0] == "frp/f3(ell=100)/exact"
    assert row[1] == "4.0" and row[2] == "12.5"
    assert row[3:] == ["-"] * 8  # decades never reached print as dashes


def test_cmd_table_csv_and_labels(tmp_path, capsys):
    a = fake_summary(tmp_path / "a.json", 10, {"1e+01": 4.0},
                     function="g", i=25, ell=1000.0)
    b = fake_summary(tmp_path / "b.json", 10, {"1e+01": 6.0},
                     algorithm="vrp", update="corr", function="f2")
    assert cli.main(["table", str(a), str(b), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("config,1e+01,")
    assert lines[1].startswith("frp/g25(ell=1000)/exact,4.0,-")
    assert lines[2].startswith("vrp/f2/exact/corr,6.0,-")


def test_cmd_table_rejects_mixed_dimensions(tmp_path, capsys):
    a = fake_summary(tmp_path / "a.json", 10, {})
    b = fake_summary(tmp_path / "b.json", 20, {})
    assert cli.main(["table", str(a), str(b)]) == 1
    assert "mixed dimensions" in capsys.readouterr().err


def test_cmd_table_output_file_matches_stdout(tmp_path, capsys):
    s = fake_summary(tmp_path / "s.json", 5, {"1e+01": 2.0})
    assert cli.main(["table", str(s)]) == 0
    expected = capsys.readouterr().out
    dest = tmp_path / "table.txt"
    assert cli.main(["table", str(s), "--output", str(dest)]) == 0
    assert dest.read_text() == expected
