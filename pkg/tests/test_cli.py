import json

import pytest

from clt_lab import cli
from clt_lab.cli import ConfigError, RunConfig, main, parse_grid, parse_int_grid


@pytest.fixture
def jump04(tmp_path):
    path = tmp_path / "jump04.json"
    path.write_text(json.dumps({"kind": "jump", "theta": 0.4}))
    return str(path)


@pytest.fixture
def rad(tmp_path):
    path = tmp_path / "rad.json"
    path.write_text(json.dumps({"kind": "rademacher"}))
    return str(path)


def test_parse_grid_forms():
    assert parse_grid("0.1,0.3,1") == [0.1, 0.3, 1.0]
    assert parse_grid("0.05:0.2:0.05") == [0.05, 0.1, 0.15, 0.2]
    assert parse_int_grid("100,1000") == [100, 1000]
    with pytest.raises(ConfigError):
        parse_grid("1:2")
    with pytest.raises(ConfigError):
        parse_grid("1:2:0")
    with pytest.raises(ConfigError):
        parse_int_grid("1.5,2")


def test_run_config_validation(tmp_path):
    good = tmp_path / "cfg.json"
    good.write_text(json.dumps({"n_schedule": [2, 10], "eps_grid": [0.3], "seed": 5}))
    cfg = RunConfig.from_file(str(good))
    assert cfg.n_schedule == [2, 10] and cfg.seed == 5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"eps_grid": [0.0]}))
    with pytest.raises(ConfigError, match="eps_grid"):
        RunConfig.from_file(str(bad))
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"bogus_knob": 1}))
    with pytest.raises(ConfigError, match="bogus_knob"):
        RunConfig.from_file(str(unknown))


def test_simulate_replay_byte_identical(jump04, tmp_path, capsys):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    base = ["simulate", "--family", jump04, "--n", "100", "--reps", "5000", "--seed", "7"]
    assert main(base + ["--out", str(out1)]) == 0
    assert main(base + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    assert set(doc) == {"atoms", "probs"}
    assert abs(sum(doc["probs"]) - 1.0) < 1e-9


def test_distance_subcommand(jump04, tmp_path, capsys):
    law = tmp_path / "law.json"
    assert main(["simulate", "--family", jump04, "--n", "50", "--reps", "2000", "--seed", "1", "--out", str(law)]) == 0
    assert main(["distance", "--metric", "kolmogorov", "--p", str(law), "--q", "normal"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["metric"] == "kolmogorov" and 0 < doc["value"] < 1
    assert main(["distance", "--metric", "tv", "--p", str(law), "--q", "normal"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 1.0
    assert main(["distance", "--metric", "prokhorov", "--lambda", "0.5", "--p", str(law), "--q", str(law)]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 0.0


def test_stein_subcommand(tmp_path):
    out = tmp_path / "stein.json"
    assert main(["stein", "--h", "sigmoid", "--report", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["evaluation"]["h"] == "sigmoid"
    assert doc["evaluation"]["sup_f1"] > 0
    assert all(rec["pass"] for rec in doc["bound_checks"])


def test_lindeberg_subcommand_index(jump04, tmp_path):
    out = tmp_path / "prof.json"
    code = main(
        ["lindeberg", "--family", jump04, "--n", "100,1000,10000", "--eps", "0.05:0.95:0.05", "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["index_estimate"] == pytest.approx(0.4, abs=1e-12)


def test_verify_tv_suite_and_report_round_trip(tmp_path):
    report_json = tmp_path / "tv.json"
    figs = tmp_path / "figs"
    code = main(["verify", "--suite", "tv", "--out", str(report_json), "--figures-dir", str(figs)])
    assert code == 0
    doc = json.loads(report_json.read_text())
    assert doc["meta"]["suite"] == "tv"
    tv_rows = [rec for rec in doc["results"] if rec["name"].startswith("tv_equals_one")]
    assert tv_rows and all(rec["params"]["tv"] == 1.0 for rec in tv_rows)
    assert (figs / "tv_margins.png").exists() and (figs / "tv_sides.png").exists()

    csv_path = tmp_path / "tv.csv"
    assert main(["report", "--in", str(report_json), "--out", str(csv_path), "--no-figures"]) == 0
    rows = csv_path.read_text().strip().splitlines()
    assert len(rows) - 1 == len(doc["results"])


def test_report_renders_figures_alongside_csv(tmp_path):
    report_json = tmp_path / "eps.json"
    assert main(["verify", "--suite", "eps", "--config", _cfg(tmp_path), "--out", str(report_json)]) == 0
    csv_path = tmp_path / "out" / "eps.csv"
    csv_path.parent.mkdir()
    assert main(["report", "--in", str(report_json), "--out", str(csv_path)]) == 0
    assert (csv_path.parent / "eps_margins.png").exists()
    assert (csv_path.parent / "eps_sides.png").exists()


def _cfg(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"n_schedule": [2, 10], "eps_grid": [0.3, 1.0]}))
    return str(path)


def test_verify_csv_format(tmp_path, rad):
    out = tmp_path / "r.csv"
    code = main(
        ["verify", "--suite", "eps", "--family", rad, "--config", _cfg(tmp_path), "--out", str(out), "--format", "csv"]
    )
    assert code == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0].startswith("name,lhs,rhs,margin,pass,error_budget,params")
    assert len(rows) == 1 + 2 * 2  # two n values x two eps values, one family


def test_verify_replay_byte_identical(tmp_path, rad):
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    args = ["verify", "--suite", "eps", "--family", rad, "--config", _cfg(tmp_path)]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_verify_exit_one_on_failed_bound(tmp_path, rad):
    # an absurdly small constant forces a violated bound
    cfg = tmp_path / "tight.json"
    cfg.write_text(json.dumps({"n_schedule": [2], "eps_grid": [0.3]}))
    import clt_lab.bounds as bounds_mod

    orig = bounds_mod.OSIPOV_CONSTANT
    bounds_mod.OSIPOV_CONSTANT = 1e-6
    try:
        code = main(["verify", "--suite", "thm12", "--family", rad, "--config", str(cfg)])
    finally:
        bounds_mod.OSIPOV_CONSTANT = orig
    assert code == 1


def test_usage_errors_exit_two(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--badflag"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--suite", "everything"])
    assert exc.value.code == 2
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"reps": 0}))
    assert main(["verify", "--suite", "eps", "--config", str(bad_cfg)]) == 2
    assert "reps" in capsys.readouterr().err
    assert main(["distance", "--metric", "tv", "--p", "missing.json", "--q", "normal"]) == 2


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("CLT_LAB_THREADS", "3")
    assert cli._default_threads() == 3
    monkeypatch.setenv("CLT_LAB_THREADS", "zebra")
    with pytest.raises(ConfigError):
        cli._default_threads()
