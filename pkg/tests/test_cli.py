"""End-to-end tests of the command-line driver on a miniature experiment."""

import json

import pytest
from click.testing import CliRunner

from optcharge.cli import main
from optcharge.config import default_config, load_config
from optcharge.learner import load_checkpoint
from optcharge.model import ValidationError


@pytest.fixture()
def tiny_env(tmp_path):
    """A 2-customer, 6-hour experiment that runs in seconds."""
    profile = tmp_path / "prices.csv"
    profile.write_text("hour,price\n" + "\n".join(
        f"{h},{p}" for h, p in enumerate([0.10, 0.12, 0.20, 0.35, 0.30, 0.15]))
        + "\n")
    out = tmp_path / "out"
    config = {
        "station": {"T": 6, "N": 2, "station_cap": 8.0, "beta": 5.0,
                    "alpha": 0.001},
        "sessions": [
            {"t_arrival": 0, "t_depart": 5, "max_power": 6.6},
            {"t_arrival": 1, "t_depart": 6, "max_power": 3.6},
        ],
        "pbdr": {"n_utility": 1, "n_quadratic": 1, "n_train": 60,
                 "n_test": 10, "seed": 3},
        "train": {"iterations": 15, "batch_size": 8, "hidden_width": 8},
        "paths": {"price_profile": str(profile), "output_dir": str(out)},
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    return config_path, out


def run_cli(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


# ---------------------------------------------------------------------------
# configuration


def test_default_config_is_valid():
    config = default_config()
    assert config.station.T == 24
    assert config.station.N == 5
    assert config.station.beta == 5.0
    assert config.station.alpha == 0.001
    assert len(config.sessions) == 5
    assert config.station.purchase_price.shape == (24,)
    assert config.train.iterations == 250


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"stations": {}}))
    with pytest.raises(ValidationError):
        load_config(path)
    path.write_text(json.dumps({"station": {"Z": 1}}))
    with pytest.raises(ValidationError):
        load_config(path)


def test_invalid_values_exit_with_validation_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"station": {"beta": -1.0}}))
    result = run_cli("gen-data", "--config", str(path))
    assert result.exit_code == 2


# ---------------------------------------------------------------------------
# gen-data


def test_gen_data_writes_expected_files(tiny_env):
    config_path, out = tiny_env
    result = run_cli("gen-data", "--config", str(config_path))
    assert result.exit_code == 0, result.output
    train_lines = (out / "train.csv").read_text().strip().split("\n")
    test_lines = (out / "test.csv").read_text().strip().split("\n")
    assert len(train_lines) == 61 and len(test_lines) == 11
    assert train_lines[0] == "c_1,c_2,e_1,e_2"
    assert (out / "population.json").exists()
    assert "train: 60 samples" in result.output


def test_gen_data_is_deterministic(tiny_env, tmp_path):
    config_path, out = tiny_env
    run_cli("gen-data", "--config", str(config_path))
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    run_cli("gen-data", "--config", str(config_path))
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second

    other = tmp_path / "other"
    result = run_cli("gen-data", "--config", str(config_path),
                     "--seed", "99", "--out", str(other))
    assert result.exit_code == 0
    assert (other / "train.csv").read_bytes() != first["train.csv"]


def test_seed_env_override(tiny_env, tmp_path, monkeypatch):
    config_path, out = tiny_env
    a = tmp_path / "a"
    b = tmp_path / "b"
    monkeypatch.setenv("OPTCHARGE_SEED", "7")
    run_cli("gen-data", "--config", str(config_path), "--out", str(a))
    monkeypatch.delenv("OPTCHARGE_SEED")
    run_cli("gen-data", "--config", str(config_path), "--seed", "7",
            "--out", str(b))
    assert (a / "train.csv").read_bytes() == (b / "train.csv").read_bytes()


# ---------------------------------------------------------------------------
# train / eval


def test_train_and_eval_round_trip(tiny_env):
    config_path, out = tiny_env
    run_cli("gen-data", "--config", str(config_path))

    result = run_cli("train", "--config", str(config_path), "--mode", "two-step")
    assert result.exit_code == 0, result.output
    trace = (out / "trace_two_step.csv").read_text().strip().split("\n")
    assert trace[0] == "iter,loss,cost_mean"
    assert len(trace) == 16  # header + one row per iteration

    params, cfg = load_checkpoint(out / "checkpoint_two_step.json")
    assert cfg.mode == "two_step"
    assert params.n_customers == 2

    result = run_cli("eval", "--config", str(config_path),
                     "--checkpoint", str(out / "checkpoint_two_step.json"))
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    lhs = report["mean_cost"]
    rhs = (-report["mean_profit"] + report["mean_completion"]
           + report["mean_smooth"])
    assert lhs == pytest.approx(rhs, abs=1e-8)
    assert report["n_excluded"] == 0


def test_train_e2e_subset(tiny_env):
    config_path, out = tiny_env
    run_cli("gen-data", "--config", str(config_path))
    result = run_cli("train", "--config", str(config_path), "--mode", "e2e",
                     "--samples", "20")
    assert result.exit_code == 0, result.output
    assert "trained e2e on 20 samples" in result.output
    assert (out / "checkpoint_e2e.json").exists()


def test_eval_oracle_matches_ground_truth(tiny_env):
    config_path, out = tiny_env
    run_cli("gen-data", "--config", str(config_path))
    result = run_cli("eval", "--config", str(config_path), "--oracle",
                     "--station-power")
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert report["mean_cost"] == pytest.approx(report["mean_ground_truth"],
                                                abs=1e-8)
    power = (out / "station_power.csv").read_text().strip().split("\n")
    assert power[0] == "hour,power_forecast,power_ground_truth"
    assert len(power) == 7  # header + T rows


def test_eval_without_inputs_fails_cleanly(tiny_env):
    config_path, out = tiny_env
    result = run_cli("eval", "--config", str(config_path), "--oracle")
    assert result.exit_code == 4  # no test.csv yet
    run_cli("gen-data", "--config", str(config_path))
    result = run_cli("eval", "--config", str(config_path))
    assert result.exit_code == 2  # neither checkpoint nor oracle


def test_training_divergence_exit_code(tiny_env, tmp_path):
    config_path, out = tiny_env
    raw = json.loads(config_path.read_text())
    raw["train"]["learning_rate"] = 1e9
    raw["train"]["iterations"] = 40
    bad = tmp_path / "diverge.json"
    bad.write_text(json.dumps(raw))
    run_cli("gen-data", "--config", str(bad))
    result = run_cli("train", "--config", str(bad), "--mode", "two-step")
    assert result.exit_code == 3


# ---------------------------------------------------------------------------
# compare / gradcheck


def test_compare_writes_tables(tiny_env):
    config_path, out = tiny_env
    run_cli("gen-data", "--config", str(config_path))
    result = run_cli("compare", "--config", str(config_path),
                     "--sizes", "20,40", "--seeds", "2")
    assert result.exit_code == 0, result.output

    t1 = (out / "table1.csv").read_text().strip().split("\n")
    assert t1[0] == "size,mode,cost_mean,cost_std,improvement"
    assert len(t1) == 5  # header + 2 sizes x 2 modes
    t2 = (out / "table2.csv").read_text().strip().split("\n")
    assert len(t2) == 5
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["improvements"]) == {"20", "40"}

    rows = [line.split(",") for line in t1[1:]]
    by_size_mode = {(r[0], r[1]): float(r[2]) for r in rows}
    for size in ("20", "40"):
        imp = float([r[4] for r in rows if r[0] == size][0])
        assert imp == pytest.approx(by_size_mode[(size, "two_step")]
                                    - by_size_mode[(size, "e2e")])


def test_compare_jobs_do_not_change_results(tiny_env, tmp_path):
    config_path, out = tiny_env
    run_cli("gen-data", "--config", str(config_path))
    run_cli("compare", "--config", str(config_path), "--sizes", "20",
            "--seeds", "2")
    serial = (out / "table1.csv").read_bytes()
    run_cli("compare", "--config", str(config_path), "--sizes", "20",
            "--seeds", "2", "--jobs", "2")
    assert (out / "table1.csv").read_bytes() == serial


def test_gradcheck_passes(tiny_env):
    config_path, _ = tiny_env
    result = run_cli("gradcheck", "--config", str(config_path),
                     "--instances", "15")
    assert result.exit_code == 0, result.output
    assert "pass rate: 100.0%" in result.output
    assert "zero-coupling gradient exactly zero: True" in result.output


def test_gradcheck_deterministic_output(tiny_env):
    config_path, _ = tiny_env
    out1 = run_cli("gradcheck", "--config", str(config_path),
                   "--instances", "8", "--seed", "5").output
    out2 = run_cli("gradcheck", "--config", str(config_path),
                   "--instances", "8", "--seed", "5").output
    assert out1 == out2