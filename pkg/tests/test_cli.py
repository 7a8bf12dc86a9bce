import csv
import json

import numpy as np
import pytest

from steadylearn.cli import main
from steadylearn.experiments import (
    EXPERIMENTS,
    SCHEMAS,
    ConfigError,
    ExperimentConfig,
    loglog_slope,
    run,
    trial_seeds,
    write_output,
)
from steadylearn.model import load_model, loss_dephasing_model, pack, save_model


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.build("fig1a")
        assert cfg.n_sites == 6 and cfg.trials == 30 and cfg.epsilon == 1e-4
        assert max(cfg.grid) == 207

    def test_unknown_experiment_and_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.build("fig9")
        with pytest.raises(ConfigError):
            ExperimentConfig.build("fig1a", {"bogus": 1})
        with pytest.raises(ConfigError):
            ExperimentConfig.build("fig1a", {"trials": 0})
        with pytest.raises(ConfigError):
            ExperimentConfig.build("fig1a", {"n_sites": 9})

    def test_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('experiment = "fig1c"\ntrials = 2\nn_sites = 3\n')
        cfg = ExperimentConfig.from_toml(p)
        assert (cfg.experiment, cfg.trials, cfg.n_sites) == ("fig1c", 2, 3)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(p, "fig2")

    def test_seeds(self):
        a, b = trial_seeds(7, 3), trial_seeds(7, 4)
        assert a == b[:3]
        assert len(set(a)) == 3

    def test_slope(self):
        x = np.array([1.0, 2.0, 4.0])
        assert loglog_slope(x, 3 * x**-2) == pytest.approx(-2)


def _small(experiment, **kw):
    base = {"fig1c": {"n_sites": 3, "trials": 2, "grid": [0.05, 0.1, 0.5], "fit_range": [0.05, 0.5]},
            "fig3_synthetic": {"trials": 3, "grid": [1, 2, 4], "deltas": [1e-4], "fit_range": [1, 4]},
            "fig1a": {"n_sites": 3, "trials": 2, "grid": [9, 18, 27]}}[experiment]
    base.update(kw)
    return ExperimentConfig.build(experiment, base)


class TestRunner:
    def test_schemas_cover_experiments(self):
        assert set(SCHEMAS) == set(EXPERIMENTS)

    def test_csv_is_deterministic(self, tmp_path):
        out1 = write_output(run(_small("fig1c")), tmp_path / "a")
        out2 = write_output(run(_small("fig1c")), tmp_path / "b")
        assert out1["csv"].read_bytes() == out2["csv"].read_bytes()

    def test_threads_do_not_change_results(self, tmp_path):
        a = write_output(run(_small("fig1a")), tmp_path / "a")
        b = write_output(run(_small("fig1a", threads=2)), tmp_path / "b")
        assert a["csv"].read_bytes() == b["csv"].read_bytes()

    def test_csv_format(self, tmp_path):
        out = run(_small("fig3_synthetic"))
        paths = write_output(out, tmp_path)
        raw = paths["csv"].read_bytes()
        assert b"\r\n" in raw
        rows = list(csv.reader(raw.decode().splitlines()))
        assert rows[0] == SCHEMAS["fig3_synthetic"]
        assert len(rows) == 1 + 3 * 3
        assert float(rows[1][3]) == out.rows[0]["delta_total"]
        meta = json.loads(paths["meta"].read_text())
        assert meta["config"]["trials"] == 3 and len(meta["trial_seeds"]) == 3
        assert "0.0001" in json.loads(paths["summary"].read_text())


class TestCli:
    def test_pipeline(self, tmp_path, capsys):
        m, s, k = tmp_path / "m.json", tmp_path / "s.bin", tmp_path / "K"
        assert main(["generate", "--ensemble", "nn", "--sites", "4", "--seed", "3", "--out", str(m)]) == 0
        assert main(["steady", str(m), "--out", str(s)]) == 0
        assert main(["measure", str(m), "--state", str(s), "--out", str(k)]) == 0
        out = tmp_path / "r.json"
        assert main(["recover", str(k), "--model", str(m), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["delta"] < 1e-6
        prior = tmp_path / "p.json"
        assert main(["recover-prior", str(m), "--state", str(s), "--epsilon", "1e-6", "--out", str(prior)]) == 0
        assert json.loads(prior.read_text())["delta_prior"] < 1e-3

    def test_stitch_and_dynamics(self, tmp_path):
        m = tmp_path / "m.json"
        assert main(["generate", "--sites", "6", "--seed", "1", "--out", str(m)]) == 0
        out = tmp_path / "st.json"
        assert main(["stitch", str(m), "--patch-size", "4", "--stride", "2", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["delta"] < 1e-8
        other = tmp_path / "o.json"
        model = load_model(m)
        save_model(model.with_coefficients(c_h=model.c_h * 1.001), other)
        csv_path = tmp_path / "d.csv"
        assert main(["dynamics", str(m), str(other), "--points", "5", "--out", str(csv_path)]) == 0
        assert len(csv_path.read_text().splitlines()) == 7

    def test_config_error_exit_code(self, tmp_path, capsys):
        p = tmp_path / "c.toml"
        p.write_text('experiment = "fig1c"\nbogus = 1\n')
        assert main(["experiment", "fig1c", "--config", str(p)]) == 2
        assert main(["steady", str(tmp_path / "missing.json")]) == 2

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        model = loss_dephasing_model(2, 0.0, 0)
        model = model.with_coefficients(c_h=np.zeros(model.basis.n_hamiltonian))
        save_model(model, tmp_path / "m.json")
        assert main(["steady", str(tmp_path / "m.json")]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_experiment_command(self, tmp_path, capsys):
        p = tmp_path / "c.toml"
        p.write_text('experiment = "fig3_synthetic"\ntrials = 2\ngrid = [1, 2]\ndeltas = [1e-4]\nfit_range = [1, 2]\n')
        assert main(["experiment", "fig3_synthetic", "--config", str(p), "--out", str(tmp_path), "--seed", "5"]) == 0
        assert (tmp_path / "fig3_synthetic.csv").exists()
        assert json.loads((tmp_path / "fig3_synthetic_meta.json").read_text())["config"]["seed"] == 5


def test_generated_model_file_is_loadable(tmp_path):
    m = tmp_path / "m.json"
    main(["generate", "--ensemble", "nn_jump", "--sites", "3", "--seed", "2", "--out", str(m)])
    assert pack(load_model(m)).size == load_model(m).basis.n_params
