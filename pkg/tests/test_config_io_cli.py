import json

import numpy as np
import pytest

from fraclevy.cli import main
from fraclevy.config import DEFAULTS, ConfigError, config_hash, load_config
from fraclevy.experiments import OUTPUT_ROOT_ENV, emit_plotdata, run_experiment
from fraclevy.io import MANIFEST, check_manifest, read_csv, read_manifest, write_csv

SMALL = {
    "simulate": {"experiment": {"kind": "simulate", "n_paths": 200, "times": [0.25, 0.5, 1.0]}, "grid": {"h": 0.0625}},
    "wiener": {"experiment": {"kind": "wiener", "n_paths": 200}, "grid": {"h": 0.0625}},
    "volterra": {
        "experiment": {"kind": "volterra", "n_steps": 10, "sigma": {"preset": "constant", "c": 0.3}},
        "solver": {"order": 3, "n_probes": 3},
    },
    "sde": {"experiment": {"kind": "sde", "n_steps": 20}, "solver": {"order": 3, "n_probes": 3}},
}


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


class TestConfig:
    def test_defaults_validate(self):
        cfg = load_config()
        assert cfg == load_config({})
        assert cfg["experiment"]["beta"] == DEFAULTS["experiment"]["beta"]

    @pytest.mark.parametrize("beta", [0.0, 0.5, 0.6, -0.1])
    def test_beta_outside_range(self, beta):
        with pytest.raises(ConfigError, match=r"experiment.beta.*outside admissible range \(0, 1/2\)"):
            load_config({"experiment": {"beta": beta}})

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="solver.bogus"):
            load_config({"solver": {"bogus": 1}})
        with pytest.raises(ConfigError, match="unknown tolerance"):
            load_config({"solver": {"tolerances": {"nope": 1.0}}})

    @pytest.mark.parametrize(
        "doc, field",
        [
            ({"grid": {"h": -1}}, "grid.h"),
            ({"grid": {"t_min": -1.01}}, "grid.t_min"),
            ({"model": {"name": "cauchy"}}, "model.name"),
            ({"model": {"params": {"alpha": 3.0}}}, "model.params"),
            ({"experiment": {"n_paths": 1}}, "experiment.n_paths"),
            ({"solver": {"backend": "newton"}}, "solver.backend"),
            ({"solver": {"p": 1.0}}, "solver.p"),
            ({"experiment": {"times": [5.0]}}, "experiment.times"),
        ],
    )
    def test_field_named_in_error(self, doc, field):
        with pytest.raises(ConfigError) as err:
            load_config(doc)
        assert err.value.field == field

    def test_seed_override_and_hash(self):
        a = load_config({}, seed=7)
        assert a["experiment"]["seed"] == 7
        assert config_hash(a) != config_hash(load_config({}))
        assert config_hash(a) == config_hash(load_config({}, seed=7))

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "none.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(bad)


class TestCsv:
    def test_format(self, tmp_path):
        p = write_csv(tmp_path / "x.csv", ("a", "b"), [(1, 0.1), (np.int64(2), np.float64(1 / 3))])
        assert p.read_bytes() == b"a,b\n1,0.1\n2,0.3333333333333333\n"
        header, rows = read_csv(p)
        assert header == ["a", "b"] and float(rows[1][1]) == 1 / 3


@pytest.mark.parametrize("kind", sorted(SMALL))
class TestRuns:
    def test_deterministic_and_hashed(self, tmp_path, kind):
        cfg = load_config(SMALL[kind], seed=11)
        a = run_experiment(cfg, tmp_path / "a")
        b = run_experiment(cfg, tmp_path / "b")
        ma, mb = read_manifest(a), read_manifest(b)
        assert ma["config_sha256"] == config_hash(cfg)
        assert ma["seed"] == 11
        for name, digest in ma["files"].items():
            assert mb["files"][name] == digest
            if name.endswith(".csv"):
                assert (a / name).read_bytes() == (b / name).read_bytes()
        assert check_manifest(a) == []

    def test_plotdata(self, tmp_path, kind):
        run = run_experiment(load_config(SMALL[kind]), tmp_path / "r")
        names = emit_plotdata(run)
        assert "plotdata/hoelder_fit.csv" in names
        header, rows = read_csv(run / "plotdata/hoelder_fit.csv")
        assert header == ["beta", "delta", "sq_norm", "fitted", "slope"] and len(rows) == 8
        if kind == "simulate":
            header, rows = read_csv(run / "plotdata/variance_vs_t.csv")
            assert header == ["t", "empirical_var", "oracle_var", "stderr"] and len(rows) == 3
        if kind in ("volterra", "sde"):
            header, _ = read_csv(run / "plotdata/picard_decay.csv")
            assert header == ["iteration", "update_norm"]
            header, rows = read_csv(run / "plotdata/s_table.csv")
            assert header == ["t", "eta_id", "value"]
        assert set(names) <= set(read_manifest(run)["files"])
        assert check_manifest(run) == []


class TestManifest:
    def test_mutation_detected(self, tmp_path):
        run = run_experiment(load_config(SMALL["simulate"]), tmp_path / "r")
        with open(run / "moments.csv", "a") as fh:
            fh.write("9,9,9,9\n")
        (run / "paths.csv").unlink()
        assert sorted(check_manifest(run)) == ["moments.csv", "paths.csv"]

    def test_chaos_dump_round_trips(self, tmp_path):
        from fraclevy.chaos import ChaosElement
        from fraclevy.experiments import _basis

        cfg = load_config(SMALL["sde"])
        run = run_experiment(cfg, tmp_path / "r")
        dumps = sorted((run / "chaos").glob("U_*.txt"))
        assert len(dumps) == cfg["output"]["chaos_dumps"]
        F = ChaosElement.from_text(_basis(cfg), dumps[0].read_text())
        assert F.mean == pytest.approx(1.0)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="missing manifest"):
            emit_plotdata(tmp_path)


class TestCli:
    def test_run_and_emit(self, tmp_path, capsys):
        cfg = _write(tmp_path, SMALL["simulate"])
        assert main(["run", "--config", cfg, "--seed", "3", "--out", str(tmp_path / "r")]) == 0
        assert (tmp_path / "r" / MANIFEST).is_file()
        assert main(["emit-plotdata", str(tmp_path / "r")]) == 0
        assert "plotdata/variance_vs_t.csv" in capsys.readouterr().out

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
        cfg = _write(tmp_path, SMALL["wiener"])
        assert main(["run", "--config", cfg]) == 0
        runs = list((tmp_path / "root").iterdir())
        assert len(runs) == 1 and runs[0].name.startswith("wiener-")

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = _write(tmp_path, {"experiment": {"beta": 0.6}})
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
        assert "outside admissible range (0, 1/2)" in capsys.readouterr().err
        assert not (tmp_path / "r").exists()

    def test_emit_without_manifest(self, tmp_path, capsys):
        assert main(["emit-plotdata", str(tmp_path)]) == 1
        assert "missing manifest" in capsys.readouterr().err

    def test_verify_writes_report(self, tmp_path, capsys):
        assert main(["verify", "--suite", "operators", "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "verify_report.json").read_text())
        assert rep["passed"] and all(c["passed"] for c in rep["checks"])
        assert "PASS operators/semigroup" in capsys.readouterr().out

    def test_verify_failure_exit_code(self, tmp_path):
        cfg = _write(tmp_path, {"solver": {"tolerances": {"semigroup": 1e-12}}})
        assert main(["verify", "--suite", "operators", "--config", cfg]) == 1

    def test_unknown_suite(self, capsys):
        assert main(["verify", "--suite", "nope"]) == 1
