import json
import math
from pathlib import Path

import numpy as np
import pytest

from swfalloc.cli import main
from swfalloc.config import (ConfigError, ExperimentConfig, geometric_weights,
                             linear_weights, load_config, make_weights)
from swfalloc.harness import (CSV_HEADER, read_trace_csv, run_infer,
                              run_single, run_sweep, write_trace_csv)

BASE_CONFIG = {
    "version": 1,
    "n": 5,
    "k": 2,
    "T": 60,
    "family": "wpm",
    "q": -1.0,
    "weights": {"scheme": "geometric", "ratio": 0.9},
    "delta": 0.1,
    "sigma": 0.45,
    "run_seeds": [0, 1],
}


def write_config(tmp_path, overrides=None, name="cfg.json"):
    data = dict(BASE_CONFIG)
    if overrides:
        data.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


class TestWeights:
    def test_geometric_normalized_and_decreasing(self):
        w = geometric_weights(10, 0.9)
        assert w.sum() == pytest.approx(1.0)
        assert np.all(np.diff(w) < 0)
        assert w[1] / w[0] == pytest.approx(0.9)

    def test_linear_decays_two_to_one(self):
        w = linear_weights(5)
        assert w.sum() == pytest.approx(1.0)
        assert np.all(np.diff(w) < 0)
        assert w[0] / w[-1] == pytest.approx(2.0)

    def test_explicit_and_uniform(self):
        assert make_weights({"scheme": "uniform"}, 4) == pytest.approx([0.25] * 4)
        w = make_weights({"scheme": "explicit", "values": [0.7, 0.3]}, 2)
        assert w == pytest.approx([0.7, 0.3])
        with pytest.raises(ConfigError):
            make_weights({"scheme": "explicit", "values": [0.7]}, 2)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.n == 5 and cfg.k == 2 and cfg.q == -1.0
        assert cfg.run_seeds == (0, 1)

    def test_neg_inf_power_string(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"q": "-inf"}))
        assert cfg.q == float("-inf")

    def test_unknown_key_reports_line(self, tmp_path):
        path = write_config(tmp_path, {"bogus_key": 3})
        with pytest.raises(ConfigError) as err:
            load_config(path)
        msg = str(err.value)
        assert "bogus_key" in msg
        lineno = int(msg.split(":")[1])
        assert json.dumps("bogus_key") in path.read_text().splitlines()[lineno - 1]

    def test_syntax_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "version": 1,\n  oops\n}\n')
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert ":3:" in str(err.value)

    def test_bad_values_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"k": 9}))
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"delta": 1.5}))
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"version": 2}))
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"family": "unknown"}))

    def test_cells_enumerate_grid(self):
        cfg = ExperimentConfig(n=6, k=(1, 2), T=(10, 20), family="wpm",
                               q=(-1.0, 0.0))
        cells = list(cfg.cells())
        assert len(cells) == 8
        assert all(c.is_scalar() for c in cells)
        combos = {(c.T, c.k, c.q) for c in cells}
        assert (10, 1, -1.0) in combos and (20, 2, 0.0) in combos


class TestRunSingle:
    def test_csv_schema_and_summary_consistency(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        summary = run_single(cfg, tmp_path / "out")
        csv_path = tmp_path / "out" / "trace.csv"
        text = csv_path.read_text().splitlines()
        assert text[0] == CSV_HEADER
        assert len(text) == 1 + cfg.T * len(cfg.run_seeds)
        # forced phase rows end with empty bound columns
        first = text[1].split(",")
        assert first[0] == "1" and first[5] == "" and first[6] == ""
        data = read_trace_csv(csv_path)
        for seed, rows in data.items():
            assert summary["final_regret"][str(seed)] == rows["regret_cum"][-1]
        loaded = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert loaded["final_regret_mean"] == pytest.approx(
            np.mean(list(summary["final_regret"].values())))

    def test_determinism_bit_identical(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        run_single(cfg, tmp_path / "a")
        run_single(cfg, tmp_path / "b")
        assert (tmp_path / "a" / "trace.csv").read_bytes() == \
            (tmp_path / "b" / "trace.csv").read_bytes()


class TestSweep:
    def test_one_csv_per_cell_plus_index(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"T": [20, 40], "k": [1, 2]}))
        index = run_sweep(cfg, tmp_path / "sweep")
        assert len(index["cells"]) == 4
        for cell in index["cells"]:
            path = tmp_path / "sweep" / cell["path"]
            assert path.exists()
            rows = path.read_text().splitlines()
            assert rows[0] == CSV_HEADER
            assert len(rows) == 1 + cell["T"] * len(cfg.run_seeds)
        loaded = json.loads((tmp_path / "sweep" / "index.json").read_text())
        assert loaded["schema_version"] == 1
        assert len(loaded["cells"]) == 4

    def test_parallel_matches_serial(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"T": [15, 25]}))
        run_sweep(cfg, tmp_path / "serial", jobs=1)
        run_sweep(cfg, tmp_path / "par", jobs=2)
        for cell in json.loads((tmp_path / "serial" / "index.json").read_text())["cells"]:
            assert (tmp_path / "serial" / cell["path"]).read_bytes() == \
                (tmp_path / "par" / cell["path"]).read_bytes()


class TestInfer:
    def test_stop_mode_writes_decision(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"T": 1500, "k": 1, "n": 3,
                                                  "family": "wpm", "q": 1.0,
                                                  "run_seeds": [0]}))
        decision = run_infer(cfg, "stop", tmp_path / "inf", w0=0.05,
                             optimal=True)
        assert decision["verdict"] in ("stop", "undecided")
        loaded = json.loads((tmp_path / "inf" / "decision.json").read_text())
        assert loaded["mode"] == "stop"
        if decision["verdict"] == "stop":
            assert len(loaded["policy"]) == 3

    def test_compare_mode_needs_policies(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        with pytest.raises(ConfigError):
            run_infer(cfg, "compare", tmp_path / "inf")

    def test_gamma_guard(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        pol = tmp_path / "p.json"
        pol.write_text(json.dumps([0.9, 0.9, 0.1, 0.05, 0.05]))
        with pytest.raises(ValueError):
            run_infer(cfg, "test", tmp_path / "inf", w0=0.1,
                      policy_path=pol, gamma=0.2)


class TestJobs:
    def test_env_var_fallback(self, monkeypatch):
        from swfalloc.harness import resolve_jobs
        monkeypatch.delenv("SWF_ALLOC_JOBS", raising=False)
        assert resolve_jobs(None) == 1
        assert resolve_jobs(3) == 3
        monkeypatch.setenv("SWF_ALLOC_JOBS", "4")
        assert resolve_jobs(None) == 4
        assert resolve_jobs(2) == 2


class TestCli:
    def test_run_exit_code(self, tmp_path, capsys):
        path = write_config(tmp_path, {"T": 30, "run_seeds": [0]})
        assert main(["run", "--config", str(path),
                     "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "trace.csv").exists()

    def test_validate_exits_zero_on_clean_build(self):
        assert main(["validate"]) == 0

    def test_sweep_cli(self, tmp_path):
        path = write_config(tmp_path, {"T": [10, 20], "run_seeds": [0]})
        assert main(["sweep", "--config", str(path),
                     "--out", str(tmp_path / "sw"), "--jobs", "1"]) == 0
        assert (tmp_path / "sw" / "index.json").exists()

    def test_bad_config_exit_code(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["run", "--config", str(path),
                     "--out", str(tmp_path / "x")]) == 2

    def test_seed_override_changes_environment(self, tmp_path):
        path = write_config(tmp_path, {"T": 25, "run_seeds": [0]})
        main(["run", "--config", str(path), "--out", str(tmp_path / "s0")])
        main(["run", "--config", str(path), "--out", str(tmp_path / "s1"),
              "--seed", "99"])
        a = json.loads((tmp_path / "s0" / "summary.json").read_text())
        b = json.loads((tmp_path / "s1" / "summary.json").read_text())
        assert a["mu"] != b["mu"]
