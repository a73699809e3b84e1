import json

import numpy as np
import pytest

from buffernet.cli import main
from buffernet.config import ConfigError, load_config

E1_CONFIG = {
    "nodes": 2,
    "edges": [{"from": 1, "to": 2, "weight": 1.0}],
    "origins": [1],
    "destinations": [2],
    "alpha": 0.0,
    "bounds": {"beta_bar": 2.0, "delta_bar": 2.0},
    "params": {"beta": {"2": 1.0}, "delta": {"1->2": 1.0}},
    "costs": {"budget": 3.0},
}

TWO_MODE_CONFIG = {
    "nodes": 2,
    "edges": [{"from": 1, "to": 2, "weight": [1.0, 1.3]}],
    "origins": [1],
    "destinations": [2],
    "markov": {"rates": [[-1.0, 1.0], [1.0, -1.0]]},
    "bounds": {"beta_bar": 2.0, "delta_bar": 2.0},
    "params": {"beta": 1.0, "delta": 1.0},
}

UNSTABLE_CONFIG = {
    "nodes": 4,
    "edges": [
        {"from": 1, "to": 2, "weight": 1.0},
        {"from": 1, "to": 4, "weight": 1.0},
        {"from": 2, "to": 3, "weight": 1.0},
        {"from": 3, "to": 2, "weight": 1.0},
    ],
    "origins": [1],
    "destinations": [4],
    "params": {"beta": 1.0, "delta": 1.0},
}


def write_config(tmp_path, data, name="net.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=1))
    return str(path)


class TestConfigLoading:
    def test_e1_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path, E1_CONFIG))
        assert cfg.net.n == 2 and cfg.net.N == 1
        assert cfg.params.beta[2] == 1.0
        assert cfg.bounds.delta_bar[(1, 2)] == 2.0
        assert cfg.cost.budget == 3.0
        assert cfg.cost.g[2] == ((1.0, 1.0),)  # default linear cost

    def test_per_mode_weights(self, tmp_path):
        cfg = load_config(write_config(tmp_path, TWO_MODE_CONFIG))
        assert cfg.net.N == 2
        assert cfg.net.graphs[0].edges[0].weight == 1.0
        assert cfg.net.graphs[1].edges[0].weight == 1.3

    def test_unknown_top_level_key_rejected(self, tmp_path):
        bad = dict(E1_CONFIG, typo_key=1)
        with pytest.raises(ConfigError, match="typo_key"):
            load_config(write_config(tmp_path, bad))

    def test_unknown_nested_key_rejected(self, tmp_path):
        bad = json.loads(json.dumps(E1_CONFIG))
        bad["edges"][0]["wieght"] = 2.0
        with pytest.raises(ConfigError, match="wieght"):
            load_config(write_config(tmp_path, bad))

    def test_malformed_json_reports_line_and_column(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "nodes": 2,\n  "edges": [}\n}')
        with pytest.raises(ConfigError, match=r"line 3, column 13"):
            load_config(str(path))

    def test_missing_required_key(self, tmp_path):
        bad = {k: v for k, v in E1_CONFIG.items() if k != "origins"}
        with pytest.raises(ConfigError, match="origins"):
            load_config(write_config(tmp_path, bad))

    def test_weight_mode_count_mismatch(self, tmp_path):
        bad = json.loads(json.dumps(TWO_MODE_CONFIG))
        bad["edges"][0]["weight"] = [1.0, 1.3, 2.0]
        with pytest.raises(ConfigError, match="3 entries"):
            load_config(write_config(tmp_path, bad))

    def test_custom_cost_terms(self, tmp_path):
        data = json.loads(json.dumps(E1_CONFIG))
        data["costs"]["h"] = {"1->2": [{"c": 2.0, "a": 2.0}]}
        cfg = load_config(write_config(tmp_path, data))
        assert cfg.cost.h[(1, 2)] == ((2.0, 2.0),)


class TestCliAnalyze:
    def test_report_values(self, tmp_path, capsys):
        cfg = write_config(tmp_path, E1_CONFIG)
        out = tmp_path / "out"
        assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
        rows = dict(
            line.split(",", 1)
            for line in (out / "report.csv").read_text().strip().splitlines()[1:]
        )
        assert float(rows["gamma_l1"]) == pytest.approx(2.0, abs=1e-6)
        assert float(rows["gamma_linf"]) == pytest.approx(1.0, abs=1e-6)
        assert rows["stable"] == "true"

    def test_malformed_json_exit_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{не json")
        assert main(["analyze", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["analyze", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2

    def test_unstable_exit_3(self, tmp_path, caplog):
        cfg = write_config(tmp_path, UNSTABLE_CONFIG)
        assert main(["analyze", "--config", cfg, "--out", str(tmp_path)]) == 3
        assert "abscissa" in caplog.text


class TestCliOptimize:
    def test_l1_budget(self, tmp_path):
        cfg = write_config(tmp_path, E1_CONFIG)
        out = tmp_path / "run"
        code = main(
            ["optimize", "--config", cfg, "--out", str(out), "--seed", "0",
             "--objective", "l1", "--budget", "3.0", "--multistarts", "4"]
        )
        assert code == 0
        rows = {}
        for line in (out / "solution.csv").read_text().strip().splitlines()[1:]:
            kind, name, value = line.split(",", 2)
            rows[name] = value
        assert float(rows["gamma"]) == pytest.approx(4.0 / 3.0, rel=0.01)
        assert float(rows["beta[2]"]) == pytest.approx(1.5, rel=0.02)
        assert (out / "trace.csv").exists()

    def test_linf_gamma_bound(self, tmp_path):
        cfg = write_config(tmp_path, E1_CONFIG)
        out = tmp_path / "run"
        code = main(
            ["optimize", "--config", cfg, "--out", str(out), "--seed", "0",
             "--objective", "linf", "--gamma-bound", "1.0", "--multistarts", "4"]
        )
        assert code == 0
        text = (out / "solution.csv").read_text()
        cost = [l.split(",")[2] for l in text.splitlines() if l.startswith("metric,cost")][0]
        assert float(cost) == pytest.approx(2.0, rel=0.01)

    def test_infeasible_exit_4(self, tmp_path):
        cfg = write_config(tmp_path, E1_CONFIG)
        code = main(
            ["optimize", "--config", cfg, "--out", str(tmp_path), "--seed", "0",
             "--objective", "linf", "--gamma-bound", "0.4", "--multistarts", "2"]
        )
        assert code == 4

    def test_missing_budget_exit_2(self, tmp_path):
        data = json.loads(json.dumps(E1_CONFIG))
        del data["costs"]
        cfg = write_config(tmp_path, data)
        code = main(
            ["optimize", "--config", cfg, "--out", str(tmp_path), "--seed", "0", "--objective", "l1"]
        )
        assert code == 2

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, E1_CONFIG)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(
                ["optimize", "--config", cfg, "--out", str(out), "--seed", "7",
                 "--objective", "l1", "--budget", "2.8", "--multistarts", "3"]
            ) == 0
            outs.append((out / "solution.csv").read_bytes() + (out / "trace.csv").read_bytes())
        assert outs[0] == outs[1]


class TestCliSimulate:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = write_config(tmp_path, TWO_MODE_CONFIG)
        outs = []
        for name in ("s1", "s2"):
            out = tmp_path / name
            code = main(
                ["simulate", "--config", cfg, "--out", str(out), "--seed", "42",
                 "--horizon", "2.0", "--n-traj", "20", "--store", "2"]
            )
            assert code == 0
            assert (out / "trajectory_000.csv").exists()
            assert (out / "trajectory_001.csv").exists()
            header = (out / "trajectory_000.csv").read_text().splitlines()[0]
            assert header == "t,mode,x_1,x_2,y_1,y_2,y_3"
            outs.append(
                (out / "mean_output.csv").read_bytes() + (out / "empirical.csv").read_bytes()
            )
        assert outs[0] == outs[1]

    def test_pulse_reports_l1_estimate(self, tmp_path):
        cfg = write_config(tmp_path, E1_CONFIG)
        out = tmp_path / "sim"
        code = main(
            ["simulate", "--config", cfg, "--out", str(out), "--seed", "1",
             "--horizon", "16.0", "--n-traj", "2", "--input", "pulse"]
        )
        assert code == 0
        lines = (out / "empirical.csv").read_text().strip().splitlines()
        norm, value, _ = lines[1].split(",")
        assert norm == "l1"
        assert float(value) == pytest.approx(2.0, rel=0.05)


class TestCliCompare:
    def test_e1_ratio_table(self, tmp_path):
        cfg = write_config(tmp_path, E1_CONFIG)
        out = tmp_path / "cmp"
        code = main(
            ["compare-gp", "--config", cfg, "--out", str(out), "--seed", "0",
             "--budgets", "2.2,2.6,3.0", "--multistarts", "2"]
        )
        assert code == 0
        lines = (out / "compare.csv").read_text().strip().splitlines()
        assert lines[0] == "budget,gamma_dc,gamma_gp,ratio"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 3
        for row in rows:
            assert float(row[3]) == pytest.approx(1.0, abs=1e-6)  # sharing vacuous on a chain
        gammas = [float(r[1]) for r in rows]
        assert all(a >= b - 1e-9 for a, b in zip(gammas, gammas[1:]))
