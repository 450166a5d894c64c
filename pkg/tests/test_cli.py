import csv
import json

import numpy as np
import pytest

from etcabs.cli import initial_states, main, read_traces
from etcabs.config import RunConfig, load_config, parse_config
from etcabs.errors import ConfigError
from etcabs.plant import inter_sample_time


def write_config(path, **sections):
    path.write_text(json.dumps(sections))
    return str(path)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    cfg = write_config(d / "cfg.json", simulation={"trace_count": 20, "horizon": 2.0})
    assert main(["abstract", "--config", cfg, "--out", str(d)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(d)]) == 0
    return d, cfg


class TestConfig:
    def test_defaults(self):
        cfg = parse_config({})
        assert cfg.plant.alpha == 0.05 and cfg.abstraction.m_bar == 10
        assert cfg.abstraction.l == 100 and cfg.abstraction.N_conv == 5
        assert cfg.abstraction.sigma_bar == 1.0

    def test_round_trip(self, tmp_path):
        cfg = parse_config({"abstraction": {"m_bar": 12}, "simulation": {"seed": 7}})
        path = tmp_path / "c.json"
        path.write_text(cfg.to_json())
        again = load_config(path)
        assert again.to_dict() == cfg.to_dict()

    @pytest.mark.parametrize("data,field", [
        ({"plant": {"alpha": 1.5}}, "plant.alpha"),
        ({"plant": {"alpha": "x"}}, "plant.alpha"),
        ({"abstraction": {"m_bar": 0}}, "abstraction.m_bar"),
        ({"abstraction": {"l": 2.5}}, "abstraction.l"),
        ({"abstraction": {"sigma_bar": -1}}, "abstraction.sigma_bar"),
        ({"abstraction": {"bogus": 1}}, "abstraction.bogus"),
        ({"simulation": {"seed": -1}}, "simulation.seed"),
        ({"output": {"formats": ["pdf"]}}, "output.formats"),
        ({"plant": {"B": [[0.0], [1.0], [2.0]]}}, "plant"),
        ({"extra": {}}, "extra"),
    ])
    def test_invalid(self, data, field):
        with pytest.raises(ConfigError) as err:
            parse_config(data)
        assert err.value.field == field
        assert str(err.value).startswith(field)

    def test_make_plant(self):
        p = RunConfig().make_plant()
        np.testing.assert_allclose(p.closed_loop, [[0.0, 1.0], [-1.0, -1.0]])


class TestAbstract:
    def test_artifacts(self, run_dir):
        d, _ = run_dir
        for name in ("regions.json", "bounds.json", "bounds.csv", "flowpipes.json",
                     "automaton.json", "automaton.xml", "metadata.json", "timing.json"):
            assert (d / name).exists(), name
        meta = json.loads((d / "metadata.json").read_text())
        assert meta["status"] == "ok" and meta["q"] == 20
        assert 0.089 <= meta["epsilon"] <= 0.149

    def test_bounds_csv(self, run_dir):
        d, _ = run_dir
        rows = list(csv.DictReader(open(d / "bounds.csv")))
        assert [int(r["s"]) for r in rows] == list(range(1, 21))
        for r in rows:
            assert 0 < float(r["tau_lo"]) <= float(r["tau_hi"]) <= 1.0

    def test_sigma_bar_too_small(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", abstraction={"sigma_bar": 1e-4})
        assert main(["abstract", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
        assert "increase the value of sigma_bar" in capsys.readouterr().err

    def test_invalid_config_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", abstraction={"m_bar": -3})
        assert main(["abstract", "--config", cfg, "--out", str(tmp_path)]) == 1
        assert "abstraction.m_bar" in capsys.readouterr().err

    def test_unreadable_config(self, tmp_path):
        assert main(["abstract", "--config", str(tmp_path / "nope.json")]) == 1

    def test_coarse_smoke(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", abstraction={"m_bar": 1, "l": 20, "N_conv": 3})
        assert main(["abstract", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "metadata.json").read_text())["q"] == 2

    def test_threads_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ETCABS_THREADS", "many")
        assert main(["abstract", "--out", str(tmp_path)]) == 1

    def test_parallel_matches_serial(self, run_dir, tmp_path):
        d, cfg = run_dir
        assert main(["abstract", "--config", cfg, "--out", str(tmp_path), "--threads", "2"]) == 0
        for name in ("bounds.json", "automaton.json", "flowpipes.json"):
            assert (tmp_path / name).read_bytes() == (d / name).read_bytes()


class TestSimulate:
    def test_traces(self, run_dir):
        d, _ = run_dir
        traces = read_traces(d / "traces.csv")
        assert len(traces) == 20
        summary = json.loads((d / "traces_summary.json").read_text())
        assert all(e["status"] == "ok" for e in summary)

    def test_seed_determinism(self, run_dir, tmp_path):
        d, cfg = run_dir
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "traces.csv").read_bytes() == (d / "traces.csv").read_bytes()
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--seed", "5"]) == 0
        assert (tmp_path / "traces.csv").read_bytes() != (d / "traces.csv").read_bytes()

    def test_scaled_initial_states(self, plant):
        X = initial_states(2, 10, 3)
        for x in X:
            assert inter_sample_time(plant, x) == inter_sample_time(plant, 17.0 * x)


class TestValidate:
    def test_clean(self, run_dir):
        d, cfg = run_dir
        assert main(["validate", "--config", cfg, "--out", str(d)]) == 0
        rep = json.loads((d / "validation.json").read_text())
        assert rep["bound_violations"] == 0 and rep["transition_violations"] == 0
        assert 0.0 < rep["coverage_ratio"] <= 1.0

    def test_fault_injection(self, run_dir, tmp_path):
        d, cfg = run_dir
        for name in ("automaton.json", "traces.csv"):
            (tmp_path / name).write_bytes((d / name).read_bytes())
        rows = list(csv.reader(open(tmp_path / "traces.csv")))
        rows[5][-2] = repr(float(rows[5][-2]) + 0.5)  # tau_k outside its interval
        with open(tmp_path / "traces.csv", "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        assert main(["validate", "--config", cfg, "--out", str(tmp_path)]) == 3
        rep = json.loads((tmp_path / "validation.json").read_text())
        assert rep["bound_violations"] == 1

    def test_missing_artifacts(self, tmp_path, capsys):
        assert main(["validate", "--out", str(tmp_path)]) == 1
        assert "missing artifact" in capsys.readouterr().err


class TestPlot:
    def test_outputs(self, run_dir):
        d, cfg = run_dir
        assert main(["plot", "--config", cfg, "--out", str(d)]) == 0
        for name in ("bounds.svg", "polar.svg", "transitions.svg", "scatter.svg"):
            text = (d / name).read_text()
            assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
        edges = json.loads((d / "automaton.json").read_text())["edges"]
        assert (d / "transitions.svg").read_text().count('class="edge"') == len(edges)
        rows = list(csv.DictReader(open(d / "bounds_plot.csv")))
        assert len(rows) == 20
        assert (d / "bounds.svg").read_text().count('class="xtick"') == 20

    def test_missing_automaton(self, tmp_path):
        assert main(["plot", "--out", str(tmp_path)]) == 1
