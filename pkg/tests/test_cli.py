"""Command-line interface, file formats and exit codes."""

import json
import math

import numpy as np
import pytest

from densetsp.cli import main
from densetsp.geometry import DensityField, sample_unit_square
from densetsp.io import csv_text, dumps, instance_to_dict, read_instance


def run(*argv) -> int:
    return main([str(a) for a in argv])


def write_config(path, **kv):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kv.items()))
    return path


@pytest.fixture
def instance(tmp_path):
    out = tmp_path / "inst.json"
    assert run("generate", "--r", 0.2, "--s", 0.2, "--N", 4, "--n", 40, "--seed", 1, "--out", out) == 0
    return out


class TestGenerate:
    def test_forty_nodes_in_four_connected_cities(self, instance):
        doc = json.loads(instance.read_text())
        assert len(doc["nodes"]) == 40 and doc["N"] == 4
        inst = read_instance(instance)
        assert inst.contained() and inst.selection.N == 4
        assert (instance.parent / "inst.json.manifest.json").exists()

    def test_inadmissible_geometry(self, tmp_path, capsys):
        code = run("generate", "--r", 0.2, "--s", 0.25, "--N", 2, "--n", 10, "--out", tmp_path / "x.json")
        assert code == 2
        assert "nearest admissible" in capsys.readouterr().err

    def test_same_flags_same_bytes(self, tmp_path, instance):
        again = tmp_path / "again.json"
        run("generate", "--r", 0.2, "--s", 0.2, "--N", 4, "--n", 40, "--seed", 1, "--out", again)
        assert again.read_bytes() == instance.read_bytes()

    def test_poisson_and_checker(self, tmp_path):
        out = tmp_path / "p.json"
        code = run("generate", "--r", 0.2, "--s", 0.2, "--N", 3, "--n", 30, "--process", "poisson",
                   "--density", "checker:2", "--seed", 4, "--out", out)
        assert code == 0
        inst = read_instance(out)
        assert inst.process == "poisson" and inst.density == "checker:2"

    def test_usage_error(self, tmp_path):
        assert run("generate", "--r", 0.2) == 2
        assert run("frobnicate") == 2
        assert run("generate", "--r", 0.2, "--s", 0.2, "--N", 4, "--n", 40, "--process", "x",
                   "--out", tmp_path / "x.json") == 2


class TestRoundTrip:
    def test_bit_exact(self, instance):
        inst = read_instance(instance)
        assert dumps(instance_to_dict(inst)) == instance.read_text()
        doc = json.loads(instance.read_text())
        assert np.array_equal(np.array(doc["nodes"]), inst.nodes)

    def test_csv_uses_seventeen_digits(self):
        text = csv_text(["x"], [[0.1], [1 / 3], [True]])
        assert text.splitlines()[1:] == ["0.10000000000000001", "0.33333333333333331", "1"]


class TestTour:
    def test_merge(self, tmp_path, instance):
        out = tmp_path / "m.json"
        assert run("tour", "--in", instance, "--method", "merge", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert sorted(doc["order"]) == list(range(40))
        assert "merge_trace" in doc

    def test_strips_on_thousand_nodes(self, tmp_path):
        src = tmp_path / "u.json"
        src.write_text(dumps(instance_to_dict(sample_unit_square(DensityField.uniform(), 1000, 3))))
        out = tmp_path / "s.json"
        assert run("tour", "--in", src, "--method", "strips", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["length"] <= doc["certificate"]["bound"] <= 5 * math.sqrt(1000)

    def test_strip_width_flag(self, tmp_path, instance):
        out = tmp_path / "s.json"
        assert run("tour", "--in", instance, "--method", "strips", "--strip-width", 0.25, "--out", out) == 0
        assert json.loads(out.read_text())["certificate"]["c"] == 0.25
        assert run("tour", "--in", instance, "--method", "strips", "--strip-width", 0.3, "--out", out) == 2

    def test_exact_above_cap(self, tmp_path):
        src = tmp_path / "u.json"
        src.write_text(dumps(instance_to_dict(sample_unit_square(DensityField.uniform(), 20, 3))))
        assert run("tour", "--in", src, "--method", "exact", "--out", tmp_path / "e.json") == 3

    def test_exact_small(self, tmp_path):
        src = tmp_path / "u.json"
        src.write_text(dumps(instance_to_dict(sample_unit_square(DensityField.uniform(), 9, 3))))
        assert run("tour", "--in", src, "--method", "exact", "--out", tmp_path / "e.json") == 0

    def test_merge_needs_cities(self, tmp_path):
        src = tmp_path / "u.json"
        src.write_text(dumps(instance_to_dict(sample_unit_square(DensityField.uniform(), 30, 3))))
        assert run("tour", "--in", src, "--method", "merge", "--out", tmp_path / "m.json") == 2

    def test_merge_one_city_is_identity(self, tmp_path):
        src = tmp_path / "one.json"
        run("generate", "--r", 0.2, "--s", 0.2, "--N", 1, "--n", 10, "--seed", 2, "--out", src)
        out = tmp_path / "m.json"
        assert run("tour", "--in", src, "--method", "merge", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["merge_trace"]["steps"] == []
        assert doc["length"] == pytest.approx(doc["city_lengths"][0])

    def test_missing_file(self, tmp_path):
        assert run("tour", "--in", tmp_path / "nope.json", "--method", "strips", "--out", tmp_path / "o") == 2


class TestExperiment:
    def test_scaling_outputs(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", study="scaling", r=0.08, s=0.15, M=0.05, trials=6, seed=2,
                           schedule="64:4,128:8")
        out = tmp_path / "out"
        assert run("experiment", "--config", cfg, "--out", out, "--plot") == 0
        header = (out / "results.csv").read_text().splitlines()[0].split(",")
        for col in ("trial_seed", "n", "N", "r", "s", "V_n", "merged", "b_n", "U_tot", "solver_mix",
                    "V_n_over_b_n", "merged_over_b_n"):
            assert col in header
        assert (out / "plot.svg").read_text().startswith("<svg")
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["points"]) == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "experiment" and manifest["seed"] == 2

    def test_injected_fault_exits_four_with_seed(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.cfg", study="city_trials", r=0.2, s=0.2, N=4, n=40, trials=4,
                           seed=5, inject_fault=2)
        assert run("experiment", "--config", cfg, "--out", tmp_path / "o") == 4
        assert "seed=" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", study="city_trials", tirals=3)
        assert run("experiment", "--config", cfg, "--out", tmp_path / "o") == 2

    def test_regime_violation(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", study="scaling", r=0.2, s=0.2, trials=2, schedule="64:4")
        assert run("experiment", "--config", cfg, "--out", tmp_path / "o") == 2

    @pytest.mark.parametrize("study", ["nn_scaling", "covariance", "unconstrained", "city_trials"])
    def test_every_study_runs(self, tmp_path, study):
        cfg = write_config(tmp_path / "c.cfg", study=study, r=0.2, s=0.2, trials=5, samples=1000,
                           k_schedule="8,16", n="10,40", schedule="40:4", bootstrap=10)
        assert run("experiment", "--config", cfg, "--out", tmp_path / "o", "--plot") == 0
        assert (tmp_path / "o" / "results.csv").exists()
