import json
import os
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from qaa.cli import cli
from qaa.config import VERSION, QaaConfig
from qaa.evolution import IntegratorConfig, evolve, initial_state
from qaa.hamiltonian import ScheduleSpec
from qaa.helpers import fmt
from qaa.journal import read_table, write_instance
from qaa.report import OUTPUTS
from qaa.sat_problem import build_cost_vector, generate_instance


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def instance_file(tmp_path, unique_instance):
    return write_instance(str(tmp_path / "unique.json"), unique_instance)


def run(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


def data_rows(path):
    return read_table(path)[2]


def test_version(runner):
    result = run(runner, "--version")
    assert result.exit_code == 0
    assert VERSION in result.stdout


def test_generate_too_many_clauses(runner, tmp_path):
    result = run(runner, "generate", "--n", 2, "--m", 5, "--out", tmp_path)
    assert result.exit_code == 2
    assert "error class=InvalidArgumentError" in result.stderr


def test_generate_is_deterministic(runner, tmp_path):
    for name in ("a", "b"):
        result = run(runner, "generate", "--n", 6, "--m", 12, "--count", 3, "--seed", 8, "--out", tmp_path / name)
        assert result.exit_code == 0
        assert "unique-optimum fraction" in result.stdout
    for i in range(3):
        with open(tmp_path / "a" / f"instance_{i:04d}.json") as a, open(tmp_path / "b" / f"instance_{i:04d}.json") as b:
            assert a.read() == b.read()
    assert (tmp_path / "a" / "generate.manifest.json").exists()


def test_certify_writes_a_new_file(runner, tmp_path):
    source = write_instance(str(tmp_path / "raw.json"), generate_instance(4, 6, rng_seed=2))
    result = run(runner, "certify", source, "--out", tmp_path / "out")
    assert result.exit_code == 0
    with open(tmp_path / "out" / "raw.certified.json") as f:
        certified = json.load(f)
    assert certified["optimum"] is not None
    assert certified["manifest"] == "certify.manifest.json"
    with open(source) as f:
        assert json.load(f)["optimum"] is None


def test_evolve_at_zero_time(runner, tmp_path, instance_file):
    result = run(runner, "evolve", "--instance", instance_file, "--T", 0, "--out", tmp_path)
    assert result.exit_code == 0
    assert result.stdout.strip() == fmt(2.0 ** -3)


def test_evolve_excited_at_zero_time(runner, tmp_path, instance_file):
    result = run(runner, "evolve", "--instance", instance_file, "--T", 0, "--init", "excited", "--k", 2,
                 "--out", tmp_path)
    assert result.stdout.strip() == fmt(2.0 ** -3)


def test_evolve_matches_library(runner, tmp_path, instance_file, unique_instance):
    result = run(runner, "evolve", "--instance", instance_file, "--T", 2, "--min-steps", 200, "--out", tmp_path)
    expected = evolve(ScheduleSpec(T=2.0), build_cost_vector(unique_instance), initial_state(3),
                      IntegratorConfig(min_steps=200))
    assert result.stdout.strip() == fmt(expected.success_probability)


def test_evolve_writes_trajectory(runner, tmp_path, instance_file):
    result = run(runner, "evolve", "--instance", instance_file, "--T", 1, "--trajectory", "--points", 5,
                 "--min-steps", 100, "--out", tmp_path)
    assert result.exit_code == 0
    manifest, header, rows = read_table(str(tmp_path / "trajectory.csv"))
    assert manifest == "evolve.manifest.json"
    assert header[:2] == ["t", "s"]
    assert len(rows) == 5


def test_evolve_needs_certified_instance(runner, tmp_path):
    source = write_instance(str(tmp_path / "raw.json"), generate_instance(3, 4, rng_seed=1))
    result = run(runner, "evolve", "--instance", source, "--T", 1, "--out", tmp_path)
    assert result.exit_code == 2
    assert "certify" in result.stderr


@pytest.mark.parametrize("change", [{"cost_kind": "bogus"}, {"clauses": [[0, 1, False]]}])
def test_malformed_instance_file(runner, tmp_path, instance_file, change):
    with open(instance_file) as f:
        data = json.load(f)
    data.update(change)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    result = run(runner, "certify", bad, "--out", tmp_path / "out")
    assert result.exit_code == 4
    assert "error class=PersistenceError" in result.stderr


def test_malformed_extra_file(runner, tmp_path, instance_file):
    bad = tmp_path / "extra.json"
    bad.write_text(json.dumps({"format_version": 1, "category": "complex", "terms": [{"var_a": 0}]}))
    result = run(runner, "evolve", "--instance", instance_file, "--T", 0, "--extra", bad, "--out", tmp_path)
    assert result.exit_code == 4
    assert "error class=PersistenceError" in result.stderr


def test_missing_instance_file(runner, tmp_path):
    result = run(runner, "evolve", "--instance", tmp_path / "nope.json", "--T", 1)
    assert result.exit_code == 2
    assert "error class=" in result.stderr


def test_sweep_tables(runner, tmp_path, instance_file):
    outputs = []
    for name in ("a", "b"):
        result = run(runner, "sweep", "--instance", instance_file, "--t-grid", "1,2,3", "--t-ref", 3,
                     "--t-fixed", 2, "--min-steps", 100, "--out", tmp_path / name)
        assert result.exit_code == 0
        with open(tmp_path / name / "sweep.csv") as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]
    assert len(data_rows(str(tmp_path / "a" / "sweep.csv"))) == 3
    (summary,) = data_rows(str(tmp_path / "a" / "sweep_summary.csv"))
    assert summary["instance_id"] == "unique-n3"
    assert float(summary["fixed_ratio"]) > 0


def test_excited_tables(runner, tmp_path, instance_file):
    result = run(runner, "excited", "--instance", instance_file, "--T", 0, "--out", tmp_path)
    assert result.exit_code == 0
    rows = data_rows(str(tmp_path / "excited.csv"))
    assert [r["start"] for r in rows] == ["ground", "0", "1", "2"]
    (summary,) = data_rows(str(tmp_path / "excited_summary.csv"))
    assert float(summary["average"]) == pytest.approx(2.0 ** -3)


def test_pathchange_certain_success_gives_zero_chi(runner, tmp_path, instance_file):
    with patch("qaa.strategies._probability", side_effect=[1.0, 0.5]):
        result = run(runner, "pathchange", "--instance", instance_file, "--category", "diagonal", "--trials", 2,
                     "--T", 1, "--jobs", 1, "--out", tmp_path)
    assert result.exit_code == 0
    assert f"chi={fmt(0.0)}" in result.stdout
    assert f"effective_success={fmt(1.0)}" in result.stdout
    assert len(data_rows(str(tmp_path / "pathchange_trials.csv"))) == 2
    assert not (tmp_path / "gap_success.csv").exists()


def test_pathchange_with_gaps(runner, tmp_path, instance_file):
    with patch.object(QaaConfig, "GRID_POINTS", 21), patch.object(QaaConfig, "REFINE_ITERS", 5):
        result = run(runner, "pathchange", "--instance", instance_file, "--category", "complex", "--trials", 2,
                     "--T", 1, "--gaps", "selected", "--min-steps", 100, "--jobs", 1, "--out", tmp_path)
    assert result.exit_code == 0
    rows = data_rows(str(tmp_path / "gap_success.csv"))
    assert [r["selector"] for r in rows] == ["best", "random"]
    assert all(float(r["g_min"]) > 0 for r in rows)


def test_spectrum(runner, tmp_path, instance_file):
    result = run(runner, "spectrum", "--instance", instance_file, "--points", 11, "--refine-iters", 7,
                 "--out", tmp_path)
    assert result.exit_code == 0
    assert result.stdout.startswith("g_min=")
    assert len(data_rows(str(tmp_path / "spectrum.csv"))) == 11
    (gap,) = data_rows(str(tmp_path / "gap.csv"))
    assert float(gap["g_min"]) > 0
    assert list(gap) == ["instance_id", "g_min", "s_at_min", "grid_points", "refine_iters"]
    assert gap["instance_id"] == "unique-n3"
    assert (int(gap["grid_points"]), int(gap["refine_iters"])) == (11, 7)
    assert 0.0 <= float(gap["s_at_min"]) <= 1.0


def test_meanfield(runner, instance_file):
    result = run(runner, "meanfield", "--instance", instance_file, "--T", 10, "--steps", 400)
    assert result.exit_code == 0
    assert "passed_filter=" in result.stdout


def test_mine(runner, tmp_path):
    result = run(runner, "mine", "--n", 6, "--m", 18, "--max-instances", 3, "--t-ref", 5, "--cutoff", 0.9,
                 "--min-steps", 100, "--mode", "calibrate", "--out", tmp_path)
    assert result.exit_code == 0
    assert "generated=3" in result.stdout
    manifest, _, ledger = read_table(str(tmp_path / "ledger.csv"))
    assert manifest == "mine.manifest.json"
    assert len(ledger) == 3
    for path in (tmp_path / "hard").glob("*.json"):
        assert json.loads(path.read_text())["manifest"] == "mine.manifest.json"
    assert "false_discard_rate=" in result.stdout
    _, header, rows = read_table(str(tmp_path / "filter_report.csv"))
    assert header == ["instance_id", "final_energy", "cost_min", "excess", "passed_filter", "p_ref"]
    for row in rows:
        assert float(row["final_energy"]) - float(row["cost_min"]) == pytest.approx(float(row["excess"]), abs=1e-9)
        assert row["passed_filter"] in ("0", "1")
    (summary,) = data_rows(str(tmp_path / "filter_summary.csv"))
    assert int(summary["judged"]) == len(rows)
    assert "false_discard_rate" in summary
    assert (tmp_path / "mine.manifest.json").exists()


def test_report_on_empty_input(runner, tmp_path):
    (tmp_path / "runs").mkdir()
    result = run(runner, "report", "--input", tmp_path / "runs", "--out", tmp_path / "report")
    assert result.exit_code == 0
    for name, (header, _, _) in OUTPUTS.items():
        manifest, found_header, rows = read_table(str(tmp_path / "report" / name))
        assert found_header == header
        assert rows == []


def test_report_collects_sweeps(runner, tmp_path, instance_file):
    run(runner, "sweep", "--instance", instance_file, "--t-grid", "1,2", "--t-ref", 2, "--min-steps", 100,
        "--out", tmp_path / "runs" / "sweep")
    result = run(runner, "report", "--input", tmp_path / "runs", "--out", tmp_path / "report", "--plot-scripts")
    assert result.exit_code == 0
    assert len(data_rows(str(tmp_path / "report" / "sweep_curves.csv"))) == 2
    assert len(data_rows(str(tmp_path / "report" / "tmax_values.csv"))) == 1
    assert (tmp_path / "report" / "plot_sweep_curves.py").exists()


def test_default_output_directory(runner, tmp_path, monkeypatch, instance_file):
    monkeypatch.setattr(QaaConfig, "OUTPUT_DIR", str(tmp_path / "default"))
    result = run(runner, "evolve", "--instance", instance_file, "--T", 0)
    assert result.exit_code == 0
    assert os.path.exists(tmp_path / "default" / "evolve.manifest.json")
