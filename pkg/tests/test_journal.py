import json

import numpy as np
import pytest

from qaa.errors import PersistenceError
from qaa.hamiltonian import Category, sample_extra
from qaa.journal import (RunManifest, append_ledger_row, open_ledger, read_extra, read_instance, read_ledger,
                         read_table, write_extra, write_instance, write_table)
from qaa.sat_problem import certify_optimum, explicit_instance, generate_instance, grover_instance


def test_instance_file_keeps_everything(tmp_path, unique_instance):
    path = write_instance(str(tmp_path / "inst.json"), unique_instance)
    loaded = read_instance(path)
    assert loaded.clauses == unique_instance.clauses
    assert loaded.optimum == unique_instance.optimum
    assert loaded.instance_id == "unique-n3"
    with open(path) as f:
        assert json.load(f)["optimum"]["w_bits"] == "101"


def test_instance_file_names_its_manifest(tmp_path, unique_instance):
    path = write_instance(str(tmp_path / "inst.json"), unique_instance, "generate.manifest.json")
    with open(path) as f:
        assert json.load(f)["manifest"] == "generate.manifest.json"
    assert read_instance(path).clauses == unique_instance.clauses


def test_other_cost_kinds_survive(tmp_path):
    grover = grover_instance(3, w=4)
    table = explicit_instance(2, [1.0, 0.25, 3.0, 2.0], label="t")
    certify_optimum(table)
    assert read_instance(write_instance(str(tmp_path / "g.json"), grover)).marked == 4
    loaded = read_instance(write_instance(str(tmp_path / "t.json"), table))
    np.testing.assert_array_equal(loaded.table, table.table)
    assert loaded.optimum.w == 1


def test_wrong_format_version(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text(json.dumps({"format_version": 99, "n": 3}))
    with pytest.raises(PersistenceError):
        read_instance(str(path))


def test_unreadable_instance(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(PersistenceError):
        read_instance(str(path))


def test_extra_file(tmp_path):
    extra = sample_extra(generate_instance(4, 8, rng_seed=1), Category.COMPLEX, rng_seed=6)
    path = str(tmp_path / "extra.json")
    write_extra(path, extra)
    assert read_extra(path) == extra


def test_extra_basis_mismatch(tmp_path):
    extra = sample_extra(generate_instance(4, 8, rng_seed=1), Category.DIAGONAL, rng_seed=6)
    path = tmp_path / "extra.json"
    write_extra(str(path), extra)
    data = json.loads(path.read_text())
    data["category"] = "stoquastic"
    path.write_text(json.dumps(data))
    with pytest.raises(PersistenceError):
        read_extra(str(path))


def test_table_layout(tmp_path):
    path = write_table(str(tmp_path / "t.csv"), ["id", "p", "flag", "missing"],
                       [["a", 0.125, True, None]], "sweep.manifest.json")
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines == ["# manifest: sweep.manifest.json", "id,p,flag,missing", "a,1.25000000000e-01,1,"]
    manifest, header, rows = read_table(path)
    assert manifest == "sweep.manifest.json"
    assert header == ["id", "p", "flag", "missing"]
    assert rows == [{"id": "a", "p": "1.25000000000e-01", "flag": "1", "missing": ""}]


def test_no_temporary_files_left(tmp_path):
    write_table(str(tmp_path / "t.csv"), ["x"], [[1]], "m")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["t.csv"]


def test_ledger_append_and_read(tmp_path):
    path = open_ledger(str(tmp_path / "ledger.csv"))
    append_ledger_row(path, [0, "a", 11, True, 1, 0.25, False, None, False, 2, 2.25])
    rows = read_ledger(path)
    assert rows[0]["instance_id"] == "a"
    assert rows[0]["mf_excess"] == "2.50000000000e-01"
    assert rows[0]["p_ref"] == ""
    assert rows[0]["cost_min"] == "2"
    assert rows[0]["mf_energy"] == "2.25000000000e+00"
    assert read_table(path)[0] == "mine.manifest.json"
    assert open_ledger(path) == path


def test_manifest(tmp_path):
    manifest = RunManifest(command="sweep", seed=4, inputs=["a.json"])
    with manifest.stage("evolve"):
        pass
    manifest.add_output(str(tmp_path / "sweep.csv"))
    path = manifest.save(str(tmp_path))
    with open(path) as f:
        data = json.load(f)
    assert path.endswith("sweep.manifest.json")
    assert data["seed"] == 4
    assert data["outputs"] == ["sweep.csv"]
    assert "evolve" in data["stage_timings"]
    assert data["config"]["T_REF"] > 0
    assert data["version"]


@pytest.mark.parametrize("change", [{"cost_kind": "bogus"}, {"clauses": [[0, 1, False]]}, {"n": "three"}])
def test_malformed_instance_fields(tmp_path, unique_instance, change):
    path = tmp_path / "inst.json"
    write_instance(str(path), unique_instance)
    data = json.loads(path.read_text())
    data.update(change)
    path.write_text(json.dumps(data))
    with pytest.raises(PersistenceError):
        read_instance(str(path))


def test_instance_file_must_be_an_object(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text("[1, 2]")
    with pytest.raises(PersistenceError):
        read_instance(str(path))


@pytest.mark.parametrize("change", [{"category": "bogus"}, {"terms": [{"var_a": 0}]}, {"terms": None}])
def test_malformed_extra_fields(tmp_path, change):
    path = tmp_path / "extra.json"
    write_extra(str(path), sample_extra(generate_instance(4, 8, rng_seed=1), Category.COMPLEX, rng_seed=6))
    data = json.loads(path.read_text())
    data.update(change)
    path.write_text(json.dumps(data))
    with pytest.raises(PersistenceError):
        read_extra(str(path))
