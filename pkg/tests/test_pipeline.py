import os
from unittest.mock import patch

import pytest

from qaa.errors import InvalidArgumentError, PersistenceError
from qaa.evolution import IntegratorConfig, evolve, initial_state
from qaa.hamiltonian import ScheduleSpec
from qaa.journal import open_ledger, read_instance
from qaa.pipeline import (HARD_DIR, LEDGER_FILE, MiningConfig, MiningRecord, filter_report, ledger_totals,
                          load_records, mine, success_histogram)
from qaa.sat_problem import build_cost_vector

FAST = IntegratorConfig(min_steps=100)


def small_config(**kwargs):
    settings = dict(n=6, m=18, T_ref=5.0, hardness_cutoff=0.9, mf_steps=200, max_instances=6, master_seed=3,
                    integrator=FAST)
    settings.update(kwargs)
    return MiningConfig(**settings)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        small_config(hardness_cutoff=0.0)
    with pytest.raises(InvalidArgumentError):
        small_config(max_instances=None, target_count=None)
    with pytest.raises(InvalidArgumentError):
        small_config(mode="exhaustive")
    with pytest.raises(InvalidArgumentError):
        small_config(n=2, m=5)


def test_mining_ledger_invariants(tmp_path):
    outcome = mine(small_config(), str(tmp_path))
    records = outcome.ledger
    assert [r.index for r in records] == list(range(6))
    totals = ledger_totals(records)
    assert totals["generated"] == totals["non_unique"] + totals["filtered_easy"] + totals["simulated"]
    for record in records:
        assert record.cost_min is not None
        if not record.unique:
            assert record.mf_excess is None and record.mf_energy is None and record.p_ref is None
        else:
            assert record.mf_energy - record.cost_min == pytest.approx(record.mf_excess)
        if record.mf_passed:
            assert record.p_ref is None
        assert record.hard == (record.p_ref is not None and record.p_ref < 0.9)
    for instance in outcome.hard:
        assert instance.optimum.multiplicity == 1
        assert os.path.exists(os.path.join(tmp_path, HARD_DIR, f"{instance.instance_id}.json"))
    reloaded = load_records(outcome.ledger_path)
    assert [(r.instance_id, r.unique, r.hard) for r in reloaded] == [(r.instance_id, r.unique, r.hard) for r in records]


def test_mining_is_reproducible(tmp_path):
    mine(small_config(), str(tmp_path / "a"))
    mine(small_config(), str(tmp_path / "b"), n_jobs=2)
    assert read_bytes(tmp_path / "a" / LEDGER_FILE) == read_bytes(tmp_path / "b" / LEDGER_FILE)


def test_resume_continues_the_ledger(tmp_path):
    mine(small_config(max_instances=3), str(tmp_path / "resumed"))
    mine(small_config(max_instances=6), str(tmp_path / "resumed"))
    mine(small_config(max_instances=6), str(tmp_path / "straight"))
    assert read_bytes(tmp_path / "resumed" / LEDGER_FILE) == read_bytes(tmp_path / "straight" / LEDGER_FILE)


def test_resume_drops_a_torn_row(tmp_path):
    mine(small_config(max_instances=2), str(tmp_path))
    with open(tmp_path / LEDGER_FILE, "a") as f:
        f.write("2,max2sat-n6")
    outcome = mine(small_config(max_instances=3), str(tmp_path))
    assert [r.index for r in outcome.ledger] == [0, 1, 2]


def test_zero_target_mines_nothing(tmp_path):
    outcome = mine(small_config(target_count=0, max_instances=None), str(tmp_path))
    assert outcome.hard == []
    assert outcome.ledger == []


def test_target_stops_at_the_hard_record(tmp_path):
    config = small_config(target_count=1, max_instances=40, hardness_cutoff=0.999, mode="calibrate")
    outcome = mine(config, str(tmp_path))
    assert len(outcome.hard) == 1
    assert outcome.ledger[-1].hard


def test_retained_instances_stay_hard_at_half_step(tmp_path):
    config = small_config(target_count=2, max_instances=20, hardness_cutoff=0.999, mode="calibrate")
    outcome = mine(config, str(tmp_path))
    assert outcome.hard
    p_ref = {r.instance_id: r.p_ref for r in outcome.ledger if r.hard}
    finer = IntegratorConfig(min_steps=2 * FAST.min_steps)
    for instance in outcome.hard:
        result = evolve(ScheduleSpec(T=config.T_ref), build_cost_vector(instance), initial_state(instance.n), finer)
        assert result.success_probability < config.hardness_cutoff
        assert result.success_probability == pytest.approx(p_ref[instance.instance_id], abs=1e-4)


def test_hard_verdicts_are_rechecked(tmp_path):
    config = small_config(max_instances=4, hardness_cutoff=0.999, mode="calibrate")
    with patch("qaa.pipeline.evolve", wraps=evolve) as mock_evolve:
        outcome = mine(config, str(tmp_path), n_jobs=1)
    verified = [c for c in mock_evolve.call_args_list if c.args[3].verify_convergence]
    assert len(verified) == sum(r.hard for r in outcome.ledger)
    assert mock_evolve.call_count == sum(r.p_ref is not None for r in outcome.ledger) + len(verified)


def test_hard_instances_are_readable(tmp_path):
    outcome = mine(small_config(hardness_cutoff=0.999, mode="calibrate"), str(tmp_path))
    for instance in outcome.hard:
        loaded = read_instance(os.path.join(tmp_path, HARD_DIR, f"{instance.instance_id}.json"))
        assert loaded.clauses == instance.clauses
        assert loaded.optimum == instance.optimum


def test_calibrate_simulates_every_unique_instance(tmp_path):
    outcome = mine(small_config(mode="calibrate"), str(tmp_path))
    for record in outcome.ledger:
        assert (record.p_ref is not None) == record.unique


def test_foreign_ledger_is_rejected(tmp_path):
    path = tmp_path / LEDGER_FILE
    path.write_text("a,b,c\n")
    with pytest.raises(PersistenceError):
        open_ledger(str(path))


def test_success_histogram_skips_unsimulated():
    ledger = [MiningRecord(0, "a", 1, True, 1, 0.9, False, 0.3, False),
              MiningRecord(1, "b", 2, True, 1, 0.1, True),
              MiningRecord(2, "c", 3, False, 2)]
    assert success_histogram(ledger) == [0.3]
    assert success_histogram([]) == []


def test_filter_report():
    ledger = [MiningRecord(0, "a", 1, True, 1, 0.9, False, 0.3, False, 1.0, 1.9),
              MiningRecord(1, "b", 2, True, 1, 0.1, True, 0.05, True, 2.0, 2.1),
              MiningRecord(2, "c", 3, True, 1, 0.4, True, 0.8, False, 0.0, 0.4),
              MiningRecord(3, "d", 4, False, 2, cost_min=1.0)]
    rows, summary = filter_report(ledger)
    assert rows == [["a", 1.9, 1.0, 0.9, False, 0.3], ["b", 2.1, 2.0, 0.1, True, 0.05],
                    ["c", 0.4, 0.0, 0.4, True, 0.8]]
    assert summary["discard_fraction"] == pytest.approx(2 / 3)
    assert summary["false_discards"] == 1
    assert summary["false_discard_rate"] == pytest.approx(0.5)
