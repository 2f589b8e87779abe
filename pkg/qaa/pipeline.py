"""
Pipeline
Hard-instance mining: generate -> certify uniqueness -> mean-field filter ->
full evolution at T_ref -> keep instances with P(T_ref) below the cutoff.

Instance i is generated from child_seed(master_seed, "instance", i) and depends
on nothing else, so the ledger is the same for any number of workers and a
resumed run continues exactly where the ledger stops.
"""
import os
from dataclasses import dataclass, field, replace
from typing import List, Optional

from .config import QaaConfig
from .errors import InvalidArgumentError
from .evolution import IntegratorConfig, evolve, initial_state
from .hamiltonian import ScheduleSpec
from .helpers import child_seed, run_parallel
from .journal import LEDGER_MANIFEST, append_ledger_row, open_ledger, read_instance, read_ledger, write_instance
from .log import get_logger
from .meanfield import MeanFieldResult, meanfield_evolve
from .sat_problem import all_canonical_clauses, build_cost_vector, certify_optimum, generate_instance

logger = get_logger(__name__)

LEDGER_FILE = "ledger.csv"
HARD_DIR = "hard"
FILTER_HEADER = ["instance_id", "final_energy", "cost_min", "excess", "passed_filter", "p_ref"]
FILTER_SUMMARY_HEADER = ["judged", "discarded", "discard_fraction", "false_discards", "false_discard_rate"]


@dataclass(frozen=True)
class MiningConfig:
    n: int = 12
    m: int = 36
    T_ref: float = field(default_factory=lambda: QaaConfig.T_REF)
    hardness_cutoff: float = field(default_factory=lambda: QaaConfig.HARDNESS_CUTOFF)
    mf_threshold: float = field(default_factory=lambda: QaaConfig.MF_THRESHOLD)
    mf_steps: int = field(default_factory=lambda: QaaConfig.MF_STEPS)
    target_count: Optional[int] = None
    max_instances: Optional[int] = None
    master_seed: int = 0
    mode: str = "mine"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    # hard verdicts are re-run with step halving
    verify_hard: bool = True

    def __post_init__(self):
        if not 0.0 < self.hardness_cutoff < 1.0:
            raise InvalidArgumentError(f"hardness cutoff must lie in (0, 1), got {self.hardness_cutoff}")
        if not self.mf_threshold > 0 or not self.T_ref > 0:
            raise InvalidArgumentError("mean-field threshold and T_ref must be positive")
        if self.mode not in ("mine", "calibrate"):
            raise InvalidArgumentError(f"unknown mining mode {self.mode!r}")
        if self.target_count is None and self.max_instances is None:
            raise InvalidArgumentError("set target_count or max_instances")
        if self.n < 2 or not 0 <= self.m <= len(all_canonical_clauses(self.n)):
            raise InvalidArgumentError(f"no MAX 2-SAT instances with n={self.n}, m={self.m}")

    def instance_seed(self, index):
        return child_seed(self.master_seed, "instance", index)


@dataclass
class MiningRecord:
    index: int
    instance_id: str
    seed: int
    unique: bool
    multiplicity: int
    mf_excess: Optional[float] = None
    mf_passed: Optional[bool] = None
    p_ref: Optional[float] = None
    hard: bool = False
    cost_min: Optional[float] = None
    mf_energy: Optional[float] = None
    elapsed: float = field(default=0.0, compare=False)

    def to_row(self):
        return [self.index, self.instance_id, self.seed, self.unique, self.multiplicity,
                self.mf_excess, self.mf_passed, self.p_ref, self.hard, self.cost_min, self.mf_energy]

    def filter_row(self):
        """Mean-field verdict row followed by the full-evolution P(T_ref), if any."""
        verdict = MeanFieldResult(self.instance_id, self.mf_energy, self.cost_min, self.mf_excess, self.mf_passed)
        return [*verdict.row(), self.p_ref]

    @classmethod
    def from_row(cls, row):
        def optional(key, cast):
            return cast(row[key]) if row[key] != "" else None

        return cls(index=int(row["index"]), instance_id=row["instance_id"], seed=int(row["seed"]),
                   unique=row["unique"] == "1", multiplicity=int(row["multiplicity"]),
                   mf_excess=optional("mf_excess", float), mf_passed=optional("mf_passed", lambda v: v == "1"),
                   p_ref=optional("p_ref", float), hard=row["hard"] == "1",
                   cost_min=optional("cost_min", float), mf_energy=optional("mf_energy", float))


@dataclass
class MiningOutcome:
    hard: list
    ledger: List[MiningRecord]
    ledger_path: str


def _process(index, config):
    """Run one instance through every stage it survives."""
    seed = config.instance_seed(index)
    instance = generate_instance(config.n, config.m, seed)
    optimum = certify_optimum(instance)
    record = MiningRecord(index=index, instance_id=instance.instance_id, seed=seed,
                          unique=optimum.multiplicity == 1, multiplicity=optimum.multiplicity,
                          cost_min=float(optimum.cost_min))
    if not record.unique:
        return record, None

    mf = meanfield_evolve(instance, config.T_ref, steps=config.mf_steps, threshold=config.mf_threshold)
    record.mf_energy, record.mf_excess, record.mf_passed = mf.final_energy, mf.excess, mf.passed_filter
    if mf.passed_filter and config.mode == "mine":
        return record, None

    schedule, cost = ScheduleSpec(T=config.T_ref), build_cost_vector(instance)
    result = evolve(schedule, cost, initial_state(config.n), config.integrator)
    record.elapsed = result.elapsed
    if result.success_probability < config.hardness_cutoff and config.verify_hard \
            and not config.integrator.verify_convergence:
        result = evolve(schedule, cost, initial_state(config.n), replace(config.integrator, verify_convergence=True))
        record.elapsed += result.elapsed
    record.p_ref = result.success_probability
    record.hard = record.p_ref < config.hardness_cutoff
    return record, instance if record.hard else None


def load_records(ledger_path):
    records = [MiningRecord.from_row(row) for row in read_ledger(ledger_path)]
    for expected, record in enumerate(records):
        if record.index != expected:
            raise InvalidArgumentError(f"{ledger_path}: ledger index {record.index} where {expected} was expected")
    return records


def mine(config, out_dir, n_jobs=None, manifest=None):
    """
    Stream instances until `target_count` hard ones are found or `max_instances`
    have been generated. Resumes from an existing ledger in `out_dir`.
    """
    manifest_name = manifest.file_name if manifest is not None else LEDGER_MANIFEST
    ledger_path = open_ledger(os.path.join(out_dir, LEDGER_FILE), manifest_name)
    hard_dir = os.path.join(out_dir, HARD_DIR)
    records = load_records(ledger_path)
    hard = [read_instance(os.path.join(hard_dir, f"{r.instance_id}.json")) for r in records if r.hard]
    if records:
        logger.info(f"resuming {ledger_path} at index {len(records)} ({len(hard)} hard so far)")

    def done():
        if config.target_count is not None and len(hard) >= config.target_count:
            return True
        return config.max_instances is not None and len(records) >= config.max_instances

    n_jobs = int(n_jobs or QaaConfig.N_JOBS)
    while not done():
        start = len(records)
        batch = range(start, start + max(1, n_jobs) * 2)
        if config.max_instances is not None:
            batch = range(start, min(batch.stop, config.max_instances))
        results = run_parallel(_process, [(i, config) for i in batch], n_jobs)

        for record, instance in results:
            if instance is not None:
                write_instance(os.path.join(hard_dir, f"{instance.instance_id}.json"), instance, manifest_name)
                hard.append(instance)
            append_ledger_row(ledger_path, record.to_row())
            records.append(record)
            if manifest is not None:
                manifest.stage_timings["evolve"] = manifest.stage_timings.get("evolve", 0.0) + record.elapsed
            if record.hard:
                logger.info(f"hard instance {record.instance_id}: P({config.T_ref:g})={record.p_ref:.3e}")
            if done():
                break

    totals = ledger_totals(records)
    logger.info(f"mined {totals['generated']} instances: {totals['non_unique']} non-unique, "
                f"{totals['filtered_easy']} filtered, {totals['simulated']} simulated, {len(hard)} hard")
    return MiningOutcome(hard=hard, ledger=records, ledger_path=ledger_path)


def ledger_totals(records):
    return {
        "generated": len(records),
        "non_unique": sum(not r.unique for r in records),
        "filtered_easy": sum(bool(r.mf_passed) and r.p_ref is None for r in records),
        "simulated": sum(r.p_ref is not None for r in records),
        "hard": sum(r.hard for r in records),
    }


def success_histogram(ledger):
    """P(T_ref) of every fully simulated instance, in ledger order."""
    values = [r.p_ref for r in ledger if r.p_ref is not None]
    if not values:
        logger.warning("no fully simulated instances in the ledger")
    return values


def filter_report(ledger, low_success=0.2):
    """
    Per-instance filter rows plus the discard fraction and, for calibration
    ledgers, how many discarded instances actually had P(T_ref) <= low_success.
    """
    judged = [r for r in ledger if r.mf_passed is not None]
    rows = [r.filter_row() for r in judged]
    passed = [r for r in judged if r.mf_passed]
    checked = [r for r in passed if r.p_ref is not None]
    summary = {
        "judged": len(judged),
        "discarded": len(passed),
        "discard_fraction": len(passed) / len(judged) if judged else float("nan"),
        "false_discards": sum(r.p_ref <= low_success for r in checked),
        "false_discard_rate": (sum(r.p_ref <= low_success for r in checked) / len(checked)
                               if checked else float("nan")),
    }
    return rows, summary

