"""
Strategies
Batch drivers over the evolution engine: total-time sweeps, excited-state
starts and randomized path change, plus their summary statistics.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .config import QaaConfig
from .errors import CampaignError, InvalidArgumentError, QaaError
from .evolution import IntegratorConfig, evolve, excited_state, initial_state
from .hamiltonian import Category, ScheduleSpec, sample_extra
from .helpers import child_seed, fmt, run_parallel
from .log import get_logger
from .sat_problem import build_cost_vector, require_optimum
from .spectrum import gap_scan

logger = get_logger(__name__)

DEFAULT_T_GRID = tuple(float(t) for t in range(1, 41))
REFINE_ROUNDS = 3


def _probability(cost, T, extra, initial, config):
    psi0 = initial_state(cost.n) if initial is None else initial
    return evolve(ScheduleSpec(T=float(T), extra=extra), cost, psi0, config).success_probability


def _ratio(numerator, denominator):
    if denominator == 0.0:
        return float("inf") if numerator > 0.0 else float("nan")
    return numerator / denominator


# ==================== T-SWEEP ====================

@dataclass
class SweepPoint:
    T: float
    success_probability: float


@dataclass
class SweepResult:
    instance_id: str
    grid: List[SweepPoint]
    T_max: float
    P_at_Tmax: float
    T_ref: Optional[float] = None
    P_ref: Optional[float] = None

    @property
    def improvement_vs_ref(self):
        if self.P_ref is None:
            return float("nan")
        return _ratio(self.P_at_Tmax, self.P_ref)

    def probability_at(self, T):
        for point in self.grid:
            if point.T == T:
                return point.success_probability
        raise InvalidArgumentError(f"T={T} was not evaluated in this sweep")

    def ratio_at(self, T=10.0):
        """P(T) / P(T_ref) for a fixed T on the grid."""
        if self.P_ref is None:
            raise InvalidArgumentError("sweep ran without a reference time")
        return _ratio(self.probability_at(T), self.P_ref)


def sweep_total_time(instance, T_grid=None, config=None, T_ref=None, reference=True, refine=False,
                     extra=None, n_jobs=None):
    """
    P(T) over a grid of total times, the argmax T_max and P(T_max) / P(T_ref).

    With `refine`, three rounds of local bisection run between the argmax and
    its grid neighbours. The reference time is reused when it is on the grid.
    """
    require_optimum(instance)
    config = config or IntegratorConfig()
    grid = sorted({float(t) for t in (DEFAULT_T_GRID if T_grid is None else T_grid)})
    if not grid:
        raise InvalidArgumentError("T grid is empty")
    if grid[0] < 0:
        raise InvalidArgumentError(f"total times must be >= 0, got {grid[0]}")
    cost = build_cost_vector(instance)

    def evaluate(times):
        return run_parallel(_probability, [(cost, t, extra, None, config) for t in times], n_jobs)

    values = dict(zip(grid, evaluate(grid)))
    if refine and len(grid) > 1:
        for _ in range(REFINE_ROUNDS):
            times = sorted(values)
            j = times.index(max(times, key=lambda t: (values[t], -t)))
            midpoints = []
            if j > 0:
                midpoints.append((times[j - 1] + times[j]) / 2)
            if j + 1 < len(times):
                midpoints.append((times[j] + times[j + 1]) / 2)
            midpoints = [t for t in midpoints if t not in values]
            if not midpoints:
                break
            values.update(zip(midpoints, evaluate(midpoints)))

    points = [SweepPoint(T=t, success_probability=values[t]) for t in sorted(values)]
    best = max(points, key=lambda p: (p.success_probability, -p.T))
    result = SweepResult(instance_id=instance.instance_id, grid=points, T_max=best.T,
                         P_at_Tmax=best.success_probability)
    if reference:
        result.T_ref = float(QaaConfig.T_REF if T_ref is None else T_ref)
        if result.T_ref in values:
            result.P_ref = values[result.T_ref]
        else:
            result.P_ref = _probability(cost, result.T_ref, extra, None, config)
    logger.info(f"{instance.instance_id}: T_max={result.T_max:g} P={result.P_at_Tmax:.6e} "
                f"ratio={result.improvement_vs_ref:.4g}")
    return result


# ==================== EXCITED STARTS ====================

@dataclass
class ExcitedScanResult:
    instance_id: str
    T: float
    per_qubit: List[float]
    ground_probability: Optional[float] = None

    @property
    def average(self):
        return float(np.mean(self.per_qubit))

    @property
    def maximum(self):
        return float(np.max(self.per_qubit))

    def total_probability(self):
        """Sum over the n + 1 orthonormal starts; bounded by 1."""
        return float(np.sum(self.per_qubit)) + (self.ground_probability or 0.0)


def excited_scan(instance, T, config=None, include_ground=True, extra=None, n_jobs=None):
    """Start from each first excited state of H_B in turn and evolve for a fixed T."""
    require_optimum(instance)
    config = config or IntegratorConfig()
    cost = build_cost_vector(instance)
    n = instance.n
    starts = [excited_state(n, k) for k in range(n)]
    if include_ground:
        starts.append(initial_state(n))
    probabilities = run_parallel(_probability, [(cost, T, extra, psi, config) for psi in starts], n_jobs)

    result = ExcitedScanResult(instance_id=instance.instance_id, T=float(T), per_qubit=probabilities[:n],
                               ground_probability=probabilities[n] if include_ground else None)
    logger.info(f"{instance.instance_id}: excited average {result.average:.6e} max {result.maximum:.6e}")
    return result


# ==================== PATH CHANGE ====================

class GapPolicy(str, Enum):
    NONE = "none"
    SELECTED = "selected"
    ALL = "all"


class Selector(str, Enum):
    BEST = "best"
    RANDOM = "random"


@dataclass
class TrialRecord:
    index: int
    seed: int
    success_probability: float
    g_min: Optional[float] = None
    s_at_min: Optional[float] = None
    extra: object = field(default=None, repr=False)

    @property
    def failure(self):
        return min(1.0, max(0.0, 1.0 - self.success_probability))

    def row(self):
        return [self.index, self.seed, fmt(self.success_probability),
                "" if self.g_min is None else fmt(self.g_min),
                "" if self.s_at_min is None else fmt(self.s_at_min)]


def compute_chi(successes):
    """
    Geometric mean of failure probabilities, exp(mean(log(1 - P_i))).

    A trial with P = 1 has failure 0 and makes chi exactly 0.
    """
    successes = np.asarray(list(successes), dtype=np.float64)
    if successes.size == 0:
        raise InvalidArgumentError("chi needs at least one trial")
    failures = np.clip(1.0 - successes, 0.0, 1.0)
    if np.any(failures == 0.0):
        return 0.0
    return float(np.exp(np.mean(np.log(failures))))


@dataclass
class PathChangeCampaign:
    instance_id: str
    category: Category
    T: float
    master_seed: int
    trials: List[TrialRecord]
    random_index: int = 0
    gap_policy: GapPolicy = GapPolicy.NONE
    per_clause: bool = False

    @property
    def chi(self):
        return compute_chi(t.success_probability for t in self.trials)

    @property
    def effective_success(self):
        return 1.0 - self.chi

    @property
    def best_trial(self):
        return max(self.trials, key=lambda t: (t.success_probability, -t.index), default=None)

    @property
    def random_trial(self):
        # None when that trial failed and only partial results exist
        return next((t for t in self.trials if t.index == self.random_index), None)

    @property
    def max_success(self):
        return self.best_trial.success_probability

    def select(self, selector):
        return self.best_trial if Selector(selector) is Selector.BEST else self.random_trial

    def summary_row(self):
        return [self.instance_id, self.category.value, len(self.trials), fmt(self.chi),
                fmt(self.effective_success), fmt(self.max_success), self.best_trial.seed]


def _attach_gap(trial, extra, cost, T, grid_points, refine_iters):
    profile = gap_scan(ScheduleSpec(T=T, extra=extra), cost, grid_points=grid_points, refine_iters=refine_iters)
    trial.g_min, trial.s_at_min = profile.g_min, profile.s_at_min


def _trial_worker(instance, cost, category, index, seed, T, config, per_clause, with_gap, grid_points,
                  refine_iters):
    try:
        extra = sample_extra(instance, category, seed, per_clause=per_clause)
        trial = TrialRecord(index=index, seed=seed,
                            success_probability=_probability(cost, T, extra, None, config), extra=extra)
        if with_gap:
            _attach_gap(trial, extra, cost, T, grid_points, refine_iters)
        return trial
    except QaaError as exc:
        return exc


def path_change_campaign(instance, category, trials=25, T=100.0, seed=0, gap_policy=GapPolicy.NONE,
                         config=None, per_clause=False, grid_points=None, refine_iters=None, n_jobs=None):
    """
    `trials` independent random H_E draws, each evolved for time T.

    Trial i uses child_seed(seed, instance id, category, i). The random trial
    for the gap comparison is drawn from its own child seed, so it does not
    depend on the outcomes.
    """
    require_optimum(instance)
    category = Category(category)
    gap_policy = GapPolicy(gap_policy)
    if trials < 1:
        raise InvalidArgumentError(f"need at least one trial, got {trials}")
    config = config or IntegratorConfig()
    cost = build_cost_vector(instance)
    key = instance.instance_id

    seeds = [child_seed(seed, key, category.value, i) for i in range(trials)]
    random_index = int(np.random.default_rng(child_seed(seed, key, category.value, "random")).integers(trials))
    with_gap = gap_policy is GapPolicy.ALL
    outcomes = run_parallel(
        _trial_worker,
        [(instance, cost, category, i, s, float(T), config, per_clause, with_gap, grid_points, refine_iters)
         for i, s in enumerate(seeds)],
        n_jobs)

    records = [o for o in outcomes if isinstance(o, TrialRecord)]
    failed = [(i, o) for i, o in enumerate(outcomes) if not isinstance(o, TrialRecord)]
    campaign = PathChangeCampaign(instance_id=key, category=category, T=float(T), master_seed=int(seed),
                                  trials=records, random_index=random_index, gap_policy=gap_policy,
                                  per_clause=per_clause)
    if failed:
        index, exc = failed[0]
        raise CampaignError(f"trial {index} failed with {type(exc).__name__}: {exc}", partial=campaign) from exc

    if gap_policy is GapPolicy.SELECTED:
        for trial in {campaign.best_trial.index: campaign.best_trial,
                      campaign.random_trial.index: campaign.random_trial}.values():
            _attach_gap(trial, trial.extra, cost, float(T), grid_points, refine_iters)

    logger.info(f"{key} {category.value}: chi={campaign.chi:.6e} effective={campaign.effective_success:.6e} "
                f"best={campaign.max_success:.6e}")
    return campaign


def gap_success_table(campaigns, selector=Selector.BEST):
    """One row per campaign: the selected trial's success probability and g_min."""
    selector = Selector(selector)
    rows = []
    for campaign in campaigns:
        trial = campaign.select(selector)
        if trial is None:
            raise InvalidArgumentError(
                f"campaign {campaign.instance_id}/{campaign.category.value} has no {selector.value} trial")
        if trial.g_min is None:
            raise InvalidArgumentError(
                f"campaign {campaign.instance_id}/{campaign.category.value} has no gap for trial {trial.index}")
        rows.append({"instance_id": campaign.instance_id, "category": campaign.category.value,
                     "selector": selector.value, "trial": trial.index,
                     "success": trial.success_probability, "g_min": trial.g_min})
    return rows
