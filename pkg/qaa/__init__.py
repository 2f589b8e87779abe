"""
QAA Simulation Package
"""
from .config import VERSION as __version__
from .sat_problem import (Clause, CostKind, Instance, build_cost_vector, certify_optimum, evaluate_cost,
                          explicit_instance, generate_instance, grover_instance)
from .hamiltonian import Category, PathOperator, ScheduleSpec, apply_ht, sample_extra
from .evolution import IntegratorConfig, ObservationPlan, evolve, excited_state, initial_state
from .spectrum import gap_scan, lowest_eigenpairs
from .meanfield import BlochConfig, apply_filter, meanfield_energy, meanfield_evolve
from .strategies import compute_chi, excited_scan, gap_success_table, path_change_campaign, sweep_total_time
from .pipeline import MiningConfig, mine, success_histogram
