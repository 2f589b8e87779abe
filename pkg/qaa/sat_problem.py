"""
SAT Problem
MAX 2-SAT instances and alternative diagonal costs: generation, cost tables,
brute-force certification of the optimal assignment.
"""
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidArgumentError
from .helpers import bits_to_index, check_memory_budget, index_to_bits
from .log import get_logger

logger = get_logger(__name__)


class CostKind(str, Enum):
    MAX2SAT = "max2sat"
    GROVER = "grover"
    EXPLICIT = "explicit"


@dataclass(frozen=True, order=True)
class Clause:
    """Disjunction of two literals; neg_x=True means the literal is NOT x."""
    var_a: int
    var_b: int
    neg_a: bool = False
    neg_b: bool = False

    def __post_init__(self):
        if self.var_a == self.var_b:
            raise InvalidArgumentError(f"clause needs two distinct variables, got {self.var_a} twice")
        if min(self.var_a, self.var_b) < 0:
            raise InvalidArgumentError("clause variables must be non-negative")

    def canonical(self):
        if self.var_a < self.var_b:
            return self
        return Clause(self.var_b, self.var_a, self.neg_b, self.neg_a)

    def violated_by(self, index):
        # a literal is false when its bit equals its negation flag
        return ((index >> self.var_a) & 1) == self.neg_a and ((index >> self.var_b) & 1) == self.neg_b

    def flipped(self):
        return Clause(self.var_a, self.var_b, not self.neg_a, not self.neg_b)

    def as_list(self):
        return [self.var_a, self.var_b, bool(self.neg_a), bool(self.neg_b)]


@dataclass(frozen=True)
class Optimum:
    w: int
    cost_min: float
    multiplicity: int

    def w_bits(self, n):
        return index_to_bits(self.w, n)


@dataclass
class Instance:
    n: int
    clauses: Tuple[Clause, ...] = ()
    cost_kind: CostKind = CostKind.MAX2SAT
    marked: Optional[int] = None
    table: Optional[np.ndarray] = field(default=None, repr=False)
    optimum: Optional[Optimum] = None
    seed: Optional[int] = None
    label: str = ""

    def __post_init__(self):
        self.cost_kind = CostKind(self.cost_kind)
        self.clauses = tuple(self.clauses)
        if self.n < 1:
            raise InvalidArgumentError(f"n must be >= 1, got {self.n}")

        if self.cost_kind is CostKind.MAX2SAT:
            if self.n < 2:
                raise InvalidArgumentError("MAX 2-SAT needs n >= 2 (clauses use two distinct variables)")
            seen = set()
            for clause in self.clauses:
                if max(clause.var_a, clause.var_b) >= self.n:
                    raise InvalidArgumentError(f"clause {clause.as_list()} uses a variable >= n={self.n}")
                key = clause.canonical()
                if key in seen:
                    raise InvalidArgumentError(f"duplicate clause {key.as_list()}")
                seen.add(key)
        elif self.cost_kind is CostKind.GROVER:
            if self.marked is None or not 0 <= self.marked < (1 << self.n):
                raise InvalidArgumentError(f"marked string {self.marked} out of range for n={self.n}")
        else:
            if self.table is None:
                raise InvalidArgumentError("explicit cost needs a table")
            self.table = np.asarray(self.table, dtype=np.float64)
            if self.table.shape != (1 << self.n,):
                raise InvalidArgumentError(f"cost table must have length 2^n = {1 << self.n}")

    @property
    def m(self):
        return len(self.clauses)

    @property
    def instance_id(self):
        if self.label:
            return self.label
        return f"{self.cost_kind.value}-n{self.n}-s{self.seed if self.seed is not None else 'x'}"

    def interaction_edges(self):
        """Distinct unordered variable pairs that appear in at least one clause."""
        return sorted({(c.canonical().var_a, c.canonical().var_b) for c in self.clauses})


@dataclass
class CostVector:
    """values[z] = f(z); `target` is the certified optimum index when known."""
    values: np.ndarray
    target: Optional[int] = None

    @property
    def n(self):
        return int(self.values.shape[0]).bit_length() - 1

    @property
    def dim(self):
        return int(self.values.shape[0])


def grover_instance(n, w=0, label=""):
    return Instance(n=n, cost_kind=CostKind.GROVER, marked=int(w), label=label or f"grover-n{n}-w{w}")


def explicit_instance(n, table, label=""):
    return Instance(n=n, cost_kind=CostKind.EXPLICIT, table=table, label=label)


def evaluate_cost(instance, z):
    index = bits_to_index(z, instance.n)
    if instance.cost_kind is CostKind.MAX2SAT:
        return sum(1 for clause in instance.clauses if clause.violated_by(index))
    if instance.cost_kind is CostKind.GROVER:
        return 0 if index == instance.marked else 1
    return float(instance.table[index])


def build_cost_vector(instance):
    n = instance.n
    if instance.cost_kind is CostKind.MAX2SAT and n < 2:
        raise InvalidArgumentError("MAX 2-SAT needs n >= 2")
    check_memory_budget("cost vector", n, itemsize=8 + 8)

    dim = 1 << n
    if instance.cost_kind is CostKind.GROVER:
        values = np.ones(dim, dtype=np.float64)
        values[instance.marked] = 0.0
    elif instance.cost_kind is CostKind.EXPLICIT:
        values = instance.table.astype(np.float64, copy=True)
    else:
        idx = np.arange(dim, dtype=np.int64)
        counts = np.zeros(dim, dtype=np.int64)
        for clause in instance.clauses:
            counts += (((idx >> clause.var_a) & 1) == int(clause.neg_a)) & \
                      (((idx >> clause.var_b) & 1) == int(clause.neg_b))
        values = counts.astype(np.float64)

    target = instance.optimum.w if instance.optimum is not None else None
    return CostVector(values=values, target=target)


def all_canonical_clauses(n):
    """Every canonical clause on n variables: 4 sign patterns per variable pair."""
    return [Clause(a, b, neg_a, neg_b)
            for a, b in combinations(range(n), 2)
            for neg_a in (False, True)
            for neg_b in (False, True)]


def generate_instance(n, m, rng_seed, label=""):
    """
    m distinct canonical clauses drawn uniformly without replacement.

    Deterministic given rng_seed; the clause order is the draw order.
    """
    if n < 2:
        raise InvalidArgumentError("MAX 2-SAT needs n >= 2")
    pool = all_canonical_clauses(n)
    if not 0 <= m <= len(pool):
        raise InvalidArgumentError(f"m={m} exceeds the {len(pool)} distinct clauses on n={n} variables")
    rng = np.random.default_rng(int(rng_seed))
    picks = rng.choice(len(pool), size=m, replace=False)
    clauses = tuple(pool[i] for i in picks)
    return Instance(n=n, clauses=clauses, seed=int(rng_seed), label=label)


def certify_optimum(instance):
    """Exhaustive scan of all 2^n assignments; stores and returns the Optimum."""
    values = build_cost_vector(instance).values
    cost_min = values.min()
    minimizers = np.flatnonzero(values == cost_min)
    if instance.cost_kind is CostKind.EXPLICIT:
        cost_min = float(cost_min)
    else:
        cost_min = int(cost_min)
    optimum = Optimum(w=int(minimizers[0]), cost_min=cost_min, multiplicity=int(minimizers.size))
    instance.optimum = optimum
    logger.debug(f"{instance.instance_id}: cost_min={cost_min} multiplicity={optimum.multiplicity}")
    return optimum


def has_unique_optimum(instance):
    optimum = instance.optimum or certify_optimum(instance)
    return optimum.multiplicity == 1


def require_optimum(instance):
    if instance.optimum is None:
        raise InvalidArgumentError(
            f"instance {instance.instance_id} has no certified optimum; run `qaa certify` first")
    return instance.optimum
