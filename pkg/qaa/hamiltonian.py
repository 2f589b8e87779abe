"""
Hamiltonians
Matrix-free H_B, H_P, random path-change terms H_E and the interpolating H(s).

Qubit i is bit i of the basis index. A two-qubit label "AB" on (var_a, var_b)
means A acts on var_a and B on var_b; its 4x4 matrix is kron(A, B) in the local
basis 2*bit_a + bit_b.
"""
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Optional, Tuple

import numpy as np

from .config import QaaConfig
from .errors import InvalidArgumentError, SamplingError
from .helpers import check_memory_budget, qubit_count
from .kernels_impl.fused import apply_path
from .kernels_impl.utils import EMPTY_MATS, EMPTY_PAIRS, as_state, pack_terms
from .log import get_logger

logger = get_logger(__name__)

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


class Category(str, Enum):
    STOQUASTIC = "stoquastic"
    COMPLEX = "complex"
    DIAGONAL = "diagonal"


BASIS = {
    Category.STOQUASTIC: ("IX", "XI", "ZX", "XZ", "XX", "YY"),
    Category.COMPLEX: ("IX", "XI", "IY", "YI", "ZX", "XZ", "XX", "YY", "ZY", "YZ", "YX", "XY"),
    Category.DIAGONAL: ("IZ", "ZI", "ZZ"),
}


def pauli_matrix(label):
    return np.kron(PAULI[label[0]], PAULI[label[1]])


def term_matrix(labels, coeffs):
    return sum(c * pauli_matrix(label) for label, c in zip(labels, coeffs))


def is_stoquastic(matrix, tol=0.0):
    """Off-diagonal entries real and non-positive."""
    off = matrix[~np.eye(matrix.shape[0], dtype=bool)]
    return bool(np.all(np.abs(off.imag) <= tol) and np.all(off.real <= tol))


@dataclass(frozen=True)
class ExtraTerm:
    var_a: int
    var_b: int
    coeffs: Tuple[float, ...]


@dataclass(frozen=True)
class ExtraHamiltonian:
    category: Category
    terms: Tuple[ExtraTerm, ...]
    seed: Optional[int] = None
    per_clause: bool = False

    @property
    def basis_labels(self):
        return BASIS[Category(self.category)]

    def term_matrices(self):
        return [term_matrix(self.basis_labels, t.coeffs) for t in self.terms]

    @cached_property
    def packed(self):
        pairs = [(t.var_a, t.var_b) for t in self.terms]
        return pack_terms(pairs, self.term_matrices() if self.terms else [])

    @property
    def max_qubit(self):
        return max((max(t.var_a, t.var_b) for t in self.terms), default=-1)


@dataclass(frozen=True)
class ScheduleSpec:
    """Total time T (hbar = 1) and an optional path-change term."""
    T: float
    extra: Optional[ExtraHamiltonian] = None

    def __post_init__(self):
        if not self.T >= 0:
            raise InvalidArgumentError(f"total time must be >= 0, got {self.T}")

    @property
    def has_extra(self):
        return self.extra is not None


def sample_extra(instance, category, rng_seed, per_clause=False):
    """
    One random 2-local term per interaction-graph edge (or per clause).

    Coefficients are independent standard Gaussians normalized to unit square
    sum. Stoquastic terms are redrawn whole until their 4x4 matrix passes
    `is_stoquastic`.
    """
    category = Category(category)
    if instance.m == 0:
        raise InvalidArgumentError("path change needs an instance with at least one clause")

    if per_clause:
        edges = [(c.canonical().var_a, c.canonical().var_b) for c in instance.clauses]
    else:
        edges = instance.interaction_edges()

    labels = BASIS[category]
    rng = np.random.default_rng(int(rng_seed))
    terms = []
    for a, b in edges:
        for _ in range(QaaConfig.STOQUASTIC_MAX_RETRIES):
            coeffs = rng.standard_normal(len(labels))
            coeffs /= np.linalg.norm(coeffs)
            if category is not Category.STOQUASTIC or is_stoquastic(term_matrix(labels, coeffs)):
                break
        else:
            raise SamplingError(
                f"no stoquastic term on ({a},{b}) after {QaaConfig.STOQUASTIC_MAX_RETRIES} draws")
        terms.append(ExtraTerm(int(a), int(b), tuple(float(c) for c in coeffs)))

    logger.debug(f"sampled {category.value} extra with {len(terms)} terms (seed {rng_seed})")
    return ExtraHamiltonian(category=category, terms=tuple(terms), seed=int(rng_seed), per_clause=per_clause)


class PathOperator:
    """
    H(s) = (1-s) H_B + s(1-s) H_E + s H_P as a matrix-free operator.

    Every application, including the pure H_B / H_P / H_E ones, runs the same
    fused kernel with a coefficient triple, so H(0) and H(1) reproduce H_B and
    H_P bit for bit.
    """

    def __init__(self, cost, extra=None):
        values = cost.values if hasattr(cost, "values") else cost
        self.cost = np.ascontiguousarray(values, dtype=np.float64)
        self.dim = self.cost.shape[0]
        self.n = qubit_count(self.dim)
        self.extra = extra
        if extra is not None:
            if extra.max_qubit >= self.n:
                raise InvalidArgumentError(f"extra term acts on qubit {extra.max_qubit}, only {self.n} qubits")
            self.pairs, self.mats = extra.packed
        else:
            self.pairs, self.mats = EMPTY_PAIRS, EMPTY_MATS

    @classmethod
    def from_schedule(cls, schedule, cost):
        return cls(cost, schedule.extra)

    @staticmethod
    def coefficients(s):
        if not 0.0 <= s <= 1.0:
            raise InvalidArgumentError(f"s must lie in [0, 1], got {s}")
        s = float(s)
        return 1.0 - s, s * (1.0 - s), s

    def apply_coeffs(self, c_b, c_e, c_p, state, out=None):
        psi = as_state(state, self.dim)
        if out is None:
            out = np.empty_like(psi)
        return apply_path(psi, self.cost, self.n, float(c_b), float(c_e), float(c_p),
                          self.pairs, self.mats, out)

    def apply(self, s, state, out=None):
        return self.apply_coeffs(*self.coefficients(s), state, out=out)

    def expectation(self, s, state):
        psi = as_state(state, self.dim)
        return np.vdot(psi, self.apply(s, psi))

    def dense(self, s):
        """Explicit matrix of H(s), built column by column; small n only."""
        check_memory_budget("dense Hamiltonian", 2 * self.n, itemsize=16)
        matrix = np.empty((self.dim, self.dim), dtype=np.complex128)
        basis = np.zeros(self.dim, dtype=np.complex128)
        for j in range(self.dim):
            basis[j] = 1.0
            matrix[:, j] = self.apply(s, basis)
            basis[j] = 0.0
        return matrix


@lru_cache(maxsize=8)
def _zero_cost(dim):
    zeros = np.zeros(dim, dtype=np.float64)
    zeros.flags.writeable = False
    return zeros


def apply_hb(state):
    psi = as_state(state)
    return PathOperator(_zero_cost(psi.shape[0])).apply_coeffs(1.0, 0.0, 0.0, psi)


def apply_hp(cost, state):
    op = PathOperator(cost)
    return op.apply_coeffs(0.0, 0.0, 1.0, as_state(state, op.dim))


def apply_extra(extra, state):
    psi = as_state(state)
    return PathOperator(_zero_cost(psi.shape[0]), extra).apply_coeffs(0.0, 1.0, 0.0, psi)


def apply_ht(schedule, cost, s, state):
    """[(1-s) H_B + s(1-s) H_E + s H_P] |state>, H_E taken from the schedule."""
    return PathOperator.from_schedule(schedule, cost).apply(s, state)
