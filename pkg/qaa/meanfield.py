"""
Mean Field
Product-state (spin-coherent) approximation of the annealing path, used as the
cheap pre-filter that discards easy instances before full simulation.

Each qubit is a Bloch vector m_i = (<X>, <Y>, <Z>) with <Z> = +1 on bit 0. The
energy of the product state is

    E(s) = (1 - s) * sum_i (1 - m_x^i) / 2 + s * f_MF(m_z)

and the vectors precess in the field -grad E, which is the exact Heisenberg
motion of a product state under a non-interacting Hamiltonian.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import QaaConfig
from .errors import InvalidArgumentError, MeanFieldError
from .helpers import bits_to_index, check_memory_budget
from .log import get_logger
from .sat_problem import CostKind, build_cost_vector, certify_optimum

logger = get_logger(__name__)

NORM_TOLERANCE = 1e-6


@dataclass
class BlochConfig:
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.array(self.vectors, dtype=np.float64, ndmin=2)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != 3:
            raise InvalidArgumentError(f"Bloch config must be (n, 3), got {self.vectors.shape}")
        deviation = self.norm_deviation()
        if deviation > NORM_TOLERANCE:
            raise InvalidArgumentError(f"Bloch vectors must be unit length (deviation {deviation:.2e})")

    @property
    def n(self):
        return self.vectors.shape[0]

    def norm_deviation(self):
        return float(np.max(np.abs(np.linalg.norm(self.vectors, axis=1) - 1.0)))

    @classmethod
    def aligned_x(cls, n):
        """All spins along +x: the ground state of H_B."""
        vectors = np.zeros((n, 3))
        vectors[:, 0] = 1.0
        return cls(vectors)

    @classmethod
    def from_assignment(cls, z, n):
        index = bits_to_index(z, n)
        vectors = np.zeros((n, 3))
        vectors[:, 2] = [1.0 - 2.0 * ((index >> i) & 1) for i in range(n)]
        return cls(vectors)

    @classmethod
    def from_angles(cls, theta, phi):
        theta, phi = np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
        return cls(np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1))


@dataclass
class MeanFieldResult:
    instance_id: str
    final_energy: float
    cost_min: float
    excess: float
    passed_filter: bool
    final_config: Optional[BlochConfig] = field(default=None, repr=False)

    def row(self):
        return [self.instance_id, self.final_energy, self.cost_min, self.excess, self.passed_filter]


class _ClausePolynomial:
    """sum over clauses of (1 + sa m_a)(1 + sb m_b) / 4, sa = +1 for a plain literal."""

    def __init__(self, clauses):
        self.a = np.array([c.var_a for c in clauses], dtype=np.int64)
        self.b = np.array([c.var_b for c in clauses], dtype=np.int64)
        self.sa = np.array([-1.0 if c.neg_a else 1.0 for c in clauses])
        self.sb = np.array([-1.0 if c.neg_b else 1.0 for c in clauses])

    def value_and_gradient(self, mz):
        ua = 1.0 + self.sa * mz[self.a]
        ub = 1.0 + self.sb * mz[self.b]
        grad = np.zeros_like(mz)
        np.add.at(grad, self.a, 0.25 * self.sa * ub)
        np.add.at(grad, self.b, 0.25 * self.sb * ua)
        return 0.25 * float(np.sum(ua * ub)), grad


class _TablePolynomial:
    """Multilinear extension of an arbitrary cost table, by successive contraction."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        self.n = self.values.shape[0].bit_length() - 1

    def _contract(self, weights):
        # C order: leading axis of the reshaped table is the highest qubit
        out = self.values
        for qubit in range(self.n - 1, -1, -1):
            out = weights[qubit] @ out.reshape(2, -1)
        return float(out[0])

    def value_and_gradient(self, mz):
        weights = np.stack([(1.0 + mz) / 2.0, (1.0 - mz) / 2.0], axis=1)
        value = self._contract(weights)
        grad = np.empty_like(mz)
        for i in range(self.n):
            w = weights.copy()
            w[i] = (0.5, -0.5)
            grad[i] = self._contract(w)
        return value, grad


def diagonal_polynomial(instance):
    if instance.cost_kind is CostKind.MAX2SAT:
        return _ClausePolynomial(instance.clauses)
    check_memory_budget("mean-field cost table", instance.n, itemsize=8)
    return _TablePolynomial(build_cost_vector(instance).values)


def _energy_and_field(poly, s, vectors):
    """E(s) and the effective field b = -grad E for every spin."""
    f_mf, grad = poly.value_and_gradient(vectors[:, 2])
    energy = (1.0 - s) * float(np.sum(1.0 - vectors[:, 0])) / 2.0 + s * f_mf
    b = np.zeros_like(vectors)
    b[:, 0] = (1.0 - s) / 2.0
    b[:, 2] = -s * grad
    return energy, b


def meanfield_energy(instance, s, config):
    if config.n != instance.n:
        raise InvalidArgumentError(f"Bloch config has {config.n} spins, instance has n={instance.n}")
    if not 0.0 <= s <= 1.0:
        raise InvalidArgumentError(f"s must lie in [0, 1], got {s}")
    energy, _ = _energy_and_field(diagonal_polynomial(instance), float(s), config.vectors)
    return energy


def _rate(poly, s, vectors):
    _, b = _energy_and_field(poly, s, vectors)
    # dm/dt = 2 m x b, i.e. Heisenberg precession about grad E
    return 2.0 * np.cross(vectors, b)


def meanfield_evolve(instance, T, steps=None, threshold=None, initial=None):
    """Precess all spins from +x along s = t / T and judge the final energy."""
    if not T > 0:
        raise InvalidArgumentError(f"mean-field evolution needs T > 0, got {T}")
    steps = int(steps or QaaConfig.MF_STEPS)
    threshold = QaaConfig.MF_THRESHOLD if threshold is None else threshold
    optimum = instance.optimum or certify_optimum(instance)

    poly = diagonal_polynomial(instance)
    m = (initial or BlochConfig.aligned_x(instance.n)).vectors.copy()
    h = T / steps
    for k in range(steps):
        s0, s_mid, s1 = k / steps, (k + 0.5) / steps, (k + 1) / steps
        k1 = _rate(poly, s0, m)
        k2 = _rate(poly, s_mid, m + (h / 2) * k1)
        k3 = _rate(poly, s_mid, m + (h / 2) * k2)
        k4 = _rate(poly, s1, m + h * k3)
        m = m + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(m)):
            raise MeanFieldError(f"non-finite Bloch vectors at step {k} (T={T})")
        m /= np.linalg.norm(m, axis=1, keepdims=True)

    final = BlochConfig(m)
    final_energy, _ = _energy_and_field(poly, 1.0, m)
    excess = final_energy - float(optimum.cost_min)
    result = MeanFieldResult(instance_id=instance.instance_id, final_energy=final_energy,
                             cost_min=float(optimum.cost_min), excess=excess,
                             passed_filter=apply_filter(excess, threshold), final_config=final)
    logger.debug(f"{instance.instance_id}: mean-field energy {final_energy:.6f} (excess {excess:.4f})")
    return result


def apply_filter(result, threshold=None):
    """True (easy, discard) iff excess <= threshold."""
    threshold = QaaConfig.MF_THRESHOLD if threshold is None else threshold
    excess = result.excess if isinstance(result, MeanFieldResult) else float(result)
    return bool(excess <= threshold)
