"""
Evolution
Integrates i d|psi>/dt = H(t)|psi> from t=0 to t=T and reads out P(T) = |<w|psi(T)>|^2.

Default integrator is the fourth-order commutator-free exponential scheme
(two exponentials per step, each applied with a Lanczos propagator); `rk4`
is the classical Runge-Kutta alternative. States are never renormalized
during integration; the norm drift is measured and reported.
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .config import QaaConfig
from .errors import IntegrationQualityError, InvalidArgumentError, NonConvergenceError
from .hamiltonian import PathOperator
from .kernels_impl.utils import as_state
from .log import get_logger
from .spectrum import eigenpairs_of

logger = get_logger(__name__)

NORM_DRIFT_LIMIT = 1e-6

_SQRT3 = math.sqrt(3.0)
_NODES = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)
_WEIGHTS = ((3.0 - 2.0 * _SQRT3) / 12.0, (3.0 + 2.0 * _SQRT3) / 12.0)


@dataclass(frozen=True)
class IntegratorConfig:
    base_step: float = field(default_factory=lambda: QaaConfig.BASE_STEP)
    tolerance: float = field(default_factory=lambda: QaaConfig.TOLERANCE)
    max_steps: int = field(default_factory=lambda: QaaConfig.MAX_STEPS)
    min_steps: int = field(default_factory=lambda: QaaConfig.MIN_STEPS)
    method: str = field(default_factory=lambda: QaaConfig.INTEGRATOR)
    verify_convergence: bool = field(default_factory=lambda: QaaConfig.VERIFY_CONVERGENCE)
    krylov_dim: int = field(default_factory=lambda: QaaConfig.KRYLOV_DIM)
    krylov_tol: float = field(default_factory=lambda: QaaConfig.KRYLOV_TOL)

    def __post_init__(self):
        if not self.base_step > 0:
            raise InvalidArgumentError(f"base_step must be > 0, got {self.base_step}")
        if not self.tolerance > 0:
            raise InvalidArgumentError(f"tolerance must be > 0, got {self.tolerance}")
        if self.method not in ("magnus4", "rk4"):
            raise InvalidArgumentError(f"unknown integrator {self.method!r}")

    def nominal_step(self, T):
        """h = min(base_step, T / min_steps)."""
        if T <= 0:
            return self.base_step
        return min(self.base_step, T / self.min_steps)


@dataclass(frozen=True)
class ObservationPlan:
    """Uniform s-grid of trajectory samples; overlaps use the lowest `k` eigenstates."""
    points: int = field(default_factory=lambda: QaaConfig.TRAJECTORY_POINTS)
    overlaps: bool = True
    k: int = 2

    def grid(self):
        return np.linspace(0.0, 1.0, max(2, int(self.points)))


@dataclass
class TrajectorySample:
    t: float
    s: float
    energy_expectation: float
    overlap_ground: float
    overlap_first_excited: float
    norm: float


@dataclass
class EvolutionResult:
    success_probability: float
    final_norm_drift: float
    steps: int = 0
    step_size: float = 0.0
    trajectory: Optional[List[TrajectorySample]] = None
    final_state: Optional[np.ndarray] = field(default=None, repr=False)
    elapsed: float = 0.0


def initial_state(n):
    """Uniform superposition, the ground state of H_B."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    return np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)


def excited_state(n, k):
    """|-> on qubit k, |+> elsewhere: an H_B eigenstate with eigenvalue 1."""
    if not 0 <= k < n:
        raise InvalidArgumentError(f"qubit index {k} out of range for n={n}")
    psi = initial_state(n)
    idx = np.arange(1 << n)
    psi[((idx >> k) & 1) == 1] *= -1.0
    return psi


class KrylovExponential:
    """
    exp(-i dt A) v for a Hermitian A given only through matvecs.

    Lanczos with full reorthogonalization; the subspace grows until the
    standard a-posteriori error estimate drops below `tol`. If `max_dim` is
    reached the step is split in two exponentials of half length.
    """

    def __init__(self, dim, max_dim, tol):
        self.max_dim = max(2, int(max_dim))
        self.tol = tol
        self.V = np.empty((self.max_dim + 1, dim), dtype=np.complex128)
        self.last_dim = 0

    def apply(self, matvec, v, dt, depth=0):
        beta0 = np.linalg.norm(v)
        if beta0 == 0.0:
            return np.zeros_like(v)
        V = self.V
        V[0] = v / beta0
        alpha, beta = [], []
        for j in range(self.max_dim):
            w = matvec(V[j], V[j + 1])
            a = np.vdot(V[j], w).real
            w -= a * V[j]
            if j > 0:
                w -= beta[j - 1] * V[j - 1]
            w -= (V[:j + 1].conj() @ w) @ V[:j + 1]
            b = np.linalg.norm(w)
            alpha.append(a)

            if j == 0:
                evals, evecs = np.array(alpha), np.ones((1, 1))
            else:
                evals, evecs = eigh_tridiagonal(np.array(alpha), np.array(beta))
            coeffs = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :])
            err = beta0 * b * abs(coeffs[-1])
            if b < 1e-14 or err < self.tol:
                self.last_dim = j + 1
                return beta0 * (coeffs @ V[:j + 1])
            beta.append(b)
            w /= b

        if depth > 20:
            raise NonConvergenceError(f"Krylov exponential did not converge for dt={dt}")
        half = self.apply(matvec, v, dt / 2.0, depth + 1)
        return self.apply(matvec, half, dt / 2.0, depth + 1)


class _Stepper:
    """One integration step on a PathOperator with schedule s = t / T."""

    def __init__(self, op, T, config):
        self.op = op
        self.T = T
        self.method = config.method
        if self.method == "magnus4":
            self.krylov = KrylovExponential(op.dim, config.krylov_dim, config.krylov_tol)

    def _coeffs(self, t):
        s = min(1.0, max(0.0, t / self.T))
        return np.array(PathOperator.coefficients(s))

    def step(self, psi, t, h):
        if self.method == "rk4":
            return self._rk4(psi, t, h)
        g1 = self._coeffs(t + _NODES[0] * h)
        g2 = self._coeffs(t + _NODES[1] * h)
        for c in (_WEIGHTS[1] * g1 + _WEIGHTS[0] * g2, _WEIGHTS[0] * g1 + _WEIGHTS[1] * g2):
            matvec = lambda x, out, c=c: self.op.apply_coeffs(c[0], c[1], c[2], x, out=out)
            psi = self.krylov.apply(matvec, psi, h)
        return psi

    def _rk4(self, psi, t, h):
        def f(tt, x):
            return -1j * self.op.apply_coeffs(*self._coeffs(tt), x)
        k1 = f(t, psi)
        k2 = f(t + h / 2, psi + (h / 2) * k1)
        k3 = f(t + h / 2, psi + (h / 2) * k2)
        k4 = f(t + h, psi + h * k3)
        return psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _segment_steps(length, h):
    return max(1, int(math.ceil(abs(length) / h - 1e-9)))


def propagate(op, T, state, t_start, t_end, config=None, h=None):
    """
    Integrate from t_start to t_end (either direction) on the path s = t / T.

    Returns (state, steps taken).
    """
    config = config or IntegratorConfig()
    if T <= 0 or t_start == t_end:
        return as_state(state, op.dim).copy(), 0
    h = h or config.nominal_step(T)
    steps = _segment_steps(t_end - t_start, h)
    if steps > config.max_steps:
        raise NonConvergenceError(f"{steps} steps needed, max_steps={config.max_steps}", steps=steps)
    dt = (t_end - t_start) / steps
    stepper = _Stepper(op, T, config)
    psi = as_state(state, op.dim).copy()
    for i in range(steps):
        psi = stepper.step(psi, t_start + i * dt, dt)
    return psi, steps


def energy_expectation(schedule, cost, s, state):
    """Re <psi|H(s)|psi>; a non-negligible imaginary part is logged."""
    value = PathOperator.from_schedule(schedule, cost).expectation(s, state)
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        logger.warning(f"energy expectation has imaginary part {value.imag:.3e} at s={s}")
    return float(value.real)


def eigenstate_overlaps(state, eigenstates):
    psi = np.asarray(state)
    return [float(abs(np.vdot(v, psi)) ** 2) for v in eigenstates]


def _sample(op, T, s, psi, plan, v0):
    energy = op.expectation(s, psi)
    overlaps = [float("nan"), float("nan")]
    ground = None
    if plan.overlaps:
        spectrum_slice = eigenpairs_of(op, s, k=max(2, plan.k), v0=v0)
        overlaps = eigenstate_overlaps(psi, spectrum_slice.eigenvectors[:2])
        ground = spectrum_slice.eigenvectors[0]
    sample = TrajectorySample(t=s * T, s=float(s), energy_expectation=float(energy.real),
                              overlap_ground=overlaps[0], overlap_first_excited=overlaps[1],
                              norm=float(np.linalg.norm(psi)))
    return sample, ground


def _run(op, T, psi0, config, plan, h):
    stepper = _Stepper(op, T, config) if T > 0 else None
    psi = psi0.copy()
    trajectory = [] if plan is not None else None
    total = 0
    v0 = None

    if T <= 0:
        if plan is not None:
            sample, _ = _sample(op, T, 0.0, psi, plan, None)
            trajectory.append(sample)
        return psi, 0, trajectory

    grid = plan.grid() if plan is not None else np.array([0.0, 1.0])
    planned = sum(_segment_steps((s1 - s0) * T, h) for s0, s1 in zip(grid[:-1], grid[1:]))
    if planned > config.max_steps:
        raise NonConvergenceError(f"{planned} steps needed, max_steps={config.max_steps}", steps=planned)

    for idx, s in enumerate(grid):
        if idx > 0:
            t0, t1 = grid[idx - 1] * T, s * T
            steps = _segment_steps(t1 - t0, h)
            dt = (t1 - t0) / steps
            for i in range(steps):
                psi = stepper.step(psi, t0 + i * dt, dt)
            total += steps
        if plan is not None:
            sample, v0 = _sample(op, T, float(s), psi, plan, v0)
            trajectory.append(sample)
            logger.debug(f"t={sample.t:.4f} E={sample.energy_expectation:.6f} norm={sample.norm:.12f}")
    return psi, total, trajectory


def evolve(schedule, cost, initial, config=None, observe=None):
    """
    Schroedinger evolution along the schedule; P(T) read from the certified target index.
    """
    config = config or IntegratorConfig()
    if cost.target is None:
        raise InvalidArgumentError("success probability needs a certified optimum (cost.target is unset)")
    op = PathOperator.from_schedule(schedule, cost)
    psi0 = as_state(initial, op.dim)
    norm0 = np.linalg.norm(psi0)
    T = float(schedule.T)
    started = time.perf_counter()

    h = config.nominal_step(T)
    psi, steps, trajectory = _run(op, T, psi0, config, observe, h)
    if config.verify_convergence and T > 0:
        p_coarse = abs(psi[cost.target]) ** 2
        while True:
            fine, fine_steps, _ = _run(op, T, psi0, config, None, h / 2.0)
            p_fine = abs(fine[cost.target]) ** 2
            if abs(p_fine - p_coarse) < config.tolerance:
                break
            logger.info(f"step {h:.3e} not converged (|dP|={abs(p_fine - p_coarse):.2e}), halving")
            h /= 2.0
            if observe is not None:
                psi, steps, trajectory = _run(op, T, psi0, config, observe, h)
            else:
                psi, steps = fine, fine_steps
            p_coarse = abs(psi[cost.target]) ** 2

    drift = abs(np.linalg.norm(psi) - norm0)
    if drift > NORM_DRIFT_LIMIT:
        raise IntegrationQualityError(drift, NORM_DRIFT_LIMIT)
    probability = float(abs(psi[cost.target]) ** 2)
    elapsed = time.perf_counter() - started
    logger.debug(f"T={T} steps={steps} h={h:.3e} P={probability:.6e} drift={drift:.2e} ({elapsed:.2f}s)")
    return EvolutionResult(success_probability=probability, final_norm_drift=float(drift), steps=steps,
                           step_size=h, trajectory=trajectory, final_state=psi, elapsed=elapsed)
