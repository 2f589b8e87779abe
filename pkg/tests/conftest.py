"""
Shared fixtures and dense-matrix oracles.

Everything here builds full 2^n x 2^n matrices, so it is only used at n <= 5.
"""
import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from qaa.hamiltonian import PAULI
from qaa.sat_problem import Clause, Instance, certify_optimum


def single_qubit_op(op, i, n):
    """op on qubit i (bit i of the index), identity elsewhere."""
    out = np.eye(1, dtype=np.complex128)
    for q in reversed(range(n)):
        out = np.kron(out, op if q == i else PAULI["I"])
    return out


def two_qubit_op(mat4, a, b, n):
    """4x4 matrix in the local basis 2*bit_a + bit_b, embedded on qubits (a, b)."""
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=np.complex128)
    mask = (1 << a) | (1 << b)
    for z in range(dim):
        for y in range(dim):
            if z & ~mask == y & ~mask:
                row = 2 * ((z >> a) & 1) + ((z >> b) & 1)
                col = 2 * ((y >> a) & 1) + ((y >> b) & 1)
                out[z, y] = mat4[row, col]
    return out


def dense_hb(n):
    dim = 1 << n
    return sum(0.5 * (np.eye(dim) - single_qubit_op(PAULI["X"], i, n)) for i in range(n))


def dense_extra(extra, n):
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=np.complex128)
    for term, mat in zip(extra.terms, extra.term_matrices()):
        out += two_qubit_op(mat, term.var_a, term.var_b, n)
    return out


def dense_h(cost_values, s, extra=None):
    values = np.asarray(cost_values, dtype=float)
    n = values.shape[0].bit_length() - 1
    h = (1 - s) * dense_hb(n) + s * np.diag(values).astype(np.complex128)
    if extra is not None:
        h = h + s * (1 - s) * dense_extra(extra, n)
    return h


def exact_evolution(cost_values, T, psi0, extra=None):
    """High-accuracy reference propagation with an adaptive 8th-order Runge-Kutta."""
    n = np.asarray(cost_values).shape[0].bit_length() - 1
    hb, hp = dense_hb(n), np.diag(np.asarray(cost_values, dtype=float)).astype(np.complex128)
    he = dense_extra(extra, n) if extra is not None else np.zeros_like(hb)

    def rhs(t, psi):
        s = t / T
        return -1j * (((1 - s) * hb + s * (1 - s) * he + s * hp) @ psi)

    sol = solve_ivp(rhs, (0.0, T), np.asarray(psi0, dtype=np.complex128), method="DOP853",
                    rtol=1e-12, atol=1e-12)
    return sol.y[:, -1]


def dense_gap(cost_values, s, extra=None):
    evals = scipy.linalg.eigvalsh(dense_h(cost_values, s, extra))
    return evals[1] - evals[0]


def dense_gap_min(cost_values, extra=None, points=2001):
    """Dense scan followed by a bounded local minimization around the grid argmin."""
    grid = np.linspace(0.0, 1.0, points)
    gaps = np.array([dense_gap(cost_values, s, extra) for s in grid])
    j = int(np.argmin(gaps))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, points - 1)]
    res = minimize_scalar(lambda s: dense_gap(cost_values, s, extra), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return min(gaps[j], res.fun)


def product_state(theta, phi):
    """Kronecker product of single-qubit spin-coherent states; qubit 0 is the last factor."""
    psi = np.ones(1, dtype=np.complex128)
    for q in reversed(range(len(theta))):
        qubit = np.array([np.cos(theta[q] / 2), np.exp(1j * phi[q]) * np.sin(theta[q] / 2)])
        psi = np.kron(psi, qubit)
    return psi


def random_state(rng, n):
    psi = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return psi / np.linalg.norm(psi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unique_instance():
    """n=3 instance whose only satisfying assignment is bits 101 (index 5)."""
    instance = Instance(n=3, clauses=(
        Clause(0, 1, False, False),
        Clause(0, 1, False, True),
        Clause(1, 2, True, False),
        Clause(1, 2, True, True),
        Clause(0, 2, True, False),
        Clause(0, 2, False, False),
    ), seed=7, label="unique-n3")
    certify_optimum(instance)
    return instance
