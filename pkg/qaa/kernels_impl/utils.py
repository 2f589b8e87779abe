import numpy as np
from numba import njit

from ..errors import InvalidArgumentError
from ..helpers import qubit_count

EMPTY_PAIRS = np.zeros((0, 2), dtype=np.int64)
EMPTY_MATS = np.zeros((0, 4, 4), dtype=np.complex128)


def as_state(state, dim=None):
    """Validate a state vector; returns it as contiguous complex128."""
    psi = np.ascontiguousarray(state, dtype=np.complex128)
    if psi.ndim != 1:
        raise InvalidArgumentError(f"state must be one-dimensional, got shape {psi.shape}")
    if dim is not None and psi.shape[0] != dim:
        raise InvalidArgumentError(f"state has dimension {psi.shape[0]}, operator expects {dim}")
    qubit_count(psi.shape[0])
    return psi


def pack_terms(pairs, mats):
    """Contiguous (T,2) int64 qubit pairs and (T,4,4) complex128 matrices for the kernel."""
    if len(pairs) == 0:
        return EMPTY_PAIRS, EMPTY_MATS
    return (np.ascontiguousarray(pairs, dtype=np.int64),
            np.ascontiguousarray(mats, dtype=np.complex128))


@njit(cache=True)
def local_row(z, a, b):
    """Row of a two-qubit matrix for basis index z: 2*bit_a + bit_b."""
    return 2 * ((z >> a) & 1) + ((z >> b) & 1)
