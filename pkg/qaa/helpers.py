"""
Helper functions
Bit-string conventions, seed derivation, memory budget checks, number formatting
and the joblib work pool.
"""
import zlib

import numba
import numpy as np
from joblib import Parallel, delayed

from .config import QaaConfig
from .errors import InvalidArgumentError, ResourceLimitError


def bits_to_index(z, n):
    """
    Basis-state index of an assignment.

    `z` is either an int index or a bit string / sequence where z[i] is the value
    of bit i. Bit i is qubit i and the (i)-th least-significant bit of the index.
    """
    if isinstance(z, (int, np.integer)):
        if not 0 <= int(z) < (1 << n):
            raise InvalidArgumentError(f"index {z} out of range for n={n}")
        return int(z)
    bits = [int(c) for c in z]
    if len(bits) != n:
        raise InvalidArgumentError(f"assignment has {len(bits)} bits, expected {n}")
    if any(b not in (0, 1) for b in bits):
        raise InvalidArgumentError(f"assignment {z!r} is not a bit string")
    return sum(b << i for i, b in enumerate(bits))


def index_to_bits(index, n):
    """Inverse of bits_to_index: character i is bit i."""
    return "".join(str((int(index) >> i) & 1) for i in range(n))


def _path_key(part):
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode())


def child_seed(master, *path):
    """
    Derive a 64-bit child seed from a master seed and a path of ints/labels.

    Uses SeedSequence spawn keys, so child i of master m is the same on every
    machine and independent of how many other children were drawn.
    """
    seq = np.random.SeedSequence(int(master), spawn_key=tuple(_path_key(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def check_memory_budget(what, n, itemsize=16, copies=1):
    required = (1 << n) * itemsize * copies
    if required > QaaConfig.MEMORY_BUDGET_BYTES:
        raise ResourceLimitError(what, required, QaaConfig.MEMORY_BUDGET_BYTES)
    return required


def qubit_count(dim):
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise InvalidArgumentError(f"state dimension {dim} is not a power of two")
    return n


def fmt(x):
    """12 significant digits, fixed layout."""
    return f"{float(x):.11e}"


def _call_with_threads(threads, func, args):
    numba.set_num_threads(threads)
    return func(*args)


def run_parallel(func, arg_list, n_jobs=None):
    """
    func(*args) for every args tuple, results in input order.

    Work items go to a joblib process pool of `n_jobs` workers; each worker
    gets an equal share of the numba threads.
    """
    arg_list = list(arg_list)
    n_jobs = int(n_jobs or QaaConfig.N_JOBS)
    if n_jobs <= 1 or len(arg_list) <= 1:
        return [func(*args) for args in arg_list]
    threads = max(1, numba.config.NUMBA_NUM_THREADS // n_jobs)
    return Parallel(n_jobs=n_jobs)(delayed(_call_with_threads)(threads, func, args) for args in arg_list)
