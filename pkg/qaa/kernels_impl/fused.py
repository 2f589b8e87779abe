"""
Fused path kernel
out = c_b*H_B psi + c_e*H_E psi + c_p*H_P psi in one gather pass.

Each output amplitude is computed from reads only, so the prange loop has no
cross-thread reductions and the result does not depend on the thread count.
"""
from numba import njit, prange

from .utils import local_row


@njit(parallel=True, cache=True)
def apply_path(psi, cost, n, c_b, c_e, c_p, pairs, mats, out):
    dim = psi.shape[0]
    n_terms = pairs.shape[0]
    for z in prange(dim):
        # H_B = sum_i (1 - X_i)/2
        flips = 0j
        for i in range(n):
            flips += psi[z ^ (1 << i)]
        hb = 0.5 * (n * psi[z] - flips)

        he = 0j
        for t in range(n_terms):
            a = pairs[t, 0]
            b = pairs[t, 1]
            row = local_row(z, a, b)
            base = z & ~((1 << a) | (1 << b))
            he += (mats[t, row, 0] * psi[base]
                   + mats[t, row, 1] * psi[base | (1 << b)]
                   + mats[t, row, 2] * psi[base | (1 << a)]
                   + mats[t, row, 3] * psi[base | (1 << a) | (1 << b)])

        out[z] = c_b * hb + c_e * he + (c_p * cost[z]) * psi[z]
    return out
