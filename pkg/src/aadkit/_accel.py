"""Compiled hot loops: boosting candidate evaluation and 1-D TFCE enhancement."""

import numpy as np
from numba import njit


@njit(cache=True)
def eval_candidates(resid, z, cand_rows, cand_zidx, deltas, n_train,
                    e_plus, e_minus, which):
    """Training-set absolute-error sums for +delta and -delta candidate steps.

    Only candidates listed in `which` are recomputed; rows of `resid` not
    touched by the last accepted step keep their cached sums. Summation is
    sequential over samples so accepted-step bookkeeping is bit-exact.
    """
    for j in range(which.size):
        k = which[j]
        row = cand_rows[k]
        zi = cand_zidx[k]
        d = deltas[k]
        acc_p = 0.0
        acc_m = 0.0
        for t in range(n_train):
            r = resid[row, t]
            s = d * z[zi, t]
            acc_p += abs(r - s)
            acc_m += abs(r + s)
        e_plus[k] = acc_p
        e_minus[k] = acc_m


@njit(cache=True)
def tfce_1d(t_map, dh, e_power, h_power):
    """Threshold-free cluster enhancement of a 1-D statistic map.

    Integrates extent^e_power * height^h_power over thresholds dh, 2*dh, ...
    up to each map's own maximum. Clusters are contiguous runs of same-sign
    values at or above the threshold.
    """
    n = t_map.size
    out = np.zeros(n)
    if dh <= 0.0:
        return out
    t_abs = np.abs(t_map)
    t_max = t_abs.max()
    h = dh
    while h <= t_max:
        incr = h ** h_power * dh
        i = 0
        while i < n:
            if t_abs[i] >= h:
                sign = 1.0 if t_map[i] > 0 else -1.0
                j = i
                while j < n and t_abs[j] >= h and \
                        (t_map[j] > 0) == (sign > 0):
                    j += 1
                extent = float(j - i)
                bump = extent ** e_power * incr
                for m in range(i, j):
                    out[m] += bump
                i = j
            else:
                i += 1
        h += dh
    return out
