"""Compiled inner loop of the exclusion dynamics.

Each attempt consumes one uniform double ``u``: ``k = int(u * N)`` picks the
particle and the fractional part decides the direction (right with
probability ``p_right``).  The body is branch-free apart from the breach
guard, which is essentially never taken.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def run_attempts(u, n_part, p_right, occ, pos, cur, full, tag, disp, limit):
    """Apply the attempts in ``u`` in order.

    ``cur`` has one slot per bond when ``full`` is 1, otherwise a single
    slot counting bond (-1, 0), stored at ring index ``L - 1``.  ``tag`` is
    the list index of the tagged particle (-1 when none) and ``disp`` its
    running unwrapped displacement.

    Returns ``(disp, done)``; ``done < len(u)`` means ``|disp|`` exceeded
    ``limit`` after attempt ``done - 1``.
    """
    L = occ.shape[0]
    last = L - 1
    for i in range(u.shape[0]):
        x = u[i] * n_part
        k = int(x)
        right = (x - k) < p_right
        d = 2 * np.int64(right) - 1
        s = pos[k]
        t = s + d
        t += L * np.int64(t < 0) - L * np.int64(t >= L)
        a = 1 - np.int64(occ[t])
        occ[s] = occ[s] - a
        occ[t] = 1
        pos[k] = s + a * (t - s)
        b = t + (s - t) * np.int64(right)  # ring index of the crossed bond
        w = full | np.int64(b == last)
        cur[b * full] += a * d * w
        disp += a * d * np.int64(k == tag)
        if disp > limit or disp < -limit:
            return disp, i + 1
    return disp, u.shape[0]
