"""Compiled solver for the relay power equation.

Every scheme reduces to the same scalar problem. With per-station magnitudes
``|a_j| = sigma / sqrt(s - n_j)`` the relay transmit power at effective noise
``s`` is

    power(s) = sigma^2 * sum_{l,j} Q[l, j] w_l w_j,    w_j = 1 / sqrt(s - n_j)

for a real symmetric ``Q`` that already carries the phases of A and B. The
solver returns the smallest ``s > max_j n_j`` with ``power(s) = p``.

``Q`` and ``n`` are affine in the relay noise power, ``Q = Q0 + sr2 * Q1`` and
``n = sr2 * nu``, so one realization is assembled once and solved for every
SNR point.
"""
import numba
import numpy as np

SCAN_POINTS = 64
MAX_DOUBLINGS = 200
REL_TOL = 1e-12
LOWER_OFFSET = 1e-9

OK = 0
INFEASIBLE = 1
NONFINITE = 2

_jit = numba.njit(cache=True, error_model="numpy")


@_jit
def _power(s, q, nz, sig2, w):
    n = nz.shape[0]
    for j in range(n):
        w[j] = 1.0 / np.sqrt(s - nz[j])
    acc = 0.0
    for l in range(n):
        t = 0.5 * q[l, l] * w[l]
        for j in range(l + 1, n):
            t += q[l, j] * w[j]
        acc += w[l] * t
    return 2.0 * sig2 * acc


@_jit
def _lower_bound(s_left, s_right, q, nz, sig2, w):
    """Lower bound of the power on [s_left, s_right].

    Every w_j decreases in s, so positive entries of Q are bounded by their
    value at the right end and negative entries by their value at the left end.
    """
    n = nz.shape[0]
    for j in range(n):
        w[j] = 1.0 / np.sqrt(s_right - nz[j])
    pos = 0.0
    for l in range(n):
        for j in range(n):
            if q[l, j] > 0.0:
                pos += q[l, j] * w[l] * w[j]
    for j in range(n):
        w[j] = 1.0 / np.sqrt(s_left - nz[j])
    neg = 0.0
    for l in range(n):
        for j in range(n):
            if q[l, j] < 0.0:
                neg += q[l, j] * w[l] * w[j]
    return sig2 * (pos + neg)


@_jit
def _grid(i, start, step, hi):
    if i == 0:
        return start
    if i == SCAN_POINTS - 1:
        return hi
    return start * np.exp(step * i)


@_jit
def _solve_one(q, nz, sig2, p, w):
    lower = 0.0
    for j in range(nz.shape[0]):
        if nz[j] > lower:
            lower = nz[j]

    hi = 2.0 * lower if lower > 0.0 else 1e-12
    f_hi = _power(hi, q, nz, sig2, w) - p
    k = 0
    while f_hi >= 0.0:
        if not np.isfinite(f_hi):
            return np.nan, NONFINITE
        k += 1
        if k > MAX_DOUBLINGS:
            return np.nan, INFEASIBLE
        hi *= 2.0
        f_hi = _power(hi, q, nz, sig2, w) - p
    if not np.isfinite(f_hi):
        return np.nan, NONFINITE

    # Coarse log scan from just above the pole; the bracket is the first grid
    # point where the power drops below p. Stretches of the grid are skipped
    # when a monotone lower bound certifies the power stays >= p on them.
    start = lower * (1.0 + LOWER_OFFSET) if lower > 0.0 else hi * 1e-12
    step = np.log(hi / start) / (SCAN_POINTS - 1)
    fa = _power(start, q, nz, sig2, w) - p
    if not np.isfinite(fa):
        return np.nan, NONFINITE
    if fa < 0.0:
        return np.nan, INFEASIBLE
    last = SCAN_POINTS - 1
    cur = 0
    width = last
    while True:
        end = min(cur + width, last)
        if end == cur + 1:
            s_end = _grid(end, start, step, hi)
            fb = _power(s_end, q, nz, sig2, w) - p
            if not np.isfinite(fb):
                return np.nan, NONFINITE
            if fb < 0.0:
                break
            cur = end
            width = 2
        elif end < last and _lower_bound(_grid(cur, start, step, hi), _grid(end, start, step, hi), q, nz, sig2, w) >= p:
            cur = end
            width *= 2
        else:
            width = max(1, (end - cur) // 2)
    a = _grid(cur, start, step, hi)
    b = _grid(end, start, step, hi)
    if cur > 0:
        fa = _power(a, q, nz, sig2, w) - p

    # Illinois false position inside [a, b], bisection fallback
    side = 0
    for it in range(200):
        if b - a <= REL_TOL * a:
            break
        if it < 60:
            c = b - fb * (b - a) / (fb - fa)
            if not (a < c < b):
                c = 0.5 * (a + b)
        else:
            c = 0.5 * (a + b)
        fc = _power(c, q, nz, sig2, w) - p
        if fc == 0.0:
            return c, OK
        if fc < 0.0:
            b = c
            fb = fc
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a = c
            fa = fc
            if side == 1:
                fb *= 0.5
            side = 1
    return 0.5 * (a + b), OK


@_jit
def solve_grid(q0, q1, nu, sig2, sr2, p):
    """Roots for ``K`` problems at ``S`` noise settings.

    q0, q1: (K, N, N); nu: (K, N); sig2, sr2, p: (S,).
    Returns roots (K, S) and status codes (K, S).
    """
    kk = q0.shape[0]
    n = q0.shape[1]
    ns = sig2.shape[0]
    roots = np.empty((kk, ns))
    status = np.zeros((kk, ns), dtype=np.int8)
    w = np.empty(n)
    q = np.empty((n, n))
    nz = np.empty(n)
    for si in range(ns):
        for k in range(kk):
            for l in range(n):
                nz[l] = sr2[si] * nu[k, l]
                for j in range(n):
                    q[l, j] = q0[k, l, j] + sr2[si] * q1[k, l, j]
            r, st = _solve_one(q, nz, sig2[si], p[si], w)
            roots[k, si] = r
            status[k, si] = st
    return roots, status


@_jit
def power_curve(q, nz, sig2, s_values):
    """Relay power at each ``s`` (used by tests and diagnostics)."""
    w = np.empty(nz.shape[0])
    out = np.empty(s_values.shape[0])
    for i in range(s_values.shape[0]):
        out[i] = _power(s_values[i], q, nz, sig2, w)
    return out
