"""Compiled inner loops for the obstacle-clamped min/max relaxation."""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _pair_search(vals, dist, K):
    # the pair maximizing (v_i - v_j)/(d_i + d_j), by enumeration
    best = -1.0
    bi = 0
    bj = 0
    for i in range(K):
        vi = vals[i]
        di = dist[i]
        for j in range(i + 1, K):
            s = (vi - vals[j]) / (di + dist[j])
            if s > best:
                best = s
                bi = i
                bj = j
            elif -s > best:
                best = -s
                bi = j
                bj = i
    return best, bi, bj


@njit(cache=True, inline="always")
def _local_solve(vals, dist, K):
    # value t with max_i (v_i - t)/d_i == max_j (t - v_j)/d_j; returns (t, i, j)
    # with (i, j) an attaining pair.  Iterates on the active pair from the
    # midrange guess and accepts once the pair is self-consistent, which
    # characterizes the (unique) root; otherwise falls back to enumeration.
    lo = vals[0]
    hi = vals[0]
    for k in range(1, K):
        if vals[k] < lo:
            lo = vals[k]
        if vals[k] > hi:
            hi = vals[k]
    if hi <= lo:
        return vals[0], 0, 0
    t = 0.5 * (lo + hi)
    for _ in range(8):
        bi = 0
        bj = 0
        sa = -np.inf
        sb = -np.inf
        for k in range(K):
            a = (vals[k] - t) / dist[k]
            b = -a
            if a > sa:
                sa = a
                bi = k
            if b > sb:
                sb = b
                bj = k
        if abs(sa - sb) <= 1e-14 * (abs(sa) + abs(sb)):
            return t, bi, bj
        di = dist[bi]
        dj = dist[bj]
        tn = (dj * vals[bi] + di * vals[bj]) / (di + dj)
        if tn == t:
            return t, bi, bj
        t = tn
    best, bi, bj = _pair_search(vals, dist, K)
    if best <= 0.0:
        return vals[0], 0, 0
    di = dist[bi]
    dj = dist[bj]
    return (dj * vals[bi] + di * vals[bj]) / (di + dj), bi, bj


@njit(cache=True)
def relax_sweep(u, nodes, nb, dist, cutval, psi, gauss_seidel, out):
    """One sweep; writes into ``out`` (may alias ``u`` for Gauss-Seidel).

    Returns the max absolute nodal change.
    """
    N, K = nb.shape
    vals = np.empty(K)
    dmax = 0.0
    src = out if gauss_seidel else u
    for n in range(N):
        for k in range(K):
            m = nb[n, k]
            vals[k] = src[m] if m >= 0 else cutval[n, k]
        t, _, _ = _local_solve(vals, dist[n], K)
        if psi[n] > t:
            t = psi[n]
        node = nodes[n]
        c = abs(t - u[node]) if not gauss_seidel else abs(t - out[node])
        if c > dmax:
            dmax = c
        out[node] = t
    return dmax


@njit(cache=True)
def policy(u, nodes, nb, dist, cutval, psi):
    """Active pair (i, j) per node, or (-1, -1) where the obstacle binds."""
    N, K = nb.shape
    vals = np.empty(K)
    pi = np.empty(N, np.int64)
    pj = np.empty(N, np.int64)
    for n in range(N):
        for k in range(K):
            m = nb[n, k]
            vals[k] = u[m] if m >= 0 else cutval[n, k]
        t, i, j = _local_solve(vals, dist[n], K)
        if psi[n] >= t:
            pi[n] = -1
            pj[n] = -1
        else:
            pi[n] = i
            pj[n] = j
    return pi, pj


@njit(cache=True)
def upper_hull(r, g):
    """Upper concave hull of points sorted by ``r`` (ties: keep the largest g).

    Returns indices of hull vertices in increasing ``r``.
    """
    n = r.shape[0]
    idx = np.empty(n, np.int64)
    m = 0
    for k in range(n):
        if m > 0 and r[idx[m - 1]] == r[k]:
            if g[k] > g[idx[m - 1]]:
                m -= 1
            else:
                continue
        while m >= 2:
            a = idx[m - 2]
            b = idx[m - 1]
            cross = (r[b] - r[a]) * (g[k] - g[a]) - (g[b] - g[a]) * (r[k] - r[a])
            if cross >= 0.0:
                m -= 1
            else:
                break
        idx[m] = k
        m += 1
    return idx[:m]
