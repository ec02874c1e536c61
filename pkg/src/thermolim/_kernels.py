"""Compiled inner loops."""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def banded_ldl_negative_count(rows, shift, tol):
    """Count negative pivots of the unpivoted LDL^T factorization of A - shift*I.

    ``rows[i, k]`` holds A[i, i + k] for k = 0..b (upper band, row layout).
    Returns (count, breakdown_index); breakdown_index is -1 unless a pivot
    with |pivot| <= tol was met, in which case count is meaningless.
    """
    n, width = rows.shape
    b = width - 1
    w = rows.copy()
    for i in range(n):
        w[i, 0] -= shift
    negatives = 0
    for i in range(n):
        p = w[i, 0]
        if abs(p) <= tol:
            return 0, i
        if p < 0.0:
            negatives += 1
        for a in range(1, b + 1):
            if i + a >= n:
                break
            u = w[i, a]
            if u == 0.0:
                continue
            f = u / p
            for k in range(0, b - a + 1):
                if i + a + k >= n:
                    break
                w[i + a, k] -= f * w[i, a + k]
    return negatives, -1


@numba.njit(cache=True)
def orthant_sup_2d(x_rank, y_rank, p_lo, p_hi, q_lo, q_hi):
    """Exact sup over lower-left quadrants of |empirical mass - p * q|.

    Coordinates are replaced by their rank among the distinct sample values.
    Region r = 0 lies below every sample value, region r >= 1 starts at the
    (r-1)-th distinct value. On a region pair the empirical mass is constant
    and the reference product p * q ranges over [p_lo q_lo, p_hi q_hi], so
    the two corners suffice.
    """
    n = x_rank.shape[0]
    mx = p_lo.shape[0] - 1
    my = q_lo.shape[0] - 1
    order = np.argsort(x_rank)
    col = np.zeros(my, dtype=np.int64)
    best = 0.0
    ptr = 0
    for r in range(mx + 1):
        if r >= 1:
            while ptr < n and x_rank[order[ptr]] == r - 1:
                col[y_rank[order[ptr]]] += 1
                ptr += 1
        running = 0
        for s in range(my + 1):
            if s >= 1:
                running += col[s - 1]
            c = running / n
            lo = abs(c - p_lo[r] * q_lo[s])
            hi = abs(c - p_hi[r] * q_hi[s])
            if lo > best:
                best = lo
            if hi > best:
                best = hi
    return best


@numba.njit(cache=True)
def origin_cluster_sizes(site_open, edge_open, nbr, origin, cap):
    """Size of the cluster of ``origin`` per trial, capped at cap + 1.

    ``site_open[t, u]`` marks open sites, ``edge_open[t, u, k]`` open edges
    from site u along generator k, ``nbr[u, k]`` the neighbouring window
    index (-1 outside the window). Returns (sizes, escaped) where escaped
    flags trials whose search reached the window edge before the cap.
    """
    trials, w = site_open.shape
    deg = nbr.shape[1]
    sizes = np.zeros(trials, dtype=np.int64)
    escaped = np.zeros(trials, dtype=np.bool_)
    mark = np.full(w, -1, dtype=np.int64)
    stack = np.empty(w, dtype=np.int64)
    for t in range(trials):
        if not site_open[t, origin]:
            continue
        top = 0
        stack[top] = origin
        top += 1
        mark[origin] = t
        size = 1
        while top > 0 and size <= cap:
            top -= 1
            u = stack[top]
            for k in range(deg):
                if not edge_open[t, u, k]:
                    continue
                v = nbr[u, k]
                if v < 0:
                    escaped[t] = True
                    continue
                if mark[v] == t or not site_open[t, v]:
                    continue
                mark[v] = t
                stack[top] = v
                top += 1
                size += 1
        sizes[t] = min(size, cap + 1)
    return sizes, escaped


@numba.njit(cache=True)
def _mul_into(kind, a, b, out):
    for c in range(a.shape[0]):
        out[c] = a[c] + b[c]
    if kind == 1:
        out[2] += a[0] * b[1]


@numba.njit(cache=True)
def greedy_box_place(kcoords, kind, origin, shape, anchors, owner, first_pos, overlap_pos,
                     shape_id, allowed, goal, covered):
    """Greedy translates K t inside a box region; see tiling.construct_quasi_tiling.

    kind 0 is Z^d, kind 1 the Heisenberg group. Region sites are indexed in
    row-major order of the box. ``owner``, ``first_pos`` and ``overlap_pos``
    are updated in place. Returns (centers, covered).
    """
    m, dim = kcoords.shape
    n_q = owner.shape[0]
    k0_inv = np.empty(dim, dtype=np.int64)
    for c in range(dim):
        k0_inv[c] = -kcoords[0, c]
    if kind == 1:
        k0_inv[2] = -kcoords[0, 2] + kcoords[0, 0] * kcoords[0, 1]
    q = np.empty(dim, dtype=np.int64)
    t = np.empty(dim, dtype=np.int64)
    site = np.empty(dim, dtype=np.int64)
    tile = np.empty(m, dtype=np.int64)
    stamp = np.zeros(m, dtype=np.int64)
    centers = np.empty((n_q, dim), dtype=np.int64)
    n_acc = 0
    n_overlap = 0
    for c in range(m):
        if overlap_pos[c]:
            n_overlap += 1
    mark = 0
    for a in anchors:
        if covered >= goal:
            break
        if owner[a] != -1:
            continue
        rem = a
        for c in range(dim - 1, -1, -1):
            q[c] = origin[c] + rem % shape[c]
            rem //= shape[c]
        _mul_into(kind, k0_inv, q, t)
        ok = True
        for j in range(m):
            _mul_into(kind, kcoords[j], t, site)
            idx = 0
            for c in range(dim):
                r = site[c] - origin[c]
                if r < 0 or r >= shape[c]:
                    ok = False
                    break
                idx = idx * shape[c] + r
            if not ok:
                break
            o = owner[idx]
            if o >= 0 and o != shape_id:
                ok = False
                break
            tile[j] = idx
        if not ok:
            continue
        mark += 1
        extra = 0
        for j in range(m):
            if owner[tile[j]] == shape_id:
                for p in (j, first_pos[tile[j]]):
                    if not overlap_pos[p] and stamp[p] != mark:
                        stamp[p] = mark
                        extra += 1
        if n_overlap + extra > allowed:
            continue
        for j in range(m):
            if stamp[j] == mark:
                overlap_pos[j] = True
        n_overlap += extra
        for j in range(m):
            s = tile[j]
            if owner[s] != shape_id:
                owner[s] = shape_id
                first_pos[s] = j
                covered += 1
        for c in range(dim):
            centers[n_acc, c] = t[c]
        n_acc += 1
    return centers[:n_acc].copy(), covered
