"""Hot loops, each with a numba implementation and a numpy/scipy fallback.

Public entry points dispatch on :func:`gravcat._backend.numba_enabled`.
Every numba loop is parallel over output rows only and reduces inside a row
in ascending column order, so results do not depend on the thread count.
"""
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _scipy_dijkstra

from ._backend import njit, numba_enabled, prange
from .model import EARTH_RADIUS_KM

# --------------------------------------------------------------------------
# thresholded impedance row sums:  out[r] = sum_k opp[col] * f(t) [t <= tau]
# --------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _row_accumulate_nb(indptr, indices, minutes, rows, opp, alpha, beta, tau, self_override):
    out = np.zeros(rows.size)
    for r in prange(rows.size):
        i = rows[r]
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            t = minutes[k]
            if j == i and not np.isnan(self_override[i]):
                t = self_override[i]
            if t <= tau:
                s += opp[j] * math.exp(-alpha * t ** beta)
        out[r] = s
    return out


def _row_accumulate_np(indptr, indices, minutes, rows, opp, alpha, beta, tau, self_override):
    if rows.size == 0:
        return np.zeros(0)
    starts = indptr[rows]
    counts = indptr[rows + 1] - starts
    # gather the selected rows contiguously
    seg = np.repeat(np.cumsum(counts) - counts, counts)
    k = np.repeat(starts, counts) + (np.arange(counts.sum()) - seg)
    cols = indices[k]
    t = minutes[k].copy()
    origin = np.repeat(rows, counts)
    ov = self_override[origin]
    fix = (cols == origin) & ~np.isnan(ov)
    t[fix] = ov[fix]
    w = np.where(t <= tau, opp[cols] * np.exp(-alpha * t ** beta), 0.0)
    out = np.zeros(rows.size)
    nonempty = counts > 0
    if nonempty.any():
        offsets = (np.cumsum(counts) - counts)[nonempty]
        out[nonempty] = np.add.reduceat(w, offsets)
    return out


def row_accumulate(indptr, indices, minutes, rows, opp, alpha, beta, tau, self_override=None):
    """Per-row thresholded weighted sums over a CSR travel-time matrix.

    ``self_override`` holds a replacement time for the diagonal entry of each
    row, NaN meaning "use the stored value".
    """
    n = indptr.size - 1
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    opp = np.ascontiguousarray(opp, dtype=np.float64)
    if self_override is None:
        self_override = np.full(n, np.nan)
    self_override = np.ascontiguousarray(self_override, dtype=np.float64)
    args = (indptr, indices, minutes, rows, opp, float(alpha), float(beta), float(tau), self_override)
    if numba_enabled():
        return _row_accumulate_nb(*args)
    return _row_accumulate_np(*args)


# --------------------------------------------------------------------------
# frictionless (great-circle) accessibility
# --------------------------------------------------------------------------


def haversine_rad(lat1, lon1, lat2, lon2):
    """Vectorised great-circle distance (km) for coordinates in radians."""
    h = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


@njit(cache=True, parallel=True)
def _ideal_nb(lat, lon, lat_order, lat_sorted, rows, opp, alpha, beta, tau, v_km_min):
    out = np.zeros(rows.size)
    band = tau * v_km_min / EARTH_RADIUS_KM
    coslat = np.cos(lat)
    # reject on the haversine term before asin/sqrt; the slack keeps boundary pairs for the exact test
    h_cut = math.sin(min(band, math.pi) / 2.0) ** 2 * (1.0 + 1e-9) + 1e-300
    for r in prange(rows.size):
        i = rows[r]
        lo = np.searchsorted(lat_sorted, lat[i] - band, side="left")
        hi = np.searchsorted(lat_sorted, lat[i] + band, side="right")
        cand = np.sort(lat_order[lo:hi])
        s = 0.0
        for c in range(cand.size):
            j = cand[c]
            if j == i:
                d = 0.0
            else:
                h = (math.sin((lat[j] - lat[i]) / 2.0) ** 2
                     + coslat[i] * coslat[j] * math.sin((lon[j] - lon[i]) / 2.0) ** 2)
                if h > h_cut:
                    continue
                d = 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(h, 1.0)))
            t = d / v_km_min
            if t <= tau:
                s += opp[j] * math.exp(-alpha * t ** beta)
        out[r] = s
    return out


def _ideal_np(lat, lon, lat_order, lat_sorted, rows, opp, alpha, beta, tau, v_km_min):
    out = np.zeros(rows.size)
    band = tau * v_km_min / EARTH_RADIUS_KM
    los = np.searchsorted(lat_sorted, lat[rows] - band, side="left")
    his = np.searchsorted(lat_sorted, lat[rows] + band, side="right")
    for r, i in enumerate(rows):
        cand = np.sort(lat_order[los[r]:his[r]])
        d = haversine_rad(lat[i], lon[i], lat[cand], lon[cand])
        d[cand == i] = 0.0
        t = d / v_km_min
        keep = t <= tau
        out[r] = np.sum(opp[cand[keep]] * np.exp(-alpha * t[keep] ** beta))
    return out


def ideal_accumulate(lat_deg, lon_deg, rows, opp, alpha, beta, tau, v_km_min):
    """Row sums of ``opp[j] * f(d_ij / v)`` over destinations with ``d_ij / v <= tau``.

    Candidates are pre-filtered by a latitude band of half-width ``tau * v``
    (a great-circle bound), then checked exactly.
    """
    lat = np.radians(np.asarray(lat_deg, dtype=np.float64))
    lon = np.radians(np.asarray(lon_deg, dtype=np.float64))
    lat_order = np.argsort(lat, kind="stable").astype(np.int64)
    lat_sorted = lat[lat_order]
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    opp = np.ascontiguousarray(opp, dtype=np.float64)
    args = (lat, lon, lat_order, lat_sorted, rows, opp, float(alpha), float(beta), float(tau), float(v_km_min))
    if numba_enabled():
        return _ideal_nb(*args)
    return _ideal_np(*args)


# --------------------------------------------------------------------------
# bounded many-to-many Dijkstra
# --------------------------------------------------------------------------


@njit(cache=True)
def _heap_push(keys, nodes, size, key, node):
    pos = size
    keys[pos] = key
    nodes[pos] = node
    while pos > 0:
        parent = (pos - 1) >> 1
        if keys[parent] <= keys[pos]:
            break
        keys[parent], keys[pos] = keys[pos], keys[parent]
        nodes[parent], nodes[pos] = nodes[pos], nodes[parent]
        pos = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, nodes, size):
    key = keys[0]
    node = nodes[0]
    size -= 1
    keys[0] = keys[size]
    nodes[0] = nodes[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and keys[left + 1] < keys[left]:
            child = left + 1
        if keys[pos] <= keys[child]:
            break
        keys[child], keys[pos] = keys[pos], keys[child]
        nodes[child], nodes[pos] = nodes[pos], nodes[child]
        pos = child
    return key, node, size


@njit(cache=True)
def _bounded_sssp(src, adj_ptr, adj_idx, adj_w, limit, dist, settled, out_nodes, keys, nodes, touched):
    """Settle every node within ``limit`` of ``src``; returns the settled count.

    ``dist`` must be all-inf and ``settled`` all-False on entry. The caller
    reads ``dist`` for the settled nodes and then calls :func:`_reset`.
    """
    size = _heap_push(keys, nodes, 0, 0.0, src)
    dist[src] = 0.0
    touched[0] = src
    n_touched = 1
    count = 0
    while size > 0:
        d, u, size = _heap_pop(keys, nodes, size)
        if settled[u] or d > dist[u]:
            continue
        settled[u] = True
        out_nodes[count] = u
        count += 1
        for e in range(adj_ptr[u], adj_ptr[u + 1]):
            v = adj_idx[e]
            nd = d + adj_w[e]
            if nd <= limit and nd < dist[v] and not settled[v]:
                if dist[v] == np.inf:
                    touched[n_touched] = v
                    n_touched += 1
                dist[v] = nd
                size = _heap_push(keys, nodes, size, nd, v)
    return count, n_touched


@njit(cache=True)
def _reset(dist, settled, touched, n_touched):
    for k in range(n_touched):
        dist[touched[k]] = np.inf
        settled[touched[k]] = False


@njit(cache=True, parallel=True)
def _dijkstra_nb(n, adj_ptr, adj_idx, adj_w, limit, n_chunks, indptr, out_idx, out_t, fill):
    # chunks own their scratch buffers; origins inside a chunk run sequentially
    counts = np.zeros(n, dtype=np.int64)
    m = adj_idx.size + 1
    for c in prange(n_chunks):
        dist = np.full(n, np.inf)
        settled = np.zeros(n, dtype=np.bool_)
        out_nodes = np.empty(n, dtype=np.int64)
        keys = np.empty(m)
        nodes = np.empty(m, dtype=np.int64)
        touched = np.empty(n, dtype=np.int64)
        lo = c * n // n_chunks
        hi = (c + 1) * n // n_chunks
        for s in range(lo, hi):
            cnt, n_touched = _bounded_sssp(s, adj_ptr, adj_idx, adj_w, limit, dist, settled,
                                           out_nodes, keys, nodes, touched)
            counts[s] = cnt
            if fill:
                found = np.sort(out_nodes[:cnt])
                base = indptr[s]
                for k in range(cnt):
                    out_idx[base + k] = found[k]
                    out_t[base + k] = dist[found[k]]
            _reset(dist, settled, touched, n_touched)
    return counts


def _adjacency(n, u, v, w):
    """Symmetric CSR adjacency with neighbours in ascending order."""
    src = np.concatenate([u, v]).astype(np.int64)
    dst = np.concatenate([v, u]).astype(np.int64)
    wt = np.concatenate([w, w]).astype(np.float64)
    perm = np.lexsort((dst, src))
    src, dst, wt = src[perm], dst[perm], wt[perm]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=ptr[1:])
    return ptr, dst, wt


def _dijkstra_np(n, u, v, w, limit, chunk=512):
    g = csr_matrix((np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))
    counts = np.zeros(n, dtype=np.int64)
    idx_parts, t_parts = [], []
    for lo in range(0, n, chunk):
        src = np.arange(lo, min(n, lo + chunk))
        dist = _scipy_dijkstra(g, directed=True, indices=src, limit=limit)
        rr, cc = np.nonzero(np.isfinite(dist) & (dist <= limit))
        counts[src] = np.bincount(rr, minlength=src.size)
        idx_parts.append(cc)
        t_parts.append(dist[rr, cc])
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    idx = np.concatenate(idx_parts) if idx_parts else np.zeros(0, np.int64)
    t = np.concatenate(t_parts) if t_parts else np.zeros(0)
    return indptr, idx.astype(np.int64), t


def bounded_all_pairs(n, u, v, w, limit):
    """All-origin shortest paths on an undirected graph, pruned at ``limit``.

    Edges are ``(u[e], v[e])`` with positive weight ``w[e]``; parallel edges
    are collapsed to their minimum. Returns CSR ``(indptr, indices, times)``
    with destinations ascending per origin and the origin itself at time 0.
    """
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    if w.size and (not np.all(np.isfinite(w)) or w.min() <= 0):
        raise ValueError("edge weights must be finite and positive")
    u, v, w = _collapse_parallel(n, u, v, w)
    limit = float(limit)
    if not numba_enabled():
        return _dijkstra_np(n, u, v, w, limit)
    ptr, adj, wt = _adjacency(n, u, v, w)
    n_chunks = max(1, min(n, 256))
    indptr = np.zeros(n + 1, dtype=np.int64)
    counts = _dijkstra_nb(n, ptr, adj, wt, limit, n_chunks, indptr, np.empty(0, np.int64), np.empty(0), False)
    np.cumsum(counts, out=indptr[1:])
    out_idx = np.empty(indptr[-1], dtype=np.int64)
    out_t = np.empty(indptr[-1])
    _dijkstra_nb(n, ptr, adj, wt, limit, n_chunks, indptr, out_idx, out_t, True)
    return indptr, out_idx, out_t


def _collapse_parallel(n, u, v, w):
    a = np.minimum(u, v)
    b = np.maximum(u, v)
    keep = a != b
    a, b, w = a[keep], b[keep], w[keep]
    if a.size == 0:
        return a, b, w
    key = a * n + b
    perm = np.lexsort((w, key))
    key, a, b, w = key[perm], a[perm], b[perm], w[perm]
    first = np.ones(key.size, dtype=bool)
    first[1:] = key[1:] != key[:-1]
    return a[first], b[first], w[first]
