"""Kernel checks against brute force, and numba vs numpy agreement."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gravcat import kernels
from gravcat._backend import DISABLE_ENV, HAVE_NUMBA, backend_name, set_threads
from gravcat.model import haversine_km

from conftest import random_matrix

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def floyd_warshall(n, u, v, w):
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for a, b, x in zip(u, v, w):
        if a != b:
            d[a, b] = min(d[a, b], x)
            d[b, a] = min(d[b, a], x)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def random_graph(rng, n):
    m = int(rng.integers(0, 3 * n))
    u = rng.integers(0, n, m)
    v = rng.integers(0, n, m)
    w = rng.uniform(0.5, 20.0, m)
    return u, v, w


def naive_rows(matrix, rows, opp, alpha, beta, tau):
    out = []
    for i in rows:
        s = 0.0
        for k in range(matrix.indptr[i], matrix.indptr[i + 1]):
            t = matrix.minutes[k]
            if t <= tau:
                s += opp[matrix.indices[k]] * math.exp(-alpha * t ** beta)
        out.append(s)
    return np.array(out)


class TestRowAccumulate:
    def test_matches_loop(self, backend):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(1, 12))
            m = random_matrix(rng, n)
            opp = rng.uniform(0, 50, n)
            rows = rng.permutation(n)[: int(rng.integers(1, n + 1))]
            got = kernels.row_accumulate(m.indptr, m.indices, m.minutes, rows, opp, 0.008, 1.467, 45.0)
            assert np.allclose(got, naive_rows(m, rows, opp, 0.008, 1.467, 45.0), rtol=1e-13, atol=0)

    def test_contour_counts(self, backend):
        rng = np.random.default_rng(1)
        m = random_matrix(rng, 10)
        opp = np.ones(10)
        got = kernels.row_accumulate(m.indptr, m.indices, m.minutes, np.arange(10), opp, 0.0, 1.0, 30.0)
        expect = [np.sum(m.minutes[m.indptr[i]:m.indptr[i + 1]] <= 30.0) for i in range(10)]
        assert got.tolist() == expect

    def test_self_override(self, backend):
        rng = np.random.default_rng(2)
        m = random_matrix(rng, 5)
        opp = np.full(5, 10.0)
        ov = np.full(5, np.nan)
        ov[2] = 100.0  # beyond tau: own opportunities drop out
        base = kernels.row_accumulate(m.indptr, m.indices, m.minutes, np.arange(5), opp, 0.01, 1.2, 60.0)
        got = kernels.row_accumulate(m.indptr, m.indices, m.minutes, np.arange(5), opp, 0.01, 1.2, 60.0, ov)
        t_self = m.get("z2", "z2")
        assert got[2] == pytest.approx(base[2] - 10.0 * math.exp(-0.01 * t_self ** 1.2), rel=1e-12)
        assert np.array_equal(np.delete(got, 2), np.delete(base, 2))

    def test_empty_rows(self, backend):
        m = random_matrix(np.random.default_rng(3), 4)
        got = kernels.row_accumulate(m.indptr, m.indices, m.minutes, np.zeros(0, np.int64), np.ones(4), 0.1, 1, 10)
        assert got.shape == (0,)


class TestIdeal:
    def test_matches_brute_force(self, backend):
        rng = np.random.default_rng(4)
        lat = 41.8 + rng.uniform(-0.3, 0.3, 60)
        lon = -87.6 + rng.uniform(-0.3, 0.3, 60)
        opp = rng.uniform(0, 10, 60)
        v = 1.609344  # 60 mi/h in km/min
        rows = np.arange(60)
        got = kernels.ideal_accumulate(lat, lon, rows, opp, 0.008, 1.467, 20.0, v)
        expect = []
        for i in rows:
            s = 0.0
            for j in range(60):
                t = 0.0 if i == j else haversine_km((lat[i], lon[i]), (lat[j], lon[j])) / v
                if t <= 20.0:
                    s += opp[j] * math.exp(-0.008 * t ** 1.467)
            expect.append(s)
        assert np.allclose(got, expect, rtol=1e-12)

    def test_band_spans_pole(self, backend):
        lat = np.array([89.9, 89.9, -10.0])
        lon = np.array([0.0, 180.0, 0.0])
        got = kernels.ideal_accumulate(lat, lon, np.arange(3), np.ones(3), 0.0, 1.0, 30.0, 1.0)
        assert got.tolist() == [2.0, 2.0, 1.0]


class TestDijkstra:
    @pytest.mark.parametrize("seed", range(12))
    def test_against_floyd_warshall(self, backend, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 51))
        u, v, w = random_graph(rng, n)
        limit = float(rng.uniform(5, 60))
        indptr, idx, t = kernels.bounded_all_pairs(n, u, v, w, limit)
        full = floyd_warshall(n, u, v, w)
        for s in range(n):
            dest = idx[indptr[s]:indptr[s + 1]]
            assert np.all(np.diff(dest) > 0)
            expect = np.flatnonzero(full[s] <= limit)
            assert dest.tolist() == expect.tolist()
            assert np.allclose(t[indptr[s]:indptr[s + 1]], full[s, expect], rtol=1e-12, atol=0)

    def test_rejects_nonpositive_weight(self, backend):
        with pytest.raises(ValueError):
            kernels.bounded_all_pairs(2, [0], [1], [0.0], 10)

    def test_parallel_edges_and_loops(self, backend):
        indptr, idx, t = kernels.bounded_all_pairs(3, [0, 0, 1, 2], [1, 1, 1, 2], [5.0, 2.0, 1.0, 1.0], 100)
        assert idx[indptr[0]:indptr[1]].tolist() == [0, 1]
        assert t[indptr[0]:indptr[1]].tolist() == [0.0, 2.0]
        assert idx[indptr[2]:indptr[3]].tolist() == [2]

    def test_no_nodes(self, backend):
        indptr, idx, t = kernels.bounded_all_pairs(0, [], [], [], 10)
        assert indptr.tolist() == [0] and idx.size == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dijkstra_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 20))
    u, v, w = random_graph(rng, n)
    indptr, idx, t = kernels.bounded_all_pairs(n, u, v, w, 30.0)
    full = floyd_warshall(n, u, v, w)
    got = np.full((n, n), np.inf)
    for s in range(n):
        got[s, idx[indptr[s]:indptr[s + 1]]] = t[indptr[s]:indptr[s + 1]]
    expect = np.where(full <= 30.0, full, np.inf)
    assert np.allclose(got, expect, rtol=1e-12, equal_nan=False)


@needs_numba
class TestBackendAgreement:
    def _both(self, monkeypatch, fn):
        monkeypatch.delenv(DISABLE_ENV, raising=False)
        assert backend_name() == "numba"
        a = fn()
        monkeypatch.setenv(DISABLE_ENV, "1")
        assert backend_name() == "numpy"
        b = fn()
        return a, b

    def test_row_accumulate(self, monkeypatch):
        rng = np.random.default_rng(7)
        m = random_matrix(rng, 40)
        opp = rng.uniform(0, 100, 40)
        a, b = self._both(monkeypatch, lambda: kernels.row_accumulate(
            m.indptr, m.indices, m.minutes, np.arange(40), opp, 0.02, 1.3, 50.0))
        assert np.allclose(a, b, rtol=1e-13, atol=0)

    def test_dijkstra(self, monkeypatch):
        rng = np.random.default_rng(8)
        u, v, w = random_graph(rng, 300)
        (pa, ia, ta), (pb, ib, tb) = self._both(monkeypatch, lambda: kernels.bounded_all_pairs(300, u, v, w, 40.0))
        assert np.array_equal(pa, pb) and np.array_equal(ia, ib)
        assert np.allclose(ta, tb, rtol=1e-12, atol=0)

    def test_thread_count_irrelevant(self, monkeypatch):
        monkeypatch.delenv(DISABLE_ENV, raising=False)
        rng = np.random.default_rng(9)
        m = random_matrix(rng, 60)
        opp = rng.uniform(0, 100, 60)
        outs = []
        for k in (1, 2, 8):
            set_threads(k)
            outs.append(kernels.row_accumulate(m.indptr, m.indices, m.minutes, np.arange(60), opp, 0.02, 1.3, 50.0))
        set_threads(None)
        assert all(np.array_equal(outs[0], o) for o in outs[1:])
