import pytest

from gravcat._backend import DISABLE_ENV, HAVE_NUMBA
from gravcat.impedance import ImpedanceParams
from gravcat.model import CostMatrix, Mode, OpportunityTable, Region, Zone
from gravcat.netgen import SyntheticCity, generate, travel_time_matrix

BASE_ALPHA, BASE_BETA = 0.008, 1.467


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    if request.param == "numba":
        if not HAVE_NUMBA:
            pytest.skip("numba not installed")
        monkeypatch.delenv(DISABLE_ENV, raising=False)
    else:
        monkeypatch.setenv(DISABLE_ENV, "1")
    return request.param


@pytest.fixture
def base_params():
    return ImpedanceParams(BASE_ALPHA, BASE_BETA, "jobs_total", Mode.DRIVE)


@pytest.fixture
def toy():
    """Three zones: A-B 30 min, A-C 60 min, B-C 20 min (symmetric)."""
    zones = [
        Zone("A", 41.88, -87.63, 100, 50),
        Zone("B", 41.90, -87.63, 200, 80),
        Zone("C", 41.92, -87.63, 300, 120),
    ]
    opps = OpportunityTable({("A", "jobs_total"): 10, ("B", "jobs_total"): 20, ("C", "jobs_total"): 5})
    triples = []
    for a, b, t in [("A", "B", 30), ("A", "C", 60), ("B", "C", 20)]:
        triples += [(a, b, t), (b, a, t)]
    matrix = CostMatrix.from_triples(Mode.DRIVE, triples)
    return zones, opps, matrix, Region(["A", "B", "C"])


@pytest.fixture(scope="session")
def small_city():
    return generate(SyntheticCity(rows=8, cols=8, spacing_km=1.5, seed=3, noise=0.3))


@pytest.fixture(scope="session")
def small_matrices(small_city):
    return {m: travel_time_matrix(small_city.graph, m) for m in Mode}


def random_matrix(rng, n, density=0.6, tmax=80.0, max_threshold=90.0, mode=Mode.DRIVE):
    ids = [f"z{i}" for i in range(n)]
    o, d, t = [], [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                if rng.random() < 0.5:
                    o.append(i), d.append(j), t.append(float(rng.uniform(0, 5)))
            elif rng.random() < density:
                o.append(i), d.append(j), t.append(float(rng.uniform(0, tmax)))
    return CostMatrix.from_arrays(mode, ids, o, d, t, max_threshold)
