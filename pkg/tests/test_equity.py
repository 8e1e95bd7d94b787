import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gravcat.access import aggregate, zonal_accessibility
from gravcat.equity import (
    SEDI_FACTORS,
    ImprovementPotential,
    SediFactors,
    SediTable,
    fractional_rank,
    improvement_potential,
    rank_descending,
    rank_shift,
    sedi,
    sedi_weighted_population,
)
from gravcat.errors import EmptyPopulation, InsufficientData, KeyMismatch, MissingIndex
from gravcat.impedance import ImpedanceParams
from gravcat.model import CostMatrix, Mode, OpportunityTable, Region, Zone, population_weights

F10 = 0.7909888087


def factors_from(arrays, ids):
    return SediFactors({z: {f: float(arrays[f][k]) for f in SEDI_FACTORS} for k, z in enumerate(ids)})


def random_factors(rng, n):
    ids = [f"z{i:02d}" for i in range(n)]
    return factors_from({f: rng.uniform(0, 1, n) for f in SEDI_FACTORS}, ids), ids


class TestFractionalRank:
    def test_larger_is_worse(self):
        assert fractional_rank([1, 2, 3, 4]).tolist() == pytest.approx([0, 1 / 3, 2 / 3, 1])

    def test_direction_inverted(self):
        assert fractional_rank([1, 2, 3, 4], larger_is_worse=False).tolist() == pytest.approx([1, 2 / 3, 1 / 3, 0])

    def test_ties_average(self):
        assert fractional_rank([5, 5, 1]).tolist() == [0.75, 0.75, 0.0]


class TestSedi:
    def test_bounds(self):
        rng = np.random.default_rng(0)
        fac, ids = random_factors(rng, 25)
        t = sedi(fac, Region(ids))
        assert all(0 <= v <= 1 for v in t.values.values())

    def test_extremes(self):
        ids = ["a", "b", "c"]
        fac = factors_from({f: [0.1, 0.5, 0.9] for f in SEDI_FACTORS}, ids)
        t = sedi(fac, Region(ids))
        assert t.values == {"a": 0.0, "b": 0.5, "c": 1.0}

    def test_monotone_transform_invariant(self):
        rng = np.random.default_rng(1)
        fac, ids = random_factors(rng, 30)
        t1 = sedi(fac, Region(ids))
        bent = SediFactors({z: {f: (math.exp(v) if f == "poverty" else v ** 3) for f, v in row.items()}
                            for z, row in fac.values.items()})
        t2 = sedi(bent, Region(ids))
        assert t1 == t2

    def test_missing_factor_excluded(self, caplog):
        ids = ["a", "b", "c"]
        fac = factors_from({f: [0.1, 0.5, 0.9] for f in SEDI_FACTORS}, ids)
        del fac.values["b"]["zero_vehicle"]
        with caplog.at_level(logging.WARNING):
            t = sedi(fac, Region(ids))
        assert t.region == ("a", "c")
        assert "b" in caplog.text

    def test_too_few(self):
        fac = factors_from({f: [0.1] for f in SEDI_FACTORS}, ["a"])
        with pytest.raises(InsufficientData):
            sedi(fac, Region(["a"]))

    def test_weights(self):
        ids = ["a", "b"]
        arrays = {f: [0.0, 1.0] for f in SEDI_FACTORS}
        arrays["poverty"] = [1.0, 0.0]
        fac = factors_from(arrays, ids)
        only_poverty = sedi(fac, Region(ids), weights={"poverty": 1.0})
        assert only_poverty.values == {"a": 1.0, "b": 0.0}


def three_zone_symmetric():
    trip = {("A", "B"): 10, ("A", "C"): 50, ("B", "C"): 10}
    triples = []
    for (a, b), t in trip.items():
        triples += [(a, b, t), (b, a, t)]
    return CostMatrix.from_triples("drive", triples)


class TestImprovementPotential:
    def test_three_zone(self, backend, base_params):
        m = three_zone_symmetric()
        region = Region(["A", "B", "C"])
        ip = improvement_potential(region, m, base_params, 30, np.full(3, 1 / 3))
        g = ip.as_dict()
        assert g["B"] == pytest.approx((2 * F10 + 1) / 3, abs=1e-9)
        assert g["A"] == pytest.approx((1 + F10) / 3, abs=1e-9)
        assert ip.ranks() == {"B": 1, "A": 2, "C": 3}  # A/C tie broken by id

    def test_self_only(self, backend, base_params):
        m = three_zone_symmetric()
        p = np.array([0.2, 0.3, 0.5])
        ip = improvement_potential(Region(["A", "B", "C"]), m, base_params, 5, p)
        assert ip.gradient.tolist() == p.tolist()

    def test_ranks_permutation(self, backend, small_city, small_matrices):
        region = Region.of(small_city.zones)
        p = population_weights(region, small_city.zones)
        ip = improvement_potential(region, small_matrices[Mode.WALK],
                                   ImpedanceParams(0.008, 1.467, "x", "walk"), 45, p)
        assert sorted(ip.rank.tolist()) == list(range(1, len(region) + 1))

    def test_linearity(self, backend, small_city, small_matrices):
        rng = np.random.default_rng(5)
        zones = small_city.zones
        region = Region([z.id for z in zones][::3])
        p = population_weights(region, zones)
        m = small_matrices[Mode.DRIVE]
        params = ImpedanceParams(0.008, 1.467, "jobs_total", "drive")
        ip = improvement_potential(region, m, params, 30, p)
        base = small_city.opportunities
        chi0 = aggregate(region, zonal_accessibility(region, m, base, "jobs_total", params, 30), p)
        for _ in range(10):
            delta = rng.uniform(0, 50, len(region))
            counts = {(z, "jobs_total"): base.get(z, "jobs_total") for z in m.zone_ids}
            for z, d in zip(region.zone_ids, delta):
                counts[(z, "jobs_total")] += d
            chi1 = aggregate(region, zonal_accessibility(region, m, OpportunityTable(counts), "jobs_total",
                                                         params, 30), p)
            assert chi1 - chi0 == pytest.approx(float(ip.gradient @ delta), rel=1e-9)


def test_rank_descending_ties():
    assert rank_descending(["c", "a", "b"], [1.0, 1.0, 2.0]).tolist() == [3, 2, 1]


class TestSediWeights:
    zones = [Zone("A", 0, 0, 100, 10), Zone("B", 0, 1, 100, 10)]

    def test_lambda_zero_bit_identical(self):
        region = Region(["A", "B"])
        t = SediTable(("A", "B"), {"A": 0.3, "B": 0.9}, {})
        assert np.array_equal(sedi_weighted_population(self.zones, t, region, 0.0), population_weights(region, self.zones))

    def test_arithmetic(self):
        t = SediTable(("A", "B"), {"A": 0.0, "B": 1.0}, {})
        w = sedi_weighted_population(self.zones, t, Region(["A", "B"]), 1.0)
        assert w.tolist() == pytest.approx([1 / 3, 2 / 3])

    def test_monotone_in_lambda(self):
        t = SediTable(("A", "B"), {"A": 0.2, "B": 0.8}, {})
        shares = [sedi_weighted_population(self.zones, t, Region(["A", "B"]), lam)[1] for lam in (0, 1, 5, 50, 1e6)]
        assert all(b > a for a, b in zip(shares, shares[1:]))

    def test_missing_index(self):
        t = SediTable(("A",), {"A": 0.2}, {})
        with pytest.raises(MissingIndex):
            sedi_weighted_population(self.zones, t, Region(["A", "B"]))

    def test_empty(self):
        zones = [Zone("A", 0, 0, 0, 0)]
        with pytest.raises(EmptyPopulation):
            sedi_weighted_population(zones, SediTable(("A",), {"A": 0.5}, {}), Region(["A"]))


class TestRankShift:
    def _ip(self, ranks, key=("k", "drive", 30.0)):
        ids = tuple(sorted(ranks))
        return ImprovementPotential(ids, np.zeros(len(ids)), np.array([ranks[z] for z in ids]), key=key)

    def test_identity(self):
        a = self._ip({"a": 1, "b": 2})
        assert rank_shift(a, a) == {"a": 0, "b": 0}

    def test_key_mismatch(self):
        with pytest.raises(KeyMismatch):
            rank_shift(self._ip({"a": 1}), self._ip({"a": 1}, key=("k", "walk", 30.0)))

    def test_toy_moves_c_to_top(self, backend, base_params):
        zones = [Zone(z, 0, i, 100, 50) for i, z in enumerate("ABC")]
        region = Region(["A", "B", "C"])
        m = three_zone_symmetric()
        u = improvement_potential(region, m, base_params, 30, population_weights(region, zones))
        t = SediTable(("A", "B", "C"), {"A": 0.0, "B": 0.0, "C": 1.0}, {})
        w = improvement_potential(region, m, base_params, 30, sedi_weighted_population(zones, t, region, 4.0),
                                  "sedi")
        assert u.ranks()["C"] == 3 and w.ranks()["C"] == 1
        shift = rank_shift(u, w)
        assert shift["C"] == 2
        assert sum(shift.values()) == 0

    @settings(max_examples=50, deadline=None)
    @given(st.permutations(list(range(1, 9))), st.permutations(list(range(1, 9))))
    def test_sums_to_zero(self, r1, r2):
        ids = [f"z{i}" for i in range(8)]
        s = rank_shift(self._ip(dict(zip(ids, r1))), self._ip(dict(zip(ids, r2))))
        assert sum(s.values()) == 0
