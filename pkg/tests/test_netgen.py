import hashlib
import io

import numpy as np
import pytest

from gravcat import io as gio
from gravcat.errors import InvalidConfig
from gravcat.model import Mode, haversine_km, mph_to_km_per_min
from gravcat.netgen import Profile, RoadGraph, SyntheticCity, generate, travel_time_matrix


def city_digest(city):
    buf = io.StringIO()
    gio.write_zones(city.zones, buf)
    gio.write_opportunities(city.opportunities, buf)
    gio.write_demographics(city.factors, buf)
    for m in Mode:
        gio.write_matrix(travel_time_matrix(city.graph, m), buf)
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def test_two_by_two_spacing():
    city = generate(SyntheticCity(rows=2, cols=2, spacing_km=1.0, population=Profile()))
    assert len(city.zones) == 4
    z = city.zones
    assert haversine_km(z[0].centroid, z[1].centroid) == pytest.approx(1.0, rel=1e-3)
    assert haversine_km(z[0].centroid, z[2].centroid) == pytest.approx(1.0, rel=1e-3)
    assert {zz.population for zz in z} == {1000.0}


def test_core_peaked_gamma_zero_is_uniform():
    vals = Profile.core_peaked(0.0, 7.0).values(np.array([0.0, 3.0, 10.0]))
    assert vals.tolist() == [7.0, 7.0, 7.0]


def test_core_peaked_decays():
    vals = Profile.core_peaked(0.2, 100.0).values(np.array([0.0, 1.0, 5.0]))
    assert vals[0] > vals[1] > vals[2]


def test_deterministic():
    cfg = SyntheticCity(rows=6, cols=5, seed=42, noise=0.4, sprawl=0.2)
    assert city_digest(generate(cfg)) == city_digest(generate(cfg))


def test_seed_matters():
    a = generate(SyntheticCity(rows=5, cols=5, seed=1, noise=0.4))
    b = generate(SyntheticCity(rows=5, cols=5, seed=2, noise=0.4))
    assert city_digest(a) != city_digest(b)


def test_config_json_round_trip():
    cfg = SyntheticCity(layout="radial", rings=3, spokes=6, seed=9, sprawl=0.1)
    assert SyntheticCity.from_json(cfg.to_json()) == cfg


@pytest.mark.parametrize("kw", [dict(layout="hex"), dict(rows=0), dict(speed_factor=1.2), dict(speed_factor=0),
                                dict(sprawl=1.0), dict(spacing_km=-1), dict(noise=-0.1),
                                dict(origin_lat=89.9, rows=200, spacing_km=5)])
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        generate(SyntheticCity(**kw))


def test_radial_layout():
    city = generate(SyntheticCity(layout="radial", rings=3, spokes=8))
    assert len(city.zones) == 25
    assert city.graph.connected


def test_edge_speeds_capped():
    city = generate(SyntheticCity(rows=6, cols=6, speed_factor=0.9, sprawl_slowdown=0.4))
    caps = {Mode.DRIVE: 60, Mode.WALK: 4, Mode.BIKE: 16}
    for m, cap in caps.items():
        assert np.all(city.graph.speed_mph[m] <= cap)


def test_sprawl_reports_components():
    city = generate(SyntheticCity(rows=10, cols=10, sprawl=0.6, seed=0))
    assert city.graph.n_components > 1 and not city.graph.connected


def test_edge_time_one_minute(backend):
    kmh60_as_mph = 60.0 / 1.609344
    g = RoadGraph(("a", "b"), np.array([0]), np.array([1]), np.array([1.0]),
                  {m: np.array([kmh60_as_mph]) for m in Mode})
    m = travel_time_matrix(g, "drive")
    assert m.get("a", "b") == pytest.approx(1.0, rel=1e-14)


def test_path_additive(backend):
    g = RoadGraph(("a", "b", "c"), np.array([0, 1]), np.array([1, 2]), np.array([1.0, 1.0]),
                  {m: np.array([30.0, 30.0]) for m in Mode})
    m = travel_time_matrix(g, "drive")
    assert m.get("a", "c") == m.get("a", "b") + m.get("b", "c")


def test_walk_cutoff_on_line(backend):
    city = generate(SyntheticCity(rows=10, cols=1, spacing_km=1.0, speed_factor=1.0))
    m = travel_time_matrix(city.graph, "walk", max_threshold=30)
    reach_km = 30 * mph_to_km_per_min(4)
    assert reach_km == pytest.approx(3.2187, abs=1e-4)
    for o, d, t in m.iter_pairs():
        zo, zd = city.zones[m.index_of(o)], city.zones[m.index_of(d)]
        assert haversine_km(zo.centroid, zd.centroid) <= reach_km + 1e-9
    assert len(m.row("z0000")) == 4
    assert len(m.row("z0005")) == 7


def test_sedi_factors_rise_south():
    city = generate(SyntheticCity(rows=10, cols=3, sedi_noise=0.0))
    south = city.factors.values["z0000"]["poverty"]
    north = city.factors.values["z0029"]["poverty"]
    assert south > north


def test_matrices_respect_prune(small_city):
    for mode in Mode:
        m = travel_time_matrix(small_city.graph, mode, 20)
        assert m.minutes.max() <= 20
