"""Synthetic cities: zone lattices with opportunities, demographics and a road graph.

Zones sit on a square grid or a ring-and-spoke layout, placed on the globe
with an equirectangular projection around ``origin``. Roads join lattice
neighbours; edge lengths are great-circle distances between centroids, so
any path is at least as long as the straight line between its ends.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .efficiency import DEFAULT_VMAX_MPH
from .equity import SEDI_FACTORS, SediFactors
from .errors import InvalidConfig
from .model import (
    DEFAULT_MAX_THRESHOLD,
    EARTH_RADIUS_KM,
    CostMatrix,
    Mode,
    OpportunityTable,
    Zone,
    mph_to_km_per_min,
)
from .kernels import haversine_rad


@dataclass(frozen=True)
class Profile:
    """Spatial distribution of a per-zone quantity: ``scale * exp(-gamma * d_center_km)``."""

    kind: str = "uniform"
    gamma: float = 0.0
    scale: float = 1000.0

    def __post_init__(self):
        if self.kind not in ("uniform", "core_peaked"):
            raise InvalidConfig(f"unknown profile {self.kind!r}; expected uniform or core_peaked")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise InvalidConfig("profile gamma must be finite and >= 0")
        if not (math.isfinite(self.scale) and self.scale >= 0):
            raise InvalidConfig("profile scale must be finite and >= 0")

    def values(self, d_center):
        d_center = np.asarray(d_center, dtype=np.float64)
        if self.kind == "uniform":
            return np.full(d_center.shape, self.scale)
        return self.scale * np.exp(-self.gamma * d_center)

    @classmethod
    def core_peaked(cls, gamma, scale=1000.0):
        return cls("core_peaked", gamma, scale)


DEFAULT_OPPORTUNITIES = {
    "jobs_total": Profile.core_peaked(0.25, 800.0),
    "jobs_high": Profile.core_peaked(0.35, 300.0),
    "jobs_low": Profile.core_peaked(0.15, 300.0),
    "essential_stores": Profile.core_peaked(0.10, 6.0),
    "primary_services": Profile.core_peaked(0.15, 5.0),
    "leisure": Profile.core_peaked(0.20, 4.0),
}


@dataclass(frozen=True)
class SyntheticCity:
    layout: str = "grid"
    rows: int = 10
    cols: int = 10
    rings: int = 5
    spokes: int = 8
    spacing_km: float = 1.0
    origin_lat: float = 41.8781
    origin_lon: float = -87.6298
    population: Profile = Profile.core_peaked(0.05, 1500.0)
    worker_share: float = 0.48
    opportunities: dict = field(default_factory=lambda: dict(DEFAULT_OPPORTUNITIES))
    noise: float = 0.0
    integer_counts: bool = True
    speed_factor: float = 0.8
    sprawl: float = 0.0
    sprawl_slowdown: float = 0.0
    sedi_gradient: float = 0.6
    sedi_noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.layout not in ("grid", "radial"):
            raise InvalidConfig(f"unknown layout {self.layout!r}; expected grid or radial")
        if self.layout == "grid" and (self.rows < 1 or self.cols < 1):
            raise InvalidConfig("grid needs at least one row and one column")
        if self.layout == "radial" and (self.rings < 0 or (self.rings > 0 and self.spokes < 1)):
            raise InvalidConfig("radial layout needs rings >= 0 and spokes >= 1")
        if not (math.isfinite(self.spacing_km) and self.spacing_km > 0):
            raise InvalidConfig("spacing_km must be positive")
        if not (0 < self.speed_factor <= 1):
            raise InvalidConfig("speed_factor must lie in (0, 1] so edge speeds never exceed the modal maximum")
        if not (0 <= self.sprawl < 1):
            raise InvalidConfig("sprawl (edge removal fraction) must lie in [0, 1)")
        if not (0 <= self.sprawl_slowdown < 1):
            raise InvalidConfig("sprawl_slowdown must lie in [0, 1)")
        if not (0 <= self.worker_share <= 1):
            raise InvalidConfig("worker_share must lie in [0, 1]")
        if self.noise < 0 or self.sedi_noise < 0:
            raise InvalidConfig("noise levels must be >= 0")
        for kind, prof in self.opportunities.items():
            if not isinstance(prof, Profile):
                raise InvalidConfig(f"opportunity profile for {kind!r} is not a Profile")
        if not (-90 <= self.origin_lat <= 90 and -180 <= self.origin_lon <= 180):
            raise InvalidConfig("origin coordinates out of range")

    @property
    def n_zones(self):
        if self.layout == "grid":
            return self.rows * self.cols
        return 1 + self.rings * self.spokes

    def to_json(self):
        d = asdict(self)
        d["population"] = asdict(self.population)
        d["opportunities"] = {k: asdict(v) for k, v in self.opportunities.items()}
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        if "population" in d:
            d["population"] = Profile(**d["population"])
        if "opportunities" in d:
            d["opportunities"] = {k: Profile(**v) for k, v in d["opportunities"].items()}
        return cls(**d)


@dataclass(frozen=True)
class RoadGraph:
    zone_ids: tuple
    u: np.ndarray
    v: np.ndarray
    length_km: np.ndarray
    speed_mph: dict  # Mode -> per-edge speeds
    n_components: int = 1

    @property
    def n_nodes(self):
        return len(self.zone_ids)

    @property
    def connected(self):
        return self.n_components == 1

    def edge_minutes(self, mode):
        mode = Mode.parse(mode)
        return self.length_km / mph_to_km_per_min(self.speed_mph[mode])


class City(NamedTuple):
    zones: list
    opportunities: OpportunityTable
    graph: RoadGraph
    factors: SediFactors


def _layout(config: SyntheticCity):
    """Planar positions (km, centred on the core) and lattice edges."""
    s = config.spacing_km
    if config.layout == "grid":
        r, c = np.divmod(np.arange(config.rows * config.cols), config.cols)
        x = (c - (config.cols - 1) / 2.0) * s
        y = (r - (config.rows - 1) / 2.0) * s
        idx = np.arange(config.rows * config.cols).reshape(config.rows, config.cols)
        horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
        vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
        edges = np.concatenate([horiz, vert]).astype(np.int64)
        return x, y, edges
    k, m = config.rings, config.spokes
    x, y, edges = [0.0], [0.0], []
    for ring in range(1, k + 1):
        for spoke in range(m):
            ang = 2.0 * math.pi * spoke / m
            x.append(ring * s * math.cos(ang))
            y.append(ring * s * math.sin(ang))
    node = lambda ring, spoke: 1 + (ring - 1) * m + spoke  # noqa: E731
    for spoke in range(m if k else 0):
        edges.append((0, node(1, spoke)))
        for ring in range(1, k):
            edges.append((node(ring, spoke), node(ring + 1, spoke)))
    if m > 1:
        for ring in range(1, k + 1):
            for spoke in range(m if m > 2 else 1):
                edges.append((node(ring, spoke), node(ring, (spoke + 1) % m)))
    return np.array(x), np.array(y), np.array(edges, dtype=np.int64).reshape(-1, 2)


def _to_latlon(config, x, y):
    lat0 = math.radians(config.origin_lat)
    lat = config.origin_lat + np.degrees(y / EARTH_RADIUS_KM)
    lon = config.origin_lon + np.degrees(x / (EARTH_RADIUS_KM * math.cos(lat0)))
    if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
        raise InvalidConfig("city extends beyond valid coordinate ranges; move the origin or shrink spacing")
    return lat, lon


def _zone_ids(n):
    width = max(4, len(str(max(n - 1, 0))))
    return [f"z{i:0{width}d}" for i in range(n)]


def generate(config: SyntheticCity) -> City:
    """Build a city deterministically from ``config`` (including its seed)."""
    if config.n_zones < 1:
        raise InvalidConfig("a city needs at least one zone")
    rng = np.random.default_rng(config.seed)
    x, y, edges = _layout(config)
    n = x.size
    lat, lon = _to_latlon(config, x, y)
    ids = _zone_ids(n)
    d_center = np.hypot(x, y)

    def draw(profile):
        vals = profile.values(d_center)
        if config.noise > 0:
            vals = vals * rng.lognormal(0.0, config.noise, size=n)
        return np.round(vals) if config.integer_counts else vals

    pop = draw(config.population)
    workers = np.round(pop * config.worker_share) if config.integer_counts else pop * config.worker_share
    zones = [Zone(ids[i], float(lat[i]), float(lon[i]), float(pop[i]), float(workers[i])) for i in range(n)]

    kinds = tuple(config.opportunities)
    opps = OpportunityTable(kinds=kinds)
    for kind in kinds:
        vals = draw(config.opportunities[kind])
        for i in np.flatnonzero(vals > 0):
            opps.set(ids[i], kind, float(vals[i]))

    graph = _road_graph(config, rng, ids, lat, lon, x, y, edges)
    factors = _sedi_factors(config, rng, ids, y)
    return City(zones, opps, graph, factors)


def _road_graph(config, rng, ids, lat, lon, x, y, edges):
    if config.sprawl > 0 and edges.size:
        keep = rng.random(edges.shape[0]) >= config.sprawl
        edges = edges[keep]
    u, v = edges[:, 0], edges[:, 1]
    la, lo = np.radians(lat), np.radians(lon)
    length = haversine_rad(la[u], lo[u], la[v], lo[v])
    mid = np.hypot((x[u] + x[v]) / 2.0, (y[u] + y[v]) / 2.0)
    d_max = max(float(np.hypot(x, y).max()), 1e-12)
    factor = config.speed_factor * (1.0 - config.sprawl_slowdown * mid / d_max)
    speeds = {m: DEFAULT_VMAX_MPH[m] * factor for m in Mode}
    n = len(ids)
    if n:
        adj = coo_matrix((np.ones(u.size), (u, v)), shape=(n, n))
        n_comp = int(connected_components(adj, directed=False)[0])
    else:
        n_comp = 0
    return RoadGraph(tuple(ids), u.copy(), v.copy(), length, speeds, n_comp)


def _sedi_factors(config, rng, ids, y):
    """Disadvantage rises toward the south edge of the city, plus noise."""
    span = float(y.max() - y.min())
    south = (y.max() - y) / span if span > 0 else np.zeros(y.size)
    base = {
        "poverty": 0.10,
        "minority": 0.25,
        "unemployment": 0.05,
        "low_education": 0.10,
        "zero_vehicle": 0.08,
        "single_parent": 0.10,
    }
    raw = {}
    for f in SEDI_FACTORS:
        vals = base[f] + config.sedi_gradient * south * (1.0 - base[f])
        vals = vals + config.sedi_noise * rng.standard_normal(y.size)
        raw[f] = np.clip(np.round(vals, 4), 0.0, 1.0)
    values = {z: {f: float(raw[f][i]) for f in SEDI_FACTORS} for i, z in enumerate(ids)}
    return SediFactors(values)


def travel_time_matrix(graph: RoadGraph, mode, max_threshold: float = DEFAULT_MAX_THRESHOLD) -> CostMatrix:
    """Shortest-path travel times (minutes) from every zone, pruned at ``max_threshold``."""
    mode = Mode.parse(mode)
    if not (math.isfinite(max_threshold) and max_threshold > 0):
        raise InvalidConfig("max_threshold must be positive")
    indptr, idx, t = kernels.bounded_all_pairs(graph.n_nodes, graph.u, graph.v, graph.edge_minutes(mode),
                                                max_threshold)
    origins = np.repeat(np.arange(graph.n_nodes), np.diff(indptr))
    return CostMatrix.from_arrays(mode, graph.zone_ids, origins, idx, t, max_threshold)
