"""Domain types: zones, regions, opportunity tables and the sparse cost matrix."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyPopulation,
    InvalidCoordinate,
    InvalidDuration,
    UnknownKind,
    UnknownZone,
)

EARTH_RADIUS_KM = 6371.0088
KM_PER_MILE = 1.609344
DEFAULT_MAX_THRESHOLD = 90.0

DEFAULT_KINDS = (
    "jobs_total",
    "jobs_high",
    "jobs_low",
    "essential_stores",
    "primary_services",
    "leisure",
)


class Mode(str, enum.Enum):
    DRIVE = "drive"
    WALK = "walk"
    BIKE = "bike"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown mode {value!r}; expected one of drive, walk, bike") from None


def mph_to_km_per_min(mph):
    return mph * KM_PER_MILE / 60.0


def _check_coordinate(lat, lon):
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise InvalidCoordinate(f"non-finite coordinate ({lat}, {lon})")
    if not -90.0 <= lat <= 90.0:
        raise InvalidCoordinate(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise InvalidCoordinate(f"longitude {lon} outside [-180, 180]")


def haversine_km(a, b):
    """Great-circle distance in km between two ``(lat, lon)`` pairs given in degrees."""
    lat1, lon1 = float(a[0]), float(a[1])
    lat2, lon2 = float(b[0]), float(b[1])
    _check_coordinate(lat1, lon1)
    _check_coordinate(lat2, lon2)
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


@dataclass(frozen=True)
class Zone:
    id: str
    centroid_lat: float
    centroid_lon: float
    population: float = 0.0
    workers: float = 0.0

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("zone id must be a non-empty string")
        _check_coordinate(self.centroid_lat, self.centroid_lon)
        for name in ("population", "workers"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"zone {self.id}: {name} must be a finite nonnegative count, got {v}")

    @property
    def centroid(self):
        return (self.centroid_lat, self.centroid_lon)


def zone_index(zones):
    """Map id -> Zone, accepting either a mapping or a sequence of zones."""
    if isinstance(zones, Mapping):
        return dict(zones)
    out = {}
    for z in zones:
        if z.id in out:
            raise ValueError(f"duplicate zone id {z.id!r}")
        out[z.id] = z
    return out


@dataclass(frozen=True)
class Region:
    """Ordered subset S of the environment zones."""

    zone_ids: tuple

    def __init__(self, zone_ids: Iterable[str]):
        ids = tuple(str(z) for z in zone_ids)
        if len(set(ids)) != len(ids):
            seen = set()
            dup = next(z for z in ids if z in seen or seen.add(z))
            raise ValueError(f"duplicate zone id {dup!r} in region")
        object.__setattr__(self, "zone_ids", ids)

    def __len__(self):
        return len(self.zone_ids)

    def __iter__(self):
        return iter(self.zone_ids)

    @classmethod
    def of(cls, zones):
        """Region covering every zone, in ascending id order."""
        return cls(sorted(zone_index(zones)))

    def validate(self, zones):
        known = zone_index(zones) if not isinstance(zones, (set, frozenset)) else zones
        for z in self.zone_ids:
            if z not in known:
                raise UnknownZone(f"region zone {z!r} is not a known zone")


def population_weights(region: Region, zones, basis: str = "population") -> np.ndarray:
    """Normalised weights ``p_i = n_i / sum_S n_j`` aligned with ``region``."""
    if basis not in ("population", "workers"):
        raise ValueError(f"basis must be 'population' or 'workers', got {basis!r}")
    counts = _basis_counts(region, zones, basis)
    total = counts.sum()
    if not total > 0:
        raise EmptyPopulation(f"total {basis} over the region is zero")
    return counts / total


def _basis_counts(region, zones, basis):
    idx = zone_index(zones)
    region.validate(idx)
    return np.array([getattr(idx[z], basis) for z in region.zone_ids], dtype=np.float64)


class OpportunityTable:
    """Per-zone opportunity counts by kind. Absent entries are zero."""

    def __init__(self, counts: Mapping | None = None, kinds: Sequence[str] = DEFAULT_KINDS):
        self.kinds = tuple(dict.fromkeys(kinds))
        self._counts: dict[str, dict[str, float]] = {k: {} for k in self.kinds}
        for (zone_id, kind), value in (counts or {}).items():
            self.set(zone_id, kind, value)

    def register(self, kind):
        if kind not in self._counts:
            self.kinds = self.kinds + (kind,)
            self._counts[kind] = {}

    def set(self, zone_id, kind, value):
        if kind not in self._counts:
            raise UnknownKind(f"opportunity kind {kind!r} is not registered")
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"opportunity count must be finite and >= 0, got {value}")
        self._counts[kind][zone_id] = value

    def get(self, zone_id, kind):
        return self._counts[self._check(kind)].get(zone_id, 0.0)

    def _check(self, kind):
        if kind not in self._counts:
            raise UnknownKind(f"opportunity kind {kind!r} is not registered")
        return kind

    def vector(self, kind, zone_ids: Sequence[str]) -> np.ndarray:
        col = self._counts[self._check(kind)]
        return np.array([col.get(z, 0.0) for z in zone_ids], dtype=np.float64)

    def items(self):
        """Nonzero-or-explicit entries as ``(zone_id, kind, count)`` in kind then zone order."""
        for kind in self.kinds:
            col = self._counts[kind]
            for z in sorted(col):
                yield z, kind, col[z]

    def scaled(self, factor):
        out = OpportunityTable(kinds=self.kinds)
        for z, k, v in self.items():
            out.set(z, k, v * factor)
        return out

    def __eq__(self, other):
        if not isinstance(other, OpportunityTable):
            return NotImplemented
        return self.kinds == other.kinds and self._counts == other._counts


class CostMatrix:
    """Sparse origin -> destination travel times (minutes) for one mode.

    Compressed-row layout over ``zone_ids`` sorted ascending, so destination
    index order is destination id order. Pairs above ``max_threshold`` are
    dropped at construction; every zone gets a self pair (0 min unless given).
    Arrays are read-only once built.
    """

    def __init__(self, mode, zone_ids, indptr, indices, minutes, max_threshold):
        self.mode = Mode.parse(mode)
        self.zone_ids = tuple(zone_ids)
        self.max_threshold = float(max_threshold)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.minutes = np.ascontiguousarray(minutes, dtype=np.float64)
        for a in (self.indptr, self.indices, self.minutes):
            a.setflags(write=False)
        self._pos = {z: i for i, z in enumerate(self.zone_ids)}

    @classmethod
    def from_arrays(cls, mode, zone_ids, origins, destinations, minutes, max_threshold=DEFAULT_MAX_THRESHOLD):
        """Build from parallel arrays of origin/destination *indices* into ``zone_ids``."""
        zone_ids = [str(z) for z in zone_ids]
        if len(set(zone_ids)) != len(zone_ids):
            raise ValueError("duplicate zone ids in cost matrix")
        max_threshold = float(max_threshold)
        if not (math.isfinite(max_threshold) and max_threshold > 0):
            raise ValueError("max_threshold must be a positive finite number of minutes")
        n = len(zone_ids)
        order = np.argsort(np.array(zone_ids, dtype=object), kind="stable") if n else np.zeros(0, np.int64)
        rank = np.empty(n, dtype=np.int64)
        rank[order] = np.arange(n)
        sorted_ids = [zone_ids[i] for i in order]

        o = rank[np.asarray(origins, dtype=np.int64)]
        d = rank[np.asarray(destinations, dtype=np.int64)]
        t = np.asarray(minutes, dtype=np.float64)
        if not (o.shape == d.shape == t.shape):
            raise DimensionMismatch("origin, destination and minutes arrays differ in length")
        if t.size and (not np.all(np.isfinite(t)) or t.min() < 0):
            raise InvalidDuration("travel times must be finite and >= 0")

        keep = t <= max_threshold
        o, d, t = o[keep], d[keep], t[keep]
        # implicit self pairs
        have_self = np.zeros(n, dtype=bool)
        have_self[o[o == d]] = True
        missing = np.flatnonzero(~have_self)
        o = np.concatenate([o, missing])
        d = np.concatenate([d, missing])
        t = np.concatenate([t, np.zeros(missing.size)])

        key = o * max(n, 1) + d
        perm = np.argsort(key, kind="stable")
        o, d, t, key = o[perm], d[perm], t[perm], key[perm]
        if key.size > 1:
            dup = np.flatnonzero(key[1:] == key[:-1])
            if dup.size:
                i = dup[0]
                raise ValueError(f"duplicate pair ({sorted_ids[o[i]]}, {sorted_ids[d[i]]}) in cost matrix")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(o, minlength=n), out=indptr[1:])
        return cls(mode, sorted_ids, indptr, d, t, max_threshold)

    @classmethod
    def from_triples(cls, mode, triples: Iterable, max_threshold=DEFAULT_MAX_THRESHOLD, zone_ids=None):
        """Build from ``(origin_id, destination_id, minutes)`` triples."""
        triples = list(triples)
        ids = list(dict.fromkeys(zone_ids or []))
        pos = {z: i for i, z in enumerate(ids)}
        o, d, t = [], [], []
        for a, b, m in triples:
            for z in (a, b):
                if z not in pos:
                    if zone_ids is not None:
                        raise UnknownZone(f"cost matrix references unknown zone {z!r}")
                    pos[z] = len(ids)
                    ids.append(z)
            o.append(pos[a])
            d.append(pos[b])
            t.append(m)
        return cls.from_arrays(mode, ids, o, d, t, max_threshold)

    @property
    def n_zones(self):
        return len(self.zone_ids)

    @property
    def nnz(self):
        return int(self.indices.size)

    def index_of(self, zone_id):
        try:
            return self._pos[zone_id]
        except KeyError:
            raise UnknownZone(f"zone {zone_id!r} is not in the {self.mode} cost matrix") from None

    def indices_of(self, zone_ids) -> np.ndarray:
        return np.array([self.index_of(z) for z in zone_ids], dtype=np.int64)

    def row(self, origin_id):
        """Stored ``(destination_id, minutes)`` pairs for one origin, ascending by id."""
        i = self.index_of(origin_id)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return [(self.zone_ids[j], float(m)) for j, m in zip(self.indices[lo:hi], self.minutes[lo:hi])]

    @property
    def entries(self):
        return {z: self.row(z) for z in self.zone_ids}

    def get(self, origin_id, destination_id):
        """Travel time, or ``None`` when the pair exceeds ``max_threshold``."""
        i, j = self.index_of(origin_id), self.index_of(destination_id)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = lo + np.searchsorted(self.indices[lo:hi], j)
        if k < hi and self.indices[k] == j:
            return float(self.minutes[k])
        return None

    def iter_pairs(self) -> Iterator[tuple]:
        ids = self.zone_ids
        for i in range(self.n_zones):
            for k in range(self.indptr[i], self.indptr[i + 1]):
                yield ids[i], ids[self.indices[k]], float(self.minutes[k])

    def origins(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_zones, dtype=np.int64), np.diff(self.indptr))

    def __eq__(self, other):
        if not isinstance(other, CostMatrix):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.zone_ids == other.zone_ids
            and self.max_threshold == other.max_threshold
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.minutes, other.minutes)
        )

    def __repr__(self):
        return f"CostMatrix(mode={self.mode.value}, zones={self.n_zones}, nnz={self.nnz}, max_threshold={self.max_threshold})"
