"""Socio-economic disadvantage index and the opportunity improvement potential."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .errors import (
    DimensionMismatch,
    EmptyPopulation,
    InsufficientData,
    KeyMismatch,
    MissingIndex,
    ThresholdExceedsPrune,
)
from .impedance import ImpedanceParams
from .model import CostMatrix, Region, _basis_counts

log = logging.getLogger(__name__)

SEDI_FACTORS = (
    "poverty",
    "minority",
    "unemployment",
    "low_education",
    "zero_vehicle",
    "single_parent",
)

# True: a larger raw value means more disadvantage
DEFAULT_DIRECTIONS = {f: True for f in SEDI_FACTORS}


@dataclass
class SediFactors:
    """Raw factor values per zone: ``values[zone_id][factor]``.

    ``directions`` says, per factor, whether a larger value means more
    disadvantage. A vehicle-ownership share, for instance, would be ``False``.
    """

    values: Mapping[str, Mapping[str, float]]
    directions: Mapping[str, bool] = None
    factors: tuple = SEDI_FACTORS

    def __post_init__(self):
        if self.directions is None:
            self.directions = dict(DEFAULT_DIRECTIONS)
        self.factors = tuple(self.factors)
        unknown = [f for f in self.factors if f not in self.directions]
        if unknown:
            raise ValueError(f"no direction registered for factor {unknown[0]!r}")

    def complete(self, zone_id):
        row = self.values.get(zone_id)
        if row is None:
            return False
        return all(f in row and row[f] is not None and math.isfinite(row[f]) for f in self.factors)


@dataclass(frozen=True)
class SediTable:
    region: tuple
    values: dict  # zone_id -> composite in [0, 1]
    factor_ranks: dict  # factor -> {zone_id: rank in [0, 1]}

    def __getitem__(self, zone_id):
        return self.values[zone_id]

    def get(self, zone_id, default=None):
        return self.values.get(zone_id, default)


def fractional_rank(x: np.ndarray, larger_is_worse: bool = True) -> np.ndarray:
    """``(rank - 1) / (N - 1)`` with average ranks for ties; 1 is most disadvantaged."""
    x = np.asarray(x, dtype=np.float64)
    r = (rankdata(x, method="average") - 1.0) / (x.size - 1)
    return r if larger_is_worse else 1.0 - r


def sedi(factors: SediFactors, region: Region, weights: Mapping[str, float] | None = None) -> SediTable:
    """Composite disadvantage index: weighted mean of per-factor fractional ranks.

    Ranks are taken within ``region`` only. Zones lacking any factor are
    dropped with a warning.
    """
    zones = []
    for z in region.zone_ids:
        if factors.complete(z):
            zones.append(z)
        else:
            log.warning("zone %s lacks one or more disadvantage factors; excluded from the index", z)
    if len(zones) < 2:
        raise InsufficientData(f"{len(zones)} zones with complete factors; at least 2 required")
    if weights is None:
        weights = {f: 1.0 for f in factors.factors}
    wsum = sum(weights.get(f, 0.0) for f in factors.factors)
    if not wsum > 0:
        raise ValueError("factor weights must have a positive sum")
    composite = np.zeros(len(zones))
    factor_ranks = {}
    for f in factors.factors:
        raw = np.array([factors.values[z][f] for z in zones], dtype=np.float64)
        r = fractional_rank(raw, factors.directions[f])
        factor_ranks[f] = dict(zip(zones, r.tolist()))
        composite += weights.get(f, 0.0) * r
    composite = np.clip(composite / wsum, 0.0, 1.0)
    return SediTable(tuple(zones), dict(zip(zones, composite.tolist())), factor_ranks)


def sedi_weighted_population(zones, sedi_table: SediTable, region: Region, lam: float = 1.0,
                             basis: str = "population") -> np.ndarray:
    """Weights ``∝ n_i * (1 + lam * SEDI_i)`` over ``region``, normalised to sum 1.

    With ``lam = 0`` this reproduces :func:`gravcat.model.population_weights`
    bit for bit. Unpopulated zones without an index value count as 0.
    """
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"lambda must be finite and >= 0, got {lam!r}")
    n = _basis_counts(region, zones, basis)
    s = np.zeros(len(region))
    for k, z in enumerate(region.zone_ids):
        v = sedi_table.get(z)
        if v is None:
            if n[k] > 0:
                raise MissingIndex(f"no disadvantage index for populated zone {z!r}")
            v = 0.0
        s[k] = v
    m = n * (1.0 + lam * s)
    total = m.sum()
    if not total > 0:
        raise EmptyPopulation(f"total {basis} over the region is zero")
    return m / total


@dataclass(frozen=True)
class ImprovementPotential:
    zone_ids: tuple
    gradient: np.ndarray
    rank: np.ndarray
    weighting: str = "unweighted"
    key: tuple = ()

    def as_dict(self):
        return dict(zip(self.zone_ids, self.gradient.tolist()))

    def ranks(self):
        return dict(zip(self.zone_ids, self.rank.tolist()))


def rank_descending(zone_ids, values) -> np.ndarray:
    """1 = largest value; ties go to the smaller zone id."""
    values = np.asarray(values, dtype=np.float64)
    order = sorted(range(len(zone_ids)), key=lambda k: (-values[k], zone_ids[k]))
    rank = np.empty(len(zone_ids), dtype=np.int64)
    rank[order] = np.arange(1, len(zone_ids) + 1)
    return rank


def improvement_potential(region: Region, matrix: CostMatrix, params: ImpedanceParams, tau: float, weights,
                          weighting: str = "unweighted", intrazonal: Mapping[str, float] | None = None
                          ) -> ImprovementPotential:
    """Marginal gain in regional accessibility per extra opportunity in each zone.

    ``gradient_i = sum_{j in S, t_ji <= tau} p_j f(t_ji)``: the weights matrix
    restricted to the region, contracted with ``p`` along its origin axis.
    Computed as row sums over the transposed sub-matrix so each destination
    sums its origins in ascending id order.
    """
    tau = float(tau)
    if tau > matrix.max_threshold:
        raise ThresholdExceedsPrune(
            f"tau={tau:g} min exceeds the matrix prune bound of {matrix.max_threshold:g} min")
    p = np.asarray(weights, dtype=np.float64)
    if p.shape != (len(region),):
        raise DimensionMismatch(f"weight vector has shape {p.shape}, region has {len(region)} zones")
    rows = matrix.indices_of(region.zone_ids)
    t_indptr, t_indices, t_minutes, t_override = _region_transpose(matrix, rows, intrazonal)
    alpha, beta = params.kernel_args
    # region-local indexing: column k of the transpose is origin region.zone_ids[k]
    grad = kernels.row_accumulate(t_indptr, t_indices, t_minutes, np.arange(len(region)), p,
                                  alpha, beta, tau, t_override)
    return ImprovementPotential(tuple(region.zone_ids), grad, rank_descending(region.zone_ids, grad),
                                weighting, (params.purpose, matrix.mode.value, tau))


def _region_transpose(matrix: CostMatrix, rows: np.ndarray, intrazonal):
    """Square region sub-matrix, transposed, in region-local indices.

    Rows are destinations, columns origins. Within a row the entries are
    ordered by the origin's matrix index, which is zone id order, even though
    the column numbers themselves follow region order.
    """
    n = matrix.n_zones
    m = rows.size
    local = np.full(n, -1, dtype=np.int64)
    local[rows] = np.arange(m)
    counts = np.diff(matrix.indptr)[rows]
    starts = matrix.indptr[rows]
    seg = np.repeat(np.cumsum(counts) - counts, counts)
    k = np.repeat(starts, counts) + (np.arange(counts.sum()) - seg)
    dest = local[matrix.indices[k]]
    orig = np.repeat(np.arange(m), counts)
    t = matrix.minutes[k]
    keep = dest >= 0
    dest, orig, t = dest[keep], orig[keep], t[keep]
    # origins must be visited in ascending zone-id order, i.e. matrix index order
    orig_key = rows[orig]
    perm = np.lexsort((orig_key, dest))
    dest, orig, t = dest[perm], orig[perm], t[perm]
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(dest, minlength=m), out=indptr[1:])
    override = np.full(m, np.nan)
    if intrazonal:
        for z, tt in intrazonal.items():
            i = matrix.index_of(z)
            if local[i] >= 0:
                override[local[i]] = float(tt)
    return indptr, orig, t, override


def rank_shift(unweighted: ImprovementPotential, weighted: ImprovementPotential) -> dict:
    """``rank_unweighted - rank_weighted`` per zone; positive means the zone moved up."""
    if tuple(unweighted.zone_ids) != tuple(weighted.zone_ids):
        if sorted(unweighted.zone_ids) != sorted(weighted.zone_ids):
            raise KeyMismatch("improvement potentials cover different regions")
    if unweighted.key and weighted.key and unweighted.key != weighted.key:
        raise KeyMismatch(f"improvement potential keys differ: {unweighted.key} vs {weighted.key}")
    rw = weighted.ranks()
    return {z: int(r - rw[z]) for z, r in zip(unweighted.zone_ids, unweighted.rank.tolist())}
