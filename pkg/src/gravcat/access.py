"""Zonal accessibility, regional aggregation, threshold sweeps and contour comparison."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch, ModeMismatch, ThresholdExceedsPrune, UnknownKind
from .impedance import ImpedanceParams
from .model import CostMatrix, Mode, OpportunityTable, Region

DEFAULT_THRESHOLDS = (15.0, 30.0, 45.0, 60.0, 90.0)


@dataclass(frozen=True)
class AccessibilityResult:
    """Per-zone accessibility for one ``(kind, mode, tau)``, aligned with ``zone_ids``."""

    kind: str
    mode: Mode
    tau: float
    zone_ids: tuple
    values: np.ndarray
    contour: bool = False

    @property
    def key(self):
        return (self.kind, Mode.parse(self.mode).value, float(self.tau))

    def as_dict(self):
        return dict(zip(self.zone_ids, self.values.tolist()))

    def __getitem__(self, zone_id):
        return float(self.values[self.zone_ids.index(zone_id)])

    def __len__(self):
        return len(self.zone_ids)


def _check_inputs(matrix: CostMatrix, opps: OpportunityTable, kind, params: ImpedanceParams, tau):
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"threshold must be positive, got {tau}")
    if tau > matrix.max_threshold:
        raise ThresholdExceedsPrune(
            f"tau={tau:g} min exceeds the matrix prune bound of {matrix.max_threshold:g} min")
    if params.mode != matrix.mode:
        raise ModeMismatch(f"impedance parameters are for {params.mode.value}, matrix is {matrix.mode.value}")
    if kind not in opps.kinds:
        raise UnknownKind(f"opportunity kind {kind!r} is not registered")
    return tau


def _self_override(matrix: CostMatrix, intrazonal: Mapping[str, float] | None):
    if not intrazonal:
        return None
    ov = np.full(matrix.n_zones, np.nan)
    for z, t in intrazonal.items():
        t = float(t)
        if not (np.isfinite(t) and t >= 0):
            raise ValueError(f"intrazonal time for {z!r} must be finite and >= 0")
        ov[matrix.index_of(z)] = t
    return ov


def zonal_accessibility(
    region: Region,
    matrix: CostMatrix,
    opps: OpportunityTable,
    kind: str,
    params: ImpedanceParams,
    tau: float,
    intrazonal: Mapping[str, float] | None = None,
) -> AccessibilityResult:
    """Thresholded gravity accessibility of every zone in ``region``.

    Sums ``o_j * f(t_ij)`` over all stored destinations with ``t_ij <= tau``.
    The destination universe is the whole matrix, not just the region. A
    zone's own opportunities enter through its self pair (0 min unless
    ``intrazonal`` gives a per-zone time).
    """
    tau = _check_inputs(matrix, opps, kind, params, tau)
    rows = matrix.indices_of(region.zone_ids)
    opp = opps.vector(kind, matrix.zone_ids)
    alpha, beta = params.kernel_args
    values = kernels.row_accumulate(matrix.indptr, matrix.indices, matrix.minutes, rows, opp,
                                    alpha, beta, tau, _self_override(matrix, intrazonal))
    return AccessibilityResult(kind, matrix.mode, tau, tuple(region.zone_ids), values, params.contour)


def aggregate(region: Region, result: AccessibilityResult, weights) -> float:
    """Population-weighted regional accessibility ``sum_i p_i a_i``."""
    p = np.asarray(weights, dtype=np.float64)
    if p.shape != (len(region),):
        raise DimensionMismatch(f"weight vector has shape {p.shape}, region has {len(region)} zones")
    if tuple(region.zone_ids) == tuple(result.zone_ids):
        a = result.values
    else:
        lookup = {z: i for i, z in enumerate(result.zone_ids)}
        missing = [z for z in region.zone_ids if z not in lookup]
        if missing:
            raise DimensionMismatch(f"result lacks region zone {missing[0]!r}")
        a = result.values[[lookup[z] for z in region.zone_ids]]
    return float(np.dot(p, a))


def threshold_sweep(region, matrix, opps, kind, params, taus: Sequence[float], intrazonal=None):
    """``{tau: AccessibilityResult}`` for each requested threshold."""
    taus = [float(t) for t in taus]
    if taus and max(taus) > matrix.max_threshold:
        raise ThresholdExceedsPrune(
            f"tau={max(taus):g} min exceeds the matrix prune bound of {matrix.max_threshold:g} min")
    return {t: zonal_accessibility(region, matrix, opps, kind, params, t, intrazonal) for t in taus}


@dataclass(frozen=True)
class Overestimation:
    """Percent by which the contour measure exceeds the gravity measure."""

    kind: str
    mode: Mode
    tau: float
    gravity: AccessibilityResult
    contour: AccessibilityResult
    percent: dict
    undefined: tuple

    def mean(self):
        return float(np.mean(list(self.percent.values()))) if self.percent else float("nan")


def contour_overestimation(region, matrix, opps, kind, params, tau, intrazonal=None) -> Overestimation:
    gravity = zonal_accessibility(region, matrix, opps, kind, params, tau, intrazonal)
    flat = ImpedanceParams.contour_measure(params.purpose, params.mode)
    contour = zonal_accessibility(region, matrix, opps, kind, flat, tau, intrazonal)
    percent = {}
    undefined = []
    for z, g, c in zip(region.zone_ids, gravity.values, contour.values):
        if g > 0:
            percent[z] = 100.0 * (c - g) / g
        else:
            undefined.append(z)
    return Overestimation(kind, matrix.mode, float(tau), gravity, contour, percent, tuple(undefined))
