"""Accessibility efficiency: observed accessibility relative to a frictionless ideal.

The ideal travel time between two zones is their great-circle distance at a
presumed maximum modal speed, with the same impedance and threshold as the
observed measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .access import AccessibilityResult, aggregate
from .errors import InvalidSpeed, KeyMismatch, MissingGeometry, UnknownKind
from .impedance import ImpedanceParams, eval_impedance
from .model import Mode, OpportunityTable, Region, mph_to_km_per_min, zone_index

DEFAULT_VMAX_MPH = {Mode.DRIVE: 60.0, Mode.WALK: 4.0, Mode.BIKE: 16.0}


@dataclass(frozen=True)
class ModalSpeedLimit:
    mode: Mode
    v_max: float  # mi/h

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not (isinstance(self.v_max, (int, float)) and math.isfinite(self.v_max) and self.v_max > 0):
            raise InvalidSpeed(f"maximum speed must be positive and finite, got {self.v_max!r}")

    @classmethod
    def default(cls, mode):
        mode = Mode.parse(mode)
        return cls(mode, DEFAULT_VMAX_MPH[mode])

    @property
    def km_per_min(self):
        return mph_to_km_per_min(self.v_max)


def _speed(v_max, mode=None):
    if isinstance(v_max, ModalSpeedLimit):
        return v_max
    return ModalSpeedLimit(mode if mode is not None else Mode.DRIVE, v_max)


def ideal_weight(params: ImpedanceParams, d_km: float, v_max, tau: float) -> float:
    """Frictionless weight ``f(d / v)`` inside the ``tau * v`` catchment, else 0."""
    speed = _speed(v_max, params.mode)
    if not (math.isfinite(d_km) and d_km >= 0):
        raise ValueError(f"distance must be finite and >= 0, got {d_km!r}")
    t_hat = d_km / speed.km_per_min
    if t_hat <= tau:
        return eval_impedance(params, t_hat)
    return 0.0


def ideal_accessibility(region: Region, zones, opps: OpportunityTable, kind: str, params: ImpedanceParams,
                        v_max, tau: float) -> AccessibilityResult:
    """Maximum attainable accessibility for each zone of ``region``.

    Destinations range over every zone in ``zones`` (the environment).
    """
    speed = _speed(v_max, params.mode)
    if kind not in opps.kinds:
        raise UnknownKind(f"opportunity kind {kind!r} is not registered")
    idx = zone_index(zones)
    missing = [z for z in region.zone_ids if z not in idx]
    if missing:
        raise MissingGeometry(f"no centroid for zone {missing[0]!r}")
    env = sorted(idx)
    pos = {z: i for i, z in enumerate(env)}
    lat = np.array([idx[z].centroid_lat for z in env])
    lon = np.array([idx[z].centroid_lon for z in env])
    rows = np.array([pos[z] for z in region.zone_ids], dtype=np.int64)
    opp = opps.vector(kind, env)
    alpha, beta = params.kernel_args
    values = kernels.ideal_accumulate(lat, lon, rows, opp, alpha, beta, float(tau), speed.km_per_min)
    return AccessibilityResult(kind, params.mode, float(tau), tuple(region.zone_ids), values, params.contour)


@dataclass(frozen=True)
class EfficiencyResult:
    key: tuple
    zonal: dict  # zone_id -> float | None
    aggregate: float | None
    flagged: tuple = field(default=())

    def defined(self):
        return {z: v for z, v in self.zonal.items() if v is not None}


def efficiency(region: Region, observed: AccessibilityResult, ideal: AccessibilityResult, weights) -> EfficiencyResult:
    """Zonal ``a_i / â_i`` and aggregate ``(p·a) / (p·â)``.

    Zones with ``â_i = 0`` get ``None``. Ratios above 1 are kept as computed
    and listed in ``flagged``.
    """
    if observed.key != ideal.key:
        raise KeyMismatch(f"observed key {observed.key} differs from ideal key {ideal.key}")
    if tuple(observed.zone_ids) != tuple(ideal.zone_ids):
        raise KeyMismatch("observed and ideal results cover different zones")
    zonal = {}
    flagged = []
    for z, a, a_hat in zip(observed.zone_ids, observed.values, ideal.values):
        if a_hat > 0:
            eta = float(a / a_hat)
            zonal[z] = eta
            if eta > 1.0:
                flagged.append(z)
        else:
            zonal[z] = None
    chi = aggregate(region, observed, weights)
    chi_hat = aggregate(region, ideal, weights)
    agg = chi / chi_hat if chi_hat > 0 else None
    return EfficiencyResult(observed.key, zonal, agg, tuple(flagged))
