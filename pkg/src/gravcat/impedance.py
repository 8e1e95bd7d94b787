"""Power-exponential impedance ``f(t) = exp(-alpha * t**beta)``: evaluation and fitting.

The contour (cumulative-opportunities) measure is the same machinery with
``f == 1``; build it with :meth:`ImpedanceParams.contour_measure`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientData, InsufficientVariation, InvalidDuration, UnknownParams
from .model import Mode

MIN_FIT_TRIPS = 50
MIN_FIT_BINS = 3


@dataclass(frozen=True)
class ImpedanceParams:
    alpha: float
    beta: float
    purpose: str = ""
    mode: Mode = Mode.DRIVE
    contour: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.contour:
            return
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")

    @classmethod
    def contour_measure(cls, purpose="", mode=Mode.DRIVE):
        return cls(alpha=0.0, beta=1.0, purpose=purpose, mode=mode, contour=True)

    @property
    def kernel_args(self):
        """``(alpha, beta)`` as consumed by the kernels; the contour maps to ``alpha = 0``."""
        if self.contour:
            return 0.0, 1.0
        return float(self.alpha), float(self.beta)

    def __call__(self, t):
        return eval_impedance(self, t)


@dataclass(frozen=True)
class FitResult:
    params: ImpedanceParams
    r2: float
    n_bins: int
    n_trips: int

    def to_json(self):
        return {
            "purpose": self.params.purpose,
            "mode": self.params.mode.value,
            "alpha": self.params.alpha,
            "beta": self.params.beta,
            "r2": self.r2,
            "n_trips": self.n_trips,
        }


def _check_duration(t):
    if not (isinstance(t, (int, float, np.floating, np.integer)) and math.isfinite(t)) or t < 0:
        raise InvalidDuration(f"travel time must be finite and >= 0, got {t!r}")


def eval_impedance(params: ImpedanceParams, t) -> float:
    """``exp(-alpha * t**beta)``; exactly 1 at ``t = 0`` and for the contour variant."""
    _check_duration(t)
    if params.contour:
        return 1.0
    return math.exp(-params.alpha * float(t) ** params.beta)


def thresholded_weight(params: ImpedanceParams, t, tau) -> float:
    _check_duration(t)
    if not (math.isfinite(tau) and tau > 0):
        raise InvalidDuration(f"threshold must be positive and finite, got {tau!r}")
    if t <= tau:
        return eval_impedance(params, t)
    return 0.0


def eval_array(params: ImpedanceParams, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)) or (t.size and t.min() < 0):
        raise InvalidDuration("travel times must be finite and >= 0")
    if params.contour:
        return np.ones_like(t)
    return np.exp(-params.alpha * t ** params.beta)


# ---------------------------------------------------------------------------
# trips
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TripRecord:
    mode: Mode
    purpose: str
    duration: float
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise InvalidDuration(f"trip duration must be finite and > 0, got {self.duration!r}")
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ValueError(f"trip weight must be finite and >= 0, got {self.weight!r}")


@dataclass
class TripTable:
    """Columnar trip store; what the fitting routines consume."""

    mode: np.ndarray
    purpose: np.ndarray
    duration: np.ndarray
    weight: np.ndarray | None = None

    def __post_init__(self):
        self.mode = np.asarray([Mode.parse(m).value for m in self.mode], dtype=object)
        self.purpose = np.asarray(self.purpose, dtype=object)
        self.duration = np.asarray(self.duration, dtype=np.float64)
        if self.weight is not None:
            self.weight = np.asarray(self.weight, dtype=np.float64)
        n = self.duration.size
        if self.mode.size != n or self.purpose.size != n or (self.weight is not None and self.weight.size != n):
            raise ValueError("trip columns differ in length")
        if n and (not np.all(np.isfinite(self.duration)) or self.duration.min() <= 0):
            raise InvalidDuration("trip durations must be finite and > 0")

    @classmethod
    def from_records(cls, records: Iterable[TripRecord]):
        records = list(records)
        weighted = any(r.weight != 1.0 for r in records)
        return cls(
            mode=[r.mode.value for r in records],
            purpose=[r.purpose for r in records],
            duration=[r.duration for r in records],
            weight=[r.weight for r in records] if weighted else None,
        )

    @classmethod
    def uniform(cls, durations, purpose, mode):
        durations = np.asarray(durations, dtype=np.float64)
        m = Mode.parse(mode).value
        return cls(mode=np.full(durations.size, m, dtype=object),
                   purpose=np.full(durations.size, purpose, dtype=object),
                   duration=durations)

    def __len__(self):
        return int(self.duration.size)

    def records(self):
        w = self.weight if self.weight is not None else np.ones(len(self))
        return [TripRecord(Mode(m), p, float(d), float(x)) for m, p, d, x in zip(self.mode, self.purpose, self.duration, w)]

    def keys(self):
        """Distinct ``(purpose, mode)`` pairs, sorted."""
        return sorted(set(zip(self.purpose.tolist(), self.mode.tolist())))

    def select(self, purpose, mode):
        m = Mode.parse(mode).value
        mask = (self.purpose == purpose) & (self.mode == m)
        d = self.duration[mask]
        w = self.weight[mask] if self.weight is not None else np.ones(d.size)
        return d, w


def _as_table(trips):
    if isinstance(trips, TripTable):
        return trips
    return TripTable.from_records(trips)


def fit(trips, purpose: str, mode, bin_width: float = 5.0) -> FitResult:
    """Fit ``(alpha, beta)`` to the trip-duration survival curve.

    Empirical survival ``S(t)`` (weighted share of trips lasting at least
    ``t``) is taken at the upper edge of each ``bin_width`` bin. Since
    ``ln(-ln S) = ln(alpha) + beta * ln(t)``, a straight-line fit over the
    bins with ``0 < S < 1`` gives both parameters in closed form. Each bin is
    weighted by the inverse delta-method variance of ``ln(-ln S)``,
    ``n * S * ln(S)**2 / (1 - S)``; sparse tail bins would otherwise dominate
    the intercept.
    """
    if not (math.isfinite(bin_width) and bin_width > 0):
        raise ValueError("bin_width must be positive")
    mode = Mode.parse(mode)
    d, w = _as_table(trips).select(purpose, mode)
    if d.size < MIN_FIT_TRIPS:
        raise InsufficientData(f"{d.size} trips for ({purpose}, {mode.value}); at least {MIN_FIT_TRIPS} required")
    total = w.sum()
    if not total > 0:
        raise InsufficientData(f"trip weights for ({purpose}, {mode.value}) sum to zero")

    # sorting makes the survival sums independent of input order
    order = np.lexsort((w, d))
    d, w = d[order], w[order]
    n_edges = int(math.ceil(d[-1] / bin_width))
    edges = bin_width * np.arange(1, n_edges + 1)
    # weight of trips with duration >= edge
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    surv = tail[np.searchsorted(d, edges, side="left")] / total
    keep = (surv > 0) & (surv < 1)
    if keep.sum() < MIN_FIT_BINS:
        raise InsufficientVariation(
            f"only {int(keep.sum())} bins with survival strictly inside (0, 1); need {MIN_FIT_BINS}")
    x = np.log(edges[keep])
    sv = surv[keep]
    y = np.log(-np.log(sv))
    n_eff = total ** 2 / np.sum(w ** 2)
    bw = n_eff * sv * np.log(sv) ** 2 / (1.0 - sv)
    bw = bw / bw.sum()
    xm, ym = np.sum(bw * x), np.sum(bw * y)
    sxx = np.sum(bw * (x - xm) ** 2)
    if not sxx > 0:
        raise InsufficientVariation("survival bins span a single duration")
    beta = float(np.sum(bw * (x - xm) * (y - ym)) / sxx)
    intercept = ym - beta * xm
    resid = y - (intercept + beta * x)
    syy = np.sum(bw * (y - ym) ** 2)
    r2 = float(1.0 - np.sum(bw * resid ** 2) / syy) if syy > 0 else 1.0
    if not beta > 0:
        raise InsufficientVariation(f"fitted beta={beta:.4g} is not positive; survival curve is not decaying")
    params = ImpedanceParams(alpha=float(math.exp(intercept)), beta=beta, purpose=purpose, mode=mode)
    return FitResult(params=params, r2=r2, n_bins=int(keep.sum()), n_trips=int(d.size))


def duration_cdf(trips, purpose: str, mode, smoothing_window: float = 5.0, step: float = 1.0):
    """Cumulative share of trips by duration as ``(t, fraction)`` arrays.

    With ``smoothing_window == 0`` the exact empirical step CDF is returned at
    each distinct duration. Otherwise the CDF is sampled on a ``step`` grid and
    passed through a centred moving average of the given width (in minutes),
    with the ends clamped so the curve still runs from 0 to 1.
    """
    mode = Mode.parse(mode)
    d, w = _as_table(trips).select(purpose, mode)
    if d.size == 0:
        raise InsufficientData(f"no trips for ({purpose}, {mode.value})")
    order = np.argsort(d, kind="stable")
    d, w = d[order], w[order]
    total = w.sum()
    if not total > 0:
        raise InsufficientData(f"trip weights for ({purpose}, {mode.value}) sum to zero")
    if smoothing_window <= 0:
        t = np.unique(d)
        cum = np.cumsum(w) / total
        idx = np.searchsorted(d, t, side="right") - 1
        frac = cum[idx]
        frac[-1] = 1.0
        return t, frac

    grid = np.arange(0.0, d[-1] + smoothing_window + step, step)
    cum = np.concatenate([[0.0], np.cumsum(w) / total])
    raw = cum[np.searchsorted(d, grid, side="right")]
    half = int(round(smoothing_window / step / 2.0))
    if half > 0:
        padded = np.concatenate([np.zeros(half), raw, np.ones(half)])
        kernel = np.ones(2 * half + 1) / (2 * half + 1)
        smooth = np.convolve(padded, kernel, mode="valid")
    else:
        smooth = raw
    smooth = np.clip(np.maximum.accumulate(smooth), 0.0, 1.0)
    smooth[0] = 0.0
    smooth[-1] = 1.0
    return grid, smooth


def sample_durations(alpha, beta, n, rng) -> np.ndarray:
    """Draw durations whose survival is ``exp(-alpha * t**beta)`` (Weibull)."""
    scale = alpha ** (-1.0 / beta)
    return scale * rng.weibull(beta, size=n)


class ParamsRegistry:
    """Fitted parameters keyed by ``(purpose, mode)``. Missing keys are errors."""

    def __init__(self, entries: Sequence[FitResult | ImpedanceParams] = ()):
        self._entries: dict[tuple[str, str], FitResult] = {}
        for e in entries:
            self.add(e)

    def add(self, entry):
        if isinstance(entry, ImpedanceParams):
            entry = FitResult(entry, r2=float("nan"), n_bins=0, n_trips=0)
        p = entry.params
        self._entries[(p.purpose, p.mode.value)] = entry

    def get(self, purpose, mode) -> ImpedanceParams:
        key = (purpose, Mode.parse(mode).value)
        try:
            return self._entries[key].params
        except KeyError:
            raise UnknownParams(f"no impedance parameters for purpose={key[0]!r}, mode={key[1]!r}") from None

    def fit_result(self, purpose, mode) -> FitResult:
        self.get(purpose, mode)
        return self._entries[(purpose, Mode.parse(mode).value)]

    def __iter__(self):
        for key in sorted(self._entries):
            yield self._entries[key]

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        purpose, mode = key
        return (purpose, Mode.parse(mode).value) in self._entries
