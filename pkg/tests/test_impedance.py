import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gravcat.errors import InsufficientData, InsufficientVariation, InvalidDuration, UnknownParams
from gravcat.impedance import (
    FitResult,
    ImpedanceParams,
    ParamsRegistry,
    TripRecord,
    TripTable,
    duration_cdf,
    eval_array,
    eval_impedance,
    fit,
    sample_durations,
    thresholded_weight,
)
from gravcat.model import Mode

# exp(-0.008 * t**1.467), mpmath at 30 digits
ORACLE = {60: 0.0388454851, 30: 0.3088281696, 20: 0.5229925781, 10: 0.7909888087}


@pytest.mark.parametrize("t", sorted(ORACLE))
def test_eval_matches_oracle(base_params, t):
    assert eval_impedance(base_params, t) == pytest.approx(ORACLE[t], abs=1e-9)


def test_eval_at_zero_is_one(base_params):
    assert eval_impedance(base_params, 0) == 1.0
    assert eval_impedance(base_params, 0.0) == 1.0


def test_contour_is_flat():
    c = ImpedanceParams.contour_measure("jobs_total", "walk")
    assert c.contour and c.mode is Mode.WALK
    assert eval_impedance(c, 89.0) == 1.0
    assert thresholded_weight(c, 30, 30) == 1.0
    assert thresholded_weight(c, 30.0001, 30) == 0.0


def test_threshold_inclusive(base_params):
    assert thresholded_weight(base_params, 30, 30) == pytest.approx(ORACLE[30], abs=1e-9)
    assert thresholded_weight(base_params, 30.5, 30) == 0.0


@pytest.mark.parametrize("t", [-1, float("nan"), float("inf")])
def test_eval_rejects(base_params, t):
    with pytest.raises(InvalidDuration):
        eval_impedance(base_params, t)


def test_eval_array_rejects_nan(base_params):
    with pytest.raises(InvalidDuration):
        eval_array(base_params, [1.0, float("nan")])


@pytest.mark.parametrize("alpha,beta", [(0, 1), (-1, 1), (1, 0), (float("inf"), 1), (1, float("nan"))])
def test_params_validated(alpha, beta):
    with pytest.raises(ValueError):
        ImpedanceParams(alpha, beta)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(0.3, 3.0), st.floats(0, 200), st.floats(0, 200))
def test_monotone_decreasing(alpha, beta, t1, t2):
    p = ImpedanceParams(alpha, beta)
    lo, hi = sorted((t1, t2))
    f_lo, f_hi = eval_impedance(p, lo), eval_impedance(p, hi)
    assert 0 <= f_hi <= f_lo <= 1


def test_eval_array_agrees(base_params):
    t = np.linspace(0, 90, 181)
    assert np.allclose(eval_array(base_params, t), [eval_impedance(base_params, x) for x in t], rtol=1e-15)


def _trips(durations, purpose="work", mode="drive"):
    return TripTable.uniform(durations, purpose, mode)


@pytest.mark.parametrize("alpha,beta", [(0.008, 1.467), (0.02, 1.1), (0.003, 1.8)])
def test_fit_recovers(alpha, beta):
    rng = np.random.default_rng(11)
    d = sample_durations(alpha, beta, 100_000, rng)
    res = fit(_trips(d), "work", "drive")
    assert res.params.alpha == pytest.approx(alpha, rel=0.05)
    assert res.params.beta == pytest.approx(beta, rel=0.05)
    assert res.r2 > 0.99
    assert res.n_trips == 100_000


def test_fit_order_invariant():
    rng = np.random.default_rng(5)
    d = sample_durations(0.008, 1.467, 5000, rng)
    a = fit(_trips(d), "work", "drive")
    b = fit(_trips(rng.permutation(d)), "work", "drive")
    assert a.params == b.params and a.r2 == b.r2


def test_fit_selects_key():
    rng = np.random.default_rng(2)
    d1 = sample_durations(0.008, 1.467, 20000, rng)
    d2 = sample_durations(0.05, 1.0, 20000, rng)
    recs = [TripRecord("drive", "work", float(x)) for x in d1] + [TripRecord("walk", "shop", float(x)) for x in d2]
    table = TripTable.from_records(recs)
    assert sorted(table.keys()) == [("shop", "walk"), ("work", "drive")]
    assert fit(table, "shop", "walk").params.alpha == pytest.approx(0.05, rel=0.1)
    assert fit(table, "work", "drive").params.mode is Mode.DRIVE


def test_fit_weighted_equals_repeated():
    rng = np.random.default_rng(9)
    d = np.round(sample_durations(0.008, 1.467, 3000, rng), 1)
    doubled = fit(_trips(np.concatenate([d, d])), "work", "drive")
    t = TripTable(np.array(["drive"] * d.size, dtype=object), np.array(["work"] * d.size, dtype=object), d,
                  np.full(d.size, 2.0))
    weighted = fit(t, "work", "drive")
    assert weighted.params.alpha == pytest.approx(doubled.params.alpha, rel=1e-12)
    assert weighted.params.beta == pytest.approx(doubled.params.beta, rel=1e-12)


def test_fit_too_few_trips():
    with pytest.raises(InsufficientData):
        fit(_trips(np.arange(1, 30, dtype=float)), "work", "drive")


def test_fit_degenerate_durations():
    with pytest.raises(InsufficientVariation):
        fit(_trips(np.full(200, 12.0)), "work", "drive")


def test_trip_record_rejects_zero():
    with pytest.raises(InvalidDuration):
        TripRecord("drive", "work", 0.0)


class TestCdf:
    def test_exact_steps(self):
        t, c = duration_cdf(_trips([5, 10, 10, 20]), "work", "drive", smoothing_window=0)
        assert t.tolist() == [5, 10, 20]
        assert c.tolist() == [0.25, 0.75, 1.0]

    def test_smoothed_monotone_and_bounded(self):
        rng = np.random.default_rng(0)
        t, c = duration_cdf(_trips(sample_durations(0.008, 1.467, 2000, rng)), "work", "drive")
        assert c[0] == 0.0 and c[-1] == 1.0
        assert np.all(np.diff(c) >= 0)
        assert np.all(np.diff(t) > 0)

    def test_smoothed_tracks_truth(self):
        rng = np.random.default_rng(1)
        t, c = duration_cdf(_trips(sample_durations(0.008, 1.467, 50_000, rng)), "work", "drive", 3.0)
        truth = 1 - np.exp(-0.008 * t ** 1.467)
        assert np.max(np.abs(c - truth)[t < 80]) < 0.03

    def test_empty(self):
        with pytest.raises(InsufficientData):
            duration_cdf(_trips([5.0]), "other", "drive")


class TestRegistry:
    def test_missing_key(self, base_params):
        reg = ParamsRegistry([base_params])
        assert reg.get("jobs_total", "drive") == base_params
        assert ("jobs_total", "drive") in reg
        with pytest.raises(UnknownParams):
            reg.get("jobs_total", "walk")

    def test_iteration_sorted(self):
        reg = ParamsRegistry([ImpedanceParams(0.1, 1, "b", "walk"), ImpedanceParams(0.1, 1, "a", "walk"),
                              ImpedanceParams(0.1, 1, "a", "bike")])
        keys = [(r.params.purpose, r.params.mode.value) for r in reg]
        assert keys == [("a", "bike"), ("a", "walk"), ("b", "walk")]

    def test_fit_result_kept(self, base_params):
        fr = FitResult(base_params, 0.98, 12, 400)
        reg = ParamsRegistry([fr])
        assert reg.fit_result("jobs_total", "drive") is fr
        assert fr.to_json()["r2"] == 0.98


def test_sample_survival_matches():
    rng = np.random.default_rng(4)
    d = sample_durations(0.008, 1.467, 200_000, rng)
    for t in (10, 30, 60):
        assert np.mean(d >= t) == pytest.approx(math.exp(-0.008 * t ** 1.467), abs=0.005)
