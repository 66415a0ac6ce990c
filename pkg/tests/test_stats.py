import math

import numpy as np
import pytest
from hypothesis import example, given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import oracle_cal_stats, oracle_moments, oracle_percentile, oracle_theta_rel
from sebbkit.stats import (EPS, ClassStats, adaptive_parameters, cal_stats, moments, percentile,
                           theta_rel_from_pcr)

unit_arrays = arrays(np.float64, st.integers(1, 300), elements=st.floats(0, 1, allow_nan=False))


def _stats(pcr, dur):
    return ClassStats(0.0, 0.0, pcr, dur, 0.0, 0.0)


def test_moments_examples():
    assert moments([0.5, 0.5]) == (0.5, 0.0)
    assert moments([0.0, 1.0]) == (0.5, 0.5)
    with pytest.raises(ValueError):
        moments([])


def test_moments_two_pass_oracle(rng):
    s = rng.random(1000)
    mu, sd = moments(s)
    omu, osd = oracle_moments(list(s))
    assert abs(mu - omu) <= 1e-12 and abs(sd - osd) <= 1e-12


def test_percentile_examples():
    assert percentile([1, 2, 3, 4, 5], 50) == 3
    assert percentile([0, 10], 10) == pytest.approx(1.0)
    for p in (0, 13.7, 100):
        assert percentile([0.42], p) == 0.42
    with pytest.raises(ValueError):
        percentile([], 10)


@given(unit_arrays, st.floats(0, 100))
def test_percentile_matches_numpy_linear(s, p):
    assert percentile(s, p) == pytest.approx(float(np.percentile(s, p)), abs=1e-12)
    assert percentile(s, p) == pytest.approx(oracle_percentile(list(s), p), abs=1e-12)


def test_cal_stats_constant():
    s = np.full(100, 0.5)
    st_ = cal_stats(s, *moments(s))
    assert st_.active_frames == 0 and st_.active_runs == 0 and st_.dur == 0
    assert st_.signal_level == 0
    assert st_.pcr == pytest.approx(10 * math.log10(EPS / 0.5))


def test_cal_stats_hand_trace():
    s = np.array([0, 0, 0, 1, 1, 0, 0, 1, 0, 0], float)
    mu, sigma = moments(s)
    assert mu == pytest.approx(0.3)
    st_ = cal_stats(s, mu, sigma)
    assert (st_.active_frames, st_.active_runs) == (3, 2)
    assert st_.dur == pytest.approx(1.5)
    assert st_.signal_level == pytest.approx(0.3)


@given(arrays(np.float64, st.integers(1, 300), elements=st.floats(0.001, 1, allow_nan=False)))
def test_cal_stats_matches_literal(s):
    mu, sigma = moments(s)
    st_ = cal_stats(s, mu, sigma)
    if st_.signal_level > 0:
        pcr, dur = oracle_cal_stats(list(s), mu, sigma)
        assert st_.pcr == pytest.approx(pcr, abs=1e-9)
        assert st_.dur == pytest.approx(dur, abs=1e-9)


@given(unit_arrays)
def test_pcr_always_finite_and_pure(s):
    a = cal_stats(s, *moments(s))
    b = cal_stats(s.copy(), *moments(s.copy()))
    assert math.isfinite(a.pcr)
    assert a == b
    assert a.sigma >= 0 and a.dur >= 0 and 0 <= a.noise_level <= 1 and 0 <= a.signal_level <= 1


def test_all_zero_column_finite():
    st_ = cal_stats(np.zeros(50), 0.0, 0.0)
    assert math.isfinite(st_.pcr)


def test_adaptive_examples():
    cfg = adaptive_parameters(_stats(15, 30))
    assert (cfg.l_step_s, cfg.theta_base) == (0.512, 2.4)
    assert cfg.theta_rel == pytest.approx(2.55)
    assert cfg.theta_abs is None
    cfg = adaptive_parameters(_stats(0, 0))
    assert (cfg.theta_rel, cfg.l_step_s) == (2.0, 0.384)
    cfg = adaptive_parameters(_stats(5, 100), dual_threshold=True)
    assert (cfg.theta_abs, cfg.l_step_s) == (0.3, 0.8)


@pytest.mark.parametrize("dur,l_step,theta_abs", [
    (0, 0.384, 0.12), (19.99, 0.384, 0.12), (20, 0.512, 0.18), (39.9, 0.512, 0.18),
    (40, 0.640, 0.24), (89.9, 0.640, 0.24), (90, 0.800, 0.3), (199.9, 0.800, 0.3),
    (500, 0.800, 0.3), (-3, 0.384, 0.12)])
def test_duration_bins(dur, l_step, theta_abs):
    cfg = adaptive_parameters(_stats(5, dur), dual_threshold=True)
    assert (cfg.l_step_s, cfg.theta_abs) == (l_step, theta_abs)


@pytest.mark.parametrize("pcr,base", [(0, 2.0), (9.99, 2.0), (10, 2.4), (19.9, 2.4), (20, 2.8),
                                      (29.9, 2.8), (30, 3.2), (49.9, 3.2), (80, 3.2), (-20, 2.0)])
def test_contrast_bins(pcr, base):
    assert adaptive_parameters(_stats(pcr, 10)).theta_base == base


def test_bin_edge_jumps():
    below = lambda x: theta_rel_from_pcr(math.nextafter(x, 0))[1]
    assert below(10) == pytest.approx(2.1) and theta_rel_from_pcr(10)[1] == 2.4
    assert below(20) == pytest.approx(2.7) and theta_rel_from_pcr(20)[1] == 2.8
    assert below(30) == pytest.approx(3.1) and theta_rel_from_pcr(30)[1] == 3.2


@given(st.floats(0, 50, exclude_max=True))
@example(math.nextafter(50.0, 0.0))
def test_theta_rel_formula(pcr):
    base, rel = theta_rel_from_pcr(pcr)
    assert abs(rel - oracle_theta_rel(pcr)) <= 1e-12
    assert 2.0 <= rel < 3.5


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_theta_rel_monotone(a, b):
    lo, hi = sorted((a, b))
    assert theta_rel_from_pcr(lo)[1] <= theta_rel_from_pcr(hi)[1]


def test_many_runs_counted():
    mask = np.tile([True, False], 500)
    st_ = cal_stats(mask.astype(float), *moments(mask.astype(float)))
    assert st_.active_runs == 500 and st_.dur == 1.0
