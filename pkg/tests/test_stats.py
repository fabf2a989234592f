import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

import oracles
from kinex.stats import (
    EmptySampleError,
    Linear,
    Logarithmic,
    build_histogram,
    ccdf_slope,
    empirical_ccdf,
    gini,
    histogram_ks,
    ks_distance,
    moments,
    normalize_by_mean,
    summarize,
    top_decade_slope,
)

positive_samples = st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=60)


def test_histogram_examples():
    h = build_histogram([0.5, 1.5], edges=[0.0, 1.0, 2.0])
    assert h.counts.tolist() == [1, 1]
    h = build_histogram([1.0], edges=[0.0, 1.0, 2.0])
    assert h.counts.tolist() == [0, 1]


def test_histogram_under_overflow():
    h = build_histogram([-1.0, 0.0, 2.0, 5.0], edges=[0.0, 1.0, 2.0])
    assert (h.underflow, h.counts.tolist(), h.overflow) == (1, [1, 0], 2)


def test_histogram_empty_is_error():
    with pytest.raises(EmptySampleError):
        build_histogram([], Linear(3))


def test_log_bins_route_zeros_to_underflow():
    h = build_histogram([0.0, 0.0, 1.0, 10.0, 100.0], Logarithmic(2))
    assert h.underflow == 2
    assert h.counts.tolist() == [1, 2]
    assert h.edges[0] == 1.0
    assert np.allclose(h.centers, [np.sqrt(10.0), np.sqrt(1000.0)], rtol=1e-9)


def test_histogram_matches_exponential_bin_integrals():
    x = oracles.exponential(5, 100_000)
    h = build_histogram(x, Linear(50, 0.0, 10.0))
    n = x.size
    for k in range(50):
        p = oracles.exponential_bin_mass(h.edges[k], h.edges[k + 1])
        se = np.sqrt(n * p * (1 - p))
        assert abs(h.counts[k] - n * p) <= 3 * se + 1, k


@settings(max_examples=50)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=100), st.integers(1, 12))
def test_histogram_mass_conservation(xs, bins):
    h = build_histogram(xs, edges=np.linspace(-5, 5, bins + 1))
    assert h.counts.sum() + h.underflow + h.overflow == h.n_total == len(xs)


def test_histogram_ks_detects_mismatch():
    a = build_histogram([0.5], edges=[0, 1, 2])
    b = build_histogram([1.5], edges=[0, 1, 2])
    assert histogram_ks(a, a) == 0.0
    assert histogram_ks(a, b) == 1.0
    with pytest.raises(ValueError):
        histogram_ks(a, build_histogram([0.5], edges=[0, 1, 3]))


def test_ccdf_examples():
    assert empirical_ccdf([1, 2, 3]).points == pytest.approx([(1, 1.0), (2, 2 / 3), (3, 1 / 3)])
    assert empirical_ccdf([5, 5, 5]).points == [(5.0, 1.0)]


@settings(max_examples=50)
@given(positive_samples)
def test_ccdf_shape(xs):
    c = empirical_ccdf(xs)
    assert c.fraction[0] == 1.0 and c.w[0] == min(xs)
    assert np.all(np.diff(c.fraction) < 0)


def test_ccdf_histogram_consistency():
    x = oracles.exponential(11, 20_000)
    h = build_histogram(x, Linear(40, 0.0, 6.0))
    c = empirical_ccdf(x)
    lhs = c.at(h.edges)
    rhs = 1.0 - h.cumulative_mass()
    assert np.all(np.abs(lhs - rhs) <= 1.0 / h.n_total)


def test_pareto_ccdf_slope():
    x = oracles.pareto(3, 100_000, alpha=2.0)
    # decade starting at the 90th percentile: ~10^4 points, slope sd ~0.02
    assert top_decade_slope(x, tail_fraction=0.1) == pytest.approx(-2.0, abs=0.1)
    assert ccdf_slope(x, 1.0, 10.0) == pytest.approx(-2.0, abs=0.1)


def test_moments_examples():
    s = moments([2, 2, 2])
    assert (s.raw_moments[0], s.raw_moments[1], s.variance) == (2.0, 4.0, 0.0)
    s = moments([0, 2])
    assert (s.mean, s.raw_moments[1], s.variance) == (1.0, 2.0, 1.0)


def test_moments_of_gamma_sample():
    x = oracles.gamma_power(7, 1_000_000, order=1.0)   # shape 2, scale 1
    assert moments(x).raw_moments[0] == pytest.approx(2.0, abs=0.005)


def test_gini_examples():
    assert gini([1, 1, 1, 1]) == 0.0
    assert gini([0, 0, 0, 4]) == pytest.approx(0.75)
    assert gini([1, 2, 3]) == pytest.approx(2 / 9)
    with pytest.raises(ValueError):
        gini([0, 0])


@settings(max_examples=50)
@given(positive_samples, st.sampled_from([0.1, 3.0, 1e4]))
def test_gini_properties(xs, c):
    g = gini(xs)
    assert 0.0 <= g <= 1.0 - 1.0 / len(xs) + 1e-12
    assert gini(np.array(xs) * c) == pytest.approx(g, abs=1e-12)
    assert g == pytest.approx(oracles.gini_pairs(xs), abs=1e-9)


def test_normalize_examples():
    assert normalize_by_mean([2, 4]) == pytest.approx([2 / 3, 4 / 3])
    assert normalize_by_mean([1]).tolist() == [1.0]
    with pytest.raises(ValueError):
        normalize_by_mean([0.0, 0.0])


@settings(max_examples=50)
@given(positive_samples)
def test_normalize_properties(xs):
    y = normalize_by_mean(xs)
    assert y.mean() == pytest.approx(1.0, rel=1e-12)
    assert moments(y).raw_moments[0] == pytest.approx(1.0, rel=1e-12)
    assert normalize_by_mean(y) == pytest.approx(y, rel=1e-12)


def test_ks_distance_examples():
    assert ks_distance([1.0], lambda v: np.full_like(v, 0.4)) == pytest.approx(0.6)
    x = np.array([1.0, 2.0, 3.0, 4.0])
    step = lambda v: np.searchsorted(x, v, side="right") / 4.0  # noqa: E731
    assert ks_distance(x, step) == pytest.approx(0.25)  # only the left-limit gap remains
    # the model equals the ECDF midpoint everywhere -> half a step
    mid = lambda v: (np.searchsorted(x, v, side="right") - 0.5) / 4.0  # noqa: E731
    assert ks_distance(x, mid) == pytest.approx(0.125)


def test_ks_distance_against_kolmogorov_quantile():
    n = 100_000
    crit = sps.kstwo.ppf(0.99, n)
    assert crit < 0.006
    x = oracles.exponential(13, n)
    assert ks_distance(x, lambda v: 1 - np.exp(-v)) < crit


def test_summarize_mode_and_gini():
    x = oracles.exponential(2, 50_000)
    s = summarize(x)
    assert s.mode_center < 0.1
    assert s.gini == pytest.approx(0.5, abs=0.01)
