"""Path sampling reproducibility and correlation estimation."""

import numpy as np
import pytest

from lislab import Window, estimate_correlation, indicator, sample_path
from lislab.core import PastConfig
from lislab.oracle import exact_correlation
from lislab.sim import default_burn_in, evaluate_along
from lislab.specio import power_law_linear, two_state_markov


def test_reproducible_paths(k1):
    a = sample_path(k1, 1000, seed=42)
    b = sample_path(k1, 1000, seed=42)
    assert np.array_equal(a, b)
    c = sample_path(k1, 1000, seed=43)
    assert not np.array_equal(a, c)


def test_fair_coin_statistics(k3):
    path = sample_path(k3, 10000, seed=7)
    assert set(np.unique(path)) <= {0, 1}
    assert abs(path.mean() - 0.5) < 0.02


def test_deterministic_flip_alternates():
    flip = two_state_markov(1.0, 0.0)
    path = sample_path(flip, 10, seed=3, initial_past=PastConfig.of([0]))
    assert path.tolist() == [1, 0, 1, 0, 1, 0, 1, 0, 1, 0]


def test_markov_empirical_mean(k1):
    path = sample_path(k1, 10**5, seed=1)
    # stationary mean 0.5; autocorrelated, so allow a generous band
    assert abs(path.mean() - 0.5) < 0.02


def test_linear_kernel_sampling_direct_path():
    f = power_law_linear(0.5, 64)
    path = sample_path(f, 2000, seed=5, initial_past=PastConfig.fill(1, 64))
    assert len(path) == 2000
    assert set(np.unique(path)) <= {0, 1}
    again = sample_path(f, 2000, seed=5, initial_past=PastConfig.fill(1, 64))
    assert np.array_equal(path, again)


def test_default_burn_in(k1, k3):
    assert default_burn_in(k1) == int(10 / 0.6) + 1
    assert default_burn_in(k3) == 11


def test_evaluate_along_multisite(k1):
    h = indicator(0, 1, k1.alphabet)
    path = np.array([0, 1, 1, 0], dtype=np.int8)
    assert evaluate_along(path, h).tolist() == [0.0, 1.0, 1.0, 0.0]
    from lislab.core import tabulate

    pair = tabulate(Window(0, 1), k1.alphabet, lambda c: float(c[0] * c[1]))
    assert evaluate_along(path, pair).tolist() == [0.0, 1.0, 0.0]


def test_estimate_matches_exact_within_3se(k1):
    h = indicator(0, 1, k1.alphabet)
    path = sample_path(k1, 10**5, seed=11)
    burn = default_burn_in(k1)
    for lag in (1, 3):
        est = estimate_correlation(path, h, h, lag, burn)
        exact = exact_correlation(k1, h, h, lag)
        assert abs(est.estimate - exact) <= 4.0 * est.standard_error


def test_estimate_lag0_variance(k1):
    h = indicator(0, 1, k1.alphabet)
    path = sample_path(k1, 10**5, seed=13)
    est = estimate_correlation(path, h, h, 0, default_burn_in(k1))
    assert est.estimate == pytest.approx(0.25, abs=0.01)


def test_estimate_iid_zero(k3):
    h = indicator(0, 1, k3.alphabet)
    path = sample_path(k3, 10**5, seed=17)
    est = estimate_correlation(path, h, h, 2, 10)
    assert abs(est.estimate) <= 3.0 * est.standard_error


def test_estimate_rejects_short_path(k1):
    h = indicator(0, 1, k1.alphabet)
    path = sample_path(k1, 100, seed=1)
    with pytest.raises(ValueError, match="too short"):
        estimate_correlation(path, h, h, 1, 90)
