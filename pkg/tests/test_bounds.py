"""Neumann sums, decay bounds, correlation and comparison bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lislab import (
    DecaySpec,
    SensitivityMatrix,
    Window,
    build_sensitivity_matrix,
    comparison_bound,
    constant_observable,
    correlation_bound,
    correlation_bound_semi_exact,
    fit_decay_rate,
    indicator,
    memory_bound_exponential,
    memory_bound_general,
    neumann_series,
    series_decay_bound,
)
from lislab.bounds import BoundNotApplicableError
from lislab.core import random_observable
from lislab.oracle import exact_correlation, stationary_measure
from lislab.specio import iid_kernel, power_law_linear, two_state_markov


def random_sub_dobrushin(rng: np.random.Generator, depth: int | None = None) -> SensitivityMatrix:
    depth = int(rng.integers(1, 4)) if depth is None else depth
    row = rng.random(depth)
    row = row / row.sum() * rng.uniform(0.1, 0.9)
    return SensitivityMatrix.from_stationary(tuple(float(x) for x in row))


# --- neumann series ---------------------------------------------------------

def test_neumann_banded_powers(k1):
    alpha = build_sensitivity_matrix(k1)
    ns = neumann_series(alpha, Window(0, 5))
    assert not ns.diverged
    assert ns.entry(3, 0) == pytest.approx(0.4**3, abs=1e-12)
    assert ns.entry(5, 0) == pytest.approx(0.4**5, abs=1e-12)
    assert ns.entry(2, -1) == pytest.approx(0.4**3, abs=1e-12)
    assert ns.entry(1, 3) == 0.0


def test_neumann_zero_matrix():
    alpha = SensitivityMatrix.from_stationary((0.0, 0.0))
    ns = neumann_series(alpha, Window(0, 4))
    assert np.all(ns.matrix == 0.0)
    assert not ns.diverged


def test_neumann_divergence_flag():
    alpha = SensitivityMatrix.from_stationary((1.0,))
    ns = neumann_series(alpha, Window(0, 4))
    assert ns.diverged
    assert ns.row_sum_sup == 1.0
    # the finite window sum itself is still exact
    assert ns.entry(4, 0) == pytest.approx(1.0)


def test_neumann_matches_dense_reference():
    # brute-force reference: dense site-grid matrix powers
    rng = np.random.default_rng(3)
    alpha = random_sub_dobrushin(rng, depth=2)
    window = Window(0, 5)
    lo = window.lo - alpha.depth
    size = window.hi - lo + 1
    dense = np.zeros((size, size))
    for i in window.sites():
        for j in range(lo, i):
            dense[i - lo, j - lo] = alpha.entry(i, j)
    expected = np.zeros_like(dense)
    power = np.eye(size)
    for _ in range(len(window) + 2):
        power = power @ dense
        expected += power
    ns = neumann_series(alpha, window)
    for k in window.sites():
        for j in range(lo, window.hi + 1):
            assert ns.entry(k, j) == pytest.approx(expected[k - lo, j - lo], abs=1e-12)


# --- memory bounds ----------------------------------------------------------

def test_memory_bound_markov_geometric(k1):
    alpha = build_sensitivity_matrix(k1)
    for n in (1, 2, 4):
        h = indicator(n, 1, k1.alphabet)
        rep = memory_bound_general(alpha, Window(0, n), h, -1)
        assert rep.value == pytest.approx(0.4 ** (n + 1), abs=1e-12)


def test_memory_bound_constant_h(k1):
    alpha = build_sensitivity_matrix(k1)
    h = constant_observable(Window(0, 2), k1.alphabet, 2.5)
    assert memory_bound_general(alpha, Window(0, 2), h, -1).value == 0.0


def test_memory_bound_k2_matches_matrix_power_oracle(k2):
    alpha = build_sensitivity_matrix(k2)
    window = Window(0, 2)
    h = indicator(2, 1, k2.alphabet)
    rep = memory_bound_general(alpha, window, h, -1)
    # independent dense reference over the padded site grid
    lo = window.lo - alpha.depth
    size = window.hi - lo + 1
    dense = np.zeros((size, size))
    for i in window.sites():
        for j in range(lo, i):
            dense[i - lo, j - lo] = alpha.entry(i, j)
    acc = np.zeros_like(dense)
    power = np.eye(size)
    for _ in range(len(window)):
        power = power @ dense
        acc += power
    assert rep.value == pytest.approx(acc[2 - lo, -1 - lo], abs=1e-12)


def test_memory_bound_validates_inputs(k1):
    alpha = build_sensitivity_matrix(k1)
    h = indicator(1, 1, k1.alphabet)
    with pytest.raises(ValueError):
        memory_bound_general(alpha, Window(0, 1), h, 0)
    with pytest.raises(ValueError):
        memory_bound_general(alpha, Window(0, 0), h, -1)


def test_memory_bound_exponential_example(k1):
    alpha = build_sensitivity_matrix(k1)
    decay = DecaySpec("exponential", 0.5)
    h = indicator(3, 1, k1.alphabet)
    rep = memory_bound_exponential(alpha, decay, Window(0, 3), h, -1)
    gamma = 0.4 * math.exp(0.5)
    assert rep.quantities["gamma_window"] == pytest.approx(gamma, abs=1e-12)
    assert rep.value == pytest.approx(gamma / (1 - gamma) * math.exp(-2.0), abs=1e-12)
    assert rep.value == pytest.approx(0.262, abs=1e-3)


def test_memory_bound_exponential_rejects_large_rate(k1):
    alpha = build_sensitivity_matrix(k1)
    # 0.4 e^rate >= 1 once rate >= ln 2.5
    decay = DecaySpec("exponential", math.log(2.5) + 0.01)
    h = indicator(2, 1, k1.alphabet)
    with pytest.raises(BoundNotApplicableError) as err:
        memory_bound_exponential(alpha, decay, Window(0, 2), h, -1)
    assert err.value.gamma >= 1.0


def test_memory_bound_exponential_zero_alpha():
    alpha = SensitivityMatrix.from_stationary((0.0,))
    e = iid_kernel((0.5, 0.5)).alphabet
    h = indicator(2, 1, e)
    rep = memory_bound_exponential(alpha, DecaySpec("exponential", 1.0), Window(0, 2), h, -1)
    assert rep.value == 0.0
    assert rep.quantities["gamma_window"] == 0.0


# --- decay-rate fitting -----------------------------------------------------

def test_fit_decay_rate_markov(k1):
    alpha = build_sensitivity_matrix(k1)
    spec = fit_decay_rate(alpha)
    assert spec.family == "exponential"
    # solves 0.4 e^rate = 1 - 1e-6, minus bisection slack
    assert spec.rate == pytest.approx(math.log(2.5), abs=1e-5)
    assert spec.rate < math.log(2.5)


def test_fit_decay_rate_zero_alpha():
    alpha = SensitivityMatrix.from_stationary((0.0, 0.0))
    assert fit_decay_rate(alpha).rate == 50.0


def test_fit_decay_rate_powerlog_series():
    f = power_law_linear(0.5, 16)
    alpha = build_sensitivity_matrix(f)
    spec = fit_decay_rate(alpha, "powerlog")
    gamma = sum(
        a * math.exp(spec.weight(lag)) for lag, a in enumerate(alpha.stationary_row, start=1)
    )
    assert gamma <= 1.0 - 1e-6 + 1e-12
    # doubling the fitted rate must break feasibility
    worse = DecaySpec("powerlog", spec.rate * 2)
    gamma2 = sum(
        a * math.exp(worse.weight(lag)) for lag, a in enumerate(alpha.stationary_row, start=1)
    )
    assert gamma2 > 1.0 - 1e-6


def test_fit_decay_rate_infeasible():
    alpha = SensitivityMatrix.from_stationary((1.0,))
    with pytest.raises(BoundNotApplicableError):
        fit_decay_rate(alpha)


# --- series decay cross-check -----------------------------------------------

def test_series_decay_markov(k1):
    alpha = build_sensitivity_matrix(k1)
    rep = series_decay_bound(alpha, DecaySpec("exponential", 0.5), Window(0, 5))
    assert rep.holds
    # spot-check one entry against hand values
    gamma = 0.4 * math.exp(0.5)
    lhs = neumann_series(alpha, Window(0, 5)).entry(3, 0)
    rhs = gamma / (1 - gamma) * math.exp(-1.5)
    assert lhs <= rhs


@given(seed=st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_series_decay_random_property(seed):
    rng = np.random.default_rng(seed)
    alpha = random_sub_dobrushin(rng)
    decay = fit_decay_rate(alpha)
    window = Window(0, int(rng.integers(1, 7)))
    rep = series_decay_bound(alpha, decay, window)
    assert rep.holds, f"margin {rep.worst_margin}"


@given(seed=st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_exponential_bound_dominates_general(seed):
    # the decay-profile form upper-bounds the window-limited form
    # entrywise, hence also after pairing with any oscillation vector
    rng = np.random.default_rng(seed)
    alpha = random_sub_dobrushin(rng)
    decay = fit_decay_rate(alpha)
    hi = int(rng.integers(0, 4))
    window = Window(0, hi)
    e = iid_kernel((0.5, 0.5)).alphabet
    h = random_observable(window, e, rng)
    j = -int(rng.integers(1, alpha.depth + 2))
    general = memory_bound_general(alpha, window, h, j).value
    exponential = memory_bound_exponential(alpha, decay, window, h, j).value
    assert exponential >= general - 1e-12


# --- correlation bound ------------------------------------------------------

def test_correlation_bound_dominates_markov_exact(k1):
    alpha = build_sensitivity_matrix(k1)
    h0 = indicator(0, 1, k1.alphabet)
    for lag in (1, 3, 5):
        h_lag = indicator(lag, 1, k1.alphabet)
        rep = correlation_bound(alpha, Window(lag, lag), Window(0, 0), h_lag, h0, 1.0)
        exact = exact_correlation(k1, h0, h0, lag)
        assert rep.value >= exact - 1e-12
        assert rep.quantities["tail_certificate"] >= 0.0


def test_correlation_bound_constant_observable(k1):
    alpha = build_sensitivity_matrix(k1)
    h0 = indicator(0, 1, k1.alphabet)
    const = constant_observable(Window(3, 3), k1.alphabet, 1.0)
    assert correlation_bound(alpha, Window(3, 3), Window(0, 0), const, h0, 1.0).value == 0.0


def test_correlation_bound_iid_zero(k3):
    alpha = build_sensitivity_matrix(k3)
    h0 = indicator(0, 1, k3.alphabet)
    h3 = indicator(3, 1, k3.alphabet)
    rep = correlation_bound(alpha, Window(3, 3), Window(0, 0), h3, h0, 1.0)
    assert rep.value == 0.0
    assert exact_correlation(k3, h0, h0, 3) == pytest.approx(0.0, abs=1e-12)


def test_correlation_bound_validates(k1):
    alpha = build_sensitivity_matrix(k1)
    h0 = indicator(0, 1, k1.alphabet)
    h1 = indicator(1, 1, k1.alphabet)
    with pytest.raises(ValueError, match="left"):
        correlation_bound(alpha, Window(0, 0), Window(1, 1), h0, h1, 1.0)
    bad = SensitivityMatrix.from_stationary((1.0,))
    with pytest.raises(BoundNotApplicableError):
        correlation_bound(bad, Window(1, 1), Window(0, 0), h1, h0, 1.0)


def test_correlation_semi_exact_between_exact_and_bound(k1):
    alpha = build_sensitivity_matrix(k1)
    h0 = indicator(0, 1, k1.alphabet)
    h3 = indicator(3, 1, k1.alphabet)
    full = correlation_bound(alpha, Window(3, 3), Window(0, 0), h3, h0, 1.0).value
    semi = correlation_bound_semi_exact(k1, alpha, Window(3, 3), Window(0, 0), h3, h0).value
    exact = exact_correlation(k1, h0, h0, 3)
    assert exact - 1e-12 <= semi <= full + 1e-12


# --- comparison bound -------------------------------------------------------

def test_comparison_bound_same_kernel(k1):
    h = indicator(0, 1, k1.alphabet)
    assert comparison_bound(k1, k1, Window(0, 0), h).value == pytest.approx(0.0, abs=1e-12)


def test_comparison_bound_iid_pair():
    f = iid_kernel((0.6, 0.4))
    g = iid_kernel((0.5, 0.5))
    h = indicator(0, 1, f.alphabet)
    rep = comparison_bound(f, g, Window(0, 0), h)
    assert rep.value == pytest.approx(0.1, abs=1e-12)  # exact gap for i.i.d.


def test_comparison_bound_markov_perturbation(k1):
    other = two_state_markov(0.31, 0.7)
    h = indicator(0, 1, k1.alphabet)
    rep = comparison_bound(k1, other, Window(0, 0), h)
    mu = stationary_measure(k1)
    mu_t = stationary_measure(other)
    gap = abs(mu.weights[1] - mu_t.weights[1])
    assert rep.value >= gap
    assert rep.value == pytest.approx(0.01 / 0.6, abs=1e-6)
    assert rep.quantities["gap_sup"] == pytest.approx(0.01, abs=1e-12)


def test_comparison_bound_gap_override(k1):
    h = indicator(0, 1, k1.alphabet)
    rep = comparison_bound(k1, k1, Window(0, 0), h, gap_override=0.02)
    assert rep.value == pytest.approx(0.02 / 0.6, abs=1e-6)


def test_comparison_bound_requires_criterion():
    flip = two_state_markov(1.0, 0.0)
    h = indicator(0, 1, flip.alphabet)
    with pytest.raises(BoundNotApplicableError):
        comparison_bound(flip, flip, Window(0, 0), h)


# --- linearity of bounds in the oscillation vector ---------------------------

def test_memory_bound_linear_in_h(k1):
    alpha = build_sensitivity_matrix(k1)
    rng = np.random.default_rng(11)
    h = random_observable(Window(0, 2), k1.alphabet, rng)
    scaled = type(h)(h.support, h.alphabet, tuple(3.0 * v for v in h.table))
    b1 = memory_bound_general(alpha, Window(0, 2), h, -1).value
    b3 = memory_bound_general(alpha, Window(0, 2), scaled, -1).value
    assert b3 == pytest.approx(3.0 * b1, rel=1e-12)
