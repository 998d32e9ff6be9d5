"""Variations, transport distances, sensitivity, and criteria."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lislab import (
    AlphabetSpec,
    KernelSpec,
    SensitivityMatrix,
    boundary_uniformity_check,
    build_sensitivity_matrix,
    dobrushin_check,
    ergodic_coefficient,
    sensitivity_estimator,
    variation,
    vkr_distance,
)
from lislab.analysis import _variation_enumerated, _vkr_linprog, _vkr_vertex_enum
from lislab.specio import power_law_linear, two_state_markov

from conftest import random_distribution, random_table_kernel


# --- variations -------------------------------------------------------------

def test_variation_markov(k1):
    # agreement on [j, i] pins the conditioning site for any j <= i - 1
    assert variation(k1, 0, -1) == 0.0
    assert variation(k1, 5, 2) == 0.0
    # lag 0 frees the whole past
    assert variation(k1, 0, 0) == pytest.approx(0.4)


def test_variation_beyond_depth_is_zero(k2):
    assert variation(k2, 0, -4) == 0.0
    assert variation(k2, 0, -7) == 0.0


def test_variation_linear_closed_form_matches_enumeration():
    f = power_law_linear(0.5, 4, normalization="partial")
    for lag in range(0, 5):
        closed = variation(f, 0, -lag)
        enumerated = _variation_enumerated(f, 0, -lag)
        assert closed == pytest.approx(enumerated, abs=1e-12)


def test_variation_linear_dominates_single_flip():
    # at lag 3 on a depth-8 kernel the variation (sum of deeper
    # coefficients) exceeds the single lag-3 coefficient
    f = power_law_linear(0.5, 8, normalization="partial")
    lag = 3
    coeff = f.family.coefficients[lag - 1]
    assert variation(f, 0, -lag) >= coeff


def test_variation_requires_order(k1):
    with pytest.raises(ValueError):
        variation(k1, 0, 1)


# --- transport distance -----------------------------------------------------

def test_vkr_discrete_examples():
    e = AlphabetSpec.binary()
    assert vkr_distance((0.3, 0.7), (0.7, 0.3), e) == pytest.approx(0.4, abs=1e-15)
    assert vkr_distance((0.3, 0.7), (0.3, 0.7), e) == 0.0


def test_vkr_scaled_metric():
    e = AlphabetSpec(("0", "1"), ((0.0, 2.0), (2.0, 0.0)))
    assert vkr_distance((0.3, 0.7), (0.7, 0.3), e) == pytest.approx(0.8, abs=1e-15)


def test_vkr_solvers_agree():
    rng = np.random.default_rng(42)
    for n in (2, 3, 4):
        symbols = tuple(str(i) for i in range(n))
        # a random metric: distances 1 or 2 keep the triangle inequality
        table = [[0.0] * n for _ in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                table[a][b] = table[b][a] = float(rng.integers(1, 3))
        e = AlphabetSpec(symbols, tuple(tuple(r) for r in table))
        for _ in range(25):
            p = np.array(random_distribution(rng, n))
            q = np.array(random_distribution(rng, n))
            dist = e.metric_array()
            assert _vkr_vertex_enum(p, q, dist) == pytest.approx(
                _vkr_linprog(p, q, dist), abs=1e-9
            )


@given(seed=st.integers(0, 10**6), n=st.sampled_from([2, 3]))
@settings(max_examples=60, deadline=None)
def test_vkr_is_a_metric(seed, n):
    rng = np.random.default_rng(seed)
    e = AlphabetSpec.discrete(tuple(str(i) for i in range(n)))
    p, q, r = (random_distribution(rng, n) for _ in range(3))
    dpq = vkr_distance(p, q, e)
    assert dpq >= 0.0
    assert vkr_distance(p, p, e) == pytest.approx(0.0, abs=1e-12)
    assert dpq == pytest.approx(vkr_distance(q, p, e), abs=1e-12)
    assert dpq <= vkr_distance(p, r, e) + vkr_distance(r, q, e) + 1e-12


@given(seed=st.integers(0, 10**6), n=st.sampled_from([2, 3]))
@settings(max_examples=60, deadline=None)
def test_vkr_discrete_equals_half_l1(seed, n):
    rng = np.random.default_rng(seed)
    e = AlphabetSpec.discrete(tuple(str(i) for i in range(n)))
    p = random_distribution(rng, n)
    q = random_distribution(rng, n)
    half_l1 = 0.5 * sum(abs(a - b) for a, b in zip(p, q))
    assert vkr_distance(p, q, e) == pytest.approx(half_l1, abs=1e-12)


# --- sensitivity ------------------------------------------------------------

def test_sensitivity_markov(k1):
    assert sensitivity_estimator(k1, 0, -1) == pytest.approx(0.4)
    assert sensitivity_estimator(k1, 0, -2) == 0.0
    with pytest.raises(ValueError):
        sensitivity_estimator(k1, 0, 0)


def test_sensitivity_linear_equals_coefficients(k2):
    for lag in range(1, 5):
        assert sensitivity_estimator(k2, 0, -lag) == k2.family.coefficients[lag - 1]


def test_sensitivity_linear_fast_path_matches_enumeration(k2):
    from lislab.analysis import _as_general_table

    table_kernel = KernelSpec(k2.alphabet, 4, _as_general_table(k2, 0))
    for lag in range(1, 5):
        assert sensitivity_estimator(k2, 0, -lag) == pytest.approx(
            sensitivity_estimator(table_kernel, 0, -lag), abs=1e-12
        )


def test_build_sensitivity_matrix(k1, k2, k3):
    a1 = build_sensitivity_matrix(k1)
    assert a1.stationary_row == pytest.approx((0.4,))
    a2 = build_sensitivity_matrix(k2)
    assert a2.stationary_row == k2.family.coefficients
    a3 = build_sensitivity_matrix(k3)
    assert a3.stationary_row == ()
    assert a3.sup_row_sum() == 0.0


def test_sensitivity_nonnegative_and_banded(k2):
    a = build_sensitivity_matrix(k2)
    assert a.entry(0, -5) == 0.0
    assert a.entry(0, 1) == 0.0
    assert all(x >= 0.0 for x in a.stationary_row)


# --- criteria ---------------------------------------------------------------

def test_dobrushin_examples(k1, k2):
    v1 = dobrushin_check(build_sensitivity_matrix(k1))
    assert v1.satisfied and v1.scalars["row_sum_sup"] == pytest.approx(0.4)
    v2 = dobrushin_check(build_sensitivity_matrix(k2))
    assert v2.satisfied
    assert v2.scalars["row_sum_sup"] == pytest.approx(0.5, abs=1e-12)
    boundary = dobrushin_check(SensitivityMatrix.from_stationary((1.0,)))
    assert not boundary.satisfied  # strict inequality at the boundary


def test_dobrushin_truncated_tail_reported():
    f = power_law_linear(0.5, 4, normalization="full")
    v = dobrushin_check(build_sensitivity_matrix(f))
    assert v.satisfied
    assert v.scalars["row_sum_sup"] < 0.5
    assert v.truncation_tail > 0.0
    assert v.scalars["row_sum_sup"] + v.truncation_tail == pytest.approx(0.5, abs=1e-12)


@given(
    row=st.lists(st.floats(0.0, 0.4), min_size=1, max_size=3),
    bump_idx=st.integers(0, 2),
    bump=st.floats(0.0, 2.0),
)
@settings(max_examples=100, deadline=None)
def test_dobrushin_monotone(row, bump_idx, bump):
    base = SensitivityMatrix.from_stationary(tuple(row))
    bumped_row = list(row)
    bumped_row[bump_idx % len(row)] += bump
    bumped = SensitivityMatrix.from_stationary(tuple(bumped_row))
    if not dobrushin_check(base).satisfied:
        assert not dobrushin_check(bumped).satisfied


def test_boundary_uniformity_markov(k1):
    v = boundary_uniformity_check(k1)
    assert v.satisfied
    assert v.scalars["min_probability"] == pytest.approx(0.3, abs=1e-12)
    assert v.scalars["variation_sum"] == pytest.approx(0.4, abs=1e-12)
    assert v.scalars["constant"] == pytest.approx(math.exp(-4.0 / 3.0), abs=1e-12)


def test_boundary_uniformity_zero_entry():
    f = two_state_markov(0.0, 0.7)
    v = boundary_uniformity_check(f)
    assert not v.satisfied
    assert v.scalars["min_probability"] == 0.0


def test_boundary_uniformity_iid(k3):
    v = boundary_uniformity_check(k3)
    assert v.satisfied
    assert v.scalars["min_probability"] == 0.5
    assert v.scalars["variation_sum"] == 0.0
    assert v.scalars["constant"] == 1.0


def test_boundary_requires_horizon_at_least_depth(k2):
    with pytest.raises(ValueError, match="horizon"):
        boundary_uniformity_check(k2, horizon=2)


def test_ergodic_coefficient_examples(k1, k3):
    assert ergodic_coefficient(k1) == pytest.approx(0.4)
    assert ergodic_coefficient(k3) == 0.0
    flip = two_state_markov(1.0, 0.0)
    assert ergodic_coefficient(flip) == 1.0


def test_ergodic_coefficient_rejects_long_memory(k2):
    with pytest.raises(ValueError):
        ergodic_coefficient(k2)


def test_ergodic_equals_lag_one_sensitivity():
    rng = np.random.default_rng(7)
    for _ in range(20):
        f = random_table_kernel(rng, depth=1)
        assert ergodic_coefficient(f) == pytest.approx(
            build_sensitivity_matrix(f).stationary_row[0], abs=1e-12
        )
