from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, stats

from tlsmit.theory import (
    DEFAULT_SCHEDULE,
    GaussianRate,
    additive_deviation,
    averaged_t1_sim,
    curves_csv,
    effective_depth,
    fitted_rate,
    fitted_rate_lstsq,
    jensen_gap,
    lognormal_moment,
    mitsim,
    quasi_static_bias,
    quasi_static_learning_sim,
    simulate_learn_mitigate,
)


def test_effective_depth_by_hand():
    d = np.array(DEFAULT_SCHEDULE, float)
    assert effective_depth(DEFAULT_SCHEDULE) == pytest.approx((d**3).sum() / (d**2).sum())
    assert effective_depth(DEFAULT_SCHEDULE) == pytest.approx(54.4215, abs=1e-4)
    assert effective_depth([24]) == 24
    with pytest.raises(ValueError):
        effective_depth([0, 0])


@pytest.mark.parametrize("sigma,d", [(0.01, 1), (0.02, 24), (0.03, 64)])
def test_lognormal_moment_quadrature(sigma, d):
    r = GaussianRate(0.01, sigma)
    val, _ = integrate.quad(lambda g: np.exp(-d * g) * stats.norm.pdf(g, 0.01, sigma), -1, 1, points=[0.01])
    assert lognormal_moment(r, d) == pytest.approx(val, rel=1e-9)


@given(st.floats(0.0, 0.05), st.floats(0.0, 0.04))
def test_lstsq_fit_of_exact_moments_is_closed_form(mu, sigma):
    r = GaussianRate(mu, sigma)
    d = np.array(DEFAULT_SCHEDULE)
    m = lognormal_moment(r, d)
    assert fitted_rate_lstsq(m, d) == pytest.approx(fitted_rate(r, d), abs=1e-12)
    # the bias is the moment divided by the fitted Markovian curve
    bias = lognormal_moment(r, 24) / np.exp(-24 * fitted_rate(r, d))
    assert quasi_static_bias(sigma, 24, effective_depth(d)) == pytest.approx(bias, rel=1e-12)


def test_bias_direction():
    assert quasi_static_bias(0.02, 24, 54.42) < 1
    assert quasi_static_bias(0.02, 80, 54.42) > 1
    assert quasi_static_bias(0.0, 24, 54.42) == 1


def test_truncated_sampling_nonnegative(rng):
    g = GaussianRate(0.01, 0.03).sample(rng, 10000, truncate=True)
    assert g.min() >= 0
    with pytest.raises(ValueError):
        GaussianRate(0.0, -1.0)


def test_simulate_learn_mitigate_small(rng):
    r = GaussianRate(0.01, 0.02)
    res = simulate_learn_mitigate(r, DEFAULT_SCHEDULE, 24, 50000, rng)
    assert abs(res.z) < 4.5
    single = simulate_learn_mitigate(r, [24], 24, 1000, rng)
    assert single.ratio == pytest.approx(1.0, abs=1e-12)
    indep = simulate_learn_mitigate(r, DEFAULT_SCHEDULE, 24, 50000, rng, independent=True)
    assert abs(indep.z) < 4.5


@given(
    arrays(float, st.integers(2, 20), elements=st.floats(0.0, 0.2)),
    arrays(float, 20, elements=st.floats(0.01, 1.0)),
)
def test_jensen_gap_nonnegative(rates, w):
    gap = jensen_gap(rates, range(1, 65), w[: rates.size])
    assert np.all(gap >= -1e-12)  # rounding in the normalized weights


def test_additive_deviation_scaling():
    a = additive_deviation(0.98, 0.97, 0.004, 24)
    b = additive_deviation(0.98, 0.97, 0.002, 24)
    assert 3.5 < a / b < 4.5
    assert additive_deviation(0.98, 0.97, 0.0 + 1e-12, 1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        additive_deviation(0.999, 0.97, 0.01, 4)


def test_averaged_t1_bounds(rng):
    t = np.linspace(0, 2e-3, 41)
    res = averaged_t1_sim(500e-6, 150e-6, t, 1000, rng, repetitions=5)
    assert res.fitted_t1 < res.max_sampled_t1
    assert res.fitted_t1_samples.shape == (5,)
    flat = averaged_t1_sim(500e-6, 0.0, t, 10, rng)
    assert flat.fitted_t1 == pytest.approx(500e-6, rel=1e-6)
    with pytest.raises(ValueError):
        averaged_t1_sim(-1.0, 0.1, t, 10, rng)


def test_quasi_static_learning_sim():
    assert quasi_static_learning_sim([100e-6], 1e-6, [0, 4, 8])[2] == pytest.approx(0, abs=1e-14)
    fm, ff, rel = quasi_static_learning_sim([20e-6, 200e-6], 2e-6, [0, 8, 24, 64])
    assert fm == pytest.approx(0.5 * (np.exp(-0.1) + np.exp(-0.01)))
    assert rel > 0


def test_mitsim_enumeration_mean():
    rng = np.random.default_rng(0)
    learn = [rng.uniform(50e-6, 150e-6, 7) for _ in range(3)]
    res = mitsim(learn, DEFAULT_SCHEDULE, 135e-9, 24)
    assert res.enumerated and res.deviations.size == 343
    assert res.mean_deviation == pytest.approx(res.deviations.mean(), abs=1e-14)
    const = mitsim([np.full(3, 80e-6)] * 2)
    np.testing.assert_allclose(const.deviations, 0.0, atol=1e-12)
    sub = mitsim(learn, max_enumerate=10, subsample=500, rng=rng)
    assert not sub.enumerated and sub.deviations.size == 500


def test_curves_csv():
    rows = curves_csv(GaussianRate(0.01, 0.02), [0, 4]).strip().splitlines()
    assert rows[0] == "d,markov_curve,quasi_static_curve"
    assert rows[1].startswith("0,1.0,1.0")
