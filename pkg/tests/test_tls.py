from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tlsmit.model import GeneratorSet, fidelity
from tlsmit.pauli import PauliString
from tlsmit.tls import (
    Averaged,
    Control,
    Defect,
    Optimized,
    TlsLandscape,
    drift,
    optimize_k,
    pe_proxy,
    random_landscape,
    realization_rates,
    realize_noise,
    sample_k,
    scan_pe,
    t1_at,
    waveform,
)


def one_defect(center=0.3, width=0.1, strength=2e4, base=100e-6):
    return TlsLandscape.from_defects([base], [[Defect(center, width, strength, center)]])


def test_t1_lorentzian_by_hand():
    L = one_defect()
    # on resonance the rate is base + strength
    assert t1_at(L, 0, 0.3) == pytest.approx(1 / (1e4 + 2e4))
    # one width away the Lorentzian is at half height
    assert t1_at(L, 0, 0.4) == pytest.approx(1 / (1e4 + 1e4))
    assert L.t1(np.array([[0.3]]))[0, 0] == pytest.approx(t1_at(L, 0, 0.3))


def test_flat_landscape_and_range():
    L = TlsLandscape.flat([50e-6, 80e-6])
    np.testing.assert_allclose(L.t1(np.array([0.5, -0.5])), [50e-6, 80e-6])
    with pytest.raises(ValueError):
        L.t1(np.array([1.5, 0.0]))
    with pytest.raises(ValueError):
        TlsLandscape.flat([-1.0])


def test_pe_proxy_monotone_in_t1():
    t1 = np.linspace(10e-6, 300e-6, 50)
    pe = pe_proxy(t1)
    assert np.all(np.diff(pe) > 0)
    assert pe_proxy(40e-6) == pytest.approx(np.exp(-1))
    with pytest.raises(ValueError):
        pe_proxy(0.0)


def test_optimize_k_avoids_defect():
    L = one_defect(center=0.0, width=0.3)
    k = optimize_k(L, 0)
    assert abs(k) == 1.0
    curve = scan_pe(L, 0)
    assert curve.shape == (41, 2)
    assert curve[:, 1].argmin() == 20


def test_optimize_k_tie_prefers_center():
    assert optimize_k(TlsLandscape.flat([1e-4]), 0) == 0.0


def test_strategies_sample_k():
    shots = np.arange(2000)
    assert np.all(sample_k(Control(0.1), shots, 1000.0, 3) == 0.1)
    with pytest.raises(ValueError):
        sample_k(Optimized(), shots, 1000.0, 3)
    o = Optimized(k_star=(0.1, 0.2, 0.3))
    assert sample_k(o, shots, 1000.0, 3)[5].tolist() == [0.1, 0.2, 0.3]
    a = Averaged(amplitude=0.2)
    k = sample_k(a, shots, 1000.0, 2)
    assert k.shape == (2000, 2)
    assert k[:, 0].max() == pytest.approx(0.2)
    assert k[:, 0].min() == pytest.approx(-0.2)
    # one full period per second at 1 kHz
    np.testing.assert_allclose(k[:1000], k[1000:])
    with pytest.raises(ValueError):
        sample_k(Averaged(freq_hz=2000.0), shots, 1000.0, 2)


@given(st.floats(0, 1))
def test_waveforms_bounded_and_periodic(phase):
    for kind in ("sine", "triangle"):
        v = waveform(kind, phase)
        assert -1 - 1e-12 <= v <= 1 + 1e-12
        assert waveform(kind, phase + 3) == pytest.approx(v, abs=1e-9)


def test_triangle_shape():
    assert waveform("triangle", np.array([0, 0.25, 0.5, 0.75])).tolist() == [0, 1, 0, -1]


def test_optimized_due():
    o = Optimized(reopt_period_hr=1.5)
    assert o.due(0.0)
    o2 = o.reoptimize(one_defect())
    assert not o2.due(1.0)
    assert o2.due(1.5)


def test_drift_moments():
    L = random_landscape(4, np.random.default_rng(0), sigma_drift=0.15, theta=0.05)
    rng = np.random.default_rng(1)
    steps = np.array([drift(L, 0.25, rng).centers - L.centers for _ in range(3000)])
    # Euler step: mean -theta (c - anchor) dt (zero at the anchor), variance sigma^2 dt
    assert abs(steps.mean()) < 4 * 0.15 * 0.5 / np.sqrt(steps.size)
    assert steps.var() == pytest.approx(0.15**2 * 0.25, rel=0.05)
    moved = drift(L, 2.0, rng)
    assert moved.time_hr == 2.0
    np.testing.assert_array_equal(moved.anchors, L.anchors)
    with pytest.raises(ValueError):
        drift(L, 0.0, rng)


def test_drift_reverts_to_anchor():
    L = one_defect(center=0.5)
    L = TlsLandscape(L.base_t1, L.centers, L.widths, L.strengths, L.anchors - 0.5, sigma_drift=0.0, theta=0.1)
    L2 = drift(L, 1.0, np.random.default_rng(0))
    assert L2.centers[0, 0] == pytest.approx(0.5 - 0.1 * 0.5)


def test_landscape_json_roundtrip():
    L = random_landscape(6, np.random.default_rng(3))
    back = TlsLandscape.from_json(L.to_json())
    np.testing.assert_array_equal(back.centers, L.centers)
    assert back.k_range == L.k_range
    assert len(L.defects(0)) >= 2


def test_realize_noise_matches_vectorized(gs6, floors6):
    L = random_landscape(6, np.random.default_rng(5))
    k = np.linspace(-0.5, 0.5, 6)
    r = realize_noise(L, k, ["L1", "L2"], 135e-9, gs6, floors6)
    v = realization_rates(L, k[None, :], 135e-9, gs6, floors6)
    for name in ("L1", "L2"):
        np.testing.assert_allclose(v[name][0], r[name].rates)
    t1 = L.t1(k)
    for q in range(6):
        f = fidelity(r["L1"], PauliString.single(6, q, "Z"))
        assert f <= np.exp(-135e-9 / t1[q]) + 1e-15
