from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from tlsmit.engine import Device, default_layers
from tlsmit.learn import (
    LearningConfig,
    UnderdeterminedError,
    UnfittableError,
    degeneracy_pairs,
    fit_fidelity,
    learn,
    measurable_in,
    measurement_bases,
    solve_lambda,
)
from tlsmit.model import GeneratorSet, LindbladModel, NoiseRealization, fidelity, floor_model
from tlsmit.pauli import PauliString
from tlsmit.tls import realize_noise, random_landscape


def test_bases_cover_every_generator(gs6):
    bases = measurement_bases(gs6)
    assert len(bases) == 9 and len(set(bases)) == 9
    for G in gs6.generators:
        assert any(measurable_in(G, b) for b in bases)


def test_bases_need_chain():
    with pytest.raises(NotImplementedError):
        measurement_bases(GeneratorSet(3, ((0, 2),)))


def test_degeneracy_pairs(layers6):
    pairs = degeneracy_pairs(layers6["L1"])
    assert pairs["XIIIII"] == "XZIIII"
    assert pairs["ZIIIII"] == "ZIIIII"
    # self-inverse layers pair Paulis in 2-cycles
    for a, b in pairs.items():
        if b in pairs:
            assert pairs[b] == a


@given(
    st.floats(0.5, 1.0),
    st.floats(0.9, 0.999),
    st.lists(st.sampled_from([2, 4, 8, 12, 24, 32, 64]), min_size=1, max_size=5, unique=True),
)
def test_fit_recovers_exact_exponential(A, f, extra):
    d = np.array([0] + extra, float)
    assume(A * f ** d.max() > 1e-3)
    fr = fit_fidelity(d, A * f**d)
    assert fr.f == pytest.approx(f, rel=1e-9)
    assert fr.f_pair == pytest.approx(f * f, rel=1e-9)
    assert fr.A == pytest.approx(A, rel=1e-9)
    assert not fr.clamped


def test_fit_weighting_prefers_precise_points():
    d = np.array([0, 4, 12, 24])
    y = 0.9 ** d
    y_bad = y.copy()
    y_bad[3] *= 1.5
    se = np.array([1e-4, 1e-4, 1e-4, 10.0])
    fr = fit_fidelity(d, y_bad, se)
    assert fr.f == pytest.approx(0.9, rel=1e-3)


def test_fit_edge_cases():
    with pytest.warns(RuntimeWarning):
        fit_fidelity([0, 4, 12], [0.9, 0.5, -0.1])
    with pytest.raises(UnfittableError):
        fit_fidelity([0, 4], [0.0, -0.1])
    with pytest.raises(ValueError):
        fit_fidelity([0, 0], [1.0, 1.0])
    fr = fit_fidelity([0, 4, 12], [0.9, 0.95, 0.99])
    assert fr.clamped and fr.f == 1.0


def test_solve_lambda_roundtrip(gs6, rng):
    lam = rng.uniform(0, 0.02, 63)
    m = LindbladModel(gs6, lam)
    fids = {G.label: fidelity(m, G) for G in gs6.generators}
    sol = solve_lambda(fids, gs6)
    np.testing.assert_allclose(sol.rates, lam, atol=1e-8)
    assert sol.residual < 1e-10


def test_solve_lambda_underdetermined(gs6):
    fids = {G.label: 0.99 for G in gs6.generators[:40]}
    with pytest.raises(UnderdeterminedError) as info:
        solve_lambda(fids, gs6)
    assert info.value.directions


def test_solve_lambda_rejects_bad_fidelities(gs6):
    fids = {G.label: 0.99 for G in gs6.generators}
    fids["XIIIII"] = 0.0
    with pytest.raises(ValueError):
        solve_lambda(fids, gs6)


def test_learning_config_validation():
    with pytest.raises(ValueError):
        LearningConfig(depths=(0, 3))
    with pytest.raises(ValueError):
        LearningConfig(depths=(2, 4))
    with pytest.raises(ValueError):
        LearningConfig(twirls=1)


def physical_realization(gs6, floors6, seed=0):
    L = random_landscape(6, np.random.default_rng(seed))
    return realize_noise(L, np.zeros(6), ["L1", "L2"], 135e-9, gs6, floors6)


def test_exact_learning_recovers_gamma(gs6, layers6, floors6):
    r = physical_realization(gs6, floors6)
    dev = Device(gs6, static=r, mode="exact")
    for name, layer in layers6.items():
        res = learn(layer, dev, LearningConfig())
        assert res.gamma == pytest.approx(r[name].gamma(), abs=1e-6)
        # every pair product f_P f_P' is reproduced exactly (the learnable part)
        pairs = degeneracy_pairs(layer)
        for a, b in pairs.items():
            Pa, Pb = PauliString.from_label(a), PauliString.from_label(b)
            got = fidelity(res.model, Pa) * fidelity(res.model, Pb)
            want = fidelity(r[name], Pa) * fidelity(r[name], Pb)
            assert got == pytest.approx(want, rel=1e-9)


def test_exact_learning_of_symmetric_noise_is_exact(gs6, layers6):
    m = floor_model(gs6, [(0, 1), (2, 3), (4, 5)], 3e-3, 1e-3)
    dev = Device(gs6, static=NoiseRealization({"L1": m}), mode="exact")
    res = learn(layers6["L1"], dev, LearningConfig())
    np.testing.assert_allclose(res.model.rates, m.rates, atol=1e-9)


def test_sampled_learning_small_budget(gs6, layers6, floors6):
    r = physical_realization(gs6, floors6, seed=1)
    dev = Device(gs6, static=r, seed=2)
    cfg = LearningConfig(depths=(0, 4, 12, 24), twirls=12, shots=32)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = learn(layers6["L2"], dev, cfg, bootstrap=20)
    assert res.gamma_std > 0
    assert res.bootstrap_rates.shape == (20, 63)
    assert abs(res.gamma - r["L2"].gamma()) < 5 * res.gamma_std
    d = res.to_dict()
    assert set(d["local_gamma"]) == {str(s) for s in gs6.scopes()}
    assert len(d["records"]) == 63
