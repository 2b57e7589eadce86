from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dense import pauli_matrix
from tlsmit.model import (
    GeneratorSet,
    LindbladModel,
    channel_weights,
    fidelity,
    floor_model,
    gamma,
    model_from_t1,
    rates_from_weights,
    relative_cost,
    sample_error,
    sample_error_frames,
    sample_inverse,
)
from tlsmit.pauli import PauliString, cz_layer

GS2 = GeneratorSet.chain(2)


def dense_channel_fidelity(m: LindbladModel, label: str) -> float:
    """Apply prod_k (w_k rho + (1 - w_k) G_k rho G_k) to P and read off Tr(P out)/2^n."""
    P = pauli_matrix(label)
    rho = P.copy()
    for G, w in zip(m.generator_set.generators, channel_weights(m)):
        Gm = pauli_matrix(G.label)
        rho = w * rho + (1 - w) * Gm @ rho @ Gm
    return float(np.real(np.trace(P @ rho)) / P.shape[0])


rates2 = arrays(float, 15, elements=st.floats(0, 0.2))


def test_generator_set_layout(gs6):
    assert len(gs6) == 63
    assert len(set(gs6.labels)) == 63
    assert gs6.labels[:3] == ("XIIIII", "YIIIII", "ZIIIII")
    assert gs6.labels[18] == "XXIIII"
    assert all(gs6.generators[k].weight == 2 for k in gs6.weight_two())
    assert [gs6.labels[k] for k in gs6.scope_indices((2, 3))][-1] == "IIZZII"
    with pytest.raises(KeyError):
        gs6.scope_indices((0, 2))
    with pytest.raises(ValueError):
        GeneratorSet(3, ((0, 1), (1, 0)))


@given(rates2, st.sampled_from(["".join(p) for p in itertools.product("IXYZ", repeat=2)]))
def test_fidelity_matches_dense_channel(rates, label):
    m = LindbladModel(GS2, rates)
    assert fidelity(m, PauliString.from_label(label)) == pytest.approx(
        dense_channel_fidelity(m, label), rel=1e-10, abs=1e-12
    )


@given(rates2)
def test_gamma_and_weights(rates):
    m = LindbladModel(GS2, rates)
    assert gamma(m) == pytest.approx(np.exp(2 * rates.sum()))
    # gamma is the product of 1 / (2 w_k - 1), the L1 norm of the inverse factors
    assert gamma(m) == pytest.approx(np.prod(1.0 / (2 * channel_weights(m) - 1)))
    np.testing.assert_allclose(rates_from_weights(channel_weights(m)), rates, atol=1e-12)


def test_model_validation(gs6):
    with pytest.raises(ValueError):
        LindbladModel(gs6, np.zeros(62))
    with pytest.raises(ValueError):
        LindbladModel(gs6, -np.ones(63) * 1e-3)
    with pytest.raises(ValueError):
        LindbladModel(gs6, np.full(63, np.nan))
    with pytest.raises(ValueError):
        LindbladModel(gs6, np.full(63, 10.0))


def test_json_roundtrip(gs6, rng):
    m = LindbladModel(gs6, rng.uniform(0, 0.02, 63))
    back = LindbladModel.from_json(m.to_json())
    assert back == m
    assert LindbladModel.from_dict(gs6, {"XIIIII": 0.1}).rates[0] == 0.1
    assert (m + m).rates == pytest.approx(2 * m.rates)


def test_model_from_t1(gs6):
    t1 = np.array([100e-6, 80e-6, 120e-6, 90e-6, 110e-6, 70e-6])
    tau = 135e-9
    m = model_from_t1(t1, tau, gs6)
    for q in range(6):
        fz = fidelity(m, PauliString.single(6, q, "Z"))
        fx = fidelity(m, PauliString.single(6, q, "X"))
        assert fz == pytest.approx(np.exp(-tau / t1[q]), rel=1e-12)
        assert fx == pytest.approx(np.sqrt(fz), rel=1e-12)
    with pytest.raises(ValueError):
        model_from_t1(-t1, tau, gs6)


def test_relative_cost_values():
    assert relative_cost(1.13, 1.06, 20) == pytest.approx((1.13 / 1.06) ** 40)
    assert relative_cost(1.0, 1.0, 100) == 1.0
    with pytest.raises(ValueError):
        relative_cost(0.9, 1.0, 1)


def test_floor_model_is_cz_invariant(gs6):
    edges = [(0, 1), (2, 3), (4, 5)]
    m = floor_model(gs6, edges, 4e-4, 5e-5)
    L = cz_layer(6, edges)
    for G in gs6.generators:
        # fidelity of every Pauli is unchanged by conjugation through the layer
        assert fidelity(m, L(G).unsigned()) == pytest.approx(fidelity(m, G), rel=1e-14)


def test_sample_error_frequencies(rng):
    m = LindbladModel(GS2, np.full(15, 0.05))
    P = PauliString.from_label("XZ")
    vals = [(-1) ** (1 - int(P.commutes(sample_error(m, rng)))) for _ in range(8000)]
    f = fidelity(m, P)
    assert np.mean(vals) == pytest.approx(f, abs=4 * np.sqrt((1 - f**2) / 8000))


def test_sample_inverse_is_unbiased(rng):
    m = LindbladModel(GS2, np.full(15, 0.03))
    P = PauliString.from_label("ZZ")
    g = gamma(m)
    vals = []
    for _ in range(20000):
        E, s = sample_inverse(m, rng)
        vals.append(g * s * (1 if P.commutes(E) else -1))
    vals = np.array(vals)
    target = 1.0 / fidelity(m, P)
    assert vals.mean() == pytest.approx(target, abs=4 * vals.std() / np.sqrt(vals.size))


def test_sample_error_frames_xor():
    packed = np.array([1, 2, 4, 8], dtype=np.uint64)
    u = np.array([[0.1, 0.9, 0.1, 0.9], [0.9, 0.9, 0.9, 0.9], [0.0, 0.0, 0.0, 0.0]])
    out = sample_error_frames(np.full(4, 0.5), u, packed)
    assert out.tolist() == [5, 0, 15]
