from __future__ import annotations

import numpy as np
import pytest

from dense import expectation, simulate_density
from tlsmit.engine import (
    Circuit,
    Device,
    Gate,
    NoiseSlot,
    PauliGate,
    ReadoutModel,
    compile_twirl,
    default_layers,
    delay_circuit,
    estimate_with_readout_twirl,
    exact_expectation,
    exact_expectations,
    learning_circuit,
    mirror_circuit,
    net_action,
    propagate,
    readout_monitor_circuit,
    reference_bits,
    z_substrings,
)
from tlsmit.model import GeneratorSet, LindbladModel, NoiseRealization
from tlsmit.pauli import PauliString, cz_layer
from tlsmit.tls import Averaged, TlsLandscape

GS4 = GeneratorSet.chain(4)


def random_realization(gs, rng, hi=0.02, layers=("L1", "L2")):
    return NoiseRealization({L: LindbladModel(gs, rng.uniform(0, hi, len(gs))) for L in layers})


# -- circuit structure --------------------------------------------------------------


def test_mirror_structure():
    c = mirror_circuit(6, 10)
    assert len(c.slots) == 40
    assert c.slots.count("L1") == c.slots.count("L2") == 20
    assert c.is_palindrome()
    assert len(c.gate_sequence()) == 60
    assert reference_bits(c) == 0
    for O in z_substrings(6):
        assert net_action(c, O) == O


def test_z_substrings_order():
    zs = z_substrings(6)
    assert len(zs) == 63
    assert [P.weight for P in zs] == sorted(P.weight for P in zs)
    assert zs[-1].label == "ZZZZZZ"


def test_noise_slot_must_precede_its_layer():
    L = default_layers(4)
    with pytest.raises(ValueError):
        Circuit(4, (NoiseSlot("L1"), Gate(L["L2"])))
    with pytest.raises(ValueError):
        Circuit(4, (Gate(L["L1"]), NoiseSlot("L1")))


def test_mirror_rejects_non_self_inverse_layer():
    from tlsmit.pauli import basis_layer

    with pytest.raises(ValueError):
        mirror_circuit(2, 1, {"B": basis_layer("YY")})


def test_learning_circuit_validation():
    L = default_layers(4)["L1"]
    with pytest.raises(ValueError):
        learning_circuit(L, 3)
    c = learning_circuit(L, 4, "XYZX", twirl_seed=3)
    assert c.slots == ["L1"] * 4


def test_delay_circuit_reference():
    c = delay_circuit(3, 4)
    assert reference_bits(c) == 0b111


# -- exact oracle against dense density matrices ---------------------------------------


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exact_expectation_matches_density_matrix(seed):
    rng = np.random.default_rng(seed)
    r = random_realization(GS4, rng)
    c = mirror_circuit(4, 2, observables=z_substrings(4))
    rho = simulate_density(c, r)
    for O in c.observables:
        assert exact_expectation(c, r, O) == pytest.approx(expectation(rho, O.label), abs=1e-12)


def test_exact_expectation_twirled_learning_circuit():
    rng = np.random.default_rng(7)
    layer = default_layers(4)["L2"]
    r = random_realization(GS4, rng, layers=("L2",))
    c = learning_circuit(layer, 4, "YXZY", twirl_seed=11, observables=[PauliString.from_label("ZZII"), PauliString.from_label("IZZZ")])
    rho = simulate_density(c, r)
    for O in c.observables:
        assert exact_expectation(c, r, O) == pytest.approx(expectation(rho, O.label), abs=1e-12)


def test_twirl_leaves_exact_values_unchanged():
    rng = np.random.default_rng(9)
    r = random_realization(GS4, rng)
    c = mirror_circuit(4, 2, observables=z_substrings(4))
    t = compile_twirl(c, np.random.default_rng(1))
    for O in c.observables:
        assert exact_expectation(t, r, O) == pytest.approx(exact_expectation(c, r, O), rel=1e-12)


def test_exact_expectations_markovian_factorizes():
    rng = np.random.default_rng(4)
    c = mirror_circuit(4, 1)
    O = c.observables[0]
    rates = {L: rng.uniform(0, 0.02, (5, len(GS4))) for L in ("L1", "L2")}
    prop = propagate(c, O, GS4)
    # brute force: every slot picks its own realization independently
    expect = prop.value
    for name, row in zip(prop.slot_layers, prop.anticomm):
        expect *= np.mean(np.exp(-2 * rates[name] @ row))
    got = exact_expectations(c, rates, [O], GS4, markovian=True)[0]
    assert got == pytest.approx(expect, rel=1e-12)
    quasi = exact_expectations(c, rates, [O], GS4)[0]
    assert quasi == pytest.approx(np.mean(np.exp(prop.log_fidelity(rates))), rel=1e-12)


# -- sampled device -------------------------------------------------------------------


def static_device(rng, mode="sampled", readout=None, **kw):
    r = random_realization(GS4, rng, hi=0.01)
    return Device(GS4, static=r, mode=mode, readout=readout, seed=5, **kw), r


def test_sampled_device_matches_oracle():
    dev, r = static_device(np.random.default_rng(2))
    c = mirror_circuit(4, 2, observables=z_substrings(4))
    batch = dev.run(c, 256, 16)
    vals = batch.instance_means(c.observables)
    for O, v in zip(c.observables, vals):
        se = v.std(ddof=1) / np.sqrt(v.size)
        assert abs(v.mean() - exact_expectation(c, r, O)) < 4.5 * se + 1e-3


def test_sampled_pec_unbiased():
    dev, r = static_device(np.random.default_rng(3))
    c = mirror_circuit(4, 1)
    batch = dev.run(c, 512, 16, inverse=r.models)
    v = batch.instance_means(c.observables)[0] * batch.gamma
    assert batch.gamma == pytest.approx(np.prod([r[L].gamma() for L in c.slots]))
    assert abs(v.mean() - 1.0) < 4 * v.std(ddof=1) / np.sqrt(v.size)


def test_runs_are_reproducible_and_advance_clock():
    rng = np.random.default_rng(1)
    r = random_realization(GS4, rng)
    c = mirror_circuit(4, 1)
    a = Device(GS4, static=r, seed=3).run(c, 8, 4)
    dev = Device(GS4, static=r, seed=3)
    b = dev.run(c, 8, 4)
    np.testing.assert_array_equal(a.bits, b.bits)
    assert dev.clock == 32
    c2 = dev.run(c, 8, 4)
    assert c2.shot_index.min() == 32
    assert not np.array_equal(c2.bits, b.bits) or np.all(b.bits == 0)


def test_chunking_does_not_change_results():
    rng = np.random.default_rng(1)
    r = random_realization(GS4, rng, hi=0.05)
    c = mirror_circuit(4, 1)
    a = Device(GS4, static=r, seed=3, chunk_instances=64).run(c, 100, 4)
    b = Device(GS4, static=r, seed=3, chunk_instances=7).run(c, 100, 4)
    np.testing.assert_array_equal(a.bits, b.bits)


def test_readout_twirl_calibration():
    ro = ReadoutModel.uniform(4, 0.02, 0.06)
    dev = Device(GS4, static=random_realization(GS4, np.random.default_rng(0), hi=0.0), readout=ro, seed=1)
    mon = dev.run(readout_monitor_circuit(4), 400, 32, "readout")
    cal = estimate_with_readout_twirl(mon)
    # symmetrized assignment: <Z_q> = 1 - p01 - p10
    np.testing.assert_allclose(cal.qubit_means, 0.92, atol=4 * cal.qubit_stderr.max())
    Z01 = PauliString.from_label("ZZII")
    assert cal.factor(Z01) == pytest.approx(0.92**2, abs=0.01)
    with pytest.raises(ValueError):
        estimate_with_readout_twirl(dev.run(readout_monitor_circuit(4), 1, 1))


def test_readout_model_validation():
    with pytest.raises(ValueError):
        ReadoutModel(np.array([0.6]), np.array([0.0]))
    ro = ReadoutModel.uniform(2, 0.1, 0.2)
    p = ro.flip_probability(np.array([0b01], dtype=np.uint64))
    assert p.tolist() == [[0.2, 0.1]]


def test_averaged_exact_is_phase_average():
    from tlsmit.tls import Defect, realize_noise, waveform

    d = Defect(0.1, 0.1, 3e4, 0.1)
    L = TlsLandscape.from_defects([80e-6, 90e-6, 100e-6, 70e-6], [[d], [], [d], []])
    strat = Averaged(amplitude=0.5)
    dev = Device(GS4, landscape=L, strategy=strat, mode="exact", ensemble_size=50)
    c = mirror_circuit(4, 2)
    vals = []
    for ph in (np.arange(50) + 0.5) / 50:
        k = np.full(4, 0.5 * waveform("triangle", ph))
        r = realize_noise(L, k, ["L1", "L2"], 135e-9, GS4)
        vals.append(exact_expectation(c, r, c.observables[0]))
    assert dev.exact(c)[0] == pytest.approx(np.mean(vals), rel=1e-12)
    # a stiff modulation makes the ensemble visibly non-constant
    assert np.ptp(vals) > 0.01


def test_shot_batch_csv_and_records():
    dev, _ = static_device(np.random.default_rng(0))
    batch = dev.run(mirror_circuit(4, 1), 2, 3)
    rows = batch.to_csv().strip().splitlines()
    assert rows[0] == "shot,realization_id,bitstring,sign"
    assert len(rows) == 7
    rec = next(batch.records())
    assert len(rec.bitstring) == 4
