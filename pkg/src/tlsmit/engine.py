"""Clifford circuits with Pauli noise slots: exact oracle and Pauli-frame shots.

A :class:`Circuit` is a flat list of elements.  ``Gate`` applies a Clifford
layer, ``NoiseSlot`` applies the noise channel attached to the layer that
immediately follows it, and ``PauliGate`` applies a fixed Pauli (twirls and
compiled corrections).  Measurement is always in the computational basis.

Two execution routes exist.  :func:`exact_expectation` back-propagates an
observable and multiplies Pauli fidelities, giving infinite-shot values.
:class:`Device` samples individual shots by Pauli-frame propagation, where
each shot sees one quasi-static noise realization at every slot.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .model import GeneratorSet, LindbladModel, NoiseRealization, anticommutation
from .pauli import (
    CliffordLayer,
    DimensionError,
    PauliString,
    basis_layer,
    conjugate,
    cz_layer,
    hadamard_layer,
    identity_layer,
    symplectic_product,
)
from .rng import stream
from .tls import Averaged, Control, Optimized, Strategy, TlsLandscape, realization_rates, sample_k

__all__ = [
    "Gate",
    "NoiseSlot",
    "PauliGate",
    "Circuit",
    "ReadoutModel",
    "ShotRecord",
    "ShotBatch",
    "Propagation",
    "Device",
    "DEFAULT_LAYERS",
    "default_layers",
    "mirror_circuit",
    "learning_circuit",
    "delay_circuit",
    "readout_monitor_circuit",
    "compile_twirl",
    "propagate",
    "exact_expectation",
    "exact_expectations",
    "net_action",
    "ReadoutCalibration",
    "estimate_with_readout_twirl",
    "z_substrings",
]


@dataclass(frozen=True)
class Gate:
    layer: CliffordLayer


@dataclass(frozen=True)
class NoiseSlot:
    layer: str


@dataclass(frozen=True)
class PauliGate:
    pauli: PauliString


Element = "Gate | NoiseSlot | PauliGate"


@dataclass(frozen=True)
class Circuit:
    """Ordered elements on ``n`` qubits followed by a Z-basis measurement."""

    n: int
    elements: tuple
    observables: tuple[PauliString, ...] = ()
    name: str = ""

    def __post_init__(self):
        els = tuple(self.elements)
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "observables", tuple(self.observables))
        for i, el in enumerate(els):
            if isinstance(el, Gate):
                if el.layer.n != self.n:
                    raise DimensionError("layer acts on the wrong number of qubits")
            elif isinstance(el, NoiseSlot):
                nxt = els[i + 1] if i + 1 < len(els) else None
                if not isinstance(nxt, Gate) or nxt.layer.name != el.layer:
                    raise ValueError(f"noise slot {el.layer!r} must precede its own layer")
            elif isinstance(el, PauliGate):
                if el.pauli.n != self.n:
                    raise DimensionError("Pauli gate acts on the wrong number of qubits")
            else:
                raise TypeError(f"unknown circuit element {el!r}")
        for O in self.observables:
            if O.n != self.n:
                raise DimensionError("observable acts on the wrong number of qubits")

    @property
    def slots(self) -> list[str]:
        """Layer name of every noise slot, in circuit order."""
        return [el.layer for el in self.elements if isinstance(el, NoiseSlot)]

    @property
    def noisy_layers(self) -> dict[str, CliffordLayer]:
        out = {}
        for i, el in enumerate(self.elements):
            if isinstance(el, NoiseSlot):
                out[el.layer] = self.elements[i + 1].layer
        return out

    def gate_sequence(self) -> list[CliffordLayer]:
        return [el.layer for el in self.elements if isinstance(el, Gate)]

    def is_palindrome(self) -> bool:
        """Structural mirror check: the gate sequence reads the same reversed."""
        seq = self.gate_sequence()
        return all(a == b for a, b in zip(seq, reversed(seq)))

    def with_observables(self, observables: Sequence[PauliString]) -> "Circuit":
        return Circuit(self.n, self.elements, tuple(observables), self.name)


# -- circuit constructors ------------------------------------------------------

DEFAULT_LAYERS = {
    "L1": [(0, 1), (2, 3), (4, 5)],
    "L2": [(1, 2), (3, 4)],
}


def default_layers(n: int = 6) -> dict[str, CliffordLayer]:
    """The two alternating CZ layers of a linear chain, named ``L1`` and ``L2``."""
    return {
        "L1": cz_layer(n, [(q, q + 1) for q in range(0, n - 1, 2)], "L1"),
        "L2": cz_layer(n, [(q, q + 1) for q in range(1, n - 1, 2)], "L2"),
    }


def z_substrings(n: int) -> list[PauliString]:
    """All nonidentity Z-type Paulis, ordered by weight then support."""
    masks = sorted(range(1, 1 << n), key=lambda m: (bin(m).count("1"), m))
    return [PauliString(n, 0, m) for m in masks]


def mirror_circuit(
    n: int = 6,
    N: int = 10,
    layers: Mapping[str, CliffordLayer] | None = None,
    observables: Sequence[PauliString] | None = None,
) -> Circuit:
    """``[H, L1, L2] * N`` followed by the reversed sequence.

    Every layer is self-inverse, so the reversal undoes the forward block and
    every Z-type observable has ideal value 1.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    layers = dict(layers or default_layers(n))
    for L in layers.values():
        if L.then(L) != identity_layer(n):
            raise ValueError(f"layer {L.name!r} is not self-inverse")
    H = hadamard_layer(n)
    block: list = [Gate(H)]
    for name, L in layers.items():
        block += [NoiseSlot(name), Gate(L)]
    forward = block * N
    backward = []
    for el in reversed(block):
        if isinstance(el, Gate) and el.layer.name in layers:
            backward += [NoiseSlot(el.layer.name), el]
        elif isinstance(el, Gate):
            backward.append(el)
    backward = backward * N
    if observables is None:
        observables = [PauliString(n, 0, (1 << n) - 1)]
    return Circuit(n, tuple(forward + backward), tuple(observables), f"mirror(N={N})")


def learning_circuit(
    layer: CliffordLayer,
    depth: int,
    basis: str | None = None,
    twirl_seed: int | None = None,
    observables: Sequence[PauliString] | None = None,
) -> Circuit:
    """``depth`` noisy applications of ``layer`` between basis rotations.

    With ``twirl_seed`` set, each application is wrapped by a random Pauli
    ``T`` and its correction ``conjugate(layer, T)``.
    """
    if depth < 0 or depth % 2:
        raise ValueError("learning depth must be even and nonnegative")
    n = layer.n
    basis = basis or "Z" * n
    if len(basis) != n:
        raise DimensionError("basis string length must equal qubit count")
    V = basis_layer(basis)
    els: list = [Gate(V)]
    rng = stream(twirl_seed, "twirl") if twirl_seed is not None else None
    for _ in range(depth):
        if rng is not None:
            T = _random_pauli(n, rng)
            els.append(PauliGate(T))
            els += [NoiseSlot(layer.name), Gate(layer)]
            els.append(PauliGate(conjugate(layer, T)))
        else:
            els += [NoiseSlot(layer.name), Gate(layer)]
    els.append(Gate(_inverse(V)))
    if observables is None:
        observables = [PauliString(n, 0, (1 << n) - 1)]
    return Circuit(n, tuple(els), tuple(observables), f"learn({layer.name},d={depth},{basis})")


def delay_circuit(n: int, depth: int, name: str = "idle") -> Circuit:
    """Prepare all ones, wait ``depth`` noisy idle layers, measure."""
    idle = identity_layer(n)
    idle = CliffordLayer(n, idle.image_x, idle.image_z, name)
    els: list = [PauliGate(PauliString(n, (1 << n) - 1, 0))]
    els += [NoiseSlot(name), Gate(idle)] * depth
    obs = [PauliString.single(n, q, "Z") for q in range(n)]
    return Circuit(n, tuple(els), tuple(obs), f"delay(d={depth})")


def readout_monitor_circuit(n: int, rng: np.random.Generator | None = None) -> Circuit:
    """Prepare ``|0...0>`` and measure.

    The random X/I layer lives in the measurement twirl applied by
    :meth:`Device.run`; with ``rng`` given, one concrete draw is compiled in
    as a Pauli gate for inspection.
    """
    els: tuple = ()
    if rng is not None:
        mask = int(rng.integers(0, 1 << n))
        els = (PauliGate(PauliString(n, mask, 0)),)
    obs = [PauliString.single(n, q, "Z") for q in range(n)]
    return Circuit(n, els, tuple(obs), "readout-monitor")


def _random_pauli(n: int, rng: np.random.Generator) -> PauliString:
    return PauliString(n, int(rng.integers(0, 1 << n)), int(rng.integers(0, 1 << n)))


@lru_cache(maxsize=256)
def _inverse(L: CliffordLayer) -> CliffordLayer:
    return L.inverse()


def compile_twirl(c: Circuit, rng: np.random.Generator) -> Circuit:
    """Wrap every noisy layer in a fresh Pauli twirl and its correction."""
    els: list = []
    i = 0
    while i < len(c.elements):
        el = c.elements[i]
        if isinstance(el, NoiseSlot):
            L = c.elements[i + 1].layer
            T = _random_pauli(c.n, rng)
            els += [PauliGate(T), el, c.elements[i + 1], PauliGate(conjugate(L, T))]
            i += 2
        else:
            els.append(el)
            i += 1
    return Circuit(c.n, tuple(els), c.observables, c.name)


def net_action(c: Circuit, P: PauliString) -> PauliString:
    """Heisenberg image ``U^dagger P U`` of ``P`` under the ideal circuit."""
    for el in reversed(c.elements):
        if isinstance(el, Gate):
            P = conjugate(_inverse(el.layer), P)
        elif isinstance(el, PauliGate):
            if symplectic_product(el.pauli, P):
                P = -P
    return P


# -- exact oracle -----------------------------------------------------------------


@dataclass(frozen=True)
class Propagation:
    """Back-propagation profile of one observable through a circuit.

    ``slot_paulis[s]`` is the Pauli seen at noise slot ``s``; ``anticomm``
    has one row per slot against the generator set; ``counts[layer]`` sums
    the rows of that layer's slots.  ``value`` is the ideal expectation
    (the sign when the final Pauli is Z-type, else zero).
    """

    observable: PauliString
    slot_layers: tuple[str, ...]
    slot_paulis: tuple[PauliString, ...]
    anticomm: np.ndarray
    counts: dict[str, np.ndarray]
    final: PauliString

    @property
    def value(self) -> int:
        return self.final.sign if self.final.is_z_type else 0

    def log_fidelity(self, rates: Mapping[str, np.ndarray]) -> np.ndarray:
        """``sum_s ln f(P_s)`` for rates of shape ``(..., K)`` per layer."""
        total = 0.0
        for name, cnt in self.counts.items():
            total = total + (-2.0) * (np.asarray(rates[name]) @ cnt)
        return np.asarray(total)


def propagate(c: Circuit, O: PauliString, gs: GeneratorSet) -> Propagation:
    if O.n != c.n or gs.n != c.n:
        raise DimensionError(f"observable/generator set do not match {c.n} qubits")
    P = O
    layers, paulis = [], []
    for el in reversed(c.elements):
        if isinstance(el, Gate):
            P = conjugate(_inverse(el.layer), P)
        elif isinstance(el, PauliGate):
            if symplectic_product(el.pauli, P):
                P = -P
        else:
            layers.append(el.layer)
            paulis.append(P)
    layers.reverse()
    paulis.reverse()
    if paulis:
        px = np.array([p.x for p in paulis], dtype=np.uint64)
        pz = np.array([p.z for p in paulis], dtype=np.uint64)
        A = anticommutation(px, pz, gs.gx, gs.gz).astype(float)
    else:
        A = np.zeros((0, len(gs)))
    counts: dict[str, np.ndarray] = {}
    for name, row in zip(layers, A):
        counts[name] = counts.get(name, 0) + row
    return Propagation(O, tuple(layers), tuple(paulis), A, counts, P)


def exact_expectation(c: Circuit, r: NoiseRealization, O: PauliString) -> float:
    """Infinite-shot expectation of ``O`` under one static realization."""
    if O.n != c.n:
        raise DimensionError(f"observable has {O.n} qubits, circuit has {c.n}")
    missing = set(c.slots) - set(r.models)
    if missing:
        raise KeyError(f"no model for layer(s) {sorted(missing)}")
    gs = next(iter(r.models.values())).generator_set if r.models else GeneratorSet.chain(c.n)
    prop = propagate(c, O, gs)
    if prop.value == 0:
        return 0.0
    rates = {name: r.models[name].rates for name in prop.counts}
    return float(prop.value * np.exp(prop.log_fidelity(rates)))


def exact_expectations(
    c: Circuit,
    rates: Mapping[str, np.ndarray],
    observables: Sequence[PauliString],
    gs: GeneratorSet,
    weights: np.ndarray | None = None,
    markovian: bool = False,
) -> np.ndarray:
    """Ensemble-averaged expectations for realizations stacked along axis 0.

    ``rates[layer]`` has shape ``(R, K)`` (signed rates are allowed, which is
    how the analytic PEC estimator enters).  With ``markovian`` every slot
    draws its realization independently, so the average factorizes per slot.
    """
    R = next(iter(rates.values())).shape[0] if rates else 1
    w = np.full(R, 1.0 / R) if weights is None else np.asarray(weights, float) / np.sum(weights)
    out = np.zeros(len(observables))
    for j, O in enumerate(observables):
        prop = propagate(c, O, gs)
        if prop.value == 0:
            continue
        if not prop.slot_layers:
            out[j] = prop.value
        elif markovian:
            logf = 0.0
            for name, row in zip(prop.slot_layers, prop.anticomm):
                logf += np.log(w @ np.exp(-2.0 * (rates[name] @ row)))
            out[j] = prop.value * np.exp(logf)
        else:
            out[j] = prop.value * (w @ np.exp(prop.log_fidelity(rates)))
    return out


def reference_bits(c: Circuit) -> int:
    """Deterministic ideal outcome of ``c`` on ``|0...0>`` as a bit mask."""
    bits = 0
    for q in range(c.n):
        P = net_action(c, PauliString.single(c.n, q, "Z"))
        if not P.is_z_type:
            raise ValueError("frame simulation needs a deterministic ideal outcome")
        if P.sign < 0:
            bits |= 1 << q
    return bits


# -- readout ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReadoutModel:
    """Independent per-qubit assignment errors ``p01 = P(1|0)``, ``p10 = P(0|1)``."""

    p01: np.ndarray
    p10: np.ndarray

    def __post_init__(self):
        p01 = np.atleast_1d(np.asarray(self.p01, dtype=float))
        p10 = np.atleast_1d(np.asarray(self.p10, dtype=float))
        if p01.shape != p10.shape:
            raise ValueError("p01 and p10 must have the same shape")
        for p in (p01, p10):
            if np.any(p < 0) or np.any(p >= 0.5):
                raise ValueError("readout error probabilities must lie in [0, 1/2)")
        object.__setattr__(self, "p01", p01)
        object.__setattr__(self, "p10", p10)

    @classmethod
    def ideal(cls, n: int) -> "ReadoutModel":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def uniform(cls, n: int, p01: float, p10: float | None = None) -> "ReadoutModel":
        return cls(np.full(n, p01), np.full(n, p01 if p10 is None else p10))

    @property
    def n(self) -> int:
        return self.p01.shape[0]

    def flip_probability(self, bits: np.ndarray) -> np.ndarray:
        """Per-qubit flip probabilities, shape ``bits.shape + (n,)``."""
        q = np.arange(self.n, dtype=np.uint64)
        ones = ((bits[..., None] >> q) & np.uint64(1)).astype(bool)
        return np.where(ones, self.p10, self.p01)

    def to_dict(self) -> dict:
        return {"p01": self.p01.tolist(), "p10": self.p10.tolist()}


# -- shots ------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotRecord:
    shot: int
    instance: int
    realization: int
    twirl: int
    bitstring: str
    sign: int


def _parity_values(bits: np.ndarray, mask: int) -> np.ndarray:
    p = np.bitwise_count(bits & np.uint64(mask)) & 1
    return 1 - 2 * p.astype(np.int8)


@dataclass(frozen=True, eq=False)
class ShotBatch:
    """Shots of one run, laid out as ``(instances, shots_per_instance)``.

    ``bits`` holds recorded outcomes after undoing the measurement twirl.
    ``twirl`` holds the per-instance measurement X mask, ``realization`` the
    shot index whose k value set that shot's noise, and ``signs`` the PEC
    quasi-probability signs (all +1 without mitigation).
    """

    n: int
    bits: np.ndarray
    signs: np.ndarray
    shot_index: np.ndarray
    realization: np.ndarray
    twirl: np.ndarray
    gamma: float = 1.0

    @property
    def instances(self) -> int:
        return self.bits.shape[0]

    @property
    def shots(self) -> int:
        return self.bits.shape[1]

    def values(self, O: PauliString) -> np.ndarray:
        """Per-shot ``sign * (-1)**parity`` for a Z-type observable."""
        if not O.is_z_type:
            raise ValueError("only Z-type observables are measured directly")
        return O.sign * self.signs * _parity_values(self.bits, O.z)

    def instance_means(self, observables: Sequence[PauliString]) -> np.ndarray:
        """Array ``(len(observables), instances)`` of per-instance shot means."""
        return np.stack([self.values(O).mean(axis=1) for O in observables])

    def records(self) -> Iterator[ShotRecord]:
        for i in range(self.instances):
            for s in range(self.shots):
                yield ShotRecord(
                    int(self.shot_index[i, s]),
                    i,
                    int(self.realization[i, s]),
                    int(self.twirl[i]),
                    format(int(self.bits[i, s]), f"0{self.n}b")[::-1],
                    int(self.signs[i, s]),
                )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["shot", "realization_id", "bitstring", "sign"])
        for r in self.records():
            w.writerow([r.shot, r.realization, r.bitstring, r.sign])
        return buf.getvalue()


def _flip_prob(rates: np.ndarray) -> np.ndarray:
    return (0.5 * (1.0 - np.exp(-2.0 * rates))).astype(np.float32)


def _xor_hits(hit: np.ndarray, packed: np.ndarray) -> np.ndarray:
    lead = hit.shape[:-1]
    rows, cols = np.nonzero(hit.reshape(-1, hit.shape[-1]))
    out = np.zeros(int(np.prod(lead, dtype=np.int64)), dtype=np.uint64)
    np.bitwise_xor.at(out, rows, packed[cols])
    return out.reshape(lead)


@dataclass
class Device:
    """Simulated processor: TLS landscape, strategy, readout, and a shot clock.

    ``floors`` adds static non-T1 noise per layer name.  ``static`` pins one
    realization and bypasses the landscape.  ``mode`` selects between
    sampled shots and the exact ensemble average used by the analytic
    routes of the learning and mitigation code.
    """

    gs: GeneratorSet
    landscape: TlsLandscape | None = None
    strategy: Strategy = field(default_factory=Control)
    tau: float = 135e-9
    floors: dict[str, LindbladModel] = field(default_factory=dict)
    readout: ReadoutModel | None = None
    seed: int = 0
    shot_rate_hz: float = 1000.0
    mode: str = "sampled"
    markovian: bool = False
    ensemble_size: int = 200
    static: NoiseRealization | None = None
    x_failure: np.ndarray | None = None
    chunk_instances: int = 64
    clock: int = 0
    runs: int = 0

    def __post_init__(self):
        if self.mode not in ("sampled", "exact"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.readout is None:
            self.readout = ReadoutModel.ideal(self.gs.n)
        if self.static is None and self.landscape is None:
            raise ValueError("need a landscape or a static realization")

    @property
    def n(self) -> int:
        return self.gs.n

    # realizations

    def _layer_rates(self, layers: Sequence[str], k: np.ndarray | None) -> dict[str, np.ndarray]:
        if self.static is not None:
            return {L: np.asarray(self.static[L].rates) for L in layers}
        zero = LindbladModel.zero(self.gs)
        floors = {L: self.floors.get(L, zero) for L in layers}
        return realization_rates(self.landscape, k, self.tau, self.gs, floors)

    def rates_for_shots(self, layers: Sequence[str], shot_index: np.ndarray) -> dict[str, np.ndarray]:
        k = None
        if self.static is None:
            k = sample_k(self.strategy, shot_index, self.shot_rate_hz, self.n)
        rates = self._layer_rates(layers, k)
        shape = np.shape(shot_index) + (len(self.gs),)
        return {L: np.broadcast_to(r, shape) for L, r in rates.items()}

    def ensemble(self, layers: Sequence[str]) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Realizations and weights for the exact route (one period for averaged)."""
        if self.static is not None or not isinstance(self.strategy, Averaged):
            idx = np.zeros(1, dtype=np.int64)
            return self.rates_for_shots(layers, idx), np.ones(1)
        phase = (np.arange(self.ensemble_size) + 0.5) / self.ensemble_size
        k = self.strategy.center + self.strategy.amplitude * _wave(self.strategy, phase)
        k = np.repeat(k[:, None], self.n, axis=1)
        rates = self._layer_rates(layers, k)
        return rates, np.full(self.ensemble_size, 1.0 / self.ensemble_size)

    def truth(self, shot_index: int | None = None) -> NoiseRealization:
        """The realization a given shot would see (defaults to the current clock)."""
        idx = np.array([self.clock if shot_index is None else shot_index])
        names = sorted(set(self.floors) | set(DEFAULT_LAYERS))
        if self.static is not None:
            return self.static
        rates = self.rates_for_shots(names, idx)
        models = {L: LindbladModel(self.gs, r[0]) for L, r in rates.items()}
        return NoiseRealization(models, index=int(idx[0]), timestamp=self.landscape.time_hr)

    # execution

    def exact(
        self,
        c: Circuit,
        observables: Sequence[PauliString] | None = None,
        inverse: Mapping[str, LindbladModel] | None = None,
    ) -> np.ndarray:
        """Infinite-shot values, readout-free; with ``inverse`` the analytic PEC mean."""
        observables = list(observables or c.observables)
        layers = sorted(set(c.slots))
        rates, w = self.ensemble(layers)
        if inverse is not None:
            rates = {L: rates[L] - inverse[L].rates for L in layers}
        return exact_expectations(c, rates, observables, self.gs, w, self.markovian)

    def run(
        self,
        c: Circuit,
        instances: int,
        shots: int,
        purpose: str = "run",
        inverse: Mapping[str, LindbladModel] | None = None,
        inverse_per: str = "shot",
        measurement_twirl: bool = True,
    ) -> ShotBatch:
        """Sample ``instances * shots`` shots of ``c`` and advance the clock.

        With ``inverse`` the PEC quasi-probability inverse of each layer's
        model is sampled at every slot; ``inverse_per`` chooses whether a
        fresh inverse Pauli is drawn per shot or shared across an instance.
        """
        if instances < 1 or shots < 1:
            raise ValueError("need at least one instance and one shot")
        if inverse_per not in ("shot", "instance"):
            raise ValueError("inverse_per must be 'shot' or 'instance'")
        if inverse is not None:
            missing = set(c.slots) - set(inverse)
            if missing:
                raise KeyError(f"no model for layer(s) {sorted(missing)}")
        n, K = self.n, len(self.gs)
        run_id = self.runs
        self.runs += 1
        layers = sorted(set(c.slots))
        slots = c.slots
        ref = np.uint64(reference_bits(c))
        packed = self.gs.packed
        xmask = np.uint64((1 << n) - 1)
        inv_p = {L: _flip_prob(inverse[L].rates) for L in layers} if inverse else {}
        gamma = 1.0
        if inverse:
            for L in slots:
                gamma *= inverse[L].gamma()

        shot_index = self.clock + np.arange(instances * shots, dtype=np.int64).reshape(instances, shots)
        self.clock += instances * shots
        bits = np.zeros((instances, shots), dtype=np.uint64)
        signs = np.ones((instances, shots), dtype=np.int8)
        realization = shot_index.copy()
        twirl = np.zeros(instances, dtype=np.uint64)

        static_p = None
        if self.static is not None or isinstance(self.strategy, (Control, Optimized)):
            r0 = self.rates_for_shots(layers, shot_index[:1, :1])
            static_p = {L: _flip_prob(r0[L][0, 0]) for L in layers}

        for start in range(0, instances, self.chunk_instances):
            stop = min(instances, start + self.chunk_instances)
            I = stop - start
            gens = [stream(self.seed, purpose, run_id, i) for i in range(start, stop)]
            err_u = np.stack([g.random((len(slots), shots, K), dtype=np.float32) for g in gens])
            if inverse:
                if inverse_per == "shot":
                    inv_u = np.stack([g.random((len(slots), shots, K), dtype=np.float32) for g in gens])
                else:
                    inv_u = np.stack([g.random((len(slots), 1, K), dtype=np.float32) for g in gens])
                    inv_u = np.broadcast_to(inv_u, (I, len(slots), shots, K))
            ro_u = np.stack([g.random((shots, n)) for g in gens])
            mt = np.array([g.integers(0, 1 << n) if measurement_twirl else 0 for g in gens], dtype=np.uint64)
            if self.x_failure is not None:
                fail_u = np.stack([g.random((shots, n)) for g in gens])

            if static_p is not None:
                p = {L: static_p[L] for L in layers}
            elif not self.markovian:
                rates = self.rates_for_shots(layers, shot_index[start:stop])
                p = {L: _flip_prob(rates[L]) for L in layers}
            else:
                mk = [stream(self.seed, purpose + ":markov", run_id, i) for i in range(start, stop)]
                # each slot draws its own waveform phase
                ph = np.stack([g.integers(0, 2**62, size=(len(slots), shots)) for g in mk])

            frames = np.zeros((I, shots), dtype=np.uint64)
            sgn = np.zeros((I, shots), dtype=np.uint8)
            s = 0
            for el in c.elements:
                if isinstance(el, NoiseSlot):
                    L = el.layer
                    if static_p is None and self.markovian:
                        period = int(round(self.shot_rate_hz / self.strategy.freq_hz))
                        rates = self.rates_for_shots([L], ph[:, s] % period)
                        pL = _flip_prob(rates[L])
                    else:
                        pL = p[L]
                    frames ^= _xor_hits(err_u[:, s] < pL, packed)
                    if inverse:
                        hit = inv_u[:, s] < inv_p[L]
                        frames ^= _xor_hits(hit, packed)
                        sgn ^= (hit.sum(-1) & 1).astype(np.uint8)
                    s += 1
                elif isinstance(el, Gate):
                    frames = el.layer.map_frames(frames)
            true = ref ^ (frames & xmask)
            if self.x_failure is not None:
                q = np.arange(n, dtype=np.uint64)
                failed = (fail_u < self.x_failure).astype(np.uint64) << q
                applied = mt[:, None] & ~failed.sum(-1, dtype=np.uint64)
            else:
                applied = np.broadcast_to(mt[:, None], (I, shots))
            physical = true ^ applied
            flips = ro_u < self.readout.flip_probability(physical)
            q = np.arange(n, dtype=np.uint64)
            physical ^= (flips.astype(np.uint64) << q).sum(-1, dtype=np.uint64)
            bits[start:stop] = physical ^ mt[:, None]
            signs[start:stop] = 1 - 2 * sgn.astype(np.int8)
            twirl[start:stop] = mt
            if self.markovian and static_p is None:
                realization[start:stop] = -1
        return ShotBatch(n, bits, signs, shot_index, realization, twirl, gamma)


def _wave(strategy: Averaged, phase: np.ndarray) -> np.ndarray:
    from .tls import waveform

    return waveform(strategy.waveform, phase)


# -- readout twirling ---------------------------------------------------------------


@dataclass(frozen=True)
class ReadoutCalibration:
    """Measurement-twirled monitor results.

    ``factors`` maps a Z-support mask to the calibrated ``<Z_S>`` of the
    monitor; dividing a twirled measurement of ``Z_S`` by it removes the
    (symmetrized) assignment error.
    """

    n: int
    bits: np.ndarray
    qubit_means: np.ndarray
    qubit_stderr: np.ndarray

    def factor(self, O: PauliString) -> float:
        return float(_parity_values(self.bits, O.z).mean())

    def correct(self, value, O: PauliString):
        f = self.factor(O)
        if f <= 0:
            raise FloatingPointError(f"readout factor {f} is not positive")
        return np.asarray(value) / f

    def debiased(self, batch: ShotBatch) -> np.ndarray:
        """Readout-corrected per-qubit ``<Z_q>`` of another twirled batch."""
        out = []
        for q in range(self.n):
            Z = PauliString.single(self.n, q, "Z")
            out.append(batch.values(Z).mean() / self.factor(Z))
        return np.array(out)


def estimate_with_readout_twirl(batch: ShotBatch) -> ReadoutCalibration:
    """Per-qubit ``<Z_q>`` of a measurement-twirled ``|0...0>`` monitor run."""
    bits = batch.bits.reshape(-1)
    tw = np.repeat(batch.twirl, batch.shots)
    for q in range(batch.n):
        flipped = int(((tw >> np.uint64(q)) & np.uint64(1)).sum())
        if flipped < 2 or tw.size - flipped < 2:
            raise ValueError(f"qubit {q}: need at least 2 records per prepared state")
    means, errs = [], []
    inst = batch.instance_means([PauliString.single(batch.n, q, "Z") for q in range(batch.n)])
    for q in range(batch.n):
        means.append(inst[q].mean())
        errs.append(inst[q].std(ddof=1) / np.sqrt(inst.shape[1]) if inst.shape[1] > 1 else 0.0)
    return ReadoutCalibration(batch.n, bits, np.array(means), np.array(errs))
