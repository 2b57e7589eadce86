"""Sparse Pauli-Lindblad noise models.

A model assigns a nonnegative rate to every generator Pauli of a
:class:`GeneratorSet` (all weight-one Paulis plus the nine weight-two Paulis
on each topology edge).  The channel is the commuting product of
``rho -> w rho + (1 - w) P rho P`` with ``w = (1 + exp(-2 rate)) / 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .pauli import DimensionError, PauliString, multiply

__all__ = [
    "RATE_CEILING",
    "RateCeilingError",
    "GeneratorSet",
    "LindbladModel",
    "NoiseRealization",
    "chain_edges",
    "anticommutation",
    "fidelity",
    "gamma",
    "local_gamma",
    "channel_weights",
    "rates_from_weights",
    "sample_error",
    "sample_inverse",
    "sample_error_frames",
    "model_from_t1",
    "t1_rates",
    "relative_cost",
    "floor_model",
]

RATE_CEILING = 5.0


class RateCeilingError(ValueError):
    """A rate above :data:`RATE_CEILING`, usually the sign of a fit blowup."""
_OPS = "XYZ"


def chain_edges(n: int) -> list[tuple[int, int]]:
    return [(q, q + 1) for q in range(n - 1)]


def _parity(v: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(v) & 1).astype(np.uint8)


def anticommutation(
    px: np.ndarray, pz: np.ndarray, gx: np.ndarray, gz: np.ndarray
) -> np.ndarray:
    """Pairwise symplectic products of packed Paulis, shape ``px.shape + gx.shape``."""
    px = np.asarray(px, dtype=np.uint64)[..., None]
    pz = np.asarray(pz, dtype=np.uint64)[..., None]
    return _parity((px & np.asarray(gz, np.uint64)) ^ (pz & np.asarray(gx, np.uint64)))


@dataclass(frozen=True)
class GeneratorSet:
    """Weight-one and edge-local weight-two generators on ``n`` qubits.

    Ordering: weight-one first (qubit-major, X < Y < Z), then weight-two
    (edge-major, pairs in lexicographic order XX, XY, ..., ZZ).
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for a, b in self.edges:
            if not (0 <= a < self.n and 0 <= b < self.n) or a == b:
                raise ValueError(f"bad edge {(a, b)}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)

    @classmethod
    def chain(cls, n: int) -> "GeneratorSet":
        return cls(n, tuple(chain_edges(n)))

    @cached_property
    def generators(self) -> tuple[PauliString, ...]:
        gens = [PauliString.single(self.n, q, op) for q in range(self.n) for op in _OPS]
        for a, b in self.edges:
            for oa in _OPS:
                for ob in _OPS:
                    gens.append(PauliString.from_ops(self.n, {a: oa, b: ob}))
        return tuple(gens)

    def __len__(self) -> int:
        return len(self.generators)

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return tuple(g.label for g in self.generators)

    @cached_property
    def gx(self) -> np.ndarray:
        return np.array([g.x for g in self.generators], dtype=np.uint64)

    @cached_property
    def gz(self) -> np.ndarray:
        return np.array([g.z for g in self.generators], dtype=np.uint64)

    @cached_property
    def packed(self) -> np.ndarray:
        """Generator frames ``x | z << n``."""
        return self.gx | (self.gz << np.uint64(self.n))

    def index(self, P: PauliString | str) -> int:
        if isinstance(P, str):
            P = PauliString.from_label(P)
        return self.generators.index(P.unsigned())

    def anticommutes(self, P: PauliString) -> np.ndarray:
        """0/1 vector of symplectic products of ``P`` with every generator."""
        if P.n != self.n:
            raise DimensionError(f"qubit counts differ: {P.n} vs {self.n}")
        return anticommutation(P.x, P.z, self.gx, self.gz)

    def overlap_matrix(self, paulis: Sequence[PauliString]) -> np.ndarray:
        """Matrix ``M[j, k] = <P_j, G_k>_sp``."""
        px = np.array([p.x for p in paulis], dtype=np.uint64)
        pz = np.array([p.z for p in paulis], dtype=np.uint64)
        return anticommutation(px, pz, self.gx, self.gz).astype(float)

    def scope_indices(self, scope: int | tuple[int, int]) -> np.ndarray:
        """Generator indices belonging to a qubit (weight one) or an edge (weight two)."""
        if isinstance(scope, (int, np.integer)):
            if not 0 <= scope < self.n:
                raise KeyError(f"unknown qubit {scope}")
            return np.arange(3 * scope, 3 * scope + 3)
        a, b = scope
        for e, (ea, eb) in enumerate(self.edges):
            if {ea, eb} == {a, b}:
                start = 3 * self.n + 9 * e
                return np.arange(start, start + 9)
        raise KeyError(f"unknown edge {scope}")

    def scopes(self) -> list[int | tuple[int, int]]:
        return list(range(self.n)) + [tuple(e) for e in self.edges]

    def weight_one(self) -> np.ndarray:
        return np.arange(3 * self.n)

    def weight_two(self) -> np.ndarray:
        return np.arange(3 * self.n, len(self))


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Rates (per layer application) on a generator set."""

    generator_set: GeneratorSet
    rates: np.ndarray

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        if rates.shape != (len(self.generator_set),):
            raise ValueError(
                f"expected {len(self.generator_set)} rates, got shape {rates.shape}"
            )
        if np.any(~np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("rates must be finite and nonnegative")
        if np.any(rates > RATE_CEILING):
            raise RateCeilingError(f"rate above ceiling {RATE_CEILING}: fit blowup?")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def zero(cls, gs: GeneratorSet) -> "LindbladModel":
        return cls(gs, np.zeros(len(gs)))

    @classmethod
    def from_dict(cls, gs: GeneratorSet, rates: dict[str, float]) -> "LindbladModel":
        lam = np.zeros(len(gs))
        for label, r in rates.items():
            lam[gs.index(label)] = r
        return cls(gs, lam)

    @property
    def n(self) -> int:
        return self.generator_set.n

    def __eq__(self, other):
        if not isinstance(other, LindbladModel):
            return NotImplemented
        return self.generator_set == other.generator_set and np.array_equal(
            self.rates, other.rates
        )

    def __add__(self, other: "LindbladModel") -> "LindbladModel":
        if other.generator_set != self.generator_set:
            raise ValueError("models use different generator sets")
        return LindbladModel(self.generator_set, self.rates + other.rates)

    def fidelity(self, P: PauliString) -> float:
        return fidelity(self, P)

    def gamma(self) -> float:
        return gamma(self)

    def local_gamma(self, scope) -> float:
        return local_gamma(self, scope)

    def channel_weights(self) -> np.ndarray:
        return channel_weights(self)

    def to_dict(self) -> dict:
        gs = self.generator_set
        return {
            "n": gs.n,
            "edges": [list(e) for e in gs.edges],
            "generators": list(gs.labels),
            "lambda": [float(r) for r in self.rates],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_mapping(cls, data: dict) -> "LindbladModel":
        gs = GeneratorSet(int(data["n"]), tuple(tuple(e) for e in data["edges"]))
        if list(data["generators"]) != list(gs.labels):
            raise ValueError("generator list does not match canonical ordering")
        return cls(gs, np.array(data["lambda"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "LindbladModel":
        return cls.from_mapping(json.loads(text))


@dataclass(frozen=True)
class NoiseRealization:
    """One quasi-static noise snapshot: a model per distinct gate layer.

    Held fixed for every noise slot within a shot.
    """

    models: dict[str, LindbladModel]
    index: int = 0
    timestamp: float = 0.0
    t1: tuple[float, ...] = field(default=(), compare=False)

    def __getitem__(self, layer: str) -> LindbladModel:
        return self.models[layer]


def fidelity(m: LindbladModel, P: PauliString) -> float:
    """Pauli fidelity ``exp(-2 sum_k rate_k <P, G_k>)``."""
    return float(np.exp(-2.0 * np.dot(m.rates, m.generator_set.anticommutes(P))))


def gamma(m: LindbladModel) -> float:
    """Sampling overhead ``exp(2 sum rates)``."""
    return float(np.exp(2.0 * m.rates.sum()))


def local_gamma(m: LindbladModel, scope: int | tuple[int, int]) -> float:
    idx = m.generator_set.scope_indices(scope)
    return float(np.exp(2.0 * m.rates[idx].sum()))


def channel_weights(m: LindbladModel) -> np.ndarray:
    return 0.5 * (1.0 + np.exp(-2.0 * m.rates))


def rates_from_weights(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.5) or np.any(w > 1.0):
        raise ValueError("channel weights must lie in (1/2, 1]")
    return -0.5 * np.log(2.0 * w - 1.0)


def sample_error_frames(
    flip_prob: np.ndarray, uniforms: np.ndarray, packed: np.ndarray
) -> np.ndarray:
    """XOR of generator frames whose uniform fell below ``flip_prob``.

    ``uniforms`` has shape ``(..., K)``; ``flip_prob`` broadcasts against it.
    """
    hit = uniforms < flip_prob
    lead = hit.shape[:-1]
    rows, cols = np.nonzero(hit.reshape(-1, hit.shape[-1]))
    out = np.zeros(int(np.prod(lead, dtype=np.int64)), dtype=np.uint64)
    np.bitwise_xor.at(out, rows, np.asarray(packed, np.uint64)[cols])
    return out.reshape(lead)


def _product(gs: GeneratorSet, hits: np.ndarray) -> PauliString:
    out = PauliString.identity(gs.n)
    for k in np.flatnonzero(hits):
        out = multiply(out, gs.generators[k])
    return out


def sample_error(m: LindbladModel, rng: np.random.Generator) -> PauliString:
    """One draw of the forward channel as a Pauli error."""
    hits = rng.random(len(m.rates)) < 1.0 - channel_weights(m)
    return _product(m.generator_set, hits)


def sample_inverse(m: LindbladModel, rng: np.random.Generator) -> tuple[PauliString, int]:
    """One quasi-probability draw of the inverse channel.

    Each generator fires with probability ``1 - w_k``; every firing flips the
    sign.  ``sign * gamma(m) * outcome`` is unbiased for the noiseless value.
    """
    hits = rng.random(len(m.rates)) < 1.0 - channel_weights(m)
    sign = -1 if hits.sum() % 2 else 1
    return _product(m.generator_set, hits), sign


def t1_rates(t1: np.ndarray, tau: float) -> np.ndarray:
    """Per-qubit X/Y generator rate ``tau / (4 T1)`` (broadcasts over leading axes)."""
    t1 = np.asarray(t1, dtype=float)
    if tau <= 0:
        raise ValueError("layer duration must be positive")
    if np.any(t1 <= 0):
        raise ValueError("T1 must be positive")
    return tau / (4.0 * t1)


def model_from_t1(t1: Sequence[float], tau: float, gs: GeneratorSet) -> LindbladModel:
    """Pauli-twirled amplitude damping: ``f_Z = exp(-tau/T1)``, ``f_X = f_Y = sqrt(f_Z)``."""
    t1 = np.asarray(t1, dtype=float)
    if t1.shape != (gs.n,):
        raise DimensionError(f"need {gs.n} T1 values")
    r = t1_rates(t1, tau)
    lam = np.zeros(len(gs))
    lam[0 : 3 * gs.n : 3] = r  # X
    lam[1 : 3 * gs.n : 3] = r  # Y
    return LindbladModel(gs, lam)


def relative_cost(gamma_w: float, gamma_b: float, N: float) -> float:
    """Extra PEC sampling cost ``(gamma_w**2 / gamma_b**2)**N`` of the worse model."""
    if gamma_w < 1 or gamma_b < 1 or N < 0:
        raise ValueError("need gammas >= 1 and N >= 0")
    return (gamma_w**2 / gamma_b**2) ** N



def floor_model(
    gs: GeneratorSet,
    gate_edges: Sequence[tuple[int, int]],
    pair_rate: float,
    idle_rate: float = 0.0,
) -> LindbladModel:
    """Static non-T1 noise of a CZ layer.

    Every one of the 15 Paulis supported on a gate pair gets ``pair_rate``
    and each weight-one Pauli on an idle qubit gets ``idle_rate``.  Uniform
    rates on a gate pair are invariant under conjugation by CZ.
    """
    lam = np.zeros(len(gs))
    busy = set()
    for a, b in gate_edges:
        lam[gs.scope_indices(a)] = pair_rate
        lam[gs.scope_indices(b)] = pair_rate
        lam[gs.scope_indices((a, b))] = pair_rate
        busy |= {a, b}
    for q in range(gs.n):
        if q not in busy:
            lam[gs.scope_indices(q)] = idle_rate
    return LindbladModel(gs, lam)
