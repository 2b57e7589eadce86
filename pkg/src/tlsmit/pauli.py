"""Symplectic Pauli algebra and Clifford-layer conjugation.

Paulis are stored as packed integer bit masks: bit ``q`` of ``x`` (``z``)
holds the X (Z) component on qubit ``q``.  A Hermitian Pauli is

    sign * i**popcount(x & z) * X**x * Z**z

so that ``Y = iXZ``.  Signs live in {+1, -1}; products of anticommuting
Paulis drop the leftover factor of ``i`` (see :func:`multiply`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "InvalidLayerError",
    "PauliString",
    "CliffordLayer",
    "symplectic_product",
    "multiply",
    "conjugate",
    "cz_layer",
    "hadamard_layer",
    "basis_layer",
    "identity_layer",
    "pack_frame",
]

_LABEL_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_LABEL = {v: k for k, v in _LABEL_BITS.items()}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class InvalidLayerError(ValueError):
    """A Clifford layer specification is malformed."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    """An ``n``-qubit Hermitian Pauli operator with a +/-1 sign.

    Parameters
    ----------
    n : int
        Number of qubits.
    x, z : int
        Packed bit masks; qubit ``q`` is bit ``q``.
    sign : int
        +1 or -1.
    """

    n: int
    x: int = 0
    z: int = 0
    sign: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise DimensionError("qubit count must be nonnegative")
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full:
            raise DimensionError(f"bit masks exceed {self.n} qubits")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse text such as ``"-XZIIII"`` (qubit 0 leftmost)."""
        sign = 1
        if label[:1] in ("+", "-", "−"):
            sign = -1 if label[0] != "+" else 1
            label = label[1:]
        x = z = 0
        for q, ch in enumerate(label.upper()):
            try:
                bx, bz = _LABEL_BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli character {ch!r}") from None
            x |= bx << q
            z |= bz << q
        return cls(len(label), x, z, sign)

    @classmethod
    def single(cls, n: int, qubit: int, op: str) -> "PauliString":
        """Weight-one Pauli ``op`` on ``qubit``."""
        if not 0 <= qubit < n:
            raise DimensionError(f"qubit {qubit} outside 0..{n - 1}")
        bx, bz = _LABEL_BITS[op]
        return cls(n, bx << qubit, bz << qubit)

    @classmethod
    def from_ops(cls, n: int, ops: dict[int, str], sign: int = 1) -> "PauliString":
        x = z = 0
        for q, op in ops.items():
            if not 0 <= q < n:
                raise DimensionError(f"qubit {q} outside 0..{n - 1}")
            bx, bz = _LABEL_BITS[op]
            x |= bx << q
            z |= bz << q
        return cls(n, x, z, sign)

    @property
    def label(self) -> str:
        body = "".join(
            _BITS_LABEL[((self.x >> q) & 1, (self.z >> q) & 1)] for q in range(self.n)
        )
        return ("-" if self.sign < 0 else "") + body

    def __str__(self) -> str:
        return self.label

    @property
    def x_bits(self) -> np.ndarray:
        return np.array([(self.x >> q) & 1 for q in range(self.n)], dtype=np.uint8)

    @property
    def z_bits(self) -> np.ndarray:
        return np.array([(self.z >> q) & 1 for q in range(self.n)], dtype=np.uint8)

    @property
    def support(self) -> tuple[int, ...]:
        m = self.x | self.z
        return tuple(q for q in range(self.n) if (m >> q) & 1)

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def is_z_type(self) -> bool:
        """True when the operator is diagonal in the computational basis."""
        return self.x == 0

    def op(self, qubit: int) -> str:
        return _BITS_LABEL[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    def unsigned(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z) if self.sign < 0 else self

    def __neg__(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, -self.sign)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def packed(self) -> int:
        """Frame encoding ``x | z << n`` used by the shot simulator."""
        return self.x | (self.z << self.n)

    def commutes(self, other: "PauliString") -> bool:
        return symplectic_product(self, other) == 0


def _check_dims(P: PauliString, Q: PauliString) -> None:
    if P.n != Q.n:
        raise DimensionError(f"qubit counts differ: {P.n} vs {Q.n}")


def symplectic_product(P: PauliString, Q: PauliString) -> int:
    """Return 0 if ``P`` and ``Q`` commute and 1 otherwise."""
    _check_dims(P, Q)
    return _popcount((P.x & Q.z) ^ (P.z & Q.x)) & 1


def _product_exponent(P: PauliString, Q: PauliString) -> tuple[int, int, int]:
    # exact power of i in P*Q relative to the Hermitian Pauli with bits (x, z)
    x, z = P.x ^ Q.x, P.z ^ Q.z
    e = (
        _popcount(P.x & P.z)
        + _popcount(Q.x & Q.z)
        + 2 * _popcount(P.z & Q.x)
        - _popcount(x & z)
        + (2 if P.sign < 0 else 0)
        + (2 if Q.sign < 0 else 0)
    ) % 4
    return x, z, e


def multiply(P: PauliString, Q: PauliString) -> PauliString:
    """Group product ``P*Q`` modulo a global factor of ``i``.

    When ``P`` and ``Q`` anticommute the exact product is ``+/-i R`` for a
    Hermitian ``R``; one factor of ``i`` is discarded, so ``X*Z`` gives ``-Y``
    and ``Z*X`` gives ``+Y``.  Hence ``P*Q == (-1)**<P,Q> * Q*P`` always.
    """
    _check_dims(P, Q)
    x, z, e = _product_exponent(P, Q)
    if e & 1:
        e -= 1
    return PauliString(P.n, x, z, 1 if e == 0 else -1)


def _symplectic_inverse(rows: np.ndarray, n: int) -> np.ndarray:
    # rows @ omega @ rows.T == omega  =>  rows^-1 == omega @ rows.T @ omega
    omega = np.zeros((2 * n, 2 * n), dtype=np.int64)
    omega[:n, n:] = np.eye(n, dtype=np.int64)
    omega[n:, :n] = np.eye(n, dtype=np.int64)
    return (omega @ rows.T @ omega) % 2


@dataclass(frozen=True)
class CliffordLayer:
    """Conjugation tableau ``P -> U P U^dagger`` of an ``n``-qubit Clifford.

    ``image_x[q]`` and ``image_z[q]`` are the signed images of ``X_q`` and
    ``Z_q``.  Construction validates that the images preserve commutation.
    """

    n: int
    image_x: tuple[PauliString, ...]
    image_z: tuple[PauliString, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.image_x) != self.n or len(self.image_z) != self.n:
            raise InvalidLayerError("need one X and one Z image per qubit")
        for img in self.image_x + self.image_z:
            if img.n != self.n:
                raise DimensionError("image acts on wrong number of qubits")
        gens = [PauliString.single(self.n, q, "X") for q in range(self.n)]
        gens += [PauliString.single(self.n, q, "Z") for q in range(self.n)]
        imgs = list(self.image_x) + list(self.image_z)
        for a in range(2 * self.n):
            for b in range(a + 1, 2 * self.n):
                if symplectic_product(gens[a], gens[b]) != symplectic_product(
                    imgs[a], imgs[b]
                ):
                    raise InvalidLayerError("images do not preserve commutation")

    def conjugate(self, P: PauliString) -> PauliString:
        return conjugate(self, P)

    def __call__(self, P: PauliString) -> PauliString:
        return conjugate(self, P)

    @cached_property
    def symplectic_matrix(self) -> np.ndarray:
        """GF(2) matrix ``S`` with ``[x|z]_out = [x|z]_in @ S`` (row vectors)."""
        rows = np.zeros((2 * self.n, 2 * self.n), dtype=np.int64)
        for q, img in enumerate(self.image_x + self.image_z):
            rows[q, : self.n] = img.x_bits
            rows[q, self.n :] = img.z_bits
        return rows

    @cached_property
    def frame_tables(self) -> np.ndarray:
        """Byte-sliced lookup tables for mapping packed frames (signs dropped).

        Entry ``[c, b]`` is the packed image of byte ``b`` sitting in chunk
        ``c`` of the ``2n``-bit frame word; frames map by XOR over chunks.
        """
        imgs = [p.packed() for p in self.image_x + self.image_z]
        nchunks = max(1, (2 * self.n + 7) // 8)
        tables = np.zeros((nchunks, 256), dtype=np.uint64)
        for c in range(nchunks):
            for b in range(256):
                acc = 0
                for j in range(8):
                    bit = 8 * c + j
                    if (b >> j) & 1 and bit < 2 * self.n:
                        acc ^= imgs[bit]
                tables[c, b] = acc
        return tables

    def map_frames(self, frames: np.ndarray) -> np.ndarray:
        """Apply the layer to an array of packed Pauli frames."""
        tables = self.frame_tables
        out = tables[0][(frames & np.uint64(0xFF)).astype(np.intp)]
        for c in range(1, tables.shape[0]):
            byte = (frames >> np.uint64(8 * c)) & np.uint64(0xFF)
            out ^= tables[c][byte.astype(np.intp)]
        return out

    def inverse(self) -> "CliffordLayer":
        inv = _symplectic_inverse(self.symplectic_matrix, self.n)
        image_x, image_z = [], []
        for q in range(2 * self.n):
            row = inv[q]
            x = sum(int(b) << i for i, b in enumerate(row[: self.n]))
            z = sum(int(b) << i for i, b in enumerate(row[self.n :]))
            cand = PauliString(self.n, x, z)
            target = (
                PauliString.single(self.n, q, "X")
                if q < self.n
                else PauliString.single(self.n, q - self.n, "Z")
            )
            back = conjugate(self, cand)
            if back.unsigned() != target:
                raise InvalidLayerError("tableau is not invertible")
            (image_x if q < self.n else image_z).append(
                cand if back.sign > 0 else -cand
            )
        name = self.name + "^-1" if self.name else ""
        return CliffordLayer(self.n, tuple(image_x), tuple(image_z), name)

    def then(self, other: "CliffordLayer") -> "CliffordLayer":
        """Layer equivalent to applying ``self`` first and ``other`` second."""
        if other.n != self.n:
            raise DimensionError("layers act on different qubit counts")
        return CliffordLayer(
            self.n,
            tuple(conjugate(other, p) for p in self.image_x),
            tuple(conjugate(other, p) for p in self.image_z),
        )


def conjugate(L: CliffordLayer, P: PauliString) -> PauliString:
    """Return ``U P U^dagger`` with the exact sign."""
    if L.n != P.n:
        raise DimensionError(f"qubit counts differ: {L.n} vs {P.n}")
    # accumulate i**a * X**ax * Z**az
    a = _popcount(P.x & P.z) + (2 if P.sign < 0 else 0)
    ax = az = 0
    factors = [L.image_x[q] for q in range(P.n) if (P.x >> q) & 1]
    factors += [L.image_z[q] for q in range(P.n) if (P.z >> q) & 1]
    for img in factors:
        a += _popcount(img.x & img.z) + (2 if img.sign < 0 else 0)
        a += 2 * _popcount(az & img.x)
        ax ^= img.x
        az ^= img.z
    e = (a - _popcount(ax & az)) % 4
    assert e in (0, 2), "conjugation produced a non-Hermitian operator"
    return PauliString(P.n, ax, az, 1 if e == 0 else -1)


def identity_layer(n: int) -> CliffordLayer:
    return CliffordLayer(
        n,
        tuple(PauliString.single(n, q, "X") for q in range(n)),
        tuple(PauliString.single(n, q, "Z") for q in range(n)),
        "I",
    )


def hadamard_layer(n: int) -> CliffordLayer:
    """Hadamard on every qubit."""
    return CliffordLayer(
        n,
        tuple(PauliString.single(n, q, "Z") for q in range(n)),
        tuple(PauliString.single(n, q, "X") for q in range(n)),
        "H",
    )


def cz_layer(n: int, edges: Iterable[Sequence[int]], name: str = "") -> CliffordLayer:
    """Simultaneous CZ gates on a matching of qubit pairs (0-indexed)."""
    edges = [tuple(int(q) for q in e) for e in edges]
    used: set[int] = set()
    for e in edges:
        if len(e) != 2 or e[0] == e[1]:
            raise InvalidLayerError(f"bad edge {e}")
        for q in e:
            if not 0 <= q < n:
                raise InvalidLayerError(f"edge {e} outside 0..{n - 1}")
            if q in used:
                raise InvalidLayerError(f"qubit {q} appears in two edges")
            used.add(q)
    image_x = [PauliString.single(n, q, "X") for q in range(n)]
    image_z = [PauliString.single(n, q, "Z") for q in range(n)]
    for a, b in edges:
        image_x[a] = PauliString.from_ops(n, {a: "X", b: "Z"})
        image_x[b] = PauliString.from_ops(n, {a: "Z", b: "X"})
    label = name or "CZ" + "".join(f"({a},{b})" for a, b in edges)
    return CliffordLayer(n, tuple(image_x), tuple(image_z), label)


def basis_layer(bases: str) -> CliffordLayer:
    """Single-qubit rotation ``V`` with ``V Z_q V^dagger = B_q``.

    ``bases`` is a string over {X, Y, Z}, one letter per qubit.  The ``Y``
    rotation is ``S H``.
    """
    n = len(bases)
    image_x, image_z = [], []
    for q, b in enumerate(bases.upper()):
        if b == "Z":
            image_x.append(PauliString.single(n, q, "X"))
            image_z.append(PauliString.single(n, q, "Z"))
        elif b == "X":
            image_x.append(PauliString.single(n, q, "Z"))
            image_z.append(PauliString.single(n, q, "X"))
        elif b == "Y":
            image_x.append(PauliString.single(n, q, "Z"))
            image_z.append(PauliString.single(n, q, "Y"))
        else:
            raise InvalidLayerError(f"unknown basis {b!r}")
    return CliffordLayer(n, tuple(image_x), tuple(image_z), "B" + bases.upper())


def pack_frame(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Pack per-qubit bit arrays of shape (..., n) into uint64 frame words."""
    x = np.asarray(x, dtype=np.uint64)
    z = np.asarray(z, dtype=np.uint64)
    n = x.shape[-1]
    weights = np.uint64(1) << np.arange(n, dtype=np.uint64)
    return (x * weights).sum(-1, dtype=np.uint64) | (
        (z * weights).sum(-1, dtype=np.uint64) << np.uint64(n)
    )
