"""Dense-matrix reference implementations used as independent test oracles."""

from __future__ import annotations

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
MATS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_list(ms):
    # qubit 0 is the leftmost tensor factor
    return reduce(np.kron, ms)


def pauli_matrix(label: str) -> np.ndarray:
    sign = 1
    if label.startswith("-"):
        sign, label = -1, label[1:]
    return sign * kron_list([MATS[c] for c in label])


def single(n: int, q: int, U: np.ndarray) -> np.ndarray:
    return kron_list([U if j == q else I2 for j in range(n)])


def cz(n: int, a: int, b: int) -> np.ndarray:
    d = np.ones(2**n, dtype=complex)
    for i in range(2**n):
        bits = [(i >> (n - 1 - j)) & 1 for j in range(n)]
        if bits[a] and bits[b]:
            d[i] = -1
    return np.diag(d)


def layer_unitary(layer) -> np.ndarray:
    """Dense unitary of a named layer from this package (H, CZ, basis, inverses, idle).

    The result is checked against the layer's tableau on every single-qubit
    X and Z before it is returned.
    """
    n, name = layer.n, layer.name
    if name.endswith("^-1"):
        base = type(layer)(n, layer.inverse().image_x, layer.inverse().image_z, name[:-3])
        U = layer_unitary(base).conj().T
    elif name == "H":
        U = kron_list([H] * n)
    elif name.startswith("B"):
        rot = {"X": H, "Y": S @ H, "Z": I2}
        U = kron_list([rot[b] for b in name[1:]])
    elif all(img.weight == 1 for img in layer.image_x):
        U = np.eye(2**n, dtype=complex)
    else:
        U = np.eye(2**n, dtype=complex)
        for q, img in enumerate(layer.image_x):
            if img.weight == 2:
                other = [p for p in img.support if p != q][0]
                if q < other:
                    U = cz(n, q, other) @ U
    for q in range(n):
        for op, img in (("X", layer.image_x[q]), ("Z", layer.image_z[q])):
            P = single(n, q, MATS[op])
            assert np.allclose(U @ P @ U.conj().T, pauli_matrix(img.label)), name
    return U


def simulate_density(circuit, realization) -> np.ndarray:
    """Density-matrix run of a circuit from |0..0> with Pauli-Lindblad noise slots."""
    from tlsmit.engine import Gate, NoiseSlot, PauliGate
    from tlsmit.model import channel_weights

    n = circuit.n
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    cache = {}
    for el in circuit.elements:
        if isinstance(el, Gate):
            key = id(el.layer)
            if key not in cache:
                cache[key] = layer_unitary(el.layer)
            U = cache[key]
            rho = U @ rho @ U.conj().T
        elif isinstance(el, PauliGate):
            P = pauli_matrix(el.pauli.label)
            rho = P @ rho @ P
        elif isinstance(el, NoiseSlot):
            m = realization[el.layer]
            for G, w in zip(m.generator_set.generators, channel_weights(m)):
                if w < 1:
                    Gm = pauli_matrix(G.label)
                    rho = w * rho + (1 - w) * Gm @ rho @ Gm
    return rho


def expectation(rho: np.ndarray, label: str) -> float:
    return float(np.real(np.trace(pauli_matrix(label) @ rho)))
