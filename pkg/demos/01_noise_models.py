# %% [markdown]
# # Sparse Pauli-Lindblad noise on a six-qubit chain
#
# A noise model is a vector of 63 nonnegative rates, one per weight-one
# Pauli and per nearest-neighbour weight-two Pauli.  Pauli fidelities follow
# from the rates of the generators that anticommute with the Pauli.

# %%
import numpy as np

from tlsmit.model import GeneratorSet, LindbladModel, fidelity, model_from_t1, relative_cost
from tlsmit.pauli import PauliString

gs = GeneratorSet.chain(6)
print(len(gs), "generators, first few:", gs.labels[:4], "...", gs.labels[18:21])

# %% [markdown]
# A T1-limited layer: amplitude damping after twirling puts equal X and Y
# rates ``tau / (4 T1)`` on each qubit.

# %%
t1 = np.array([95, 120, 80, 140, 60, 110]) * 1e-6
m = model_from_t1(t1, 135e-9, gs)
for q in range(3):
    Z = PauliString.single(6, q, "Z")
    print(f"qubit {q}: f_Z = {fidelity(m, Z):.6f}  exp(-tau/T1) = {np.exp(-135e-9 / t1[q]):.6f}")
print("sampling overhead gamma =", round(m.gamma(), 5))

# %% [markdown]
# Overheads compound over a circuit.  A layer with gamma 1.13 against one
# with 1.06, used 20 times, costs this many more circuit samples:

# %%
print(round(relative_cost(1.13, 1.06, 20), 2), "x for N = 20;", round(relative_cost(1.13, 1.06, 40), 1), "x for N = 40")
