# %% [markdown]
# # Learning a layer's noise model
#
# Twirled circuits with 0 to 64 repetitions of a CZ layer are measured in
# nine product bases.  Exponential fits give Pauli fidelities, and a
# nonnegative least-squares inversion returns the 63 rates.

# %%
import warnings

import numpy as np

from tlsmit.config import ExperimentConfig
from tlsmit.engine import Device
from tlsmit.learn import LearningConfig, learn
from tlsmit.tls import realize_noise

cfg = ExperimentConfig.load()
gs, floors, layers = cfg.generator_set(), cfg.floors(), cfg.layers()
truth = realize_noise(cfg.landscape(), np.zeros(6), ["L1", "L2"], cfg["tau"], gs, floors)

# %% [markdown]
# With infinite shots the overhead is recovered exactly.  Individual rates
# of partner Paulis are only determined as products, so single rates can
# differ from the truth by a symmetric gauge.

# %%
exact = learn(layers["L1"], Device(gs, static=truth, mode="exact"))
print("exact:   gamma %.6f  truth %.6f" % (exact.gamma, truth["L1"].gamma()))
print("largest single-rate gauge shift: %.2e" % np.abs(exact.model.rates - truth["L1"].rates).max())

# %% [markdown]
# A sampled run with a reduced budget, with bootstrap error bars.

# %%
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    res = learn(layers["L1"], Device(gs, static=truth, seed=1), LearningConfig(twirls=20), bootstrap=30)
print("sampled: gamma %.5f +/- %.5f" % (res.gamma, res.gamma_std))
for scope in [0, (0, 1), (1, 2)]:
    print("  local gamma", scope, round(res.model.local_gamma(scope), 5))
