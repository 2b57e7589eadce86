# %% [markdown]
# # A drifting TLS landscape and three ways to live with it
#
# Each qubit's relaxation rate has Lorentzian peaks in the control
# coordinate k.  Peaks wander over hours.  We compare holding k fixed,
# re-optimizing k periodically, and sweeping k shot by shot.

# %%
import numpy as np

from tlsmit.rng import stream
from tlsmit.tls import Averaged, Control, Optimized, drift, random_landscape, sample_k, scan_pe

L = random_landscape(6, stream(0, "landscape"))
curve = scan_pe(L, 0)
print("qubit 0 P_e over k: min %.3f at k=%.2f, max %.3f at k=%.2f" % (
    curve[:, 1].min(), curve[curve[:, 1].argmin(), 0], curve[:, 1].max(), curve[curve[:, 1].argmax(), 0]))

# %% [markdown]
# Track T1 on every qubit for a day under each strategy.  For the averaged
# strategy we report the mean decay rate over one modulation period.

# %%
strategies = {"control": Control(), "optimized": Optimized(), "averaged": Averaged()}
history = {k: [] for k in strategies}
rng = stream(0, "demo-drift")
for step in range(49):
    if step:
        L = drift(L, 0.5, rng)
    for name, s in strategies.items():
        if isinstance(s, Optimized) and s.due(L.time_hr):
            s = strategies[name] = s.reoptimize(L)
        k = sample_k(s, np.arange(1000), 1000.0, 6)
        history[name].append(1.0 / L.decay_rate(k).mean(0))

for name, h in history.items():
    h = np.array(h) * 1e6
    print(f"{name:>9}: mean T1 {h.mean():6.1f} us, worst qubit-hour {h.min():6.1f} us, "
          f"mean std over time {h.std(0).mean():5.1f} us")
