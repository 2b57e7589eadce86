# %% [markdown]
# # Learn, wait, mitigate: how stable is the result?
#
# Eight cycles, 2.5 hours apart, on a shared drifting landscape.  Exact
# expectations keep this quick; the CLI ``stability`` command runs the
# sampled version.

# %%
import numpy as np

from tlsmit.config import ExperimentConfig
from tlsmit.pec import stability_run

cfg = ExperimentConfig.load(mode="exact")
scfg = cfg.stability_config()
scfg = type(scfg)(**{**scfg.__dict__, "cycles": 8})
out = stability_run(
    cfg.landscape(),
    [cfg.strategy(s) for s in ("control", "optimized", "averaged")],
    scfg, cfg.generator_set(), cfg.floors(), seed=0,
)
for name, recs in out.items():
    dm = np.array([r.delta_mit for r in recs])
    raw = np.array([r.raw for r in recs])
    print(f"{name:>9}: std(delta_mit) {dm.std(ddof=1):.4f}  raw {raw.min():.3f}..{raw.max():.3f}")
