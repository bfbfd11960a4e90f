# %% [markdown]
# Energy of every algorithm on the nine benchmark tasksets, normalized by the
# no-DVFS baseline. Continuous algorithms use the fitted model on [s_min, 1],
# discrete ones only the measured speed levels.

# %%
import numpy as np

from dvfsched import ALGORITHMS, GP_NODVFS, bundled_processor, bundled_tasksets, solve
from dvfsched.formulations import DISCRETE_ALGORITHMS

for name in ("xscale", "powerpc405lp"):
    spec = bundled_processor(name)
    disc, cont = spec.model(discrete=True), spec.model(discrete=False)
    rows = []
    for ts in bundled_tasksets():
        obj = {}
        for alg in ALGORITHMS:
            pm = disc if alg in DISCRETE_ALGORITHMS or alg == GP_NODVFS else cont
            obj[alg] = solve(alg, ts, pm, 2, 256)[0].formulation_objective
        rows.append([obj[a] / obj[GP_NODVFS] for a in ALGORITHMS])
    table = np.array(rows)

    # %%
    print(spec.name)
    print("       " + " ".join(f"{a:>12}" for a in ALGORITHMS))
    for ts, r in zip(bundled_tasksets(), table):
        print(f"{ts.name:6} " + " ".join(f"{x:12.4f}" for x in r))
    print("mean saving of lp-dvfs over gp-sdiscrete:",
          f"{np.mean(1 - table[:, 0] / table[:, 4]):.1%}")
