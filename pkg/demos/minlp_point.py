# %% [markdown]
# A realized schedule is also a point of the variable-step mixed-integer model:
# inside each major interval the segment breakpoints form the minor grid, the
# processor assignments are binary and the remaining work follows the fluid
# dynamics. Here we read that point off a few schedules and check it.

# %%
from dvfsched import (ALGORITHMS, bundled_processor, bundled_taskset, minlp_point, realize,
                      solve)
from dvfsched.formulations import DISCRETE_ALGORITHMS, GP_NODVFS

spec = bundled_processor("powerpc405lp")
ts = bundled_taskset("d10")

for alg in ALGORITHMS:
    pm = spec.model(discrete=alg in DISCRETE_ALGORITHMS or alg == GP_NODVFS)
    plan, _ = solve(alg, ts, pm, 2)
    sched = realize(plan)
    point, problems = minlp_point(sched, ts, plan.power)
    print(f"{alg:13} minor steps per interval {[len(h) for h in point.steps]}  "
          f"verified: {not problems}")

# %%
# remaining-work trajectories of the last schedule
for key, traj in sorted(point.states.items()):
    print(f"{key[0]}#{key[1]}", " ".join(f"{float(t):g}:{float(x):.3f}" for t, x in traj))
