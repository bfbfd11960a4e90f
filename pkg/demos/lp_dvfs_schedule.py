# %% [markdown]
# Solve LP-DVFS for one benchmark taskset, realize the plan with wrap-around
# packing and print the schedule as a text Gantt chart.

# %%
from dvfsched import (bundled_processor, bundled_taskset, gantt_csv, realize, solve_lp_dvfs,
                      total_energy, validate)
from dvfsched.schedule import interval_stats

ts = bundled_taskset("d12")
pm = bundled_processor("xscale").model()  # discrete levels
for t in ts:
    print(t.id, "work", t.work, "deadline", t.deadline, "period", t.period)

# %%
plan = solve_lp_dvfs(ts, pm, m=2)
print("major grid", [str(t) for t in plan.grid.instants])
for mu in range(plan.grid.N):
    print(f"interval {mu}: load {float(plan.interval_load(mu)):.3f}", plan.interval_speeds(mu))
cert = plan.certify()
print("LP certificate ok:", cert.ok, "gap", cert.gap)

# %%
sched = realize(plan)
report = validate(sched, ts, pm, 2)
print(report.text())
e = total_energy(sched, pm)
print(f"energy above idle {e.objective:.2f}, total {e.total:.2f}")
for st in interval_stats(sched, plan.grid):
    print(st)

# %%
# crude text Gantt, one column per 0.25 time units
scale = 4
for proc, segs in sorted(sched.by_processor().items()):
    row = ["."] * int(sched.horizon * scale)
    for s in segs:
        for k in range(int(s.start * scale), int(s.end * scale)):
            row[k] = s.task[-1]
    print(f"P{proc} " + "".join(row))

# %%
print(gantt_csv(sched))
