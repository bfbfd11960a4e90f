"""Energy-minimal workload allocation: LP-DVFS, NLP-DVFS and the global baselines.

Every solver returns a :class:`WorkloadPlan` (directly, or through
:meth:`StaticAllocation.to_plan`) describing, for each job and major-grid
interval, which fraction of the interval the job runs at which speed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from ._search import golden_section
from .lp import LpProblem, LpSolution, certify, solve_lp
from .power import PowerModel, critical_speed
from .taskmodel import (Job, Taskset, density, expand_jobs, feasibility_check, hyperperiod,
                        minimum_density, scheduling_horizon)
from .timegrid import JobWindow, TimeGrid, build_major_grid, job_windows

LP_DVFS = "lp-dvfs"
NLP_DVFS = "nlp-dvfs"
GP_SVFS = "gp-svfs"
GP_NODVFS = "gp-nodvfs"
GP_SDISCRETE = "gp-sdiscrete"
ALGORITHMS = (LP_DVFS, NLP_DVFS, GP_SVFS, GP_NODVFS, GP_SDISCRETE)
DISCRETE_ALGORITHMS = (LP_DVFS, GP_SDISCRETE)

MAX_DENOMINATOR = 10 ** 9
PLAN_TOL = 1e-9
ENUMERATION_LIMIT = 10 ** 6


class InfeasibleError(Exception):
    """No valid allocation exists; ``resource`` names what binds."""

    def __init__(self, message: str, resource: str = "capacity"):
        super().__init__(message)
        self.resource = resource


# (speed, fraction of the interval) pairs for one job in one interval
Chunks = List[Tuple[Fraction, Fraction]]


@dataclass
class WorkloadPlan:
    """Per-job, per-interval execution fractions at given speeds."""

    algorithm: str
    taskset: Taskset
    power: PowerModel
    m: int
    grid: TimeGrid
    windows: List[JobWindow]
    entries: Dict[Tuple[int, int], Chunks]
    formulation_objective: float = math.nan
    lp_problem: Optional[LpProblem] = None
    lp_solution: Optional[LpSolution] = None

    @property
    def jobs(self) -> List[Job]:
        return [w.job for w in self.windows]

    @property
    def horizon(self) -> Fraction:
        return self.grid.horizon

    @property
    def objective(self) -> float:
        """Net energy of the plan: sum of interval length x fraction x net power."""
        return math.fsum(float(self.grid.length(mu) * a) * self.power.net_power(s)
                         for (_, mu), chunks in self.entries.items() for s, a in chunks)

    def chunks(self, job_index: int, mu: int) -> Chunks:
        return self.entries.get((job_index, mu), [])

    def work_done(self, job_index: int) -> Fraction:
        return sum((self.grid.length(mu) * s * a
                    for (ji, mu), chunks in self.entries.items() if ji == job_index
                    for s, a in chunks), Fraction(0))

    def remaining_work(self, job_index: int) -> List[Fraction]:
        """Remaining work of the job at every grid instant."""
        job = self.windows[job_index].job
        x = [job.work]
        for mu in range(self.grid.N):
            done = sum((self.grid.length(mu) * s * a for s, a in self.chunks(job_index, mu)),
                       Fraction(0))
            x.append(x[-1] - done)
        return x

    def interval_load(self, mu: int) -> Fraction:
        return sum((a for (_, nu), chunks in self.entries.items() if nu == mu
                    for _, a in chunks), Fraction(0))

    def interval_speeds(self, mu: int) -> Dict[str, List[float]]:
        out: Dict[str, List[float]] = {}
        for (ji, nu), chunks in sorted(self.entries.items()):
            if nu == mu:
                out[str(self.windows[ji].job)] = [float(s) for s, _ in chunks]
        return out

    def check(self, tol: float = 1e-6) -> List[str]:
        """Violated plan invariants (empty when the plan is consistent)."""
        problems = []
        for (ji, mu), chunks in self.entries.items():
            w = self.windows[ji]
            if not w.alive(mu) and any(a for _, a in chunks):
                problems.append(f"job {w.job} runs outside its window in interval {mu}")
            if any(a < 0 or a > 1 for _, a in chunks):
                problems.append(f"job {w.job}: fraction outside [0, 1] in interval {mu}")
            if sum(a for _, a in chunks) > 1 + tol:
                problems.append(f"job {w.job} exceeds one processor in interval {mu}")
            for s, _ in chunks:
                if not self.power.speed_ok(s):
                    problems.append(f"job {w.job}: invalid speed {float(s)} in interval {mu}")
        for mu in range(self.grid.N):
            if self.interval_load(mu) > self.m + tol:
                problems.append(f"interval {mu} load exceeds {self.m} processors")
        for ji, w in enumerate(self.windows):
            if abs(float(self.work_done(ji) - w.job.work)) > tol:
                problems.append(f"job {w.job} completes {float(self.work_done(ji)):.9g} "
                                f"of {float(w.job.work):.9g}")
        return problems

    def certify(self):
        if self.lp_problem is None or self.lp_solution is None:
            raise ValueError(f"{self.algorithm} plan carries no LP to certify")
        return certify(self.lp_problem, self.lp_solution)


def problem_structure(ts: Taskset):
    """Jobs, major grid and job windows shared by every formulation.

    The hyperperiod itself is kept on the grid even when arbitrary deadlines
    push the horizon past it.
    """
    L = hyperperiod(ts)
    jobs = expand_jobs(ts, L)
    grid = build_major_grid(jobs, scheduling_horizon(ts), extra=[L])
    return jobs, grid, job_windows(jobs, grid)


def _check_feasible(ts: Taskset, m: int) -> None:
    rep = feasibility_check(ts, m)
    if not rep.ok:
        resource = "window" if rep.over_dense_tasks else "capacity"
        raise InfeasibleError("; ".join(rep.messages), resource)


def _to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    return Fraction(float(v)).limit_denominator(MAX_DENOMINATOR)


def finalize_entries(raw: Dict[Tuple[int, int], Sequence[Tuple[Fraction, float]]],
                     windows: List[JobWindow], grid: TimeGrid, m: int) -> Dict[Tuple[int, int], Chunks]:
    """Round solver fractions to rationals and restore the plan constraints exactly.

    Fractions are snapped to denominators <= 1e9, scaled down wherever a job
    or interval exceeds its capacity, and each job's completion deficit is
    pushed back into its chunks (latest interval first) within the remaining
    capacity. Chunks are ordered by descending speed.
    """
    entries: Dict[Tuple[int, int], Chunks] = {}
    for key, chunks in raw.items():
        merged: Dict[Fraction, Fraction] = {}
        for s, a in chunks:
            fa = min(max(_to_fraction(a), Fraction(0)), Fraction(1))
            if fa > 0:
                merged[s] = merged.get(s, Fraction(0)) + fa
        if merged:
            entries[key] = sorted(merged.items(), key=lambda p: -p[0])

    def job_load(key):
        return sum((a for _, a in entries.get(key, [])), Fraction(0))

    for key, chunks in entries.items():
        tot = job_load(key)
        if tot > 1:
            entries[key] = [(s, a / tot) for s, a in chunks]
    load = [Fraction(0)] * grid.N
    for (_, mu), chunks in entries.items():
        load[mu] += sum(a for _, a in chunks)
    for mu in range(grid.N):
        if load[mu] > m:
            f = Fraction(m) / load[mu]
            for key in [k for k in entries if k[1] == mu]:
                entries[key] = [(s, a * f) for s, a in entries[key]]
            load[mu] = Fraction(m)

    for ji, w in enumerate(windows):
        done = sum((grid.length(mu) * s * a for mu in w.intervals
                    for s, a in entries.get((ji, mu), [])), Fraction(0))
        deficit = w.job.work - done
        if deficit == 0:
            continue
        for mu in reversed(list(w.intervals)):
            key = (ji, mu)
            chunks = entries.get(key)
            if not chunks or deficit == 0:
                continue
            new = []
            for s, a in chunks:
                rate = grid.length(mu) * s
                if deficit > 0:
                    room = min(1 - job_load(key), Fraction(m) - load[mu])
                    da = min(deficit / rate, max(room, Fraction(0)))
                else:
                    da = max(deficit / rate, -a)
                new.append((s, a + da))
                entries[key] = new + chunks[len(new):]
                load[mu] += da
                deficit -= da * rate
            entries[key] = [(s, a) for s, a in new if a > 0]
            if not entries[key]:
                del entries[key]
    return entries


def _chunk_profile(entries, N):
    counts = [0] * N
    for (_, mu), chunks in entries.items():
        counts[mu] += len(chunks)
    return (max(counts, default=0), sum(counts))


def consolidate(plan: WorkloadPlan) -> WorkloadPlan:
    """Equivalent plan with fewer chunks per interval.

    A job whose window spans several intervals may move the work it does in
    one interval into another at the same speeds (fractions rescaled by the
    interval lengths), as long as the job and the target interval keep
    within their capacity. Energy is unchanged exactly. Moves are applied
    greedily while they lower (max chunks in an interval, total chunks).
    """
    grid, m = plan.grid, plan.m
    entries = {k: list(v) for k, v in plan.entries.items()}
    load = [Fraction(0)] * grid.N
    for (_, mu), chunks in entries.items():
        load[mu] += sum(a for _, a in chunks)
    improved = True
    while improved:
        improved = False
        best = _chunk_profile(entries, grid.N)
        for ji, w in enumerate(plan.windows):
            for src in w.intervals:
                moving = entries.get((ji, src))
                if not moving:
                    continue
                for dst in w.intervals:
                    if dst == src:
                        continue
                    ratio = grid.length(src) / grid.length(dst)
                    moved = [(s, a * ratio) for s, a in moving]
                    extra = sum(a for _, a in moved)
                    have = entries.get((ji, dst), [])
                    if sum(a for _, a in have) + extra > 1 or load[dst] + extra > m:
                        continue
                    merged: Dict[Fraction, Fraction] = dict(have)
                    for s, a in moved:
                        merged[s] = merged.get(s, Fraction(0)) + a
                    trial = dict(entries)
                    del trial[ji, src]
                    trial[ji, dst] = sorted(merged.items(), key=lambda p: -p[0])
                    profile = _chunk_profile(trial, grid.N)
                    if profile < best:
                        entries = trial
                        load[src] -= sum(a for _, a in moving)
                        load[dst] += extra
                        best = profile
                        improved = True
                        break
                if improved:
                    break
            if improved:
                break
    return WorkloadPlan(plan.algorithm, plan.taskset, plan.power, plan.m, grid, plan.windows,
                        entries, plan.formulation_objective, plan.lp_problem, plan.lp_solution)


# -- LP-DVFS ------------------------------------------------------------------

def _dvfs_lp(windows: List[JobWindow], grid: TimeGrid, speeds: Sequence[Fraction],
             pm: PowerModel, m: int):
    lp = LpProblem()
    index: Dict[Tuple[int, int, int], int] = {}
    net = [pm.net_power(s) for s in speeds]
    for ji, w in enumerate(windows):
        for mu in w.intervals:
            dt = float(grid.length(mu))
            for q, s in enumerate(speeds):
                index[ji, mu, q] = lp.add_variable(dt * net[q], 0.0, 1.0,
                                                   name=f"a[{w.job},{mu},{float(s):g}]")
    for ji, w in enumerate(windows):
        lp.add_constraint({index[ji, mu, q]: float(grid.length(mu) * s)
                           for mu in w.intervals for q, s in enumerate(speeds)},
                          "=", float(w.job.work), name=f"complete[{w.job}]")
    if len(speeds) > 1:
        for ji, w in enumerate(windows):
            for mu in w.intervals:
                lp.add_constraint({index[ji, mu, q]: 1.0 for q in range(len(speeds))},
                                  "<=", 1.0, name=f"single[{w.job},{mu}]")
    for mu in range(grid.N):
        alive = [ji for ji, w in enumerate(windows) if w.alive(mu)]
        if alive:
            lp.add_constraint({index[ji, mu, q]: 1.0 for ji in alive
                               for q in range(len(speeds))},
                              "<=", float(m), name=f"capacity[{mu}]")
    return lp, index


def _diagnose(windows: List[JobWindow], grid: TimeGrid) -> str:
    for w in windows:
        if w.job.work > w.job.deadline - w.job.arrival:
            return "window"
    return "capacity"


def _solve_dvfs_lp(ts: Taskset, pm: PowerModel, m: int, speeds: Sequence[Fraction]):
    _check_feasible(ts, m)
    _, grid, windows = problem_structure(ts)
    lp, index = _dvfs_lp(windows, grid, speeds, pm, m)
    sol = solve_lp(lp)
    if sol.status == "infeasible":
        res = _diagnose(windows, grid)
        raise InfeasibleError(f"no feasible allocation ({res} constraint binds)", res)
    if not sol.optimal:
        raise RuntimeError(f"LP solver failed: {sol.status} {sol.message}")
    return grid, windows, lp, sol, index


def solve_lp_dvfs(ts: Taskset, pm: PowerModel, m: int) -> WorkloadPlan:
    """Exact energy-minimal plan for a processor with discrete speed levels."""
    if not pm.speed_levels:
        raise ValueError("lp-dvfs needs a power model with discrete speed levels")
    speeds = list(pm.speed_levels)
    grid, windows, lp, sol, index = _solve_dvfs_lp(ts, pm, m, speeds)
    raw: Dict[Tuple[int, int], list] = {}
    for (ji, mu, q), j in index.items():
        if sol.x[j] > 0:
            raw.setdefault((ji, mu), []).append((speeds[q], sol.x[j]))
    entries = finalize_entries(raw, windows, grid, m)
    return WorkloadPlan(LP_DVFS, ts, pm, m, grid, windows, entries,
                        formulation_objective=sol.objective, lp_problem=lp, lp_solution=sol)


# -- NLP-DVFS -----------------------------------------------------------------

def speed_grid(pm: PowerModel, levels: int) -> List[Fraction]:
    """``levels`` evenly spaced exact speeds from s_min to 1."""
    if levels < 2:
        raise ValueError("need at least two grid levels")
    lo = pm.s_min
    return [lo + (1 - lo) * Fraction(k, levels - 1) for k in range(levels)]


def solve_nlp_dvfs(ts: Taskset, pm: PowerModel, m: int, grid_levels: int = 256) -> WorkloadPlan:
    """Continuous-speed plan with a single speed per job and interval.

    The LP over a dense uniform speed grid is solved first; each job's mixed
    chunks in an interval are then replaced by one speed that delivers the
    same work. That speed minimizes energy per unit of work over
    ``[average mixed speed, 1]`` (the critical speed, clipped from below), so
    the job never occupies more of the interval than before and the capacity
    constraints stay satisfied.
    """
    pmc = pm.continuous()
    speeds = speed_grid(pmc, grid_levels)
    grid, windows, lp, sol, index = _solve_dvfs_lp(ts, pmc, m, speeds)
    mixed: Dict[Tuple[int, int], List[Tuple[float, float]]] = {}
    for (ji, mu, q), j in index.items():
        if sol.x[j] > 0:
            mixed.setdefault((ji, mu), []).append((float(speeds[q]), float(sol.x[j])))
    # energy per work is unimodal, so its minimizer over [lo, 1] is max(lo, s*)
    s_crit = critical_speed(pmc)
    raw: Dict[Tuple[int, int], list] = {}
    for (ji, mu), chunks in sorted(mixed.items()):
        dt = float(grid.length(mu))
        work = math.fsum(s * a for s, a in chunks) * dt
        busy = math.fsum(a for _, a in chunks)
        if work <= 1e-15:
            continue
        s_avg = min(1.0, work / (busy * dt))
        s_lo = max(s_avg, float(pmc.s_min))
        if s_crit > s_lo:
            s_frac = Fraction(s_crit).limit_denominator(MAX_DENOMINATOR)
        else:
            s_frac = Fraction(s_lo).limit_denominator(MAX_DENOMINATOR)
        s_frac = min(max(s_frac, pmc.s_min), Fraction(1))
        raw[ji, mu] = [(s_frac, work / (float(s_frac) * dt))]
    entries = finalize_entries(raw, windows, grid, m)
    plan = WorkloadPlan(NLP_DVFS, ts, pmc, m, grid, windows, entries,
                        lp_problem=lp, lp_solution=sol)
    plan.formulation_objective = plan.objective
    return plan


# -- global static baselines ----------------------------------------------------

@dataclass
class StaticAllocation:
    """Constant per-processor speeds with per-task density shares."""

    algorithm: str
    taskset: Taskset
    power: PowerModel
    m: int
    speeds: List[Fraction]
    u: Dict[Tuple[str, int], Fraction]
    objective: float
    y: Dict[Tuple[str, int], float] = field(default_factory=dict)
    levels: List[int] = field(default_factory=list)
    enumerated: int = 0

    def task_share(self, task_id: str) -> Dict[Fraction, Fraction]:
        """Fraction of the task's work executed at each speed."""
        task = self.taskset.task(task_id)
        out: Dict[Fraction, Fraction] = {}
        for k, s in enumerate(self.speeds):
            u = self.u.get((task_id, k), Fraction(0))
            if u > 0 and task.work > 0:
                out[s] = out.get(s, Fraction(0)) + u / density(task, s)
        return out

    def check(self, tol: float = 1e-9) -> List[str]:
        problems = []
        for t in self.taskset:
            if sum(float(self.u.get((t.id, k), 0)) for k in range(self.m)) > 1 + tol:
                problems.append(f"task {t.id} exceeds one processor")
            if t.work > 0 and abs(float(sum(self.task_share(t.id).values())) - 1) > tol:
                problems.append(f"task {t.id} workload shares do not sum to one")
        for k in range(self.m):
            if sum(float(self.u.get((t.id, k), 0)) for t in self.taskset) > 1 + tol:
                problems.append(f"processor {k} over capacity")
            if not self.power.speed_ok(self.speeds[k]):
                problems.append(f"processor {k}: invalid speed {float(self.speeds[k])}")
        return problems

    def to_plan(self) -> WorkloadPlan:
        """Fluid plan running each job at its static rates.

        Each job runs during ``[arrival, arrival + min(deadline, period))``,
        at rate ``share * work / (speed * min(deadline, period))`` per speed,
        which completes exactly its work; at most one job per task is active at
        any time, so the density constraints bound every interval's load.
        """
        _, grid, windows = problem_structure(self.taskset)
        raw: Dict[Tuple[int, int], list] = {}
        for ji, w in enumerate(windows):
            task = self.taskset.task(w.job.task_id)
            stop = w.job.arrival + task.window
            shares = self.task_share(task.id)
            for mu in w.intervals:
                if grid.start(mu) >= stop:
                    break
                raw[ji, mu] = [(s, share * task.work / (s * task.window))
                               for s, share in shares.items()]
        entries = finalize_entries(raw, windows, grid, self.m)
        return WorkloadPlan(self.algorithm, self.taskset, self.power, self.m, grid, windows,
                            entries, formulation_objective=self.objective)


def _fill(ts: Taskset, m: int, demand: Dict[str, Fraction]) -> Dict[Tuple[str, int], Fraction]:
    """Wrap-around filling of per-task densities onto unit-capacity processors."""
    u: Dict[Tuple[str, int], Fraction] = {}
    k, used = 0, Fraction(0)
    for t in ts:
        left = demand[t.id]
        while left > 0:
            if k >= m:
                raise InfeasibleError("densities exceed processor capacity", "capacity")
            take = min(left, 1 - used)
            u[t.id, k] = u.get((t.id, k), Fraction(0)) + take
            left -= take
            used += take
            if used == 1:
                k, used = k + 1, Fraction(0)
    return u


def _static_precheck(ts: Taskset, m: int) -> None:
    worst = max(density(t, 1) for t in ts)
    if worst > 1:
        raise InfeasibleError(f"a task has density {float(worst):.6g} > 1", "window")
    _check_feasible(ts, m)


def _uniform_speed_allocation(alg: str, ts: Taskset, pm: PowerModel, m: int,
                              s: Fraction) -> StaticAllocation:
    L = hyperperiod(ts)
    D = minimum_density(ts)
    u = _fill(ts, m, {t.id: density(t, s) for t in ts})
    obj = float(L) * float(D / s) * pm.net_power(s)
    return StaticAllocation(alg, ts, pm, m, [s] * m, u, obj)


def gp_svfs_energy(ts: Taskset, pm: PowerModel, s: float) -> float:
    """Objective of the uniform static speed ``s``: L * (D/s) * net power."""
    return float(hyperperiod(ts)) * float(minimum_density(ts)) / s * pm.net_power(s)


def gp_svfs_lower_speed(ts: Taskset, pm: PowerModel, m: int) -> Fraction:
    D = minimum_density(ts)
    worst = max(density(t, 1) for t in ts)
    return max(pm.s_min, D / m, worst)


def solve_gp_svfs(ts: Taskset, pm: PowerModel, m: int) -> StaticAllocation:
    """Best common static speed; ties go to the slowest feasible speed."""
    _static_precheck(ts, m)
    pmc = pm.continuous()
    lo = gp_svfs_lower_speed(ts, pmc, m)
    if lo >= 1:
        s = Fraction(1)
    else:
        x, _ = golden_section(lambda v: gp_svfs_energy(ts, pmc, v), float(lo), 1.0,
                              tol=1e-10, prefer="low")
        if x <= float(lo) + 1e-12:
            s = lo
        else:
            s = max(lo, Fraction(x).limit_denominator(MAX_DENOMINATOR))
    return _uniform_speed_allocation(GP_SVFS, ts, pmc, m, s)


def solve_gp_nodvfs(ts: Taskset, pm: PowerModel, m: int) -> StaticAllocation:
    _static_precheck(ts, m)
    return _uniform_speed_allocation(GP_NODVFS, ts, pm, m, Fraction(1))


def speed_assignments(num_levels: int, m: int):
    """Level multisets for ``m`` identical processors, lexicographic order."""
    return list(itertools.combinations_with_replacement(range(num_levels), m))


def solve_gp_sdiscrete(ts: Taskset, pm: PowerModel, m: int) -> StaticAllocation:
    """Enumerate processor speed levels; split task workloads by an LP."""
    if not pm.speed_levels:
        raise ValueError("gp-sdiscrete needs a power model with discrete speed levels")
    levels = list(pm.speed_levels)
    if len(levels) ** m > ENUMERATION_LIMIT:
        raise ValueError(f"{len(levels)}^{m} speed assignments exceed the enumeration limit")
    _static_precheck(ts, m)
    L = float(hyperperiod(ts))
    tasks = list(ts)
    best = None
    combos = speed_assignments(len(levels), m)
    for combo in combos:
        sp = [levels[q] for q in combo]
        lp = LpProblem()
        var = {}
        for t in tasks:
            for k, s in enumerate(sp):
                var[t.id, k] = lp.add_variable(L * float(density(t, s)) * pm.net_power(s), 0.0, 1.0)
        for t in tasks:
            lp.add_constraint({var[t.id, k]: 1.0 for k in range(m)}, "=", 1.0)
            lp.add_constraint({var[t.id, k]: float(density(t, s)) for k, s in enumerate(sp)},
                              "<=", 1.0)
        for k, s in enumerate(sp):
            lp.add_constraint({var[t.id, k]: float(density(t, s)) for t in tasks}, "<=", 1.0)
        sol = solve_lp(lp)
        if not sol.optimal:
            continue
        if best is None or sol.objective < best[0] - 1e-12 * (1 + abs(best[0])):
            best = (sol.objective, combo, sp, {key: float(sol.x[j]) for key, j in var.items()})
    if best is None:
        raise InfeasibleError("no speed-level assignment admits a feasible split", "capacity")
    obj, combo, sp, y = best
    u = {key: _to_fraction(val) * density(ts.task(key[0]), sp[key[1]])
         for key, val in y.items() if val > 0}
    return StaticAllocation(GP_SDISCRETE, ts, pm, m, sp, u, obj, y=y, levels=list(combo),
                            enumerated=len(combos))


def solve(algorithm: str, ts: Taskset, pm: PowerModel, m: int, grid_levels: int = 256):
    """Dispatch by name; returns ``(plan, allocation_or_None)``."""
    if algorithm == LP_DVFS:
        return solve_lp_dvfs(ts, pm, m), None
    if algorithm == NLP_DVFS:
        return solve_nlp_dvfs(ts, pm, m, grid_levels), None
    if algorithm == GP_SVFS:
        alloc = solve_gp_svfs(ts, pm, m)
    elif algorithm == GP_NODVFS:
        alloc = solve_gp_nodvfs(ts, pm, m)
    elif algorithm == GP_SDISCRETE:
        alloc = solve_gp_sdiscrete(ts, pm, m)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return alloc.to_plan(), alloc
