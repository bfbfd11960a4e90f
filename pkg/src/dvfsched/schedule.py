"""Executable multiprocessor schedules.

A :class:`WorkloadPlan` is turned into per-processor segments with
McNaughton's wrap-around rule, one major interval at a time. Schedules are
checked against the continuous-time constraints (release, deadline, work
completion, one job per processor, one processor per job, speed bounds), and
can be re-expressed as a point of the variable-step mixed-integer program
whose minor grid is the set of segment breakpoints.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .power import PowerModel
from .taskmodel import Taskset, as_fraction, fraction_str
from .timegrid import TimeGrid

WORK_TOL = 1e-6


@dataclass(frozen=True)
class Segment:
    """Job ``(task, job)`` on processor ``proc`` (1-based) at ``speed`` over [start, end)."""

    proc: int
    task: str
    job: int
    speed: Fraction
    start: Fraction
    end: Fraction

    @property
    def duration(self) -> Fraction:
        return self.end - self.start

    @property
    def work(self) -> Fraction:
        return self.duration * self.speed

    @property
    def job_key(self) -> Tuple[str, int]:
        return (self.task, self.job)


@dataclass
class Schedule:
    m: int
    horizon: Fraction
    segments: List[Segment] = field(default_factory=list)
    validated: bool = False

    def __post_init__(self) -> None:
        self.horizon = as_fraction(self.horizon)
        self.segments = sorted(self.segments, key=lambda s: (s.proc, s.start, s.end, s.task, s.job))

    def by_processor(self) -> Dict[int, List[Segment]]:
        out: Dict[int, List[Segment]] = defaultdict(list)
        for seg in self.segments:
            out[seg.proc].append(seg)
        return out

    def by_job(self) -> Dict[Tuple[str, int], List[Segment]]:
        out: Dict[Tuple[str, int], List[Segment]] = defaultdict(list)
        for seg in self.segments:
            out[seg.job_key].append(seg)
        for segs in out.values():
            segs.sort(key=lambda s: (s.start, s.proc))
        return out

    def objective_energy(self, pm: PowerModel) -> float:
        return math.fsum(float(s.duration) * pm.net_power(s.speed) for s in self.segments)


class PackingError(ValueError):
    pass


def mcnaughton_interval(chunks: Sequence[Tuple[str, int, Fraction, Fraction]], m: int,
                        start: Fraction, length: Fraction) -> List[Segment]:
    """Wrap-around packing of ``(task, job, speed, duration)`` chunks.

    Chunks are laid end to end on ``[0, m * length)`` in the given order; the
    piece that crosses a multiple of ``length`` continues at the start of the
    next processor. A job whose chunks total at most ``length`` therefore
    never runs on two processors at once.
    """
    total = sum((c[3] for c in chunks), Fraction(0))
    if total > m * length:
        raise PackingError(f"chunks need {float(total):.9g} > capacity {float(m * length):.9g}")
    per_job: Dict[Tuple[str, int], Fraction] = defaultdict(Fraction)
    for task, job, _, dur in chunks:
        per_job[task, job] += dur
    for key, dur in per_job.items():
        if dur > length:
            raise PackingError(f"job {key} needs {float(dur):.9g} > interval {float(length):.9g}")
    segments = []
    pos = Fraction(0)
    for task, job, speed, dur in chunks:
        left = dur
        while left > 0:
            k = int(pos // length)
            offset = pos - k * length
            take = min(left, length - offset)
            segments.append(Segment(k + 1, task, job, speed, start + offset, start + offset + take))
            pos += take
            left -= take
    return segments


def interval_chunks(plan, mu: int) -> List[Tuple[str, int, Fraction, Fraction]]:
    """Chunks of interval ``mu`` in (job order, descending speed) order."""
    dt = plan.grid.length(mu)
    out = []
    for ji, w in enumerate(plan.windows):
        for s, a in plan.chunks(ji, mu):
            if a > 0:
                out.append((w.job.task_id, w.job.index, s, a * dt))
    return out


def _pack_groups(groups, m: int, length: Fraction, cuts: frozenset):
    """Wrap-around layout where processor ``k`` may close early.

    ``cuts`` holds group positions before which the layout jumps to the next
    processor boundary, turning the rest of the current processor into idle
    time. Returns ``(proc, task, job, speed, start, end)`` offsets, or None if
    the layout does not fit.
    """
    pieces = []
    pos = Fraction(0)
    for gi, group in enumerate(groups):
        if gi in cuts:
            pos = (pos // length + 1) * length if pos % length else pos
        for task, job, speed, dur in group:
            left = dur
            while left > 0:
                k = int(pos // length)
                if k >= m:
                    return None
                offset = pos - k * length
                take = min(left, length - offset)
                pieces.append((k + 1, task, job, speed, offset, offset + take))
                pos += take
                left -= take
    return pieces


def _layout_score(pieces, length: Fraction):
    points = {Fraction(0), length}
    for p in pieces:
        points.add(p[4])
        points.add(p[5])
    procs = defaultdict(set)
    for p in pieces:
        procs[p[1], p[2], p[3]].add(p[0])
    splits = sum(1 for v in procs.values() if len(v) > 1)
    return len(points) - 1, splits


SEARCH_MAX_JOBS = 6


def compact_interval(chunks: Sequence[Tuple[str, int, Fraction, Fraction]], m: int,
                     start: Fraction, length: Fraction) -> List[Segment]:
    """Wrap-around packing that minimizes the number of distinct breakpoints.

    Candidate layouts vary the job order, the order of a job's speed chunks
    and where idle time is inserted (a processor may close before it is
    full). Jobs stay contiguous on the number line and at most ``m - 1``
    pieces wrap, so the wrap-around guarantees are unchanged. The plain
    (job order, descending speed) layout is tried first and wins ties.
    """
    mcnaughton_interval(chunks, m, start, length)  # capacity checks
    groups: List[list] = []
    for c in chunks:
        if groups and groups[-1][0][:2] == c[:2]:
            groups[-1].append(c)
        else:
            groups.append([c])
    n = len(groups)
    if n == 0:
        return []
    if n <= SEARCH_MAX_JOBS:
        orders = itertools.permutations(range(n))
    else:
        orders = iter([tuple(range(n))])
    multi = [i for i, g in enumerate(groups) if len(g) > 1]
    cut_sets = [frozenset(c) for r in range(min(m - 1, n - 1) + 1)
                for c in itertools.combinations(range(1, n), r)]
    best = None
    for order in orders:
        for flips in itertools.product((False, True), repeat=len(multi) if n <= SEARCH_MAX_JOBS else 0):
            flipped = dict(zip(multi, flips))
            seq = [list(reversed(groups[i])) if flipped.get(i) else groups[i] for i in order]
            for cuts in cut_sets:
                pieces = _pack_groups(seq, m, length, cuts)
                if pieces is None:
                    continue
                score = _layout_score(pieces, length)
                if best is None or score < best[0]:
                    best = (score, pieces)
    return [Segment(k, task, job, speed, start + a, start + b)
            for k, task, job, speed, a, b in best[1]]


def realize(plan, compact: bool = True) -> Schedule:
    """Per-interval wrap-around schedule of a workload plan.

    With ``compact`` the plan is first consolidated (work of multi-interval
    jobs gathered into fewer intervals, same energy) and each interval's
    layout is chosen by :func:`compact_interval`; otherwise the plain
    McNaughton order is used on the plan as given.
    """
    from .formulations import consolidate

    if compact:
        plan = consolidate(plan)
    pack = compact_interval if compact else mcnaughton_interval
    segments: List[Segment] = []
    for mu in range(plan.grid.N):
        segments.extend(pack(interval_chunks(plan, mu), plan.m,
                             plan.grid.start(mu), plan.grid.length(mu)))
    return Schedule(plan.m, plan.horizon, segments)


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.where}: {self.detail}"


@dataclass
class ValidationReport:
    ok: bool
    violations: List[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def text(self) -> str:
        if self.ok:
            return "schedule valid"
        return "\n".join(str(v) for v in self.violations)


def _overlaps(segs: List[Segment]):
    segs = sorted(segs, key=lambda s: (s.start, s.end))
    for a, b in zip(segs, segs[1:]):
        if b.start < a.end:
            yield a, b


def validate(sched: Schedule, ts: Taskset, pm: PowerModel, m: int,
             work_tol: float = WORK_TOL) -> ValidationReport:
    """Check a schedule against the fluid scheduling constraints.

    Violation kinds: ``processor-count``, ``processor-index``,
    ``segment-length``, ``horizon``, ``unknown-job``, ``release``,
    ``deadline``, ``speed-range``/``speed-level``, ``processor-overlap``,
    ``parallelism`` and ``work-completion``. On success the schedule is
    marked validated.
    """
    from .formulations import problem_structure

    out: List[Violation] = []
    if sched.m != m:
        out.append(Violation("processor-count", "schedule", f"built for m={sched.m}, checked with m={m}"))
    jobs = {w.job.key: w.job for w in problem_structure(ts)[2]}
    speed_kind = "speed-level" if pm.speed_levels else "speed-range"
    for seg in sched.segments:
        where = f"P{seg.proc} {seg.task}#{seg.job} [{float(seg.start):g}, {float(seg.end):g})"
        if not 1 <= seg.proc <= m:
            out.append(Violation("processor-index", where, f"processor outside 1..{m}"))
        if seg.end <= seg.start:
            out.append(Violation("segment-length", where, "non-positive duration"))
        if seg.start < 0 or seg.end > sched.horizon:
            out.append(Violation("horizon", where, f"outside [0, {float(sched.horizon):g}]"))
        job = jobs.get(seg.job_key)
        if job is None:
            out.append(Violation("unknown-job", where, "no such job in the taskset"))
            continue
        if seg.start < job.arrival:
            out.append(Violation("release", where, f"starts before release at {float(job.arrival):g}"))
        if seg.end > job.deadline:
            out.append(Violation("deadline", where, f"runs past deadline {float(job.deadline):g}"))
        if not pm.speed_ok(seg.speed):
            out.append(Violation(speed_kind, where, f"speed {float(seg.speed):g} not allowed"))
    for proc, segs in sorted(sched.by_processor().items()):
        for a, b in _overlaps(segs):
            out.append(Violation("processor-overlap", f"P{proc}",
                                 f"{a.task}#{a.job} and {b.task}#{b.job} overlap at {float(b.start):g}"))
    by_job = sched.by_job()
    for key, segs in sorted(by_job.items()):
        for a, b in _overlaps(segs):
            if a.proc != b.proc:
                out.append(Violation("parallelism", f"{key[0]}#{key[1]}",
                                     f"runs on P{a.proc} and P{b.proc} at {float(b.start):g}"))
    for key, job in sorted(jobs.items()):
        done = sum((s.work for s in by_job.get(key, [])), Fraction(0))
        if abs(float(done - job.work)) > work_tol:
            out.append(Violation("work-completion", f"{key[0]}#{key[1]}",
                                 f"executes {float(done):.9g} of {float(job.work):.9g}"))
    sched.validated = not out
    return ValidationReport(not out, out)


@dataclass
class IntervalStats:
    interval: int
    chunks: int
    splits: int
    migrations: int


def interval_stats(sched: Schedule, grid: TimeGrid) -> List[IntervalStats]:
    """Preemption/migration counts per major interval.

    ``chunks`` counts distinct (job, speed) pieces, ``splits`` the pieces cut
    across a processor boundary, ``migrations`` the extra processors each job
    visits within the interval.
    """
    stats = []
    for mu in range(grid.N):
        lo, hi = grid.start(mu), grid.end(mu)
        segs = [s for s in sched.segments if s.start < hi and s.end > lo]
        pieces = defaultdict(set)
        procs = defaultdict(set)
        for s in segs:
            pieces[s.task, s.job, s.speed].add(s.proc)
            procs[s.task, s.job].add(s.proc)
        stats.append(IntervalStats(mu, len(pieces),
                                   sum(1 for p in pieces.values() if len(p) > 1),
                                   sum(len(p) - 1 for p in procs.values())))
    return stats


# -- variable-step mixed-integer point ------------------------------------------

@dataclass
class MinlpPoint:
    """Minor grid, binary assignments, speeds and states read off a schedule.

    ``minor[mu]`` holds the instants ``t_mu = t_mu,0 < ... < t_mu,M = t_mu+1``
    and ``steps[mu]`` the matching step lengths. ``assign`` maps
    ``(task, job, proc, mu, nu)`` to the speed of every slot with a unit
    assignment; unlisted slots are zero. ``states`` maps each job to its
    remaining work at every minor instant, in time order.
    """

    grid: TimeGrid
    m: int
    minor: List[List[Fraction]]
    steps: List[List[Fraction]]
    assign: Dict[Tuple[str, int, int, int, int], Fraction]
    states: Dict[Tuple[str, int], List[Tuple[Fraction, Fraction]]]

    @property
    def M(self) -> int:
        return max(len(h) for h in self.steps)

    def verify(self, ts: Taskset, pm: PowerModel, tol: float = WORK_TOL) -> List[str]:
        from .formulations import problem_structure

        problems: List[str] = []
        jobs = {w.job.key: w.job for w in problem_structure(ts)[2]}
        for mu, (pts, hs) in enumerate(zip(self.minor, self.steps)):
            if any(h < 0 for h in hs):
                problems.append(f"negative step in interval {mu}")
            if sum(hs, Fraction(0)) != self.grid.length(mu):
                problems.append(f"steps of interval {mu} do not sum to its length")
            if pts[0] != self.grid.start(mu) or pts[-1] != self.grid.end(mu):
                problems.append(f"minor grid of interval {mu} does not span it")
        per_job_slot = defaultdict(int)
        per_proc_slot = defaultdict(int)
        for (task, j, k, mu, nu), s in self.assign.items():
            per_job_slot[task, j, mu, nu] += 1
            per_proc_slot[k, mu, nu] += 1
            if not 1 <= k <= self.m:
                problems.append(f"assignment to processor {k} outside 1..{self.m}")
            if not float(pm.s_min) - 1e-12 <= float(s) <= 1 + 1e-12:
                problems.append(f"speed {float(s)} outside [s_min, 1] for {task}#{j}")
        problems += [f"{t}#{j} on several processors in slot ({mu},{nu})"
                     for (t, j, mu, nu), c in per_job_slot.items() if c > 1]
        problems += [f"processor {k} runs several jobs in slot ({mu},{nu})"
                     for (k, mu, nu), c in per_proc_slot.items() if c > 1]
        for key, job in jobs.items():
            traj = self.states.get(key)
            if traj is None:
                problems.append(f"no state trajectory for {key[0]}#{key[1]}")
                continue
            at = dict(traj)
            if job.arrival not in at or job.deadline not in at:
                problems.append(f"{key[0]}#{key[1]}: release or deadline not on the minor grid")
                continue
            if abs(float(at[job.arrival] - job.work)) > tol:
                problems.append(f"{key[0]}#{key[1]}: state at release is {float(at[job.arrival]):.9g}")
            if abs(float(at[job.deadline])) > tol:
                problems.append(f"{key[0]}#{key[1]}: state at deadline is {float(at[job.deadline]):.9g}")
            if any(t > job.deadline and abs(float(x)) > tol for t, x in traj):
                problems.append(f"{key[0]}#{key[1]}: executes after its deadline")
        return problems


def minlp_point(sched: Schedule, ts: Taskset, pm: PowerModel,
                grid: Optional[TimeGrid] = None) -> Tuple[MinlpPoint, List[str]]:
    """Express a schedule on a variable-step minor grid and verify it.

    The minor grid of each major interval is the set of segment breakpoints
    inside it; the state recursion subtracts ``step * speed`` for every slot
    a job occupies. Returns the point and the list of violated constraints.
    """
    from .formulations import problem_structure

    _, g, windows = problem_structure(ts)
    grid = grid or g
    jobs = [w.job for w in windows]
    minor, steps = [], []
    assign: Dict[Tuple[str, int, int, int, int], Fraction] = {}
    for mu in range(grid.N):
        lo, hi = grid.start(mu), grid.end(mu)
        pts = {lo, hi}
        segs = [s for s in sched.segments if s.start < hi and s.end > lo]
        for s in segs:
            pts.add(max(s.start, lo))
            pts.add(min(s.end, hi))
        pts = sorted(pts)
        minor.append(pts)
        steps.append([b - a for a, b in zip(pts, pts[1:])])
        for s in segs:
            for nu, (a, b) in enumerate(zip(pts, pts[1:])):
                if s.start <= a and b <= s.end:
                    key = (s.task, s.job, s.proc, mu, nu)
                    if key in assign:  # overlapping segments on one processor
                        assign[key + (len(assign),)] = s.speed
                    assign[key] = s.speed
    rate = defaultdict(Fraction)
    for (task, j, k, mu, nu, *_), s in assign.items():
        rate[task, j, mu, nu] += s
    states = {}
    for job in jobs:
        x = job.work
        traj = [(Fraction(0), x)]
        for mu in range(grid.N):
            for nu, h in enumerate(steps[mu]):
                x = x - h * rate.get((job.task_id, job.index, mu, nu), Fraction(0))
                traj.append((minor[mu][nu + 1], x))
        states[job.key] = traj
    point = MinlpPoint(grid, sched.m, minor, steps, assign, states)
    problems = point.verify(ts, pm)
    if any(len(key) > 5 for key in assign):
        problems.append("overlapping segments on one processor")
    for job in jobs:
        for (task, j, k, mu, nu, *_), _s in assign.items():
            if (task, j) == job.key and minor[mu][nu] < job.arrival:
                problems.append(f"{task}#{j} executes before its release")
                break
    return point, problems


# -- files --------------------------------------------------------------------

def schedule_to_dict(sched: Schedule) -> dict:
    return {"m": sched.m, "horizon": fraction_str(sched.horizon),
            "segments": [{"proc": s.proc, "task": s.task, "job": s.job,
                          "speed": float(s.speed), "speed_exact": fraction_str(s.speed),
                          "start": fraction_str(s.start), "end": fraction_str(s.end)}
                         for s in sched.segments]}


def schedule_from_dict(doc: dict) -> Schedule:
    try:
        segs = [Segment(int(s["proc"]), str(s["task"]), int(s["job"]),
                        as_fraction(s.get("speed_exact", s["speed"])),
                        as_fraction(s["start"]), as_fraction(s["end"]))
                for s in doc["segments"]]
        return Schedule(int(doc["m"]), as_fraction(doc["horizon"]), segs)
    except KeyError as exc:
        raise ValueError(f"schedule is missing field {exc}") from None


def dump_schedule(sched: Schedule, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(schedule_to_dict(sched), indent=1) + "\n")


def load_schedule(path: Union[str, Path]) -> Schedule:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(), parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    try:
        return schedule_from_dict(doc)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from None


GANTT_FIELDS = ("proc", "task", "job", "speed", "start", "end")


def gantt_csv(sched: Schedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GANTT_FIELDS)
    for s in sched.segments:
        w.writerow([s.proc, s.task, s.job, f"{float(s.speed):.10g}",
                    f"{float(s.start):.10g}", f"{float(s.end):.10g}"])
    return buf.getvalue()
