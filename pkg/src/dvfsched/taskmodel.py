"""Periodic tasks, jobs and tasksets with exact rational time arithmetic."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Iterable, List, Sequence, Union

Number = Union[int, float, str, Fraction]


def as_fraction(value: Number) -> Fraction:
    """Convert ``value`` to an exact rational.

    Strings may be ``"num/den"`` or decimal literals; floats are converted via
    their shortest decimal representation so ``0.15`` becomes ``3/20`` rather
    than the binary approximation.

    >>> as_fraction("3/2"), as_fraction(0.15)
    (Fraction(3, 2), Fraction(3, 20))
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not valid rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def fraction_str(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Task:
    """A periodic task ``(work, deadline, period)``.

    ``work`` is the execution time at full speed, i.e. required cycles divided
    by the maximum frequency.
    """

    id: str
    work: Fraction
    deadline: Fraction
    period: Fraction

    def __post_init__(self) -> None:
        for name in ("work", "deadline", "period"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.period <= 0:
            raise ValueError(f"task {self.id}: period must be positive")
        if self.deadline <= 0:
            raise ValueError(f"task {self.id}: deadline must be positive")
        if self.work < 0:
            raise ValueError(f"task {self.id}: work must be non-negative")

    @property
    def window(self) -> Fraction:
        """min(deadline, period), the denominator of the task density."""
        return min(self.deadline, self.period)

    def density(self, speed: Number = 1) -> Fraction:
        return density(self, speed)


@dataclass(frozen=True)
class Job:
    task_id: str
    index: int
    arrival: Fraction
    deadline: Fraction
    work: Fraction

    @property
    def key(self) -> tuple:
        return (self.task_id, self.index)

    def __str__(self) -> str:
        return f"{self.task_id}#{self.index}"


@dataclass(frozen=True)
class Taskset:
    tasks: tuple
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ValueError("a taskset needs at least one task")
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate task ids in {ids}")

    @property
    def n(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def scaled(self, factor: Number) -> "Taskset":
        """Copy with every task's work multiplied by ``factor``."""
        f = as_fraction(factor)
        return Taskset(tuple(Task(t.id, t.work * f, t.deadline, t.period)
                             for t in self.tasks), name=self.name)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def hyperperiod(ts: Taskset) -> Fraction:
    """Least common multiple of the (rational) task periods.

    For rationals ``n_i/d_i`` in lowest terms the LCM is
    ``lcm(n_i) / gcd(d_i)``.

    >>> hyperperiod(Taskset([Task("a", 1, 2, Fraction(3, 2)), Task("b", 1, 2, 2)]))
    Fraction(6, 1)
    """
    periods = [t.period for t in ts.tasks]
    num = reduce(_lcm, (p.numerator for p in periods))
    den = reduce(math.gcd, (p.denominator for p in periods))
    return Fraction(num, den)


def density(task: Task, speed: Number = 1) -> Fraction:
    s = as_fraction(speed)
    if s <= 0:
        raise ValueError(f"speed must be positive, got {speed}")
    return task.work / (s * task.window)


def taskset_density(ts: Taskset, speed: Number = 1) -> Fraction:
    return sum((density(t, speed) for t in ts.tasks), Fraction(0))


def minimum_density(ts: Taskset) -> Fraction:
    return taskset_density(ts, 1)


def expand_jobs(ts: Taskset, L: Fraction | None = None) -> List[Job]:
    """All jobs released in ``[0, L)``, ordered by (task, index)."""
    if L is None:
        L = hyperperiod(ts)
    jobs = []
    for t in ts.tasks:
        count = L / t.period
        if count.denominator != 1:
            raise ValueError(f"{L} is not a multiple of period of task {t.id}")
        for j in range(1, int(count) + 1):
            arrival = (j - 1) * t.period
            jobs.append(Job(t.id, j, arrival, arrival + t.deadline, t.work))
    return jobs


def scheduling_horizon(ts: Taskset) -> Fraction:
    """Hyperperiod, extended to the latest job deadline when a window crosses it."""
    L = hyperperiod(ts)
    return max([L] + [j.deadline for j in expand_jobs(ts, L)])


@dataclass
class FeasibilityReport:
    ok: bool
    density: Fraction
    processors: int
    over_dense_tasks: List[str] = field(default_factory=list)
    messages: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def feasibility_check(ts: Taskset, m: int) -> FeasibilityReport:
    """Necessary-and-sufficient density test for global fluid scheduling."""
    if m < 1:
        raise ValueError("need at least one processor")
    D = minimum_density(ts)
    bad = [t.id for t in ts.tasks if density(t, 1) > 1]
    messages = []
    if D > m:
        messages.append(f"taskset density D={float(D):.6g} exceeds m={m} "
                        f"(a valid schedule requires D <= m)")
    for tid in bad:
        messages.append(f"task {tid} has density {float(density(ts.task(tid))):.6g} > 1 "
                        "and cannot finish on a single processor")
    return FeasibilityReport(ok=not messages, density=D, processors=m,
                             over_dense_tasks=bad, messages=messages)


# -- file format ---------------------------------------------------------------

def taskset_from_dict(doc: dict) -> Taskset:
    try:
        tasks = [Task(str(t["id"]), as_fraction(t["work"]), as_fraction(t["deadline"]),
                      as_fraction(t["period"])) for t in doc["tasks"]]
    except KeyError as exc:
        raise ValueError(f"taskset is missing field {exc}") from None
    return Taskset(tasks, name=str(doc.get("name", "")))


def taskset_to_dict(ts: Taskset) -> dict:
    return {"name": ts.name,
            "tasks": [{"id": t.id, "work": fraction_str(t.work),
                       "deadline": fraction_str(t.deadline),
                       "period": fraction_str(t.period)} for t in ts.tasks]}


def load_taskset(path: Union[str, Path]) -> Taskset:
    path = Path(path)
    with path.open() as fh:
        try:
            doc = json.load(fh, parse_float=Fraction)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    try:
        return taskset_from_dict(doc)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def make_taskset(triples: Iterable[Sequence[Number]], name: str = "") -> Taskset:
    """Build a taskset from ``(work, deadline, period)`` triples named T1..Tn."""
    return Taskset([Task(f"T{i}", *map(as_fraction, tri))
                    for i, tri in enumerate(triples, start=1)], name=name)
