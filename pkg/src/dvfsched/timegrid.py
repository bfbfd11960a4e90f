"""Deadline-partitioned major grid and job windows."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from .taskmodel import Job


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing instants ``0 = t_0 < ... < t_N = horizon``."""

    instants: Tuple[Fraction, ...]

    def __post_init__(self) -> None:
        inst = tuple(Fraction(t) for t in self.instants)
        object.__setattr__(self, "instants", inst)
        if len(inst) < 2 or inst[0] != 0:
            raise ValueError("grid must start at 0 and contain at least one interval")
        if any(b <= a for a, b in zip(inst, inst[1:])):
            raise ValueError("grid instants must be strictly increasing")

    @property
    def N(self) -> int:
        return len(self.instants) - 1

    @property
    def horizon(self) -> Fraction:
        return self.instants[-1]

    def start(self, mu: int) -> Fraction:
        return self.instants[mu]

    def end(self, mu: int) -> Fraction:
        return self.instants[mu + 1]

    def length(self, mu: int) -> Fraction:
        return self.instants[mu + 1] - self.instants[mu]

    def lengths(self) -> List[Fraction]:
        return [self.length(mu) for mu in range(self.N)]

    def index_of(self, t: Fraction) -> int:
        i = bisect.bisect_left(self.instants, t)
        if i == len(self.instants) or self.instants[i] != t:
            raise KeyError(f"instant {t} is not on the grid")
        return i

    def interval_containing(self, t: Fraction) -> int:
        """Index of the interval ``[t_mu, t_mu+1)`` containing ``t``."""
        if not 0 <= t < self.horizon:
            raise ValueError(f"{t} outside [0, {self.horizon})")
        return bisect.bisect_right(self.instants, t) - 1


@dataclass(frozen=True)
class JobWindow:
    job: Job
    first_interval: int
    last_interval: int

    @property
    def intervals(self) -> range:
        return range(self.first_interval, self.last_interval + 1)

    def alive(self, mu: int) -> bool:
        return self.first_interval <= mu <= self.last_interval


def build_major_grid(jobs: Iterable[Job], horizon: Fraction,
                     extra: Optional[Sequence[Fraction]] = None) -> TimeGrid:
    points = {Fraction(0), Fraction(horizon)}
    for job in jobs:
        if job.deadline > horizon:
            raise ValueError(f"job {job} deadline {job.deadline} beyond horizon {horizon}")
        points.add(job.arrival)
        points.add(job.deadline)
    for t in extra or ():
        if 0 < t < horizon:
            points.add(Fraction(t))
    return TimeGrid(tuple(sorted(points)))


def job_windows(jobs: Iterable[Job], grid: TimeGrid) -> List[JobWindow]:
    windows = []
    for job in jobs:
        try:
            first = grid.index_of(job.arrival)
            last = grid.index_of(job.deadline) - 1
        except KeyError as exc:
            raise ValueError(f"grid inconsistent with job {job}: {exc}") from None
        if last < first:
            raise ValueError(f"job {job} has an empty window")
        windows.append(JobWindow(job, first, last))
    return windows
