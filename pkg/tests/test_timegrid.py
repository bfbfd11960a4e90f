from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from dvfsched.bundled import bundled_taskset
from dvfsched.formulations import problem_structure
from dvfsched.taskmodel import expand_jobs, make_taskset
from dvfsched.timegrid import TimeGrid, build_major_grid, job_windows


def test_benchmark_grid():
    _, grid, _ = problem_structure(bundled_taskset("d04"))
    assert grid.instants == (0, 5, 10) and grid.N == 2


def test_single_task_grid():
    ts = make_taskset([(1, 10, 10)])
    grid = build_major_grid(expand_jobs(ts), F(10))
    assert grid.instants == (0, 10) and grid.N == 1


def test_constrained_deadline_grid_and_window():
    ts = make_taskset([(1, 3, 5)])
    jobs = expand_jobs(ts)
    grid = build_major_grid(jobs, F(5))
    assert grid.instants == (0, 3, 5)
    (w,) = job_windows(jobs, grid)
    assert list(w.intervals) == [0] and not w.alive(1)


def test_second_job_window():
    ts = make_taskset([(1, 5, 5)])
    jobs = expand_jobs(ts, F(10))
    grid = build_major_grid(jobs, F(10))
    wins = job_windows(jobs, grid)
    assert grid.instants == (0, 5, 10)
    assert list(wins[1].intervals) == [1]


def test_spanning_job_covers_all_intervals():
    ts = make_taskset([(1, 5, 10), (1, 10, 10)])
    jobs = expand_jobs(ts)
    wins = job_windows(jobs, build_major_grid(jobs, F(10)))
    assert list(wins[1].intervals) == [0, 1]


def test_grid_helpers_and_errors():
    g = TimeGrid((0, F(1, 2), 2))
    assert g.lengths() == [F(1, 2), F(3, 2)]
    assert g.interval_containing(F(1, 2)) == 1
    assert g.index_of(2) == 2
    with pytest.raises(KeyError):
        g.index_of(1)
    with pytest.raises(ValueError):
        TimeGrid((0, 1, 1))
    with pytest.raises(ValueError):
        g.interval_containing(F(2))


@given(st.lists(st.tuples(st.integers(0, 9), st.sampled_from([1, 2, 3, 4, 5, 6])),
                min_size=1, max_size=4))
def test_windows_partition_job_lifetimes(spec):
    ts = make_taskset([(F(w, 10), d, p) for w, (d, p) in
                       zip([s[0] for s in spec], [(s[1], s[1] + i % 2) for i, s in enumerate(spec)])])
    jobs, grid, wins = problem_structure(ts)
    for w in wins:
        assert grid.start(w.first_interval) == w.job.arrival
        assert grid.end(w.last_interval) == w.job.deadline
    assert sum(grid.lengths()) == grid.horizon
