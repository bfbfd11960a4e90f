import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from oracles import vertex_enumeration

from dvfsched.bundled import bundled_processor, bundled_taskset
from dvfsched.formulations import solve_lp_dvfs
from dvfsched.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, certify, solve_lp)


def test_single_variable():
    p = LpProblem()
    x = p.add_variable(-1, 0, 10)
    p.add_constraint({x: 1}, "<=", 1)
    sol = solve_lp(p)
    assert sol.status == OPTIMAL
    assert sol.x[0] == pytest.approx(1) and sol.objective == pytest.approx(-1)
    assert certify(p, sol).ok


def test_degenerate_optimum():
    p = LpProblem()
    x, y = p.add_variable(1, 0, 3), p.add_variable(1, 0, 3)
    p.add_constraint({x: 1, y: 1}, ">=", 2)
    sol = solve_lp(p)
    assert sol.objective == pytest.approx(2)
    assert certify(p, sol).ok


def test_infeasible_and_unbounded():
    p = LpProblem()
    x = p.add_variable(1, 0, 1)
    p.add_constraint({x: 1}, ">=", 2)
    assert solve_lp(p).status == INFEASIBLE
    q = LpProblem()
    x = q.add_variable(-1)
    y = q.add_variable(0)
    q.add_constraint({x: 1, y: -1}, "<=", 1)
    assert solve_lp(q).status == UNBOUNDED


def test_bad_input():
    p = LpProblem()
    with pytest.raises(ValueError):
        p.add_variable(1, 2, 1)
    x = p.add_variable(1)
    with pytest.raises(ValueError):
        p.add_constraint({x: 1}, "<", 1)
    with pytest.raises(IndexError):
        p.add_constraint({3: 1}, "=", 1)


def test_certificate_rejects_perturbed_solution():
    p = LpProblem()
    x, y = p.add_variable(1, 0, 3), p.add_variable(2, 0, 3)
    p.add_constraint({x: 1, y: 1}, "=", 2)
    sol = solve_lp(p)
    assert certify(p, sol).ok
    bad = replace(sol, x=sol.x + 1e-3)
    assert not certify(p, bad).ok


def test_lp_dvfs_certificate_benchmark():
    pm = bundled_processor("xscale").model()
    plan = solve_lp_dvfs(bundled_taskset("d04"), pm, 2)
    cert = plan.certify()
    assert cert.ok and abs(cert.gap) <= 1e-7 * (1 + abs(cert.primal_objective))


def _random_equality_lp(rng, m=8, n=12):
    A = rng.uniform(-1, 1, (m, n))
    upper = rng.uniform(0.5, 2.0, n)
    b = A @ (rng.uniform(0, 1, n) * upper)
    c = rng.uniform(-1, 1, n)
    return A, b, c, upper


def test_random_8x12_against_vertex_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(5):
        A, b, c, upper = _random_equality_lp(rng)
        p = LpProblem()
        for j in range(12):
            p.add_variable(c[j], 0, upper[j])
        for i in range(8):
            p.add_constraint(dict(enumerate(A[i])), "=", b[i])
        sol = solve_lp(p)
        ref = vertex_enumeration(A, b, c, upper)
        assert sol.status == OPTIMAL
        assert abs(sol.objective - ref) <= 1e-7 * (1 + abs(ref))
        assert certify(p, sol).ok


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 8))
def test_matches_highs(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 4, (m, n)).astype(float)
    b = rng.integers(-4, 8, m).astype(float)
    c = rng.integers(-3, 4, n).astype(float)
    rel = rng.choice(["<=", ">=", "="], m)
    upper = np.where(rng.random(n) < 0.5, rng.integers(1, 5, n), np.inf)
    p = LpProblem()
    for j in range(n):
        p.add_variable(c[j], 0, upper[j])
    for i in range(m):
        p.add_constraint(dict(enumerate(A[i])), rel[i], b[i])
    sol = solve_lp(p)
    ub = [(A[i], b[i]) for i in range(m) if rel[i] == "<="] + \
         [(-A[i], -b[i]) for i in range(m) if rel[i] == ">="]
    eq = [(A[i], b[i]) for i in range(m) if rel[i] == "="]
    ref = linprog(c, A_ub=np.array([r for r, _ in ub]) if ub else None,
                  b_ub=[v for _, v in ub] if ub else None,
                  A_eq=np.array([r for r, _ in eq]) if eq else None,
                  b_eq=[v for _, v in eq] if eq else None,
                  bounds=[(0, None if math.isinf(u) else u) for u in upper], method="highs")
    expected = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert sol.status == expected
    if expected == OPTIMAL:
        assert sol.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
        assert certify(p, sol).ok


def test_deterministic():
    rng = np.random.default_rng(3)
    A, b, c, upper = _random_equality_lp(rng)
    p = LpProblem()
    for j in range(12):
        p.add_variable(c[j], 0, upper[j])
    for i in range(8):
        p.add_constraint(dict(enumerate(A[i])), "=", b[i])
    s1, s2 = solve_lp(p), solve_lp(p)
    assert np.array_equal(s1.x, s2.x) and s1.iterations == s2.iterations
