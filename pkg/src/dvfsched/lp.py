"""Bounded-variable primal simplex with Bland's rule and a duality certificate.

Problems are stated as

    minimize    c @ x
    subject to  row_i(x)  (<=, =, >=)  rhs_i
                lower <= x <= upper

and solved with a two-phase revised simplex on a dense basis. The basis is
refactorized every iteration; instances in this package have at most a few
dozen rows, so this stays cheap while keeping round-off from accumulating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

INF = math.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical_failure"
ITERATION_LIMIT = "iteration_limit"

TOL_FEAS = 1e-9
TOL_DUAL = 1e-9
TOL_PIVOT = 1e-11

_RELATIONS = {"<=": "<=", "=": "=", "==": "=", ">=": ">="}


@dataclass
class Row:
    coeffs: Dict[int, float]
    relation: str
    rhs: float
    name: str = ""


@dataclass
class LpProblem:
    """Minimization LP built incrementally."""

    cost: List[float] = field(default_factory=list)
    lower: List[float] = field(default_factory=list)
    upper: List[float] = field(default_factory=list)
    rows: List[Row] = field(default_factory=list)
    names: List[str] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.cost)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_variable(self, cost: float = 0.0, lower: float = 0.0, upper: float = INF,
                     name: str = "") -> int:
        cost, lower, upper = float(cost), float(lower), float(upper)
        if not math.isfinite(cost):
            raise ValueError("objective coefficients must be finite")
        if lower > upper:
            raise ValueError(f"variable {name or len(self.cost)}: lower > upper")
        if lower == INF or upper == -INF:
            raise ValueError("bounds must admit a finite value")
        self.cost.append(cost)
        self.lower.append(lower)
        self.upper.append(upper)
        self.names.append(name)
        return len(self.cost) - 1

    def add_constraint(self, coeffs: Union[Mapping[int, float], Iterable[Tuple[int, float]]],
                       relation: str, rhs: float, name: str = "") -> int:
        if relation not in _RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        row: Dict[int, float] = {}
        for j, v in items:
            if not 0 <= j < self.num_vars:
                raise IndexError(f"variable index {j} out of range")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError("constraint coefficients must be finite")
            row[j] = row.get(j, 0.0) + v
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError("right-hand sides must be finite")
        self.rows.append(Row(row, _RELATIONS[relation], rhs, name))
        return len(self.rows) - 1

    def dense(self):
        """Return ``(A, b, c, lower, upper, relations)`` as numpy arrays."""
        A = np.zeros((self.num_rows, self.num_vars))
        for i, row in enumerate(self.rows):
            for j, v in row.coeffs.items():
                A[i, j] = v
        b = np.array([r.rhs for r in self.rows], dtype=float)
        return (A, b, np.array(self.cost, dtype=float), np.array(self.lower, dtype=float),
                np.array(self.upper, dtype=float), [r.relation for r in self.rows])


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals: Optional[np.ndarray] = None
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _pow2_scale(v: float) -> float:
    """Power of two nearest to 1/v, so scaling is exact in floating point."""
    if v <= 0 or not math.isfinite(v):
        return 1.0
    return 2.0 ** (-round(math.log2(v)))


def _equilibrate(A: np.ndarray):
    absA = np.abs(A)
    r = np.array([_pow2_scale(v) for v in (absA.max(axis=1) if A.size else [])])
    if A.shape[0] == 0:
        r = np.ones(0)
    absA = absA * r[:, None]
    col = absA.max(axis=0) if A.shape[0] else np.zeros(A.shape[1])
    cs = np.array([_pow2_scale(v) for v in col])
    return r, cs


class _Simplex:
    """Revised bounded-variable simplex on ``A x = b``."""

    # nonbasic states
    AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3

    def __init__(self, A, b, lo, hi, basis, x, state, max_iter):
        self.A, self.b, self.lo, self.hi = A, b, lo, hi
        self.basis = list(basis)
        self.x = x
        self.state = state
        self.max_iter = max_iter
        self.iterations = 0

    def _factor(self):
        B = self.A[:, self.basis]
        lu, piv = scipy.linalg.lu_factor(B, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.size and diag.min() <= 1e-13 * max(1.0, diag.max()):
            raise np.linalg.LinAlgError("singular basis")
        return lu, piv

    def _basic_values(self, fac):
        nonbasic = np.ones(self.A.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = scipy.linalg.lu_solve(fac, rhs, check_finite=False)

    def duals(self, cost):
        fac = self._factor()
        return scipy.linalg.lu_solve(fac, cost[self.basis], trans=1, check_finite=False)

    def run(self, cost) -> str:
        A, lo, hi, x, state = self.A, self.lo, self.hi, self.x, self.state
        fixed = lo == hi
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            try:
                fac = self._factor()
            except (np.linalg.LinAlgError, ValueError):
                return NUMERICAL
            self._basic_values(fac)
            y = scipy.linalg.lu_solve(fac, cost[self.basis], trans=1, check_finite=False)
            d = cost - A.T @ y
            movable = (state != self.BASIC) & ~fixed
            up = movable & (state != self.AT_UPPER) & (d < -TOL_DUAL)
            down = movable & (state != self.AT_LOWER) & (d > TOL_DUAL)
            eligible = np.flatnonzero(up | down)
            entering = -1
            if eligible.size:  # Bland: lowest eligible index
                entering = int(eligible[0])
                direction = 1 if up[entering] else -1
            if entering < 0:
                return OPTIMAL
            w = scipy.linalg.lu_solve(fac, A[:, entering], check_finite=False)
            # x_B(t) = x_B - direction * t * w
            step = INF
            leave_row = -1
            leave_to_upper = False
            ratios = []
            for r, jb in enumerate(self.basis):
                g = direction * w[r]
                if g > TOL_PIVOT and lo[jb] > -INF:
                    ratios.append((max(x[jb] - lo[jb], 0.0) / g, r, False))
                elif g < -TOL_PIVOT and hi[jb] < INF:
                    ratios.append((max(hi[jb] - x[jb], 0.0) / -g, r, True))
            if ratios:
                step = min(t for t, _, _ in ratios)
                cutoff = step + 1e-12 * (1.0 + step)
                ties = [(self.basis[r], r, up) for t, r, up in ratios if t <= cutoff]
                _, leave_row, leave_to_upper = min(ties)
            span = hi[entering] - lo[entering]
            self.iterations += 1
            if span < INF and span <= step:
                # bound flip, basis unchanged
                if state[entering] == self.AT_LOWER:
                    x[entering], state[entering] = hi[entering], self.AT_UPPER
                else:
                    x[entering], state[entering] = lo[entering], self.AT_LOWER
                continue
            if leave_row < 0:
                return UNBOUNDED
            x[entering] = x[entering] + direction * step
            jl = self.basis[leave_row]
            if leave_to_upper:
                x[jl], state[jl] = hi[jl], self.AT_UPPER
            else:
                x[jl], state[jl] = lo[jl], self.AT_LOWER
            self.basis[leave_row] = entering
            state[entering] = self.BASIC


def solve_lp(problem: LpProblem, max_iter: int = 100000) -> LpSolution:
    """Solve ``problem``; deterministic for identical input."""
    A0, b0, c0, lo0, hi0, rel = problem.dense()
    m, n = A0.shape
    if m == 0:
        x = np.where(c0 > 0, lo0, np.where(c0 < 0, hi0, np.where(np.isfinite(lo0), lo0,
                                                                   np.where(np.isfinite(hi0), hi0, 0.0))))
        if not np.all(np.isfinite(x)):
            return LpSolution(UNBOUNDED, message="objective unbounded along a free bound")
        return LpSolution(OPTIMAL, x=x, objective=float(c0 @ x), duals=np.zeros(0))

    r, cs = _equilibrate(A0)
    A = A0 * r[:, None] * cs[None, :]
    b = b0 * r
    lo = lo0 / cs
    hi = hi0 / cs
    c = c0 * cs
    cmax = float(np.abs(c).max()) if n else 0.0
    cscale = 1.0 / _pow2_scale(cmax) if cmax > 0 else 1.0
    c = c / cscale

    # slack columns: row + s = b with s >= 0 for <=, s <= 0 for >=
    slack_cols, slack_lo, slack_hi, slack_rows = [], [], [], []
    for i, rl in enumerate(rel):
        if rl == "<=":
            slack_rows.append(i); slack_lo.append(0.0); slack_hi.append(INF)
        elif rl == ">=":
            slack_rows.append(i); slack_lo.append(-INF); slack_hi.append(0.0)
    ns = len(slack_rows)
    S = np.zeros((m, ns))
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0

    x_struct = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    resid = b - A @ x_struct
    slack_of_row = {i: k for k, i in enumerate(slack_rows)}

    basis, art_rows, art_sign = [], [], []
    x_slack = np.zeros(ns)
    for i in range(m):
        k = slack_of_row.get(i)
        if k is not None and slack_lo[k] <= resid[i] <= slack_hi[k]:
            basis.append(n + k)
            x_slack[k] = resid[i]
        else:
            art_rows.append(i)
            art_sign.append(1.0 if resid[i] >= 0 else -1.0)
    na = len(art_rows)
    Art = np.zeros((m, na))
    for k, (i, sg) in enumerate(zip(art_rows, art_sign)):
        Art[i, k] = sg
        basis.append(n + ns + k)
    basis.sort(key=lambda j: (_row_of(j, n, slack_rows, art_rows)))

    Afull = np.hstack([A, S, Art])
    lo_full = np.concatenate([lo, slack_lo, np.zeros(na)])
    hi_full = np.concatenate([hi, slack_hi, np.full(na, INF)])
    x = np.concatenate([x_struct, x_slack, np.abs(resid[art_rows]) if na else np.zeros(0)])
    state = np.empty(n + ns + na, dtype=int)
    for j in range(n + ns + na):
        if np.isfinite(lo_full[j]) and x[j] == lo_full[j]:
            state[j] = _Simplex.AT_LOWER
        elif np.isfinite(hi_full[j]) and x[j] == hi_full[j]:
            state[j] = _Simplex.AT_UPPER
        else:
            state[j] = _Simplex.FREE
    state[basis] = _Simplex.BASIC

    spx = _Simplex(Afull, b, lo_full, hi_full, basis, x, state, max_iter)
    if na:
        c1 = np.concatenate([np.zeros(n + ns), np.ones(na)])
        status = spx.run(c1)
        if status != OPTIMAL:
            return LpSolution(status, iterations=spx.iterations, message="phase 1 failed")
        infeas = float(spx.x[n + ns:].sum())
        if infeas > TOL_FEAS * (1.0 + float(np.abs(b).max())):
            return LpSolution(INFEASIBLE, iterations=spx.iterations,
                              message=f"phase 1 residual {infeas:.3g}")
        # retire artificials: fixed at zero, never re-enter
        for k in range(na):
            j = n + ns + k
            spx.hi[j] = 0.0
            if spx.state[j] != _Simplex.BASIC:
                spx.x[j] = 0.0
                spx.state[j] = _Simplex.AT_LOWER
    c2 = np.concatenate([c, np.zeros(ns + na)])
    status = spx.run(c2)
    if status != OPTIMAL:
        return LpSolution(status, iterations=spx.iterations)
    try:
        y_s = spx.duals(c2)
    except np.linalg.LinAlgError:
        return LpSolution(NUMERICAL, iterations=spx.iterations)
    x_orig = spx.x[:n] * cs
    # clip round-off outside the box
    x_orig = np.minimum(np.maximum(x_orig, lo0), hi0)
    duals = y_s * r * cscale
    return LpSolution(OPTIMAL, x=x_orig, objective=float(c0 @ x_orig), duals=duals,
                      iterations=spx.iterations)


def _row_of(j, n, slack_rows, art_rows):
    if j < n + len(slack_rows):
        return slack_rows[j - n]
    return art_rows[j - n - len(slack_rows)]


@dataclass
class Certificate:
    ok: bool
    primal_residual: float
    dual_residual: float
    gap: float
    primal_objective: float
    dual_objective: float
    messages: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> dict:
        return {"ok": self.ok, "primal_residual": self.primal_residual,
                "dual_residual": self.dual_residual, "duality_gap": self.gap,
                "primal_objective": self.primal_objective,
                "dual_objective": self.dual_objective}


def certify(problem: LpProblem, sol: LpSolution, tol: float = 1e-7) -> Certificate:
    """Check primal feasibility, dual feasibility and the duality gap.

    Dual objective for box-constrained variables is
    ``b @ y + sum_j min(d_j * lower_j, d_j * upper_j)`` with reduced costs
    ``d = c - A.T @ y``.
    """
    if not sol.optimal:
        return Certificate(False, INF, INF, INF, INF, -INF, [f"status is {sol.status}"])
    A, b, c, lo, hi, rel = problem.dense()
    x = np.asarray(sol.x, dtype=float)
    y = np.asarray(sol.duals, dtype=float)
    msgs: List[str] = []

    act = A @ x
    scale = 1.0 + np.abs(b) + np.abs(A) @ np.abs(x)
    viol = np.zeros(len(b))
    for i, rl in enumerate(rel):
        if rl == "<=":
            viol[i] = max(act[i] - b[i], 0.0)
        elif rl == ">=":
            viol[i] = max(b[i] - act[i], 0.0)
        else:
            viol[i] = abs(act[i] - b[i])
    rel_viol = viol / scale if len(b) else np.zeros(0)
    bound_viol = np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)
    bound_viol = np.where(np.isfinite(bound_viol), bound_viol, 0.0) / (1.0 + np.abs(x))
    primal_res = float(max(rel_viol.max(initial=0.0), bound_viol.max(initial=0.0)))
    if primal_res > tol:
        msgs.append(f"primal infeasibility {primal_res:.3g}")

    ysign = np.zeros(len(b))
    for i, rl in enumerate(rel):
        if rl == "<=":
            ysign[i] = max(y[i], 0.0)
        elif rl == ">=":
            ysign[i] = max(-y[i], 0.0)
    d = c - A.T @ y
    cscale = 1.0 + np.abs(c) + np.abs(A.T) @ np.abs(y)
    dres = np.zeros(len(c))
    dual_obj = float(b @ y)
    for j in range(len(c)):
        if d[j] > 0:
            if np.isfinite(lo[j]):
                dual_obj += d[j] * lo[j]
            else:
                dres[j] = d[j]
        elif d[j] < 0:
            if np.isfinite(hi[j]):
                dual_obj += d[j] * hi[j]
            else:
                dres[j] = -d[j]
    dual_res = float(max((ysign / (1.0 + np.abs(y))).max(initial=0.0),
                         (dres / cscale).max(initial=0.0)))
    if dual_res > tol:
        msgs.append(f"dual infeasibility {dual_res:.3g}")
    primal_obj = float(c @ x)
    gap = primal_obj - dual_obj
    if abs(gap) > tol * (1.0 + abs(primal_obj)):
        msgs.append(f"duality gap {gap:.3g}")
    return Certificate(not msgs, primal_res, dual_res, gap, primal_obj, dual_obj, msgs)
