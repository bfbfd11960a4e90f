"""Golden-section minimization of unimodal scalar functions."""

from __future__ import annotations

import math
from typing import Callable, Tuple

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-9, prefer: str = "high",
                   max_iter: int = 500) -> Tuple[float, float]:
    """Return ``(argmin, min)`` of a unimodal ``f`` on ``[lo, hi]``.

    The endpoints are evaluated too, so monotone objectives converge onto the
    boundary exactly. When candidates tie to within a relative 1e-12 the one
    nearest the ``prefer`` end ("high" or "low") wins, which makes flat
    objectives deterministic.
    """
    if hi < lo:
        raise ValueError(f"empty bracket [{lo}, {hi}]")
    if prefer not in ("high", "low"):
        raise ValueError(prefer)
    a, b = float(lo), float(hi)
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol and it < max_iter:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        it += 1
    mid = 0.5 * (a + b)
    candidates = [(float(lo), f(float(lo))), (float(hi), f(float(hi))),
                  (mid, f(mid)), (x1, f1), (x2, f2)]
    best = min(v for _, v in candidates)
    slack = 1e-12 * (1.0 + abs(best))
    near = [x for x, v in candidates if v <= best + slack]
    x = max(near) if prefer == "high" else min(near)
    return x, f(x)
