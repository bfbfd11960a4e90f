"""CMOS power/energy model, MAPE and MAPE-optimal power-law fitting.

Active power follows ``alpha * s**beta + p_static`` for normalized speed ``s``;
the scheduling objective charges each busy interval with the power drawn above
the idle level, ``a * (P_active(s) - p_idle)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import nnls

from ._search import golden_section
from .taskmodel import as_fraction

BETA_RANGE = (1.0, 5.0)
BETA_STEP = 0.01


@dataclass(frozen=True)
class PowerSample:
    speed: Fraction
    active_power: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "speed", as_fraction(self.speed))
        object.__setattr__(self, "active_power", float(self.active_power))
        if not 0 < self.speed <= 1:
            raise ValueError(f"sample speed {self.speed} outside (0, 1]")
        if self.active_power <= 0:
            raise ValueError("sample power must be positive")


@dataclass(frozen=True)
class PowerModel:
    """Processor power law plus platform constants.

    Powers are in mW, ``f_max`` in MHz. An empty ``speed_levels`` tuple means
    the speed may take any value in ``[s_min, 1]``.
    """

    alpha: float
    beta: float
    p_static: float
    p_idle: float
    f_max: float = 1000.0
    s_min: Fraction = Fraction(1, 100)
    speed_levels: Tuple[Fraction, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        for attr in ("alpha", "beta", "p_static", "p_idle", "f_max"):
            object.__setattr__(self, attr, float(getattr(self, attr)))
        object.__setattr__(self, "s_min", as_fraction(self.s_min))
        levels = tuple(as_fraction(s) for s in self.speed_levels)
        object.__setattr__(self, "speed_levels", levels)
        if self.alpha < 0 or self.p_static < 0:
            raise ValueError("alpha and p_static must be non-negative")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.p_idle <= 0 or self.f_max <= 0:
            raise ValueError("p_idle and f_max must be positive")
        if not 0 < self.s_min <= 1:
            raise ValueError(f"s_min={self.s_min} outside (0, 1]")
        if levels:
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError("speed levels must be strictly increasing")
            if levels[-1] != 1:
                raise ValueError("the highest speed level must be 1")
            if levels[0] < self.s_min:
                raise ValueError("speed levels below s_min")
        # P_active is non-decreasing in s, so checking s_min covers [s_min, 1].
        if self.active_power(self.s_min) - self.p_idle <= 0:
            raise ValueError("active power must exceed idle power on [s_min, 1]")

    @property
    def is_discrete(self) -> bool:
        return bool(self.speed_levels)

    def continuous(self) -> "PowerModel":
        return replace(self, speed_levels=())

    def with_levels(self, levels: Iterable) -> "PowerModel":
        return replace(self, speed_levels=tuple(levels))

    def active_power(self, s) -> float:
        return active_power(self, s)

    def net_power(self, s) -> float:
        """Power above idle while busy at speed ``s``."""
        return active_power(self, s) - self.p_idle

    def energy_per_work(self, s) -> float:
        return self.net_power(s) / float(s)

    def speed_ok(self, s, tol: float = 1e-12) -> bool:
        if self.speed_levels:
            return any(abs(float(s) - float(q)) <= tol for q in self.speed_levels)
        return float(self.s_min) - tol <= float(s) <= 1 + tol


def active_power(pm: PowerModel, s) -> float:
    s = float(s)
    if not 0 < s <= 1 + 1e-12:
        raise ValueError(f"speed {s} outside (0, 1]")
    return pm.alpha * s ** pm.beta + pm.p_static


def energy_density(pm: PowerModel, a, s) -> float:
    """Net power of running a fraction ``a`` of the time at speed ``s``."""
    a = float(a)
    if a == 0:
        return 0.0
    return a * (active_power(pm, s) - pm.p_idle)


@dataclass(frozen=True)
class EnergyReport:
    objective: float
    total: float
    idle_baseline: float

    def on_basis(self, basis: str) -> float:
        if basis == "objective":
            return self.objective
        if basis == "total":
            return self.total
        raise ValueError(f"unknown energy basis {basis!r}")


def total_energy(schedule, pm: PowerModel, horizon=None, m: Optional[int] = None) -> EnergyReport:
    """Energy of a validated schedule (mW x time unit).

    ``objective`` sums busy time times net power; ``total`` adds the idle
    draw of every processor over the horizon.
    """
    if not getattr(schedule, "validated", False):
        raise ValueError("schedule has not passed validation")
    horizon = schedule.horizon if horizon is None else horizon
    m = schedule.m if m is None else m
    obj = math.fsum(float(seg.end - seg.start) * pm.net_power(seg.speed)
                    for seg in schedule.segments)
    base = m * float(horizon) * pm.p_idle
    return EnergyReport(objective=obj, total=obj + base, idle_baseline=base)


def mape(pm: PowerModel, samples: Sequence[PowerSample]) -> float:
    if not samples:
        raise ValueError("mape needs at least one sample")
    errs = [abs(active_power(pm, smp.speed) - smp.active_power) / abs(smp.active_power)
            for smp in samples]
    return 100.0 * math.fsum(errs) / len(errs)


def _relative_errors(alpha, p_static, z, y):
    return np.abs(np.multiply.outer(alpha, z) + np.asarray(p_static)[..., None] - y) / y


def _best_lad(z: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Exact minimizer of sum |alpha*z + ps - y|/y over alpha, ps >= 0.

    A piecewise-linear convex objective in two variables attains its minimum
    at a vertex: two residuals zero, or one residual zero with a bound active,
    or both bounds active. All of them are enumerated.
    """
    k = len(z)
    ii, jj = np.triu_indices(k, 1)
    dz = z[ii] - z[jj]
    ok = np.abs(dz) > 1e-15
    a_pair = (y[ii][ok] - y[jj][ok]) / dz[ok]
    p_pair = y[ii][ok] - a_pair * z[ii][ok]
    alphas = np.concatenate([a_pair, np.zeros(k), y / z, [0.0]])
    statics = np.concatenate([p_pair, y, np.zeros(k), [0.0]])
    keep = (alphas >= 0) & (statics >= 0)
    alphas, statics = alphas[keep], statics[keep]
    obj = _relative_errors(alphas, statics, z, y).sum(axis=1)
    best = int(np.argmin(obj))
    return float(alphas[best]), float(statics[best]), 100.0 * float(obj[best]) / k


def _samples_arrays(samples: Sequence[PowerSample]):
    if len(samples) < 3:
        raise ValueError("fitting needs at least three samples")
    s = np.array([float(x.speed) for x in samples])
    y = np.array([x.active_power for x in samples])
    if np.unique(s).size < 2:
        raise ValueError("fitting needs at least two distinct speeds")
    if np.unique(s).size != s.size:
        raise ValueError("sample speeds must be distinct")
    return s, y


def _build(alpha, beta, p_static, p_idle, f_max, s_min, samples, name) -> PowerModel:
    if s_min is None:
        s_min = min(x.speed for x in samples)
    return PowerModel(alpha=alpha, beta=beta, p_static=p_static, p_idle=p_idle,
                      f_max=f_max, s_min=s_min, name=name)


def least_squares_fit(samples: Sequence[PowerSample], p_idle: float, f_max: float,
                      s_min=None, name: str = "") -> PowerModel:
    """Relative least-squares fit with non-negative alpha and p_static.

    Used as the reference seed for :func:`fit_power_model`.
    """
    s, y = _samples_arrays(samples)
    best = None
    for beta in np.arange(BETA_RANGE[0], BETA_RANGE[1] + BETA_STEP / 2, BETA_STEP):
        A = np.column_stack([s ** beta, np.ones_like(s)]) / y[:, None]
        (alpha, ps), _ = nnls(A, np.ones_like(y))
        err = float(_relative_errors(alpha, ps, s ** beta, y).mean())
        if best is None or err < best[0]:
            best = (err, alpha, beta, ps)
    _, alpha, beta, ps = best
    return _build(alpha, float(beta), ps, p_idle, f_max, s_min, samples, name)


def fit_power_model(samples: Sequence[PowerSample], p_idle: float, f_max: float,
                    s_min=None, name: str = "") -> PowerModel:
    """Fit ``alpha * s**beta + p_static`` minimizing the MAPE.

    For fixed ``beta`` the problem is a two-parameter weighted least-absolute
    deviation fit, solved exactly by vertex enumeration. ``beta`` is scanned on
    a 0.01 grid over [1, 5] and the best cell is refined by golden section.
    """
    s, y = _samples_arrays(samples)

    def score(beta: float) -> float:
        return _best_lad(s ** beta, y)[2]

    betas = np.arange(BETA_RANGE[0], BETA_RANGE[1] + BETA_STEP / 2, BETA_STEP)
    scores = np.array([score(b) for b in betas])
    i = int(np.argmin(scores))
    lo = betas[max(i - 1, 0)]
    hi = betas[min(i + 1, len(betas) - 1)]
    beta, val = golden_section(score, lo, hi, tol=1e-9, prefer="low")
    if scores[i] < val:
        beta = float(betas[i])
    alpha, ps, _ = _best_lad(s ** beta, y)
    return _build(alpha, float(beta), ps, p_idle, f_max, s_min, samples, name)


def critical_speed(pm: PowerModel) -> float:
    """Speed in [s_min, 1] minimizing net energy per unit of work."""
    s, _ = golden_section(pm.energy_per_work, float(pm.s_min), 1.0, tol=1e-10, prefer="high")
    return s


# -- processor files ----------------------------------------------------------

@dataclass
class ProcessorSpec:
    """Contents of a processor JSON file."""

    name: str
    f_max: float
    p_idle: float
    s_min: Fraction
    samples: List[PowerSample]
    fitted: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    @property
    def levels(self) -> Tuple[Fraction, ...]:
        return tuple(sorted(x.speed for x in self.samples))

    def model(self, discrete: bool = True, refit: bool = False) -> PowerModel:
        """Power model from the fitted block (or a fresh fit)."""
        if self.fitted is None or refit:
            pm = fit_power_model(self.samples, self.p_idle, self.f_max, self.s_min, self.name)
        else:
            pm = PowerModel(alpha=self.fitted["alpha"], beta=self.fitted["beta"],
                            p_static=self.fitted["p_static"], p_idle=self.p_idle,
                            f_max=self.f_max, s_min=self.s_min, name=self.name)
        return pm.with_levels(self.levels) if discrete else pm


def processor_from_dict(doc: dict) -> ProcessorSpec:
    try:
        samples = [PowerSample(as_fraction(lv["speed"]), float(lv["active_power_mw"]))
                   for lv in doc["levels"]]
        speeds = [x.speed for x in samples]
        s_min = as_fraction(doc["s_min"]) if "s_min" in doc else min(speeds)
        fitted = doc.get("fitted")
        if fitted is not None:
            fitted = {k: float(v) for k, v in fitted.items()}
        return ProcessorSpec(name=str(doc.get("name", "")), f_max=float(doc["f_max_mhz"]),
                             p_idle=float(doc["p_idle_mw"]), s_min=s_min,
                             samples=samples, fitted=fitted)
    except KeyError as exc:
        raise ValueError(f"processor file is missing field {exc}") from None


def processor_to_dict(spec: ProcessorSpec) -> dict:
    doc = {"name": spec.name, "f_max_mhz": spec.f_max, "p_idle_mw": spec.p_idle,
           "s_min": float(spec.s_min),
           "levels": [{"speed": float(x.speed), "active_power_mw": x.active_power}
                      for x in spec.samples]}
    if spec.fitted is not None:
        doc["fitted"] = dict(spec.fitted)
    return doc


def load_processor(path: Union[str, Path]) -> ProcessorSpec:
    path = Path(path)
    try:
        with path.open() as fh:
            doc = json.load(fh, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    try:
        return processor_from_dict(doc)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from None
