"""Sequential stochastic optimization: a chain of smoothed subproblems.

Subproblem ``i`` minimizes the smoothed objective with radius
``beta_i = beta0 / (i+1)^2`` using ZO-Signum, and is declared solved once
the momentum norm drops below ``L beta_i / (4 beta0)``, where ``L`` is the
norm of the very first momentum. Each subproblem warm-starts from the
previous one's ``x`` and ``m``. An optional search phase runs short
ZO-Signum bursts and restarts from the best cached point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from zosso.errors import EvaluationError
from zosso.oracle import BoxBounds, Oracle
from zosso.smoothing import GradientEstimate, SmoothingConfig, gradient_estimate
from zosso.trace import RunTrace
from zosso.zo_signum import (
    BUDGET_EXHAUSTED,
    EVALUATION_ERROR,
    THRESHOLD_MET,
    StepSchedule,
    run_zos,
    split_rng,
)

__all__ = [
    "EPSILON_REACHED",
    "EvalCache",
    "SsoResult",
    "SubproblemSchedule",
    "SubproblemSummary",
    "run_sso",
    "search_restart",
]

EPSILON_REACHED = "epsilon-reached"
MODES = ("default", "convex")


@dataclass(frozen=True)
class SubproblemSchedule:
    """Outer schedule: smoothing radius and initial step sizes per subproblem.

    Default mode: ``beta_i = beta0/(i+1)^2``, ``s1_{i,0} = s1_00/(i+1)^{3/2}``,
    ``s2_{i,0} = s2_00/(i+1)``, inner decay with powers ``alpha1``/``alpha2``.
    Convex mode keeps ``beta_i`` but uses ``s1_{i,k} = 2 rho/(k+1)`` and
    ``s2_{i,k} = (k+1)^{-2/3}``.
    """

    beta0: float
    s1_00: float
    s2_00: float
    epsilon: float
    alpha1: float = 0.75
    alpha2: float = 0.5
    mode: str = "default"
    rho: Optional[float] = None

    def __post_init__(self):
        if not (self.beta0 > 0 and math.isfinite(self.beta0)):
            raise ValueError(f"beta0 must be positive, got {self.beta0!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "convex":
            if self.rho is None or not 0.0 < self.rho <= 0.5:
                raise ValueError(f"convex mode needs 0 < rho <= 1/2 so that 2 rho/(k+1) <= 1, got {self.rho!r}")
        else:
            # validates s1_00, s2_00 and the decay powers
            StepSchedule(self.s1_00, self.s2_00, self.alpha1, self.alpha2)

    def beta(self, i: int) -> float:
        return self.beta0 / (i + 1) ** 2

    def s1_0(self, i: int) -> float:
        return self.s1_00 / (i + 1) ** 1.5

    def s2_0(self, i: int) -> float:
        return self.s2_00 / (i + 1)

    def steps(self, i: int) -> StepSchedule:
        if self.mode == "convex":
            rho = self.rho
            return StepSchedule(2 * rho, 1.0, override=lambda k: (2 * rho / (k + 1), (k + 1) ** (-2.0 / 3.0)))
        return StepSchedule(self.s1_0(i), self.s2_0(i), self.alpha1, self.alpha2)

    def threshold(self, i: int, L: float) -> float:
        return L * self.beta(i) / (4 * self.beta0)

    def local_count(self, start: int = 0) -> int:
        """Number of subproblems ``i >= start`` with ``beta_i > epsilon``."""
        i = start
        while self.beta(i) > self.epsilon:
            i += 1
        return i - start


class EvalCache:
    """Every evaluated point with its observed values, keyed by exact bit pattern."""

    def __init__(self):
        self._index: Dict[bytes, int] = {}
        self._points: List[np.ndarray] = []
        self._sums: List[float] = []
        self._values: List[List[float]] = []

    def __len__(self):
        return len(self._points)

    def __contains__(self, x):
        return np.asarray(x, dtype=float).tobytes() in self._index

    def add(self, x, value: float) -> None:
        x = np.ascontiguousarray(x, dtype=float)
        key = x.tobytes()
        idx = self._index.get(key)
        if idx is None:
            self._index[key] = len(self._points)
            self._points.append(x.copy())
            self._sums.append(float(value))
            self._values.append([float(value)])
        else:
            self._sums[idx] += float(value)
            self._values[idx].append(float(value))

    def add_estimate(self, est: GradientEstimate) -> None:
        for p, v in zip(est.points, est.values):
            self.add(p, v)

    def values(self, x) -> List[float]:
        return list(self._values[self._index[np.asarray(x, dtype=float).tobytes()]])

    def points(self) -> List[np.ndarray]:
        return [p.copy() for p in self._points]

    def best(self) -> np.ndarray:
        """Point with the lowest mean observed value; ties go to the earliest inserted."""
        if not self._points:
            raise ValueError("cache is empty")
        means = [s / len(v) for s, v in zip(self._sums, self._values)]
        return self._points[int(np.argmin(means))].copy()


def search_restart(cache: EvalCache) -> np.ndarray:
    return cache.best()


@dataclass
class SubproblemSummary:
    i: int
    phase: str
    beta: float
    threshold: float
    iterations: int
    evals: int
    exit_reason: str
    x_start: np.ndarray
    m_start: np.ndarray
    x_final: np.ndarray
    m_final: np.ndarray

    @property
    def m_norm(self) -> float:
        return float(np.linalg.norm(self.m_final))


@dataclass
class SsoResult:
    x: np.ndarray
    subproblems: int
    summaries: List[SubproblemSummary]
    trace: RunTrace
    exit_reason: str
    evals_used: int
    L: float = math.inf
    best_f: float = math.inf
    error: Optional[str] = None

    @property
    def betas(self) -> List[float]:
        return [s.beta for s in self.summaries]

    @property
    def local(self) -> List[SubproblemSummary]:
        return [s for s in self.summaries if s.phase == "local"]


def run_sso(
    oracle: Oracle,
    x0,
    schedule: SubproblemSchedule,
    rng,
    *,
    q: int = 1,
    min_iters: int = 5,
    search_budget: int = 0,
    max_evals: Optional[int] = None,
    bounds: Optional[BoxBounds] = None,
    estimator: Optional[SmoothingConfig] = None,
    trace: Optional[RunTrace] = None,
    noise_rng=None,
    executor=None,
) -> SsoResult:
    """Run the sequential driver.

    The search phase runs while ``min_iters * (i+1) * q <= search_budget``
    (off when ``search_budget`` is 0); during it the momentum threshold is
    infinite, so each burst is exactly the forced minimum iterations. The
    local phase runs subproblems until ``beta_i <= epsilon`` or
    ``max_evals`` is spent. ``estimator`` supplies the direction
    distribution and base-evaluation options; its ``beta`` and ``q`` are
    replaced by the schedule's radius and ``q``.
    """
    directions, noise = split_rng(rng, noise_rng)
    x = np.asarray(x0, dtype=float).copy()
    if bounds is not None and not bounds.contains(x):
        raise ValueError("x0 lies outside the bounds")
    template = estimator if estimator is not None else SmoothingConfig(beta=schedule.beta0, q=q)
    template = SmoothingConfig(
        beta=schedule.beta0,
        q=q,
        distribution=template.distribution,
        per_sample_base=template.per_sample_base,
        truncate=template.truncate,
    )
    trace = RunTrace() if trace is None else trace
    cache = EvalCache() if search_budget > 0 else None
    summaries: List[SubproblemSummary] = []
    used = 0
    best_f = math.inf
    pending = 0  # evaluations not yet attributed to a summary
    m = None
    m00_norm = math.inf

    def remaining():
        return None if max_evals is None else max_evals - used

    def finish(reason, error=None, L=math.inf):
        return SsoResult(x, len(summaries), summaries, trace, reason, used, L, best_f, error)

    def initialise():
        nonlocal m, used, best_f, pending, m00_norm
        cfg = template.with_beta(schedule.beta(0))
        if max_evals is not None and cfg.evals_per_estimate > max_evals:
            return BUDGET_EXHAUSTED, None
        try:
            est = gradient_estimate(oracle, x, cfg, directions, noise, executor)
        except EvaluationError as exc:
            return EVALUATION_ERROR, str(exc)
        used += est.evals_used
        pending += est.evals_used
        best_f = min(best_f, float(est.values.min()))
        if cache is not None:
            cache.add_estimate(est)
        m = est.g
        m00_norm = float(np.linalg.norm(m))
        s1, s2 = schedule.steps(0).steps(0)
        trace.record(0, 0, used, cfg.beta, m00_norm, s1, s2, best_f)
        return None, None

    def solve(i, phase, threshold, x_start):
        nonlocal used, best_f, pending
        cfg = template.with_beta(schedule.beta(i))
        res = run_zos(
            oracle,
            x_start,
            cfg,
            schedule.steps(i),
            threshold,
            min_iters,
            directions,
            m0=m,
            noise_rng=noise,
            max_evals=remaining(),
            bounds=bounds,
            trace=trace,
            subproblem=i,
            evals_offset=used,
            best_f=best_f,
            observe=cache.add_estimate if cache is not None else None,
            executor=executor,
        )
        used += res.evals_used
        best_f = min(best_f, res.best_f)
        summaries.append(
            SubproblemSummary(
                i, phase, cfg.beta, threshold, res.iterations, res.evals_used + pending, res.exit_reason,
                np.array(x_start, dtype=float), np.array(m, dtype=float), res.x.copy(), res.m.copy(),
            )
        )
        pending = 0
        return res

    i = 0
    will_search = search_budget > 0 and min_iters * q <= search_budget
    if will_search or schedule.beta(0) > schedule.epsilon:
        reason, error = initialise()
        if reason is not None:
            return finish(reason, error)

    while search_budget > 0 and min_iters * (i + 1) * q <= search_budget:
        res = solve(i, "search", math.inf, x)
        if res.exit_reason != THRESHOLD_MET:
            x = res.x
            return finish(res.exit_reason, res.error)
        m = res.m
        x = search_restart(cache)
        i += 1

    L = m00_norm
    while schedule.beta(i) > schedule.epsilon:
        res = solve(i, "local", schedule.threshold(i, L), x)
        x = res.x
        if res.exit_reason != THRESHOLD_MET:
            return finish(res.exit_reason, res.error, L)
        m = res.m
        i += 1
    return finish(EPSILON_REACHED, None, L)
