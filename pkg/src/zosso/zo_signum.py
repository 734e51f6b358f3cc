"""ZO-Signum: sign-of-momentum descent driven by smoothed gradient estimates.

One iteration draws a gradient estimate ``g``, folds it into the momentum
``m <- s2 g + (1 - s2) m`` and moves every coordinate by ``s1`` against
the sign of ``m``. The momentum step ``s2`` decays to zero, so ``m``
averages over a growing window and its norm serves as the stopping signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from zosso.errors import EvaluationError, NonFiniteGradientError
from zosso.oracle import BoxBounds, Oracle, project_box
from zosso.rng import RandomStreams
from zosso.smoothing import GradientEstimate, SmoothingConfig, gradient_estimate
from zosso.trace import RunTrace

__all__ = [
    "MomentumState",
    "StepSchedule",
    "ZosResult",
    "momentum_update",
    "run_zos",
    "split_rng",
    "zos_step",
    "THRESHOLD_MET",
    "BUDGET_EXHAUSTED",
    "EVALUATION_ERROR",
]

THRESHOLD_MET = "threshold-met"
BUDGET_EXHAUSTED = "budget-exhausted"
EVALUATION_ERROR = "evaluation-error"


@dataclass(frozen=True)
class StepSchedule:
    """Decaying step sizes ``s1_k = s1_0 / (k+1)^alpha1`` and ``s2_k = s2_0 / (k+1)^alpha2``.

    ``override`` maps ``k`` to ``(s1_k, s2_k)`` and replaces the power rule
    entirely (used for the convex-mode schedule).
    """

    s1_0: float
    s2_0: float
    alpha1: float = 0.75
    alpha2: float = 0.5
    override: Optional[Callable[[int], Tuple[float, float]]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.override is not None:
            return
        for name in ("s1_0", "s2_0"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
        if not 0.0 < self.alpha2 < self.alpha1 < 1.0:
            raise ValueError(f"need 0 < alpha2 < alpha1 < 1, got alpha1={self.alpha1!r}, alpha2={self.alpha2!r}")

    def steps(self, k: int) -> Tuple[float, float]:
        if self.override is not None:
            s1, s2 = self.override(k)
            if not (0.0 < s1 <= 1.0 and 0.0 < s2 <= 1.0):
                raise ValueError(f"step sizes at k={k} leave (0, 1]: s1={s1!r}, s2={s2!r}")
            return float(s1), float(s2)
        return self.s1_0 / (k + 1) ** self.alpha1, self.s2_0 / (k + 1) ** self.alpha2


@dataclass
class MomentumState:
    m: np.ndarray
    x: np.ndarray
    k: int = 0

    def copy(self) -> MomentumState:
        return MomentumState(self.m.copy(), self.x.copy(), self.k)

    @property
    def m_norm(self) -> float:
        return float(np.linalg.norm(self.m))


@dataclass
class ZosResult:
    state: MomentumState
    iterations: int
    evals_used: int
    exit_reason: str
    trace: RunTrace
    best_f: float = math.inf
    error: Optional[str] = None

    @property
    def x(self) -> np.ndarray:
        return self.state.x

    @property
    def m(self) -> np.ndarray:
        return self.state.m


def split_rng(rng, noise_rng=None):
    """Resolve ``(directions, noise)`` generators from a seed, streams or a generator."""
    if isinstance(rng, (int, np.integer)):
        rng = RandomStreams(int(rng))
    if isinstance(rng, RandomStreams):
        return rng.directions, rng.noise if noise_rng is None else noise_rng
    return rng, rng if noise_rng is None else noise_rng


def momentum_update(state: MomentumState, g, s1: float, s2: float, bounds: Optional[BoxBounds] = None) -> MomentumState:
    """Fold ``g`` into the momentum and take one sign step. ``sign(0) = 0``."""
    m = s2 * np.asarray(g, dtype=float) + (1.0 - s2) * state.m
    x = state.x - s1 * np.sign(m)
    if bounds is not None:
        x = project_box(x, bounds)
    return MomentumState(m, x, state.k + 1)


def zos_step(
    state: MomentumState,
    oracle: Oracle,
    cfg: SmoothingConfig,
    s1: float,
    s2: float,
    rng,
    noise_rng=None,
    bounds: Optional[BoxBounds] = None,
    executor=None,
) -> Tuple[MomentumState, GradientEstimate]:
    if not (np.all(np.isfinite(state.m)) and np.all(np.isfinite(state.x))):
        raise NonFiniteGradientError(f"non-finite state entering iteration {state.k}")
    directions, noise = split_rng(rng, noise_rng)
    est = gradient_estimate(oracle, state.x, cfg, directions, noise, executor)
    return momentum_update(state, est.g, s1, s2, bounds), est


def run_zos(
    oracle: Oracle,
    x0,
    cfg: SmoothingConfig,
    schedule: StepSchedule,
    threshold: float,
    min_iters: int,
    rng,
    *,
    m0=None,
    noise_rng=None,
    max_iters: Optional[int] = None,
    max_evals: Optional[int] = None,
    bounds: Optional[BoxBounds] = None,
    trace: Optional[RunTrace] = None,
    subproblem: int = 0,
    evals_offset: int = 0,
    best_f: float = math.inf,
    observe: Optional[Callable[[GradientEstimate], None]] = None,
    callback: Optional[Callable[[MomentumState, MomentumState, GradientEstimate], None]] = None,
    executor=None,
) -> ZosResult:
    """Iterate while ``||m||_2 > threshold`` or ``k <= min_iters``.

    ``max_evals`` and ``max_iters`` cap the run; hitting a cap is a normal
    return with ``exit_reason == "budget-exhausted"``. An oracle failure
    ends the run with ``exit_reason == "evaluation-error"`` and the last
    good state. Without ``m0`` the momentum starts from one gradient
    estimate at ``x0`` (charged to the budget). ``evals_offset`` shifts the
    cumulative evaluation column of the trace; ``observe`` sees every
    gradient estimate (used to feed an evaluation cache).
    """
    if not threshold >= 0:
        raise ValueError(f"threshold must be >= 0, got {threshold!r}")
    if min_iters < 0:
        raise ValueError(f"min_iters must be >= 0, got {min_iters!r}")
    directions, noise = split_rng(rng, noise_rng)
    trace = RunTrace() if trace is None else trace
    x0 = np.asarray(x0, dtype=float).copy()
    cost = cfg.evals_per_estimate
    used = 0

    def affordable() -> bool:
        return max_evals is None or used + cost <= max_evals

    if m0 is None:
        if not affordable():
            state = MomentumState(np.zeros_like(x0), x0, 0)
            return ZosResult(state, 0, 0, BUDGET_EXHAUSTED, trace, best_f)
        try:
            est = gradient_estimate(oracle, x0, cfg, directions, noise, executor)
        except EvaluationError as exc:
            state = MomentumState(np.zeros_like(x0), x0, 0)
            return ZosResult(state, 0, 0, EVALUATION_ERROR, trace, best_f, str(exc))
        used += est.evals_used
        best_f = min(best_f, float(est.values.min()))
        if observe is not None:
            observe(est)
        m0 = est.g
    state = MomentumState(np.asarray(m0, dtype=float).copy(), x0, 0)

    reason = THRESHOLD_MET
    error = None
    last = None
    while state.m_norm > threshold or state.k <= min_iters:
        if not affordable() or (max_iters is not None and state.k >= max_iters):
            reason = BUDGET_EXHAUSTED
            break
        s1, s2 = schedule.steps(state.k)
        try:
            new, est = zos_step(state, oracle, cfg, s1, s2, directions, noise, bounds, executor)
        except EvaluationError as exc:
            reason, error = EVALUATION_ERROR, str(exc)
            break
        used += est.evals_used
        best_f = min(best_f, float(est.values.min()))
        if observe is not None:
            observe(est)
        if callback is not None:
            callback(state, new, est)
        state = new
        last = (state.k, subproblem, evals_offset + used, cfg.beta, state.m_norm, s1, s2, best_f)
        if trace.wants(state.k):
            trace.record(*last)
            last = None
    if last is not None:
        trace.record(*last)
    return ZosResult(state, state.k, used, reason, trace, best_f, error)
