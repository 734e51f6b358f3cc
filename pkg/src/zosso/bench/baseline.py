"""Plain ZO-SGD for harness comparisons: ``x <- x - s_k g`` with ``s_k = s0/sqrt(k+1)``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from zosso.errors import EvaluationError
from zosso.oracle import BoxBounds, Oracle, project_box
from zosso.smoothing import GradientEstimate, SmoothingConfig, gradient_estimate
from zosso.trace import RunTrace
from zosso.zo_signum import BUDGET_EXHAUSTED, EVALUATION_ERROR, split_rng

__all__ = ["SgdResult", "run_zo_sgd", "sgd_update", "zo_sgd_baseline_step"]

MAX_ITERS_REACHED = "max-iters"


def sgd_update(x, g, step: float, bounds: Optional[BoxBounds] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float) - step * np.asarray(g, dtype=float)
    return project_box(x, bounds) if bounds is not None else x


def zo_sgd_baseline_step(
    x, oracle: Oracle, cfg: SmoothingConfig, step: float, rng, noise_rng=None, bounds=None, executor=None
) -> Tuple[np.ndarray, GradientEstimate]:
    directions, noise = split_rng(rng, noise_rng)
    est = gradient_estimate(oracle, np.asarray(x, dtype=float), cfg, directions, noise, executor)
    return sgd_update(x, est.g, step, bounds), est


@dataclass
class SgdResult:
    x: np.ndarray
    iterations: int
    evals_used: int
    exit_reason: str
    trace: RunTrace
    best_f: float = math.inf
    error: Optional[str] = None


def run_zo_sgd(
    oracle: Oracle,
    x0,
    cfg: SmoothingConfig,
    s0: float,
    rng,
    *,
    noise_rng=None,
    max_evals: Optional[int] = None,
    max_iters: Optional[int] = None,
    bounds: Optional[BoxBounds] = None,
    trace: Optional[RunTrace] = None,
    executor=None,
) -> SgdResult:
    """Run until ``max_evals`` or ``max_iters`` is reached.

    One trace record per step, after ``k`` steps, with the cumulative
    evaluation count: ``(q+1) k`` for the shared-base estimator, the same
    grid the sign-momentum runs produce. ``m_norm`` holds ``||g||`` and
    ``s2`` is fixed at 1.
    """
    directions, noise = split_rng(rng, noise_rng)
    trace = RunTrace() if trace is None else trace
    x = np.asarray(x0, dtype=float).copy()
    cost = cfg.evals_per_estimate
    used, k, best_f = 0, 0, math.inf
    reason, error = BUDGET_EXHAUSTED, None
    last = None
    while True:
        if max_evals is not None and used + cost > max_evals:
            break
        if max_iters is not None and k >= max_iters:
            reason = MAX_ITERS_REACHED
            break
        step = s0 / math.sqrt(k + 1)
        try:
            x_new, est = zo_sgd_baseline_step(x, oracle, cfg, step, directions, noise, bounds, executor)
        except EvaluationError as exc:
            reason, error = EVALUATION_ERROR, str(exc)
            break
        x = x_new
        used += est.evals_used
        k += 1
        best_f = min(best_f, float(est.values.min()))
        last = (k, 0, used, cfg.beta, float(np.linalg.norm(est.g)), step, 1.0, best_f)
        if trace.wants(k):
            trace.record(*last)
            last = None
    if last is not None:
        trace.record(*last)
    return SgdResult(x, k, used, reason, trace, best_f, error)
