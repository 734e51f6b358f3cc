"""Empirical checks of the convergence analysis.

* :func:`solve_conditions` finds the iteration index from which the two
  step-size admissibility inequalities hold.
* :func:`theory_constants` evaluates the smoothness constant and the
  variance/bias bound coefficients.
* :func:`track_zos` runs seeded ZO-Signum replicates alongside the
  noise-free momentum tracker ``m_bar`` and records gradient-norm,
  momentum-gap and bias-gap series; :func:`fit_rate` fits their log-log
  slopes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from zosso.oracle import Oracle
from zosso.rng import RandomStreams
from zosso.smoothing import SmoothingConfig, nested_mc_gradient
from zosso.zo_signum import MomentumState, StepSchedule, run_zos

__all__ = [
    "ConditionReport",
    "RateFit",
    "TheoryConstants",
    "TrackingSeries",
    "cond1_holds",
    "cond2_holds",
    "fit_rate",
    "fit_series",
    "log_grid",
    "solve_conditions",
    "theory_constants",
    "track_zos",
]

QUANTITIES = ("grad-norm", "momentum-gap", "bias-gap")


def _lhs(k, alpha2):
    k = np.asarray(k, dtype=float)
    return k / (k + 1.0) ** alpha2


def cond1_holds(k, s2_0: float, alpha2: float):
    """``k/(k+1)^a2 >= (ln s2_0 + (1 + a2) ln k) / s2_0``."""
    k = np.asarray(k, dtype=float)
    return _lhs(k, alpha2) >= (math.log(s2_0) + (1.0 + alpha2) * np.log(k)) / s2_0


def cond2_holds(k, s2_0: float, alpha1: float, alpha2: float):
    """``k/(k+1)^a2 >= 2 (ln s2_0 + (1 + a1 - a2) ln k) / s2_0``."""
    k = np.asarray(k, dtype=float)
    return _lhs(k, alpha2) >= 2.0 * (math.log(s2_0) + (1.0 + alpha1 - alpha2) * np.log(k)) / s2_0


@dataclass(frozen=True)
class ConditionReport:
    """Smallest ``k`` from which each condition holds up to ``k_max``.

    Both inequalities hold trivially at small ``k`` (their right-hand side
    is negative while ``ln k < -ln s2_0``), break, and hold again for good
    once ``k^(1-alpha2)`` outgrows ``ln k``; the reported index is the start
    of that final run, so ``k - 1`` violates the condition whenever ``k > 1``.
    ``None`` means the condition fails at ``k_max``.
    """

    s2_0: float
    alpha1: float
    alpha2: float
    k_max: int
    k1: Optional[int]
    k2: Optional[int]

    @property
    def found(self) -> bool:
        return self.k1 is not None and self.k2 is not None

    @property
    def C(self) -> Optional[int]:
        return max(self.k1, self.k2) if self.found else None

    @property
    def holds_from_one(self) -> bool:
        """Both conditions hold for every ``k`` in ``[1, k_max]``."""
        return self.C == 1


def _sustained_start(holds: np.ndarray) -> Optional[int]:
    if holds.size == 0 or not holds[-1]:
        return None
    failures = np.flatnonzero(~holds)
    return 1 if failures.size == 0 else int(failures[-1]) + 2


def solve_conditions(s2_0: float, alpha1: float, alpha2: float, k_max: int = 10**6) -> ConditionReport:
    if not 0.0 < s2_0 < 1.0:
        raise ValueError(f"s2_0 must lie in (0, 1), got {s2_0!r}")
    if not 0.0 < alpha2 < alpha1 < 1.0:
        raise ValueError(f"need 0 < alpha2 < alpha1 < 1, got {alpha1!r}, {alpha2!r}")
    ks = np.arange(1, max(int(k_max), 0) + 1)
    k1 = _sustained_start(cond1_holds(ks, s2_0, alpha2))
    k2 = _sustained_start(cond2_holds(ks, s2_0, alpha1, alpha2))
    return ConditionReport(s2_0, alpha1, alpha2, int(k_max), k1, k2)


@dataclass(frozen=True)
class TheoryConstants:
    n: int
    L0: float
    beta: float
    s1_0: float
    s2_0: float
    L1: float
    variance_coef: float
    bias_coef: float

    def variance_bound(self, k, alpha2: float):
        return self.variance_coef / np.asarray(k, dtype=float) ** alpha2

    def bias_bound(self, k, alpha1: float, alpha2: float):
        return self.bias_coef / np.asarray(k, dtype=float) ** (alpha1 - alpha2)


def theory_constants(n: int, L0: float, beta: float, s1_0: float, s2_0: float) -> TheoryConstants:
    """Smoothness constant ``L1 = 2 sqrt(n) L0 / beta`` and the bound coefficients.

    ``variance_coef = 9 s2_0 L0^2 (n+4)^2`` multiplies ``k^-alpha2``;
    ``bias_coef = 10 n L1 s1_0 / s2_0`` multiplies ``k^-(alpha1-alpha2)``.
    """
    for name, value in (("n", n), ("L0", L0), ("beta", beta), ("s1_0", s1_0), ("s2_0", s2_0)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")
    L1 = 2.0 * math.sqrt(n) * L0 / beta
    return TheoryConstants(
        n, L0, beta, s1_0, s2_0, L1,
        variance_coef=9.0 * s2_0 * L0**2 * (n + 4) ** 2,
        bias_coef=10.0 * n * L1 * s1_0 / s2_0,
    )


@dataclass(frozen=True)
class RateFit:
    k: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    half_width: float
    window: Tuple[float, float]

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.slope <= hi


def fit_rate(k, values, k_window: Optional[Tuple[float, float]] = None, min_points: int = 50) -> RateFit:
    """Least-squares slope of ``log(values)`` against ``log(k)`` over ``k_window``.

    ``half_width`` is the 95% confidence half-width of the slope.
    """
    k = np.asarray(k, dtype=float)
    values = np.asarray(values, dtype=float)
    if k.shape != values.shape:
        raise ValueError("k and values differ in shape")
    lo, hi = k_window if k_window is not None else (k.min(initial=np.inf), k.max(initial=-np.inf))
    mask = (k >= lo) & (k <= hi)
    if mask.sum() < min_points:
        raise ValueError(f"need at least {min_points} points in window [{lo}, {hi}], got {int(mask.sum())}")
    kw, vw = k[mask], values[mask]
    if np.any(vw <= 0):
        raise ValueError("values must be positive for a log-log fit")
    fit = stats.linregress(np.log(kw), np.log(vw))
    half = float(stats.t.ppf(0.975, kw.size - 2) * fit.stderr)
    return RateFit(kw, vw, float(fit.slope), float(fit.intercept), half, (float(lo), float(hi)))


def log_grid(lo: int, hi: int, num: int) -> np.ndarray:
    """Distinct integers spread log-uniformly over ``[lo, hi]`` (at least ``num`` of them when possible)."""
    grid = np.unique(np.round(np.logspace(math.log10(lo), math.log10(hi), num)).astype(int))
    extra = num
    while grid.size < num and grid.size < hi - lo + 1:
        extra += num - grid.size
        grid = np.unique(np.round(np.logspace(math.log10(lo), math.log10(hi), extra)).astype(int))
    return grid


@dataclass
class TrackingSeries:
    """Replicate-averaged series recorded at iterations ``k``.

    ``grad_norm`` is the nested-MC estimate of the smoothed gradient norm
    at ``x_k``; ``momentum_gap`` is ``||m_{k} - m_bar_{k}||_2^2`` and
    ``bias_gap`` is ``||m_bar_{k} - grad f_beta(x_{k-1})||_1``.
    """

    k: np.ndarray
    replicates: int
    series: Dict[str, np.ndarray] = field(default_factory=dict)
    grad_norm_se: Optional[np.ndarray] = None

    def __getitem__(self, quantity: str) -> np.ndarray:
        return self.series[quantity]


def fit_series(series: TrackingSeries, quantity: str, k_window=None, min_points: int = 50) -> RateFit:
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")
    return fit_rate(series.k, series[quantity], k_window, min_points)


def _track_one(oracle, x0, cfg, schedule, record_at, streams, nested_draws, smoothed_gradient):
    beta = cfg.beta
    if smoothed_gradient is None:
        diag = streams["diagnostics"]

        def smoothed_gradient(x, _beta):
            return nested_mc_gradient(oracle, x, _beta, nested_draws, diag)[0]

    wanted = set(int(k) for k in record_at)
    state = {"m_bar": None}
    rows = {}

    def callback(old: MomentumState, new: MomentumState, est):
        grad = smoothed_gradient(old.x, beta)
        if state["m_bar"] is None:
            state["m_bar"] = old.m.copy()
        _, s2 = schedule.steps(old.k)
        state["m_bar"] = s2 * grad + (1.0 - s2) * state["m_bar"]
        if new.k in wanted:
            m_bar = state["m_bar"]
            rows[new.k] = (float(np.sum((new.m - m_bar) ** 2)), float(np.sum(np.abs(m_bar - grad))), new.x.copy())

    K = int(max(record_at))
    run_zos(oracle, x0, cfg, schedule, 0.0, K, streams, max_iters=K, callback=callback)
    rng = streams["diagnostics"]
    out = np.empty((len(record_at), 4))
    for j, k in enumerate(record_at):
        gap, bias, x = rows[int(k)]
        g, se = nested_mc_gradient(oracle, x, beta, nested_draws, rng)
        out[j] = (np.linalg.norm(g), np.linalg.norm(se), gap, bias)
    return out


def track_zos(
    oracle: Oracle,
    x0,
    cfg: SmoothingConfig,
    schedule: StepSchedule,
    record_at: Sequence[int],
    seed: int = 0,
    replicates: int = 20,
    nested_draws: int = 10_000,
    workers: int = 1,
) -> TrackingSeries:
    """Run ``replicates`` seeded ZO-Signum runs for ``max(record_at)`` iterations and average the series.

    The tracker uses the oracle's exact smoothed gradient when it has one,
    nested Monte-Carlo otherwise. Replicates may run on ``workers`` threads;
    each owns isolated streams and aggregation order is fixed.
    """
    record_at = np.asarray(sorted(set(int(k) for k in record_at)))
    if record_at.size == 0 or record_at[0] < 1:
        raise ValueError("record_at must contain positive iteration indices")
    root = RandomStreams(seed)
    exact = getattr(oracle, "smoothed_gradient", None)
    jobs = [root.replicate(r) for r in range(replicates)]

    def job(streams):
        return _track_one(oracle, np.asarray(x0, dtype=float), cfg, schedule, record_at, streams, nested_draws, exact)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(s) for s in jobs]
    mean = np.mean(results, axis=0)
    return TrackingSeries(
        k=record_at,
        replicates=replicates,
        series={"grad-norm": mean[:, 0], "momentum-gap": mean[:, 2], "bias-gap": mean[:, 3]},
        grad_norm_se=mean[:, 1],
    )
