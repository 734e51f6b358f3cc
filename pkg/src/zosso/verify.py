"""Verification checks with a text and JSON report.

Each ``check_*`` function runs one empirical experiment at fixed seeds and
returns a :class:`CheckResult` holding the measured quantity, the bound it
is compared to, and a pass flag. :func:`run_checks` bundles them into a
:class:`VerificationReport`; ``quick=True`` shrinks sample sizes for smoke
runs (tolerances still scale with the measured standard errors).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from zosso.diagnostics import cond1_holds, cond2_holds, fit_series, log_grid, solve_conditions, track_zos
from zosso.oracle import NoiseModel, make_synthetic
from zosso.rng import RandomStreams
from zosso.smoothing import SmoothingConfig, gradient_estimate, nested_mc_gradient, smoothed_value
from zosso.sso import SubproblemSchedule, run_sso
from zosso.zo_signum import BUDGET_EXHAUSTED, THRESHOLD_MET, StepSchedule, run_zos

__all__ = [
    "CheckResult",
    "VerificationReport",
    "check_analytic_smoothing",
    "check_conditions",
    "check_estimator_unbiased",
    "check_momentum_decay",
    "check_rate_slopes",
    "check_smoothing_bound",
    "check_sso_end_to_end",
    "check_variance_bound",
    "check_zos_end_to_end",
    "linear_oracle",
    "constant_oracle",
    "run_checks",
]

LINEAR_A = (1.0, -2.0, 3.0, 0.5, -1.5)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: Any
    bound: Any
    detail: str = ""
    seconds: float = 0.0
    data: Dict[str, Any] = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(fn: Callable[..., CheckResult]) -> Callable[..., CheckResult]:
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def linear_oracle(a=LINEAR_A, noise: Optional[NoiseModel] = None):
    """``f(x) = a'x`` as a degenerate quadratic."""
    a = np.asarray(a, dtype=float)
    return make_synthetic("quadratic", a.size, noise, A=np.zeros((a.size, a.size)), b=a)


def constant_oracle(n: int):
    return make_synthetic("quadratic", n, A=np.zeros((n, n)), b=np.zeros(n))


def _sample_estimates(oracle, x, cfg, rng, count) -> np.ndarray:
    return np.array([gradient_estimate(oracle, x, cfg, rng).g for _ in range(count)])


@_timed
def check_estimator_unbiased(n: int = 5, beta: float = 0.5, samples: int = 100_000, seed: int = 0) -> CheckResult:
    """Mean of single-probe estimates on a linear function lies within 3 standard errors of its slope."""
    a = np.array(LINEAR_A[:n] if n <= len(LINEAR_A) else np.linspace(-2, 2, n))
    oracle = linear_oracle(a)
    rng = RandomStreams(seed).directions
    g = _sample_estimates(oracle, np.zeros(n), SmoothingConfig(beta, 1), rng, samples)
    mean = g.mean(axis=0)
    se = g.std(axis=0, ddof=1) / math.sqrt(samples)
    z = np.abs(mean - a) / se
    passed = bool(np.all(z <= 3.0))
    return CheckResult(
        "estimator-unbiased", passed, mean.tolist(), a.tolist(),
        f"max |mean - a| / se = {z.max():.2f} <= 3 over {samples} estimates",
        data={"stderr": se.tolist(), "z": z.tolist()},
    )


@_timed
def check_variance_bound(ns: Sequence[int] = (2, 5, 10), beta: float = 0.5, samples: int = 100_000, seed: int = 0) -> CheckResult:
    """Second moment of the single-probe estimator on abs-sum stays below ``L0^2 (n+4)^2``."""
    rows = []
    for n in ns:
        streams = RandomStreams(seed).replicate(n)
        oracle = make_synthetic("abs-sum", n)
        x = streams["diagnostics"].uniform(-1.0, 1.0, n)
        g = _sample_estimates(oracle, x, SmoothingConfig(beta, 1), streams.directions, samples)
        second = float(np.mean(np.sum(g * g, axis=1)))
        bound = oracle.lipschitz_L0**2 * (n + 4) ** 2
        rows.append({"n": n, "second_moment": second, "bound": bound})
    passed = all(r["second_moment"] <= r["bound"] for r in rows)
    detail = ", ".join(f"n={r['n']}: {r['second_moment']:.3g} <= {r['bound']:.3g}" for r in rows)
    return CheckResult("variance-bound", passed, [r["second_moment"] for r in rows], [r["bound"] for r in rows],
                       detail, data={"rows": rows})


@_timed
def check_smoothing_bound(
    n: int = 4, beta1: float = 0.5, beta2: float = 0.1, points: int = 5, samples: int = 1_000_000, seed: int = 0
) -> CheckResult:
    """``|f_b1(x) - f_b2(x)| <= L0 |b1 - b2| sqrt(n)`` on abs-sum, with 4 combined standard errors of slack."""
    oracle = make_synthetic("abs-sum", n)
    streams = RandomStreams(seed)
    xs = streams["diagnostics"].uniform(-2.0, 2.0, (points, n))
    lip = oracle.lipschitz_L0 * abs(beta1 - beta2) * math.sqrt(n)
    rows = []
    for x in xs:
        v1, se1 = smoothed_value(oracle, x, beta1, samples, streams.directions, return_stderr=True)
        v2, se2 = smoothed_value(oracle, x, beta2, samples, streams.directions, return_stderr=True)
        slack = 4.0 * math.hypot(se1, se2)
        exact = abs(oracle.smoothed(x, beta1) - oracle.smoothed(x, beta2))
        rows.append({"x": x.tolist(), "diff": abs(v1 - v2), "tolerance": lip + slack, "exact_diff": exact})
    passed = all(r["diff"] <= r["tolerance"] for r in rows)
    worst = max(rows, key=lambda r: r["diff"] - r["tolerance"])
    return CheckResult(
        "smoothing-bound", passed, [r["diff"] for r in rows], [r["tolerance"] for r in rows],
        f"max diff {max(r['diff'] for r in rows):.4g} vs bound {lip:.4g} (+{worst['tolerance'] - lip:.2g} MC slack)",
        data={"rows": rows, "lipschitz_bound": lip},
    )


@_timed
def check_analytic_smoothing(n: int = 4, beta: float = 0.5, samples: int = 1_000_000, seed: int = 0) -> CheckResult:
    """Monte-Carlo ``f_beta`` of the sphere at ``e1`` against ``1 + n beta^2``."""
    oracle = make_synthetic("sphere", n)
    x = np.zeros(n)
    x[0] = 1.0
    target = 1.0 + n * beta**2
    value, se = smoothed_value(oracle, x, beta, samples, RandomStreams(seed).directions, return_stderr=True)
    passed = abs(value - target) <= 3.0 * se
    return CheckResult("analytic-smoothing", bool(passed), value, target,
                       f"|{value:.6f} - {target}| = {abs(value - target):.2e} <= 3 se = {3 * se:.2e}",
                       data={"stderr": se})


@_timed
def check_momentum_decay(s2_0: float = 0.9, alpha2: float = 0.5, K: int = 100, m0=(1.0, -2.0, 0.5)) -> CheckResult:
    """On a constant oracle the momentum shrinks by exactly ``prod (1 - s2_k)``."""
    m0 = np.asarray(m0, dtype=float)
    oracle = constant_oracle(m0.size)
    schedule = StepSchedule(0.1, s2_0, (1 + alpha2) / 2, alpha2)
    res = run_zos(oracle, np.zeros(m0.size), SmoothingConfig(1.0, 1), schedule, 0.0, K, 0, m0=m0, max_iters=K)
    expected = float(np.linalg.norm(m0)) * math.prod(1.0 - s2_0 / (k + 1) ** alpha2 for k in range(K))
    measured = res.state.m_norm
    rel = abs(measured - expected) / expected
    passed = res.iterations == K and rel <= 1e-12
    return CheckResult("momentum-decay", bool(passed), measured, expected,
                       f"K={res.iterations}, relative error {rel:.2e} <= 1e-12")


@_timed
def check_zos_end_to_end(
    beta: float = 0.01,
    q: int = 10,
    s1_0: float = 0.1,
    s2_0: float = 0.5,
    threshold: float = 1e-3,
    M: int = 5,
    max_evals: int = 100_000,
    nested_draws: int = 10_000,
    seed: int = 0,
) -> CheckResult:
    """Noiseless 2-d sphere from ``(1, 1)``: threshold exit within budget and a small smoothed gradient."""
    oracle = make_synthetic("sphere", 2)
    streams = RandomStreams(seed)
    res = run_zos(oracle, np.ones(2), SmoothingConfig(beta, q), StepSchedule(s1_0, s2_0, 0.75, 0.5), threshold, M,
                  streams, max_evals=max_evals)
    g, se = nested_mc_gradient(oracle, res.x, beta, nested_draws, streams["diagnostics"])
    norm, norm_se = float(np.linalg.norm(g)), float(np.linalg.norm(se))
    tol = 0.1 + 3.0 * norm_se
    passed = res.exit_reason == THRESHOLD_MET and res.evals_used <= max_evals and norm < tol
    return CheckResult(
        "zos-end-to-end", bool(passed), norm, 0.1,
        f"{res.exit_reason} after {res.evals_used} evals, ||grad f_beta|| = {norm:.3g} (se {norm_se:.1g}) < 0.1",
        data={"exit_reason": res.exit_reason, "evals": res.evals_used, "x": res.x.tolist(), "iterations": res.iterations},
    )


RATE_SETUP = dict(A=((2.0, 0.5), (0.5, 1.0)), x0=(1.0, 1.0), beta=1.0, q=1, s1_0=0.59, s2_0=0.9, alpha1=0.75, alpha2=0.5)


@_timed
def check_rate_slopes(
    replicates: int = 20,
    k_lo: int = 100,
    k_hi: int = 10_000,
    points: int = 60,
    nested_draws: int = 10_000,
    seed: int = 0,
    workers: int = 4,
    setup: Optional[dict] = None,
) -> CheckResult:
    """Log-log slopes of the replicate-averaged tracking series on a noiseless 2-d quadratic.

    Passes when the gradient-norm slope lies in ``[-0.45, -0.10]``; the
    momentum-gap and bias-gap slopes are reported in ``data`` with their
    reference rates ``-alpha2`` and ``-(alpha1 - alpha2)``.
    """
    s = dict(RATE_SETUP, **(setup or {}))
    oracle = make_synthetic("quadratic", 2, A=np.array(s["A"]))
    series = track_zos(
        oracle, s["x0"], SmoothingConfig(s["beta"], s["q"]),
        StepSchedule(s["s1_0"], s["s2_0"], s["alpha1"], s["alpha2"]),
        log_grid(k_lo, k_hi, points), seed=seed, replicates=replicates, nested_draws=nested_draws, workers=workers,
    )
    window = (k_lo, k_hi)
    fits = {q: fit_series(series, q, window) for q in ("grad-norm", "momentum-gap", "bias-gap")}
    slope = fits["grad-norm"].slope
    passed = -0.45 <= slope <= -0.10
    data = {
        "slopes": {q: f.slope for q, f in fits.items()},
        "half_widths": {q: f.half_width for q, f in fits.items()},
        "reference": {"momentum-gap": -s["alpha2"], "bias-gap": -(s["alpha1"] - s["alpha2"])},
        "points": int(series.k.size),
        "replicates": replicates,
    }
    detail = ", ".join(f"{q} {f.slope:+.3f}" for q, f in fits.items())
    return CheckResult("rate-slope", bool(passed), slope, [-0.45, -0.10], f"slopes {detail}", data=data)


@_timed
def check_sso_end_to_end(
    seeds: Sequence[int] = (0,),
    n: int = 5,
    sigma: float = 0.01,
    beta0: float = 0.3,
    s1_00: float = 0.1,
    s2_00: float = 0.5,
    alpha1: float = 0.5,
    alpha2: float = 0.25,
    epsilon: float = 1e-3,
    q: int = 10,
    M: int = 5,
    max_evals: int = 200_000,
) -> CheckResult:
    """Noisy sphere: thresholds met by every completed subproblem, small final objective, exact radii."""
    schedule = SubproblemSchedule(beta0, s1_00, s2_00, epsilon, alpha1, alpha2)
    rows = []
    for seed in seeds:
        oracle = make_synthetic("sphere", n, NoiseModel("additive-gaussian", sigma), seed=seed)
        res = run_sso(oracle, np.ones(n), schedule, RandomStreams(seed), q=q, min_iters=M, max_evals=max_evals)
        completed = [s for s in res.summaries if s.exit_reason == THRESHOLD_MET]
        thresholds_ok = all(s.m_norm <= schedule.threshold(s.i, res.L) for s in completed)
        flagged_ok = all(s.exit_reason in (THRESHOLD_MET, BUDGET_EXHAUSTED) for s in res.summaries)
        betas_ok = res.betas == [beta0 / (i + 1) ** 2 for i in range(len(res.betas))]
        f_final = oracle.noiseless(res.x)
        rows.append({
            "seed": seed, "exit_reason": res.exit_reason, "subproblems": res.subproblems,
            "completed": len(completed), "thresholds_ok": thresholds_ok and flagged_ok, "betas_ok": betas_ok,
            "f_final": f_final, "evals": res.evals_used, "calls": oracle.calls,
        })
    passed = all(r["thresholds_ok"] and r["betas_ok"] and r["f_final"] <= 1e-2 for r in rows)
    worst = max(r["f_final"] for r in rows)
    detail = (f"{len(rows)} seed(s), subproblems {[r['subproblems'] for r in rows]}, "
              f"max final f {worst:.3g} <= 1e-2, thresholds/radii ok: "
              f"{all(r['thresholds_ok'] and r['betas_ok'] for r in rows)}")
    return CheckResult("sso-end-to-end", bool(passed), worst, 1e-2, detail, data={"rows": rows})


def preset_condition_inputs(subproblems: int = 3) -> List[Dict[str, Any]]:
    from zosso.bench.presets import PRESETS

    out = []
    for name, p in sorted(PRESETS.items()):
        for i in range(subproblems):
            out.append({"preset": name, "i": i, "s2_0": p.s2_00 / (i + 1), "alpha1": p.alpha1, "alpha2": p.alpha2})
    return out


@_timed
def check_conditions(k_max: int = 1_000_000, subproblems: int = 3) -> CheckResult:
    """Re-substitute the solver's indices: each holds on ``[k, k_max]`` and ``k - 1`` fails."""
    rows = []
    for inp in preset_condition_inputs(subproblems):
        rep = solve_conditions(inp["s2_0"], inp["alpha1"], inp["alpha2"], k_max)
        ok = rep.found
        if ok:
            s2, a1, a2 = inp["s2_0"], inp["alpha1"], inp["alpha2"]
            ks1 = np.arange(rep.k1, k_max + 1)
            ks2 = np.arange(rep.k2, k_max + 1)
            ok = bool(cond1_holds(ks1, s2, a2).all() and cond2_holds(ks2, s2, a1, a2).all())
            if rep.k1 > 1:
                ok &= not bool(cond1_holds(rep.k1 - 1, s2, a2))
            if rep.k2 > 1:
                ok &= not bool(cond2_holds(rep.k2 - 1, s2, a1, a2))
            C = rep.C
            if C > 1:
                ok &= not (bool(cond1_holds(C - 1, s2, a2)) and bool(cond2_holds(C - 1, s2, a1, a2)))
        rows.append(dict(inp, k1=rep.k1, k2=rep.k2, C=rep.C, ok=bool(ok)))
    passed = all(r["ok"] for r in rows)
    detail = ", ".join(f"{r['preset']}[i={r['i']}] C={r['C']}" for r in rows)
    return CheckResult("condition-solver", passed, [r["C"] for r in rows], None, detail, data={"rows": rows})


@dataclass
class VerificationReport:
    results: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_text(self) -> str:
        lines = [r.line() for r in self.results]
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} checks passed")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "checks": [_jsonable(asdict(r)) for r in self.results]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def run_checks(quick: bool = False, seed: int = 0, workers: int = 4, log: Optional[Callable[[str], None]] = None) -> VerificationReport:
    """Run every check; ``quick`` shrinks sample sizes by roughly 10-100x."""
    if quick:
        plan = [
            lambda: check_estimator_unbiased(samples=10_000, seed=seed),
            lambda: check_variance_bound(samples=10_000, seed=seed),
            lambda: check_smoothing_bound(samples=100_000, seed=seed),
            lambda: check_analytic_smoothing(samples=100_000, seed=seed),
            lambda: check_momentum_decay(),
            lambda: check_zos_end_to_end(nested_draws=2_000, seed=seed),
            lambda: check_rate_slopes(replicates=4, k_hi=2_000, nested_draws=1_000, seed=seed, workers=workers),
            lambda: check_sso_end_to_end(seeds=(seed,), max_evals=50_000),
            lambda: check_conditions(k_max=100_000),
        ]
    else:
        plan = [
            lambda: check_estimator_unbiased(seed=seed),
            lambda: check_variance_bound(seed=seed),
            lambda: check_smoothing_bound(seed=seed),
            lambda: check_analytic_smoothing(seed=seed),
            lambda: check_momentum_decay(),
            lambda: check_zos_end_to_end(seed=seed),
            lambda: check_rate_slopes(seed=seed, workers=workers),
            lambda: check_sso_end_to_end(seeds=(seed,)),
            lambda: check_conditions(),
        ]
    results = []
    for step in plan:
        res = step()
        if log is not None:
            log(res.line())
        results.append(res)
    return VerificationReport(results)
