"""Execute a :class:`RunConfig` and write its trace and summary."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from zosso.bench.baseline import run_zo_sgd
from zosso.bench.config import SUBPROCESS, RunConfig
from zosso.oracle import BoxBounds, NoiseModel, Oracle, SyntheticOracle, make_synthetic, subprocess_oracle
from zosso.rng import RandomStreams
from zosso.smoothing import SmoothingConfig
from zosso.sso import SubproblemSchedule, run_sso
from zosso.trace import RunTrace
from zosso.zo_signum import EVALUATION_ERROR, StepSchedule, run_zos

__all__ = ["OUTPUT_ENV", "RunOutcome", "build_oracle", "execute", "output_dir", "run_config", "SUMMARY_EVALS"]

OUTPUT_ENV = "ZOSSO_OUTPUT_DIR"
SUMMARY_EVALS = 30


def output_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output_dir)


def bounds_of(cfg: RunConfig) -> Optional[BoxBounds]:
    if cfg.lower is None:
        return None
    return BoxBounds.uniform(cfg.n, cfg.lower, cfg.upper)


def build_oracle(cfg: RunConfig) -> Oracle:
    if cfg.problem == SUBPROCESS:
        return subprocess_oracle(cfg.command, cfg.n, timeout=cfg.timeout)
    bounds = bounds_of(cfg)
    return make_synthetic(cfg.problem, cfg.n, NoiseModel(cfg.noise, cfg.noise_scale), seed=cfg.seed, domain=bounds)


def start_point(cfg: RunConfig) -> np.ndarray:
    if cfg.x0 is not None:
        return np.array(cfg.x0, dtype=float)
    x0 = np.ones(cfg.n)
    bounds = bounds_of(cfg)
    if bounds is not None and not bounds.contains(x0):
        x0 = 0.5 * (bounds.lower + bounds.upper)
    return x0


@dataclass
class RunOutcome:
    trace: RunTrace
    summary: Dict[str, Any]
    x: np.ndarray
    exit_reason: str
    error: Optional[str] = None
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.exit_reason == EVALUATION_ERROR


def execute(cfg: RunConfig, oracle: Optional[Oracle] = None) -> RunOutcome:
    """Run the configured algorithm in memory (no files written)."""
    cfg.validate()
    r = cfg.resolve()
    own = oracle is None
    oracle = build_oracle(cfg) if own else oracle
    try:
        return _execute(cfg, r, oracle)
    finally:
        if own and hasattr(oracle, "close"):
            oracle.close()


def _execute(cfg, r, oracle) -> RunOutcome:
    streams = RandomStreams(cfg.seed)
    bounds = bounds_of(cfg)
    x0 = start_point(cfg)
    trace = RunTrace(wall_clock=cfg.wall_clock, thin=cfg.thin)
    estimator = SmoothingConfig(
        beta=r.beta0, q=r.q, distribution=r.distribution, per_sample_base=cfg.per_sample_base, truncate=r.truncate
    )
    extra: Dict[str, Any] = {}
    if cfg.algorithm == "sso":
        schedule = SubproblemSchedule(r.beta0, r.s1_00, r.s2_00, r.epsilon, r.alpha1, r.alpha2, cfg.mode, cfg.rho)
        res = run_sso(
            oracle, x0, schedule, streams, q=r.q, min_iters=r.M, search_budget=r.N,
            max_evals=r.max_evals, bounds=bounds, estimator=estimator, trace=trace,
        )
        x, reason, error, used = res.x, res.exit_reason, res.error, res.evals_used
        extra["subproblems"] = res.subproblems
        extra["L"] = res.L
        extra["final_beta"] = res.betas[-1] if res.summaries else None
    elif cfg.algorithm == "zos":
        if cfg.mode == "convex":
            schedule = SubproblemSchedule(r.beta0, r.s1_00, r.s2_00, r.epsilon, mode="convex", rho=cfg.rho).steps(0)
        else:
            schedule = StepSchedule(r.s1_00, r.s2_00, r.alpha1, r.alpha2)
        res = run_zos(
            oracle, x0, estimator, schedule, cfg.threshold, r.M, streams,
            max_evals=r.max_evals, bounds=bounds, trace=trace,
        )
        x, reason, error, used = res.x, res.exit_reason, res.error, res.evals_used
        extra["iterations"] = res.iterations
        extra["m_norm"] = res.state.m_norm
    else:
        res = run_zo_sgd(
            oracle, x0, estimator, cfg.sgd_step, streams, max_evals=r.max_evals, bounds=bounds, trace=trace
        )
        x, reason, error, used = res.x, res.exit_reason, res.error, res.evals_used
        extra["iterations"] = res.iterations

    summary: Dict[str, Any] = {
        "algorithm": cfg.algorithm,
        "problem": cfg.problem,
        "n": cfg.n,
        "seed": cfg.seed,
        "preset": cfg.preset,
        "exit_reason": reason,
        "budget_exhausted": reason == "budget-exhausted",
        "evals_used": used,
        "oracle_calls": oracle.calls,
        "max_evals": r.max_evals,
        "x_final": [float(v) for v in x],
    }
    summary.update(extra)
    if error is None:
        # fresh draws from a dedicated stream, not charged to the budget
        points = np.repeat(x[None, :], SUMMARY_EVALS, axis=0)
        values = oracle.evaluate_batch(points, streams["summary"], count=False)
        summary["final_f_estimate"] = float(np.mean(values))
        summary["final_f_evals"] = SUMMARY_EVALS
    else:
        summary["error"] = error
        summary["final_f_estimate"] = None
    if isinstance(oracle, SyntheticOracle):
        summary["final_f_noiseless"] = oracle.noiseless(x)
    return RunOutcome(trace, summary, x, reason, error)


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    return value


def write_outputs(outcome: RunOutcome, cfg: RunConfig, directory: Optional[Path] = None) -> Dict[str, Path]:
    directory = output_dir(cfg) if directory is None else Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    trace_path = directory / f"{cfg.run_name}_trace.csv"
    summary_path = directory / f"{cfg.run_name}_summary.json"
    outcome.trace.write(trace_path)
    summary_path.write_text(json.dumps(_json_safe(outcome.summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    outcome.paths = {"trace": trace_path, "summary": summary_path}
    return outcome.paths


def run_config(cfg: RunConfig, directory: Optional[Path] = None) -> RunOutcome:
    outcome = execute(cfg)
    write_outputs(outcome, cfg, directory)
    return outcome
