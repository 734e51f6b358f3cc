"""Gaussian smoothing: Monte-Carlo smoothed values and one-sided gradient estimates.

The smoothed objective is ``f_beta(x) = E_u[f(x + beta u)]`` with ``u``
standard normal. Its gradient is estimated from ``q`` random probes::

    g = (1/q) sum_j u_j (F(x + beta u_j) - F(x)) / beta

By default one base value ``F(x)`` is shared by the ``q`` probes
(``q + 1`` evaluations); ``per_sample_base`` re-evaluates it per probe
(``2q`` evaluations).
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import stats

from zosso.errors import NonFiniteGradientError
from zosso.oracle import Oracle

__all__ = [
    "GradientEstimate",
    "SmoothingConfig",
    "draw_directions",
    "gradient_estimate",
    "nested_mc_gradient",
    "smoothed_value",
    "uniform_sphere_variant",
]

DISTRIBUTIONS = ("gaussian", "sphere")
TRUNCATION = 3.0
# Variance of a standard normal truncated to [-3, 3].
_TRUNC_VAR = float(stats.truncnorm(-TRUNCATION, TRUNCATION).var())


@dataclass(frozen=True)
class SmoothingConfig:
    beta: float
    q: int = 1
    distribution: str = "gaussian"
    per_sample_base: bool = False
    truncate: bool = False
    stream: str = "directions"

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta!r}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown direction distribution {self.distribution!r}")

    @property
    def evals_per_estimate(self) -> int:
        return 2 * self.q if self.per_sample_base else self.q + 1

    def with_beta(self, beta: float) -> SmoothingConfig:
        return replace(self, beta=beta)


@dataclass
class GradientEstimate:
    g: np.ndarray
    evals_used: int
    directions: np.ndarray
    points: np.ndarray
    values: np.ndarray


def draw_directions(rng, q: int, n: int, distribution: str = "gaussian", truncate: bool = False) -> np.ndarray:
    """Draw ``q`` probe directions as rows of a ``(q, n)`` array.

    Truncation resamples every gaussian coordinate with ``|u_j| > 3`` and
    rescales to unit variance, so ``E[u u^T] = I`` still holds.
    """
    u = np.asarray(rng.standard_normal((q, n)), dtype=float)
    if truncate:
        bad = np.abs(u) > TRUNCATION
        while bad.any():
            u[bad] = rng.standard_normal(int(bad.sum()))
            bad = np.abs(u) > TRUNCATION
        u = u / math.sqrt(_TRUNC_VAR)
    if distribution == "sphere":
        u = u / np.linalg.norm(u, axis=1, keepdims=True)
    return u


def _evaluate(oracle: Oracle, points: np.ndarray, noise_rng, executor: Optional[Executor]) -> np.ndarray:
    if executor is None or not oracle.concurrent_safe:
        return oracle.evaluate_batch(points, noise_rng)
    # one child generator per probe, results gathered in index order
    children = noise_rng.spawn(len(points))
    return np.fromiter(executor.map(oracle.evaluate, points, children), dtype=float, count=len(points))


def gradient_estimate(
    oracle: Oracle,
    x,
    cfg: SmoothingConfig,
    rng,
    noise_rng=None,
    executor: Optional[Executor] = None,
) -> GradientEstimate:
    """Mini-batch one-sided estimate of the smoothed gradient at ``x``.

    Directions come from ``rng``; noise draws from ``noise_rng`` (defaults
    to ``rng``). With an ``executor`` and a concurrency-safe oracle the
    probes run in parallel; the reduction order is fixed either way.
    """
    x = np.asarray(x, dtype=float)
    noise_rng = rng if noise_rng is None else noise_rng
    q, n, beta = cfg.q, x.size, cfg.beta
    u = draw_directions(rng, q, n, cfg.distribution, cfg.truncate)
    probes = x + beta * u
    if cfg.per_sample_base:
        points = np.empty((2 * q, n))
        points[0::2] = probes
        points[1::2] = x
        values = _evaluate(oracle, points, noise_rng, executor)
        base, probed = values[1::2], values[0::2]
    else:
        points = np.vstack([x[None, :], probes])
        values = _evaluate(oracle, points, noise_rng, executor)
        base, probed = values[0], values[1:]
    scale = n if cfg.distribution == "sphere" else 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        g = scale * ((probed - base)[:, None] * u).sum(axis=0) / (q * beta)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradientError(f"non-finite gradient estimate at x={x!r} (beta={beta:g})")
    return GradientEstimate(g=g, evals_used=len(points), directions=u, points=points, values=values)


def uniform_sphere_variant(oracle, x, cfg: SmoothingConfig, rng, noise_rng=None, executor=None) -> GradientEstimate:
    """Gradient estimate with directions uniform on the unit sphere, scaled by ``n``."""
    return gradient_estimate(oracle, x, replace(cfg, distribution="sphere"), rng, noise_rng, executor)


def smoothed_value(
    oracle: Oracle,
    x,
    beta: float,
    num_samples: int,
    rng,
    noise_rng=None,
    *,
    chunk: int = 1 << 16,
    return_stderr: bool = False,
):
    """Monte-Carlo estimate of ``f_beta(x)`` from ``num_samples`` oracle evaluations."""
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples!r}")
    x = np.asarray(x, dtype=float)
    noise_rng = rng if noise_rng is None else noise_rng
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < num_samples:
        m = min(chunk, num_samples - done)
        values = oracle.evaluate_batch(x + beta * rng.standard_normal((m, x.size)), noise_rng)
        total += float(values.sum())
        total_sq += float(np.dot(values, values))
        done += m
    mean = total / num_samples
    if not return_stderr:
        return mean
    var = max(total_sq / num_samples - mean**2, 0.0) * num_samples / max(num_samples - 1, 1)
    return mean, math.sqrt(var / num_samples)


def nested_mc_gradient(
    oracle: Oracle,
    x,
    beta: float,
    num_draws: int = 10_000,
    rng=None,
    noise_rng=None,
    *,
    chunk: int = 1 << 14,
    count: bool = False,
):
    """Average of ``num_draws`` single-probe estimates, each with its own base draw.

    Returns ``(mean, stderr)`` where ``stderr`` is the componentwise standard
    error. Evaluations are not charged to the oracle counter unless
    ``count`` is set.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng() if rng is None else rng
    noise_rng = rng if noise_rng is None else noise_rng
    n = x.size
    s = np.zeros(n)
    s2 = np.zeros(n)
    done = 0
    while done < num_draws:
        m = min(chunk, num_draws - done)
        u = rng.standard_normal((m, n))
        points = np.empty((2 * m, n))
        points[0::2] = x + beta * u
        points[1::2] = x
        values = oracle.evaluate_batch(points, noise_rng, count=count)
        est = u * ((values[0::2] - values[1::2]) / beta)[:, None]
        s += est.sum(axis=0)
        s2 += (est * est).sum(axis=0)
        done += m
    mean = s / num_draws
    var = np.maximum(s2 / num_draws - mean**2, 0.0) * num_draws / max(num_draws - 1, 1)
    return mean, np.sqrt(var / num_draws)
