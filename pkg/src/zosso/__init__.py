"""Zeroth-order stochastic optimization with Gaussian smoothing.

Gradient-free minimization of noisy blackboxes: a one-sided smoothed
gradient estimator, a sign-of-momentum inner solver (ZO-Signum) and a
sequential driver that solves a chain of smoothed subproblems with a
shrinking smoothing radius.
"""

from zosso.errors import (
    ConfigError,
    EvaluationError,
    EvaluationTimeout,
    NonFiniteGradientError,
)
from zosso.oracle import (
    BoxBounds,
    NoiseModel,
    Oracle,
    SubprocessOracle,
    SyntheticOracle,
    make_synthetic,
    project_box,
    subprocess_oracle,
)
from zosso.rng import RandomStreams
from zosso.smoothing import (
    GradientEstimate,
    SmoothingConfig,
    gradient_estimate,
    nested_mc_gradient,
    smoothed_value,
    uniform_sphere_variant,
)
from zosso.sso import EvalCache, SsoResult, SubproblemSchedule, run_sso, search_restart
from zosso.trace import RunTrace, TraceRecord
from zosso.zo_signum import MomentumState, StepSchedule, ZosResult, run_zos, zos_step

__version__ = "0.1.0"

__all__ = [
    "BoxBounds",
    "ConfigError",
    "EvalCache",
    "EvaluationError",
    "EvaluationTimeout",
    "GradientEstimate",
    "MomentumState",
    "NoiseModel",
    "NonFiniteGradientError",
    "Oracle",
    "RandomStreams",
    "RunTrace",
    "SmoothingConfig",
    "SsoResult",
    "StepSchedule",
    "SubprocessOracle",
    "SubproblemSchedule",
    "SyntheticOracle",
    "TraceRecord",
    "ZosResult",
    "gradient_estimate",
    "make_synthetic",
    "nested_mc_gradient",
    "project_box",
    "run_sso",
    "run_zos",
    "search_restart",
    "smoothed_value",
    "subprocess_oracle",
    "uniform_sphere_variant",
    "zos_step",
]
