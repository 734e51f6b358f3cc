"""Run configuration: a flat ``key = value`` text format.

Unset optional fields are omitted on write and fall back to the preset on
resolution, so ``parse(cfg.to_text()) == cfg`` holds for every valid
config. Floats are written with ``repr`` and therefore round-trip exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from zosso.bench.presets import PRESETS, Preset, get_preset
from zosso.errors import ConfigError
from zosso.oracle import NOISE_KINDS, PROBLEMS

__all__ = ["ALGORITHMS", "RunConfig", "Resolved", "parse_config", "load_config"]

ALGORITHMS = ("sso", "zos", "zo-sgd-baseline")
SUBPROCESS = "subprocess"


def _opt(kind, default=None, help=""):
    return field(default=default, metadata={"kind": kind, "help": help})


@dataclass(frozen=True)
class RunConfig:
    problem: Optional[str] = _opt(str, help=f"one of {', '.join(PROBLEMS + (SUBPROCESS,))}")
    n: Optional[int] = _opt(int, help="problem dimension")
    command: Optional[str] = _opt(str, help="blackbox command line (problem = subprocess)")
    timeout: float = _opt(float, 30.0, "per-evaluation timeout in seconds")
    noise: str = _opt(str, "none", f"one of {', '.join(NOISE_KINDS)}")
    noise_scale: float = _opt(float, 0.0, "noise standard deviation or half-width")
    lower: Optional[float] = _opt(float, help="box lower bound (all coordinates)")
    upper: Optional[float] = _opt(float, help="box upper bound (all coordinates)")
    x0: Optional[Tuple[float, ...]] = _opt(tuple, help="starting point, space separated (default: ones)")
    algorithm: str = _opt(str, "sso", f"one of {', '.join(ALGORITHMS)}")
    preset: str = _opt(str, "solar", f"one of {', '.join(sorted(PRESETS))}")
    beta0: Optional[float] = _opt(float, help="initial smoothing radius")
    s1_00: Optional[float] = _opt(float, help="initial sign step size")
    s2_00: Optional[float] = _opt(float, help="initial momentum step size")
    alpha1: Optional[float] = _opt(float, help="sign step decay power")
    alpha2: Optional[float] = _opt(float, help="momentum step decay power")
    epsilon: Optional[float] = _opt(float, help="stop once the smoothing radius is <= epsilon")
    mode: str = _opt(str, "default", "schedule mode: default or convex")
    rho: Optional[float] = _opt(float, help="convex-mode step parameter in (0, 1/2]")
    q: Optional[int] = _opt(int, help="probes per gradient estimate")
    M: Optional[int] = _opt(int, help="minimum iterations per subproblem")
    N: Optional[int] = _opt(int, help="search-phase budget (0 disables)")
    max_evals: Optional[int] = _opt(int, help="total evaluation budget")
    distribution: Optional[str] = _opt(str, help="probe directions: gaussian or sphere")
    truncate: Optional[bool] = _opt(bool, help="truncate gaussian probes at 3")
    per_sample_base: bool = _opt(bool, False, "re-evaluate the base point per probe")
    threshold: float = _opt(float, 1e-3, "momentum-norm threshold (algorithm = zos)")
    sgd_step: float = _opt(float, 0.01, "baseline step s0 in s0/sqrt(k+1)")
    seed: int = _opt(int, 0, "root random seed")
    thin: int = _opt(int, 1, "keep every thin-th trace record")
    wall_clock: bool = _opt(bool, False, "record wall time (breaks byte-identical traces)")
    output_dir: str = _opt(str, ".", "directory for trace and summary files")
    run_name: str = _opt(str, "run", "file name stem for outputs")

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                lines.append(f"{f.name} = {_format(value)}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    def updated(self, values: Mapping[str, Any]) -> RunConfig:
        """Copy with ``values`` (raw strings or typed) applied."""
        known = {f.name: f for f in fields(self)}
        typed = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            typed[key] = value if not isinstance(value, str) else _convert(key, known[key].metadata["kind"], value)
        return replace(self, **typed)

    # -- validation ----------------------------------------------------------

    def validate(self) -> RunConfig:
        if self.n is None:
            raise ConfigError("n", "missing required key")
        if self.n < 1:
            raise ConfigError("n", f"must be a positive integer, got {self.n}")
        if self.problem is None:
            raise ConfigError("problem", "missing required key")
        if self.problem not in PROBLEMS + (SUBPROCESS,):
            raise ConfigError("problem", f"unknown problem {self.problem!r}")
        if self.problem == SUBPROCESS and not self.command:
            raise ConfigError("command", "required when problem = subprocess")
        if self.problem != SUBPROCESS and self.command:
            raise ConfigError("command", "only valid when problem = subprocess")
        if not self.timeout > 0:
            raise ConfigError("timeout", "must be positive")
        if self.noise not in NOISE_KINDS:
            raise ConfigError("noise", f"unknown noise kind {self.noise!r}")
        if not (self.noise_scale >= 0 and math.isfinite(self.noise_scale)):
            raise ConfigError("noise_scale", "must be finite and >= 0")
        if self.problem == SUBPROCESS and self.noise != "none":
            raise ConfigError("noise", "cannot add synthetic noise to a subprocess blackbox")
        if (self.lower is None) != (self.upper is None):
            raise ConfigError("upper" if self.upper is None else "lower", "lower and upper must be given together")
        if self.lower is not None and not self.lower < self.upper:
            raise ConfigError("lower", "must be below upper")
        if self.noise == "multiplicative-gaussian" and self.lower is None:
            raise ConfigError("noise", "multiplicative noise requires box bounds (lower/upper)")
        if self.x0 is not None:
            if len(self.x0) != self.n:
                raise ConfigError("x0", f"has {len(self.x0)} entries, expected n = {self.n}")
            if not all(math.isfinite(v) for v in self.x0):
                raise ConfigError("x0", "entries must be finite")
            if self.lower is not None and not all(self.lower <= v <= self.upper for v in self.x0):
                raise ConfigError("x0", "lies outside the bounds")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"unknown algorithm {self.algorithm!r}")
        if self.preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {self.preset!r}")
        if self.mode not in ("default", "convex"):
            raise ConfigError("mode", f"unknown mode {self.mode!r}")
        if self.mode == "convex" and (self.rho is None or not 0 < self.rho <= 0.5):
            raise ConfigError("rho", "convex mode needs 0 < rho <= 1/2")
        if self.distribution is not None and self.distribution not in ("gaussian", "sphere"):
            raise ConfigError("distribution", f"unknown distribution {self.distribution!r}")
        if not self.threshold >= 0:
            raise ConfigError("threshold", "must be >= 0")
        if not 0 < self.sgd_step:
            raise ConfigError("sgd_step", "must be positive")
        if self.thin < 1:
            raise ConfigError("thin", "must be >= 1")
        if not self.run_name or "/" in self.run_name:
            raise ConfigError("run_name", "must be a plain file name stem")
        r = self.resolve()
        for name in ("beta0", "epsilon"):
            if not (getattr(r, name) > 0 and math.isfinite(getattr(r, name))):
                raise ConfigError(name, "must be positive and finite")
        for name in ("s1_00", "s2_00"):
            if self.mode == "default" and not 0 < getattr(r, name) < 1:
                raise ConfigError(name, "must lie in (0, 1)")
        if self.mode == "default" and not 0 < r.alpha2 < r.alpha1 < 1:
            given = [a for a in ("alpha1", "alpha2") if getattr(self, a) is not None]
            if len(given) != 1:
                given = ["alpha2" if r.alpha2 >= r.alpha1 or r.alpha2 <= 0 else "alpha1"]
            raise ConfigError(given[0], "need 0 < alpha2 < alpha1 < 1")
        if r.q < 1:
            raise ConfigError("q", "must be >= 1")
        if r.M < 0:
            raise ConfigError("M", "must be >= 0")
        if r.N < 0:
            raise ConfigError("N", "must be >= 0")
        if r.max_evals < 0:
            raise ConfigError("max_evals", "must be >= 0")
        return self

    def resolve(self) -> Resolved:
        p = get_preset(self.preset)

        def pick(name, default):
            value = getattr(self, name)
            return default if value is None else value

        n = self.n or 0
        return Resolved(
            preset=p,
            beta0=pick("beta0", p.beta0),
            s1_00=pick("s1_00", p.s1_00),
            s2_00=pick("s2_00", p.s2_00),
            alpha1=pick("alpha1", p.alpha1),
            alpha2=pick("alpha2", p.alpha2),
            epsilon=pick("epsilon", p.epsilon),
            q=pick("q", p.q),
            M=pick("M", p.M),
            N=pick("N", p.search_budget_for(n)),
            max_evals=pick("max_evals", p.max_evals),
            distribution=pick("distribution", p.distribution),
            truncate=pick("truncate", p.truncate),
        )


@dataclass(frozen=True)
class Resolved:
    """Numeric settings after filling unset fields from the preset."""

    preset: Preset
    beta0: float
    s1_00: float
    s2_00: float
    alpha1: float
    alpha2: float
    epsilon: float
    q: int
    M: int
    N: int
    max_evals: int
    distribution: str
    truncate: bool


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def _convert(key: str, kind, text: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None
    if not text:
        raise ConfigError(key, "empty value")
    return text


def parse_config(text: str, validate: bool = True) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(key or f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise ConfigError(key, "duplicate key")
        values[key] = value
    cfg = RunConfig().updated(values)
    return cfg.validate() if validate else cfg


def load_config(path, validate: bool = True) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), validate)
