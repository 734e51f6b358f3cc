"""Noisy blackbox oracles, box bounds and the subprocess evaluation protocol.

An oracle maps a point ``x`` and a random generator to one draw of
``F(x, xi)``. Synthetic oracles wrap an analytic test function plus a
:class:`NoiseModel`; :class:`SubprocessOracle` talks to an external
program over a line-based text protocol.
"""

from __future__ import annotations

import math
import os
import selectors
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import erf

from zosso.errors import EvaluationError, EvaluationTimeout

__all__ = [
    "BoxBounds",
    "NoiseModel",
    "Oracle",
    "SubprocessOracle",
    "SyntheticOracle",
    "format_vector",
    "make_synthetic",
    "project_box",
    "subprocess_oracle",
    "PROBLEMS",
]

PROBLEMS = ("sphere", "quadratic", "rosenbrock", "abs-sum")
NOISE_KINDS = ("none", "additive-gaussian", "additive-uniform", "multiplicative-gaussian")


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError(f"lower and upper differ in length: {lower.size} != {upper.size}")
        if not np.all(lower < upper):
            raise ValueError("bounds require lower < upper in every coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, n: int, lower: float, upper: float) -> BoxBounds:
        return cls(np.full(n, float(lower)), np.full(n, float(upper)))

    @property
    def n(self) -> int:
        return self.lower.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def radius(self) -> float:
        """Largest euclidean norm of a point in the box."""
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))


def project_box(x, bounds: BoxBounds) -> np.ndarray:
    """Clamp ``x`` componentwise into ``[lower, upper]``."""
    x = np.asarray(x, dtype=float)
    if x.shape != bounds.lower.shape:
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, bounds have {bounds.n}")
    return np.maximum(bounds.lower, np.minimum(x, bounds.upper))


@dataclass(frozen=True)
class NoiseModel:
    """Distribution of the noise term added to (or multiplied into) ``f(x)``.

    ``scale`` is the standard deviation for the gaussian kinds and the
    half-width for ``additive-uniform``.
    """

    kind: str = "none"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not (self.scale >= 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"noise scale must be finite and >= 0, got {self.scale!r}")

    @property
    def silent(self) -> bool:
        return self.kind == "none" or self.scale == 0.0

    @property
    def multiplicative(self) -> bool:
        return self.kind == "multiplicative-gaussian"

    def apply(self, values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.silent:
            return values
        size = values.shape
        if self.kind == "additive-gaussian":
            return values + self.scale * rng.standard_normal(size)
        if self.kind == "additive-uniform":
            return values + rng.uniform(-self.scale, self.scale, size)
        return values * (1.0 + self.scale * rng.standard_normal(size))


class Oracle:
    """Base blackbox. Subclasses implement :meth:`_evaluate`.

    ``calls`` counts every evaluation charged to the optimization budget.
    """

    concurrent_safe = True
    analytic_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_L0: Optional[float] = None

    def __init__(self, n: int):
        if int(n) < 1:
            raise ValueError(f"dimension must be positive, got {n!r}")
        self.n = int(n)
        self.calls = 0
        self._lock = threading.Lock()

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected a point of shape ({self.n},), got {x.shape}")
        return x

    def _charge(self, k: int) -> None:
        with self._lock:
            self.calls += k

    def _evaluate(self, x: np.ndarray, rng: Optional[np.random.Generator]) -> float:
        raise NotImplementedError

    def evaluate(self, x, rng: Optional[np.random.Generator] = None, count: bool = True) -> float:
        x = self._check(x)
        value = self._evaluate(x, rng)
        if count:
            self._charge(1)
        return value

    __call__ = evaluate

    def evaluate_batch(self, points, rng: Optional[np.random.Generator] = None, count: bool = True) -> np.ndarray:
        """Evaluate the rows of ``points`` in order, drawing noise sequentially from ``rng``."""
        points = np.asarray(points, dtype=float)
        return np.array([self.evaluate(p, rng, count) for p in points], dtype=float)


class SyntheticOracle(Oracle):
    def __init__(
        self,
        name: str,
        n: int,
        value: Callable[[np.ndarray], np.ndarray],
        noise: NoiseModel = NoiseModel(),
        *,
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        smoothed: Optional[Callable[[np.ndarray, float], float]] = None,
        smoothed_gradient: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
        lipschitz_L0: Optional[float] = None,
        domain: Optional[BoxBounds] = None,
        seed: int = 0,
    ):
        super().__init__(n)
        self.name = name
        self._value = value
        self.noise = noise
        self.analytic_gradient = gradient
        self.smoothed = smoothed
        self.smoothed_gradient = smoothed_gradient
        self.lipschitz_L0 = lipschitz_L0
        self.domain = domain
        self.seed = seed
        self._default_rng = np.random.default_rng(seed)

    def noiseless(self, x) -> float:
        return float(self._value(np.asarray(x, dtype=float)[None, :])[0])

    def noiseless_batch(self, points) -> np.ndarray:
        return self._value(np.atleast_2d(np.asarray(points, dtype=float)))

    def evaluate_batch(self, points, rng=None, count=True) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.n:
            raise ValueError(f"expected points with {self.n} columns, got {points.shape}")
        values = self.noise.apply(self._value(points), rng if rng is not None else self._default_rng)
        if not np.all(np.isfinite(values)):
            raise EvaluationError(f"{self.name}: non-finite objective value")
        if count:
            self._charge(len(points))
        return values

    def _evaluate(self, x, rng):
        return float(self.evaluate_batch(x[None, :], rng, count=False)[0])

    def __repr__(self):
        return f"SyntheticOracle({self.name!r}, n={self.n}, noise={self.noise})"


# -- synthetic problems -------------------------------------------------------


def _sphere(n, domain):
    value = lambda X: np.einsum("ij,ij->i", X, X)
    return dict(
        value=value,
        gradient=lambda x: 2.0 * np.asarray(x, dtype=float),
        smoothed=lambda x, beta: float(np.dot(x, x) + n * beta**2),
        smoothed_gradient=lambda x, beta: 2.0 * np.asarray(x, dtype=float),
        lipschitz_L0=2.0 * domain.radius(),
    )


def _quadratic(n, domain, A, b):
    value = lambda X: 0.5 * np.einsum("ij,jk,ik->i", X, A, X) + X @ b
    grad = lambda x: A @ np.asarray(x, dtype=float) + b
    trace = float(np.trace(A))
    return dict(
        value=value,
        gradient=grad,
        # gaussian smoothing of a quadratic only shifts it by beta^2 tr(A) / 2
        smoothed=lambda x, beta: float(value(np.asarray(x, dtype=float)[None, :])[0] + 0.5 * beta**2 * trace),
        smoothed_gradient=lambda x, beta: grad(x),
        lipschitz_L0=float(np.linalg.norm(A, 2) * domain.radius() + np.linalg.norm(b)),
    )


def _rosenbrock(n, domain):
    if n < 2:
        raise ValueError("rosenbrock needs n >= 2")

    def value(X):
        return np.sum(100.0 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (1.0 - X[:, :-1]) ** 2, axis=1)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[:-1] = -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
        return g

    # Upper bound of sup |df/dx_j| over the box; valid, not tight.
    r = np.maximum(np.abs(domain.lower), np.abs(domain.upper))
    bound = np.zeros(n)
    bound[:-1] = 400.0 * r[:-1] * (r[1:] + r[:-1] ** 2) + 2.0 * (1.0 + r[:-1])
    bound[1:] += 200.0 * (r[1:] + r[:-1] ** 2)
    return dict(value=value, gradient=gradient, lipschitz_L0=float(np.linalg.norm(bound)))


def _abs_sum(n, domain):
    def smoothed(x, beta):
        x = np.asarray(x, dtype=float)
        z = x / beta
        # E|x + beta u| for scalar standard normal u, summed over coordinates
        return float(np.sum(beta * math.sqrt(2.0 / math.pi) * np.exp(-0.5 * z**2) + x * erf(z / math.sqrt(2.0))))

    return dict(
        value=lambda X: np.sum(np.abs(X), axis=1),
        smoothed=smoothed,
        smoothed_gradient=lambda x, beta: erf(np.asarray(x, dtype=float) / (beta * math.sqrt(2.0))),
        lipschitz_L0=math.sqrt(n),
    )


def _random_spd(n, rng):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * np.linspace(1.0, 3.0, n)) @ q.T


def make_synthetic(
    problem: str,
    n: int,
    noise: Optional[NoiseModel] = None,
    seed: int = 0,
    *,
    A=None,
    b=None,
    domain: Optional[BoxBounds] = None,
) -> SyntheticOracle:
    """Build a synthetic noisy oracle.

    ``problem`` is one of ``sphere``, ``quadratic`` (``0.5 x'Ax + b'x``),
    ``rosenbrock`` or ``abs-sum``. The Lipschitz constant is declared on
    ``domain`` (default ``[-5, 5]^n``); ``abs-sum`` has the global constant
    ``sqrt(n)``. Without ``A``, the quadratic draws a random SPD matrix with
    eigenvalues in ``[1, 3]`` from ``seed``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n!r}")
    noise = noise if noise is not None else NoiseModel()
    domain = domain if domain is not None else BoxBounds.uniform(n, -5.0, 5.0)
    if domain.n != n:
        raise ValueError(f"domain has {domain.n} coordinates, problem has {n}")
    key = problem.replace("_", "-").lower()
    if key == "sphere":
        parts = _sphere(n, domain)
    elif key == "quadratic":
        A = _random_spd(n, np.random.default_rng(seed)) if A is None else np.asarray(A, dtype=float)
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        if A.shape != (n, n) or b.shape != (n,):
            raise ValueError(f"quadratic data shapes {A.shape}, {b.shape} do not match n={n}")
        parts = _quadratic(n, domain, A, b)
    elif key == "rosenbrock":
        parts = _rosenbrock(n, domain)
    elif key in ("abs-sum", "abssum"):
        key = "abs-sum"
        parts = _abs_sum(n, domain)
    else:
        raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    return SyntheticOracle(key, n, noise=noise, domain=domain, seed=seed, **parts)


# -- subprocess protocol ------------------------------------------------------


def format_vector(x) -> str:
    """Wire encoding of a point: 17 significant digits, space separated, newline terminated."""
    return " ".join(f"{float(v):.17g}" for v in np.asarray(x, dtype=float)) + "\n"


class SubprocessOracle(Oracle):
    """Blackbox served by an external process.

    The process reads one request line of ``n`` space-separated decimals and
    answers with one line holding a single decimal. It is started lazily,
    kept alive across calls and killed on any protocol failure; the next
    call starts a fresh one. Serial only.
    """

    concurrent_safe = False

    def __init__(
        self,
        command: Union[str, Sequence[str]],
        n: int,
        timeout: float = 30.0,
        cwd: Optional[str] = None,
        env: Optional[dict] = None,
    ):
        super().__init__(n)
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise ValueError("empty command")
        if not timeout > 0:
            raise ValueError(f"timeout must be positive, got {timeout!r}")
        self.timeout = float(timeout)
        self.cwd = cwd
        self.env = env
        self._proc: Optional[subprocess.Popen] = None
        self._buffer = b""

    def _start(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    cwd=self.cwd,
                    env=self.env,
                )
            except OSError as exc:
                raise EvaluationError(f"cannot start {self.command[0]!r}: {exc}") from exc
            self._buffer = b""
        return self._proc

    def _readline(self, proc: subprocess.Popen) -> bytes:
        deadline = time.monotonic() + self.timeout
        fd = proc.stdout.fileno()
        with selectors.DefaultSelector() as sel:
            sel.register(fd, selectors.EVENT_READ)
            while b"\n" not in self._buffer:
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not sel.select(remaining):
                    self.close()
                    raise EvaluationTimeout(f"no reply within {self.timeout:g} s")
                chunk = os.read(fd, 4096)
                if not chunk:
                    code = proc.wait()
                    self.close()
                    raise EvaluationError(f"blackbox process exited with status {code}")
                self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line

    def _evaluate(self, x, rng=None):
        proc = self._start()
        try:
            proc.stdin.write(format_vector(x).encode("ascii"))
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.close()
            raise EvaluationError(f"cannot write request: {exc}") from exc
        raw = self._readline(proc)
        try:
            value = float(raw.decode("ascii").strip())
        except (UnicodeDecodeError, ValueError):
            self.close()
            raise EvaluationError(f"malformed reply {raw[:80]!r}") from None
        if not math.isfinite(value):
            self.close()
            raise EvaluationError(f"non-finite reply {raw[:80]!r}")
        return value

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        if proc.poll() is None:
            proc.kill()
        proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def subprocess_oracle(command, n: int, timeout: float = 30.0, **kwargs) -> SubprocessOracle:
    return SubprocessOracle(command, n, timeout=timeout, **kwargs)
