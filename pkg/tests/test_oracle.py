import math

import numpy as np
import pytest

from zosso import (
    BoxBounds,
    EvaluationError,
    EvaluationTimeout,
    NoiseModel,
    make_synthetic,
    project_box,
    subprocess_oracle,
)
from zosso.oracle import format_vector


def test_project_box_interior_point_unchanged():
    b = BoxBounds([0.0], [1.0])
    assert project_box([0.5], b).tolist() == [0.5]


def test_project_box_clamps_both_sides():
    b = BoxBounds([0.0, 0.0], [1.0, 1.0])
    assert project_box([-2.0, 3.0], b).tolist() == [0.0, 1.0]


def test_project_box_identity_on_feasible_point():
    b = BoxBounds.uniform(12, -1.0, 1.0)
    x = np.zeros(12)
    np.testing.assert_array_equal(project_box(x, b), x)


def test_project_box_dimension_mismatch():
    with pytest.raises(ValueError):
        project_box([0.0, 0.0, 0.0], BoxBounds([0.0, 0.0], [1.0, 1.0]))


def test_bounds_require_lower_below_upper():
    with pytest.raises(ValueError):
        BoxBounds([0.0, 1.0], [1.0, 1.0])


def test_sphere_value():
    assert make_synthetic("sphere", 3).evaluate([1.0, 2.0, 2.0]) == 9.0


def test_abs_sum_value():
    assert make_synthetic("abs-sum", 2).evaluate([-1.0, 0.5]) == 1.5


def test_quadratic_value_and_gradient():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -1.0])
    o = make_synthetic("quadratic", 2, A=A, b=b)
    x = np.array([0.3, -0.7])
    assert o.evaluate(x) == pytest.approx(0.5 * x @ A @ x + b @ x, rel=1e-15)
    np.testing.assert_allclose(o.analytic_gradient(x), A @ x + b)


def test_unknown_problem_rejected():
    with pytest.raises(ValueError):
        make_synthetic("himmelblau", 2)


def test_rosenbrock_needs_two_dimensions():
    with pytest.raises(ValueError):
        make_synthetic("rosenbrock", 1)
    assert make_synthetic("rosenbrock", 3).evaluate(np.ones(3)) == 0.0


def test_additive_gaussian_noise_mean():
    o = make_synthetic("sphere", 2, NoiseModel("additive-gaussian", 0.1), seed=3)
    rng = np.random.default_rng(11)
    values = o.evaluate_batch(np.zeros((100_000, 2)), rng)
    assert abs(values.mean()) <= 3 * 0.1 / math.sqrt(100_000)


@pytest.mark.parametrize("kind, scale, sd", [
    ("additive-gaussian", 0.5, 0.5),
    ("additive-uniform", 0.5, 0.5 / math.sqrt(3.0)),
])
def test_additive_noise_standard_error(kind, scale, sd):
    o = make_synthetic("sphere", 3, NoiseModel(kind, scale))
    x = np.array([0.5, -1.0, 2.0])
    values = o.evaluate_batch(np.tile(x, (100_000, 1)), np.random.default_rng(5))
    assert abs(values.mean() - 5.25) <= 3 * sd / math.sqrt(100_000)
    assert values.std() == pytest.approx(sd, rel=0.02)


def test_noiseless_repeatable_for_any_rng():
    o = make_synthetic("rosenbrock", 4)
    x = np.array([0.1, -0.3, 1.2, 0.4])
    values = {o.evaluate(x, np.random.default_rng(s)) for s in range(5)}
    assert len(values) == 1


def test_noise_rejects_negative_scale_and_unknown_kind():
    with pytest.raises(ValueError):
        NoiseModel("additive-gaussian", -1.0)
    with pytest.raises(ValueError):
        NoiseModel("cauchy", 1.0)


@pytest.mark.parametrize("problem", ["sphere", "quadratic", "rosenbrock"])
def test_analytic_gradient_matches_central_differences(problem):
    o = make_synthetic(problem, 4, seed=2)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.uniform(-2, 2, 4)
        h = 1e-6
        fd = np.array([(o.noiseless(x + h * e) - o.noiseless(x - h * e)) / (2 * h) for e in np.eye(4)])
        np.testing.assert_allclose(o.analytic_gradient(x), fd, rtol=1e-5, atol=1e-6)


def test_abs_sum_lipschitz_per_realization():
    n = 6
    o = make_synthetic("abs-sum", n, NoiseModel("additive-gaussian", 1.0))
    rng = np.random.default_rng(1)
    for _ in range(200):
        x, y = rng.normal(size=(2, n)) * 3
        seed = int(rng.integers(1 << 30))
        # same noise draw for both points
        fx = o.evaluate(x, np.random.default_rng(seed))
        fy = o.evaluate(y, np.random.default_rng(seed))
        assert abs(fx - fy) <= math.sqrt(n) * np.linalg.norm(x - y) + 1e-12
    assert o.lipschitz_L0 == math.sqrt(n)


def test_abs_sum_smoothed_closed_form_against_quadrature():
    from scipy import integrate, stats

    o = make_synthetic("abs-sum", 3)
    x = np.array([0.2, -1.0, 0.0])
    beta = 0.7
    expected = sum(
        integrate.quad(lambda u, xi=xi: abs(xi + beta * u) * stats.norm.pdf(u), -np.inf, np.inf)[0] for xi in x
    )
    assert o.smoothed(x, beta) == pytest.approx(expected, rel=1e-9)


def test_call_counter():
    o = make_synthetic("sphere", 2)
    o.evaluate([0.0, 0.0])
    o.evaluate_batch(np.zeros((4, 2)))
    o.evaluate_batch(np.zeros((4, 2)), count=False)
    assert o.calls == 5


def test_format_vector_round_trips():
    x = np.array([0.1, -1 / 3, 1e-300, 12345.678901234567])
    line = format_vector(x)
    assert line.endswith("\n")
    np.testing.assert_array_equal(np.array([float(v) for v in line.split()]), x)


def test_subprocess_sum(stub):
    with subprocess_oracle(stub("sum"), 3, timeout=10) as o:
        assert o.evaluate([1.0, 2.0, 3.0]) == 6.0
        assert o.evaluate([0.1, 0.2, -0.3]) == pytest.approx(0.0, abs=1e-15)
        assert o.calls == 2
        assert not o.concurrent_safe


def test_subprocess_nan_reply(stub):
    with subprocess_oracle(stub("nan"), 2, timeout=10) as o:
        with pytest.raises(EvaluationError):
            o.evaluate([1.0, 2.0])
        assert o.calls == 0


def test_subprocess_malformed_reply(stub):
    with subprocess_oracle(stub("garbage"), 2, timeout=10) as o:
        with pytest.raises(EvaluationError, match="malformed"):
            o.evaluate([1.0, 2.0])


def test_subprocess_timeout(stub):
    with subprocess_oracle(stub("sleep"), 2, timeout=0.5) as o:
        with pytest.raises(EvaluationTimeout):
            o.evaluate([1.0, 2.0])


def test_subprocess_exit(stub):
    with subprocess_oracle(stub("exit"), 1, timeout=10) as o:
        with pytest.raises(EvaluationError, match="status 7"):
            o.evaluate([1.0])


def test_subprocess_restarts_after_failure(stub):
    with subprocess_oracle(stub("exit"), 1, timeout=10) as o:
        for _ in range(2):
            with pytest.raises(EvaluationError):
                o.evaluate([1.0])


def test_subprocess_missing_executable():
    with pytest.raises(EvaluationError):
        subprocess_oracle("/nonexistent/blackbox", 1).evaluate([1.0])
