import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zosso import BoxBounds, EvalCache, MomentumState, RunTrace, StepSchedule, SubproblemSchedule, make_synthetic, project_box
from zosso.bench import RunConfig, parse_config
from zosso.diagnostics import cond1_holds, cond2_holds, fit_rate, solve_conditions
from zosso.trace import TraceRecord
from zosso.zo_signum import momentum_update

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
unit_open = st.floats(1e-3, 0.999)


@st.composite
def box_and_point(draw, n=None):
    n = draw(st.integers(1, 8)) if n is None else n
    lower = draw(arrays(float, n, elements=st.floats(-100, 100)))
    width = draw(arrays(float, n, elements=st.floats(1e-3, 100)))
    x = draw(arrays(float, n, elements=finite))
    return BoxBounds(lower, lower + width), x


@given(box_and_point())
def test_projection_feasible_and_idempotent(data):
    b, x = data
    p = project_box(x, b)
    assert b.contains(p)
    np.testing.assert_array_equal(project_box(p, b), p)
    if b.contains(x):
        np.testing.assert_array_equal(p, x)


@given(box_and_point(n=4), arrays(float, 4, elements=st.floats(0, 1e3)))
def test_projection_monotone(data, delta):
    b, x = data
    assert np.all(project_box(x + delta, b) >= project_box(x, b))


@given(
    arrays(float, 5, elements=st.floats(-1e3, 1e3)),
    arrays(float, 5, elements=st.floats(-1e3, 1e3)),
    arrays(float, 5, elements=st.floats(-1e3, 1e3)),
    st.floats(1e-6, 1.0),
    st.floats(1e-6, 1.0),
)
def test_momentum_update_properties(m, g, x, s1, s2):
    new = momentum_update(MomentumState(m, x, 3), g, s1, s2)
    assert new.k == 4
    assert np.linalg.norm(new.m) <= max(np.linalg.norm(g), np.linalg.norm(m)) * (1 + 1e-12) + 1e-300
    step = np.abs(new.x - x)
    assert np.all(step <= s1 * (1 + 1e-9) + 1e-9 * np.abs(x))
    moved = new.m != 0
    np.testing.assert_allclose(step[moved], s1, rtol=1e-6, atol=1e-9 * (1 + np.abs(x[moved]).max(initial=0)))
    assert np.all(step[~moved] == 0)


@given(unit_open, unit_open, st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_step_schedule_decreasing_in_unit_interval(s1_0, s2_0, a, b):
    assume(abs(a - b) > 1e-3)
    a1, a2 = max(a, b), min(a, b)
    s = StepSchedule(s1_0, s2_0, a1, a2)
    prev = s.steps(0)
    for k in range(1, 60):
        cur = s.steps(k)
        assert 0 < cur[0] < prev[0] <= 1 and 0 < cur[1] < prev[1] <= 1
        prev = cur


@given(st.floats(1e-3, 10), unit_open, unit_open, st.floats(1e-6, 1.0), st.floats(0.0, 1e3))
def test_outer_schedule_monotone(beta0, s1_00, s2_00, eps, L):
    s = SubproblemSchedule(beta0, s1_00, s2_00, eps, 0.5, 0.25)
    betas = [s.beta(i) for i in range(30)]
    assert all(b < a for a, b in zip(betas, betas[1:]))
    assert betas[4] == beta0 / 25
    taus = [s.threshold(i, L) for i in range(30)]
    if L > 0:
        assert all(b < a for a, b in zip(taus, taus[1:]))
    for i in range(10):
        inner = s.steps(i)
        for k in (0, 1, 10):
            s1, s2 = inner.steps(k)
            assert 0 < s1 <= 1 and 0 < s2 <= 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.05, 0.95), st.floats(0.02, 0.9))
def test_condition_solver_resubstitution(s2_0, a1, a2):
    assume(a2 < a1 - 1e-3)
    k_max = 50_000
    rep = solve_conditions(s2_0, a1, a2, k_max)
    for k, cond in ((rep.k1, lambda k: cond1_holds(k, s2_0, a2)), (rep.k2, lambda k: cond2_holds(k, s2_0, a1, a2))):
        if k is None:
            assert not cond(k_max)
            continue
        assert cond(np.arange(k, k_max + 1)).all()
        if k > 1:
            assert not cond(k - 1)


@given(st.floats(-2.0, 1.0), st.floats(1e-3, 1e3))
def test_fit_rate_recovers_power_and_is_scale_invariant(p, c):
    k = np.arange(1.0, 80.0)
    assert math.isclose(fit_rate(k, c * k**p).slope, p, abs_tol=1e-9)
    assert math.isclose(fit_rate(k, c * k**p).slope, fit_rate(k, k**p).slope, abs_tol=1e-9)


@given(st.lists(st.tuples(st.integers(0, 5), st.floats(-10, 10)), min_size=1, max_size=40))
def test_cache_best_is_first_minimal_mean(entries):
    c = EvalCache()
    for idx, value in entries:
        c.add(np.array([float(idx)]), value)
    order, sums = [], {}
    for idx, value in entries:
        if idx not in sums:
            order.append(idx)
            sums[idx] = []
        sums[idx].append(value)
    means = [sum(sums[i]) / len(sums[i]) for i in order]
    expected = order[int(np.argmin(means))]
    assert c.best()[0] == float(expected)
    assert len(c) == len(order)


@given(
    st.integers(0, 10**6), st.integers(0, 100), st.integers(0, 10**9),
    st.lists(st.floats(allow_nan=False), min_size=6, max_size=6),
)
def test_trace_row_round_trip(k, i, evals, floats):
    rec = TraceRecord(k, i, evals, *floats)
    assert TraceRecord.from_row(rec.to_row()) == rec


@settings(suppress_health_check=[HealthCheck.too_slow])
@given(
    st.sampled_from(["sphere", "quadratic", "rosenbrock", "abs-sum"]),
    st.integers(2, 6),
    st.sampled_from(["sso", "zos", "zo-sgd-baseline"]),
    st.sampled_from(["solar", "cifar10", "imagenet"]),
    st.one_of(st.none(), st.floats(1e-4, 1.0)),
    st.one_of(st.none(), st.integers(1, 50)),
    st.one_of(st.none(), st.booleans()),
    st.integers(0, 2**63 - 1),
    st.one_of(st.none(), st.floats(-5, 5)),
)
def test_config_round_trip(problem, n, algorithm, preset, beta0, q, truncate, seed, x):
    cfg = RunConfig(problem=problem, n=n, algorithm=algorithm, preset=preset, beta0=beta0, q=q,
                    truncate=truncate, seed=seed, x0=None if x is None else tuple([x] * n)).validate()
    assert parse_config(cfg.to_text()) == cfg


@given(arrays(float, 3, elements=st.floats(-5, 5)), st.integers(0, 2**32))
def test_noiseless_oracle_repeatable(x, seed):
    o = make_synthetic("abs-sum", 3)
    assert o.evaluate(x, np.random.default_rng(seed)) == o.evaluate(x, np.random.default_rng(seed + 1))
