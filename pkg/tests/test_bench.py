import json
import subprocess
import sys

import numpy as np
import pytest

from zosso import ConfigError, RunTrace, SmoothingConfig, make_synthetic
from zosso.bench import PRESETS, RunConfig, get_preset, parse_config, run_zo_sgd, sgd_update, zo_sgd_baseline_step
from zosso.bench.cli import main, multi_seed_table, preset_text
from zosso.bench.runner import OUTPUT_ENV, execute
from zosso.verify import constant_oracle


def cli(*args, env=None, cwd=None):
    return subprocess.run([sys.executable, "-m", "zosso", *args], capture_output=True, text=True, env=env, cwd=cwd)


# -- config --------------------------------------------------------------------


def test_config_round_trip_full():
    cfg = RunConfig(
        problem="sphere", n=3, noise="additive-uniform", noise_scale=0.125, lower=-2.0, upper=2.5,
        x0=(0.1, -1 / 3, 2.0), algorithm="zos", preset="imagenet", beta0=0.1, s1_00=0.2, s2_00=0.3,
        alpha1=0.7, alpha2=0.2, epsilon=1e-4, q=4, M=3, N=12, max_evals=999, distribution="sphere",
        truncate=True, per_sample_base=True, threshold=1e-5, sgd_step=0.02, seed=2**40, thin=3,
        wall_clock=True, output_dir="out dir", run_name="r1",
    ).validate()
    assert parse_config(cfg.to_text()) == cfg


def test_config_round_trip_minimal(tmp_path):
    cfg = RunConfig(problem="abs-sum", n=2)
    path = tmp_path / "c.cfg"
    cfg.write(path)
    from zosso.bench import load_config

    assert load_config(path) == cfg
    assert "beta0" not in path.read_text()


def test_config_comments_and_blank_lines():
    cfg = parse_config("# header\n\nproblem = sphere  # trailing\nn=4\n")
    assert cfg.problem == "sphere" and cfg.n == 4


@pytest.mark.parametrize("text, field", [
    ("problem = sphere\n", "n"),
    ("n = 3\n", "problem"),
    ("problem = sphere\nn = three\n", "n"),
    ("problem = sphere\nn = 0\n", "n"),
    ("problem = sphere\nn = 3\nbogus = 1\n", "bogus"),
    ("problem = sphere\nn = 3\nn = 4\n", "n"),
    ("problem = sphere\nn = 3\nalgorithm = cma\n", "algorithm"),
    ("problem = sphere\nn = 3\nnoise = multiplicative-gaussian\nnoise_scale = 0.1\n", "noise"),
    ("problem = sphere\nn = 3\nlower = 0\n", "upper"),
    ("problem = sphere\nn = 3\nlower = 1\nupper = 0\n", "lower"),
    ("problem = sphere\nn = 3\nx0 = 1 2\n", "x0"),
    ("problem = subprocess\nn = 3\n", "command"),
    ("problem = sphere\nn = 3\ns1_00 = 1.5\n", "s1_00"),
    ("problem = sphere\nn = 3\nalpha1 = 0.2\n", "alpha1"),
    ("problem = sphere\nn = 3\nmode = convex\n", "rho"),
    ("problem = sphere\nn = 3\npreset = mnist\n", "preset"),
    ("problem = sphere\nn = 3\ntruncate = maybe\n", "truncate"),
    ("problem = sphere\nn = 3\nnot a pair\n", "not a pair"),
])
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert field in str(info.value)


def test_multiplicative_noise_allowed_with_bounds():
    cfg = parse_config("problem = sphere\nn = 2\nnoise = multiplicative-gaussian\nnoise_scale = 0.1\n"
                       "lower = -1\nupper = 1\n")
    out = execute(cfg.updated({"max_evals": 200}))
    assert np.all(np.abs(out.x) <= 1)


def test_resolve_uses_preset_defaults():
    r = RunConfig(problem="sphere", n=30, preset="solar").resolve()
    assert (r.beta0, r.s1_00, r.s2_00, r.alpha1, r.alpha2, r.q, r.M) == (0.3, 0.1, 0.5, 0.5, 0.25, 10, 5)
    assert r.N == 0  # search only for small dimensions
    assert RunConfig(problem="sphere", n=10).resolve().N == 100
    assert RunConfig(problem="sphere", n=10, N=0).resolve().N == 0
    assert RunConfig(problem="sphere", n=10, q=3).resolve().q == 3


# -- presets -------------------------------------------------------------------


def test_presets_schedule_values():
    for p in PRESETS.values():
        s = p.schedule()
        steps = s.steps(1)
        s1, s2 = steps.steps(3)
        assert s1 == pytest.approx(p.s1_00 / 2**1.5 / 2.0, rel=1e-14)
        assert s2 == pytest.approx(p.s2_00 / 2 / 4**0.25, rel=1e-14)
        assert s.beta(1) == p.beta0 / 4
    with pytest.raises(KeyError):
        get_preset("mnist")


# -- baseline ------------------------------------------------------------------


def test_sgd_update_arithmetic():
    np.testing.assert_allclose(sgd_update([0.0, 0.0], [1.0, 0.0], 0.1), [-0.1, 0.0])


def test_baseline_constant_oracle_does_not_move():
    x, est = zo_sgd_baseline_step(np.ones(3), constant_oracle(3), SmoothingConfig(0.1, 2), 0.5, 0)
    np.testing.assert_array_equal(x, np.ones(3))
    assert est.evals_used == 3


def test_baseline_sphere_reduction():
    o = make_synthetic("sphere", 5)
    x0 = np.ones(5)
    res = run_zo_sgd(o, x0, SmoothingConfig(0.01, 10), 0.01, 0, max_iters=10_000)
    assert res.iterations == 10_000
    assert o.noiseless(res.x) < 0.05 * o.noiseless(x0)
    assert res.trace[-1].evals == o.calls == 110_000


def test_baseline_budget_and_trace():
    o = make_synthetic("sphere", 2)
    res = run_zo_sgd(o, np.ones(2), SmoothingConfig(0.1, 4), 0.05, 0, max_evals=52)
    assert res.exit_reason == "budget-exhausted"
    assert res.trace.column("evals") == [5 * k for k in range(1, 11)]


# -- cli -----------------------------------------------------------------------


PAPER_TABLE = {
    "cifar10": (r"\frac{0.005}{(i+1)^2}", r"\frac{0.005}{(i+1)^{\frac{3}{2}}\sqrt{k+1}}",
                r"\frac{0.9}{(i+1) (k+1)^{\frac{1}{4}}}", "60", "10"),
    "imagenet": (r"\frac{0.001}{(i+1)^{2}}", r"\frac{0.003}{(i+1)^{\frac{3}{2}}\sqrt{k+1}}",
                 r"\frac{0.7}{(i+1) (k+1)^{\frac{1}{4}}}", "100", "10"),
    "solar": (r"\frac{0.3}{(i+1)^2}", r"\frac{0.1}{(i+1)^{\frac{3}{2}}\sqrt{k+1}}",
              r"\frac{0.5}{(i+1) (k+1)^{\frac{1}{4}}}", "5", "10"),
}


@pytest.mark.parametrize("name", sorted(PAPER_TABLE))
def test_print_preset_strings(name):
    out = cli("print-preset", name)
    assert out.returncode == 0
    beta, s1, s2, M, q = PAPER_TABLE[name]
    lines = out.stdout.splitlines()
    assert f"# beta^i = {beta}" in lines
    assert f"# s_1^{{i,k}} = {s1}" in lines
    assert f"# s_2^{{i,k}} = {s2}" in lines
    assert f"# M = {M}" in lines and f"# q = {q}" in lines


def test_print_preset_output_is_a_config_body():
    cfg = parse_config(preset_text("cifar10") + "problem = sphere\nn = 4\n")
    r = cfg.resolve()
    assert (r.beta0, r.s1_00, r.s2_00, r.M, r.q) == (0.005, 0.005, 0.9, 60, 10)


def test_run_missing_n_names_field(tmp_path):
    (tmp_path / "bad.cfg").write_text("problem = sphere\n")
    out = cli("run", str(tmp_path / "bad.cfg"), cwd=tmp_path)
    assert out.returncode != 0
    assert '"n"' in out.stderr or "n:" in out.stderr


def test_run_writes_trace_and_summary(tmp_path):
    code = main(["run", "--problem", "sphere", "--n", "4", "--noise", "additive-gaussian", "--noise_scale", "0.01",
                 "--output_dir", str(tmp_path), "--run_name", "t"])
    assert code == 0
    summary = json.loads((tmp_path / "t_summary.json").read_text())
    trace = RunTrace.read(tmp_path / "t_trace.csv")
    assert summary["exit_reason"] in ("budget-exhausted", "epsilon-reached")
    assert summary["evals_used"] == trace[-1].evals == summary["oracle_calls"]
    assert summary["final_f_evals"] == 30
    # summary evaluations are not charged to the budget
    assert summary["oracle_calls"] <= summary["max_evals"]


def test_output_dir_env_override(tmp_path):
    env = dict(__import__("os").environ, **{OUTPUT_ENV: str(tmp_path / "env")})
    out = cli("run", "--problem", "abs-sum", "--n", "3", "--max_evals", "100", "--output_dir", str(tmp_path / "cfg"),
              env=env, cwd=tmp_path)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "env" / "run_trace.csv").exists()
    assert not (tmp_path / "cfg").exists()


def test_same_seed_identical_trace_files(tmp_path):
    for name in ("a", "b"):
        assert main(["run", "--preset", "solar", "--problem", "sphere", "--n", "10", "--seed", "1",
                     "--output_dir", str(tmp_path), "--run_name", name]) == 0
    assert (tmp_path / "a_trace.csv").read_bytes() == (tmp_path / "b_trace.csv").read_bytes()
    assert main(["run", "--preset", "solar", "--problem", "sphere", "--n", "10", "--seed", "2",
                 "--output_dir", str(tmp_path), "--run_name", "c"]) == 0
    assert (tmp_path / "a_trace.csv").read_bytes() != (tmp_path / "c_trace.csv").read_bytes()


def test_baseline_and_sso_share_eval_grid(tmp_path):
    common = ["--problem", "sphere", "--n", "5", "--noise", "additive-gaussian", "--noise_scale", "0.01",
              "--seed", "4", "--max_evals", "2000", "--N", "0", "--output_dir", str(tmp_path)]
    assert main(["run", *common, "--algorithm", "sso", "--run_name", "sso"]) == 0
    assert main(["run", *common, "--algorithm", "zo-sgd-baseline", "--run_name", "sgd"]) == 0
    a = RunTrace.read(tmp_path / "sso_trace.csv").column("evals")
    b = RunTrace.read(tmp_path / "sgd_trace.csv").column("evals")
    assert a == b and a[-1] == 1991


def test_zos_algorithm_run(tmp_path):
    assert main(["run", "--algorithm", "zos", "--problem", "sphere", "--n", "2", "--beta0", "0.01",
                 "--s1_00", "0.1", "--s2_00", "0.5", "--alpha1", "0.75", "--alpha2", "0.5", "--max_evals", "100000",
                 "--output_dir", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "run_summary.json").read_text())
    assert summary["exit_reason"] == "threshold-met"
    assert summary["m_norm"] <= 1e-3


def test_subprocess_run(tmp_path, stub):
    cfg = tmp_path / "sub.cfg"
    cfg.write_text(f"problem = subprocess\nn = 2\ncommand = {stub('sphere')}\nmax_evals = 200\n"
                   f"output_dir = {tmp_path}\n")
    assert main(["run", str(cfg)]) == 0
    summary = json.loads((tmp_path / "run_summary.json").read_text())
    assert summary["oracle_calls"] == summary["evals_used"]
    assert summary["final_f_estimate"] < 2.0


def test_evaluation_failure_exit_code_and_partial_trace(tmp_path, stub):
    cfg = tmp_path / "sub.cfg"
    cfg.write_text(f"problem = subprocess\nn = 2\ncommand = {stub('flaky')}\noutput_dir = {tmp_path}\nN = 0\n")
    out = cli("run", str(cfg), cwd=tmp_path)
    assert out.returncode == 3
    assert "evaluation failed" in out.stderr
    trace = RunTrace.read(tmp_path / "run_trace.csv")
    assert len(trace) >= 1 and trace[-1].evals <= 40
    assert json.loads((tmp_path / "run_summary.json").read_text())["exit_reason"] == "evaluation-error"


def test_multi_seed(tmp_path):
    code = main(["multi-seed", "--problem", "sphere", "--n", "3", "--max_evals", "330", "--seeds", "0", "1", "2",
                 "--workers", "3", "--grid", "5", "--output_dir", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "run_multi_seed.csv").read_text().splitlines()
    assert lines[0] == "evals,mean,min,max,seeds"
    rows = [list(map(float, l.split(","))) for l in lines[1:]]
    assert len(rows) == 5
    for evals, mean, lo, hi, seeds in rows:
        assert lo <= mean <= hi and seeds == 3
    for s in (0, 1, 2):
        assert (tmp_path / f"run_seed{s}_trace.csv").exists()


def test_multi_seed_table():
    a, b = RunTrace(), RunTrace()
    for k, (fa, fb) in enumerate([(3.0, 5.0), (2.0, 1.0)], 1):
        a.record(k, 0, 10 * k, 0.1, 1.0, 0.1, 0.5, fa)
        b.record(k, 0, 10 * k, 0.1, 1.0, 0.1, 0.5, fb)
    rows = multi_seed_table([a, b], [5, 10, 20])
    assert rows == [
        {"evals": 10, "mean": 4.0, "min": 3.0, "max": 5.0, "seeds": 2},
        {"evals": 20, "mean": 1.5, "min": 1.0, "max": 2.0, "seeds": 2},
    ]


def test_verify_quick(tmp_path):
    code = main(["verify", "--quick", "--output-dir", str(tmp_path)])
    report = json.loads((tmp_path / "verification.json").read_text())
    assert code == 0 and report["passed"]
    assert len(report["checks"]) == 9
    assert "checks passed" in (tmp_path / "verification.txt").read_text()


def test_trace_csv_round_trip():
    t = RunTrace()
    t.record(0, 0, 11, 0.3, 1 / 3, 0.1, 0.5, float("inf"))
    t.record(1, 0, 22, 0.3, 2 ** -40, 0.1 / 2**0.5, 0.5 / 2**0.25, 1e-300)
    again = RunTrace.from_csv(t.to_csv())
    assert again == t
    assert t.to_csv().splitlines()[0] == "k,i,evals,beta,m_norm,s1,s2,best_f,wall_ms"
