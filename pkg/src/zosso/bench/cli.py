"""Command-line front end: ``run``, ``multi-seed``, ``verify`` and ``print-preset``.

Exit status: 0 on success (a run that exhausts its budget is a success),
1 on a failed verification or I/O error, 2 on an invalid configuration
and 3 when the blackbox evaluation failed (the partial trace is still
written).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from zosso.bench.config import RunConfig, load_config
from zosso.bench.presets import get_preset, preset_names
from zosso.bench.runner import OUTPUT_ENV, RunOutcome, output_dir, run_config
from zosso.errors import ConfigError
from zosso.trace import RunTrace

__all__ = ["main", "multi_seed_table", "preset_text"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_EVAL = 0, 1, 2, 3


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="key = value configuration file")
    group = parser.add_argument_group("configuration overrides")
    for f in fields(RunConfig):
        group.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", metavar="VALUE", help=f.metadata.get("help"))
    group.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any key")


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config, validate=False) if args.config else RunConfig()
    overrides = {}
    for f in fields(RunConfig):
        value = getattr(args, f"cfg_{f.name}")
        if value is not None:
            overrides[f.name] = value
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(key or "--set", f"expected KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value
    return cfg.updated(overrides).validate()


def _report(outcome: RunOutcome, out=sys.stdout) -> None:
    s = outcome.summary
    print(f"exit_reason = {s['exit_reason']}", file=out)
    print(f"evals_used = {s['evals_used']}", file=out)
    if s.get("final_f_estimate") is not None:
        print(f"final_f_estimate = {s['final_f_estimate']:.10g}", file=out)
    if "final_f_noiseless" in s:
        print(f"final_f_noiseless = {s['final_f_noiseless']:.10g}", file=out)
    for key, path in outcome.paths.items():
        print(f"{key} = {path}", file=out)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    outcome = run_config(cfg)
    _report(outcome)
    if outcome.failed:
        print(f"error: evaluation failed: {outcome.error}", file=sys.stderr)
        return EXIT_EVAL
    return EXIT_OK


def multi_seed_table(traces: Sequence[RunTrace], grid: Sequence[int]) -> List[dict]:
    """Best observed value at each evaluation count: mean, min and max over seeds."""
    rows = []
    for g in grid:
        vals = []
        for tr in traces:
            evals = np.array(tr.column("evals"))
            idx = np.searchsorted(evals, g, side="right") - 1
            if idx >= 0:
                vals.append(tr.column("best_f")[idx])
        vals = np.array(vals, dtype=float)
        if vals.size:
            rows.append({"evals": int(g), "mean": float(vals.mean()), "min": float(vals.min()),
                         "max": float(vals.max()), "seeds": int(vals.size)})
    return rows


def cmd_multi_seed(args) -> int:
    base = _config_from_args(args)
    seeds = [int(s) for s in args.seeds]
    configs = [base.updated({"seed": s, "run_name": f"{base.run_name}_seed{s}"}) for s in seeds]
    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            outcomes = list(pool.map(run_config, configs))
    else:
        outcomes = [run_config(c) for c in configs]
    max_evals = max(o.summary["evals_used"] for o in outcomes)
    grid = np.unique(np.linspace(0, max_evals, args.grid + 1).round().astype(int)[1:])
    table = multi_seed_table([o.trace for o in outcomes], grid)
    directory = output_dir(base)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{base.run_name}_multi_seed.csv"
    lines = ["evals,mean,min,max,seeds"]
    lines += [f"{r['evals']},{r['mean']:.17g},{r['min']:.17g},{r['max']:.17g},{r['seeds']}" for r in table]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"{'seed':>6} {'exit_reason':>18} {'evals':>8} {'final_f':>14}")
    for s, o in zip(seeds, outcomes):
        f = o.summary.get("final_f_noiseless", o.summary.get("final_f_estimate"))
        f_text = f"{f:14.6g}" if f is not None else f"{'n/a':>14}"
        print(f"{s:>6} {o.exit_reason:>18} {o.summary['evals_used']:>8} {f_text}")
    print(f"table = {path}")
    return EXIT_EVAL if any(o.failed for o in outcomes) else EXIT_OK


def cmd_verify(args) -> int:
    from zosso.verify import run_checks

    report = run_checks(quick=args.quick, seed=args.seed, workers=args.workers, log=print)
    directory = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "verification.txt").write_text(report.to_text(), encoding="utf-8")
    (directory / "verification.json").write_text(report.to_json(), encoding="utf-8")
    print(f"{sum(r.passed for r in report.results)}/{len(report.results)} checks passed")
    return EXIT_OK if report.passed else EXIT_FAIL


def preset_text(name: str) -> str:
    p = get_preset(name)
    lines = p.render()
    lines += [
        f"preset = {p.name}",
        f"beta0 = {p.beta0!r}",
        f"s1_00 = {p.s1_00!r}",
        f"s2_00 = {p.s2_00!r}",
        f"alpha1 = {p.alpha1!r}",
        f"alpha2 = {p.alpha2!r}",
        f"epsilon = {p.epsilon!r}",
        f"q = {p.q}",
        f"M = {p.M}",
        f"max_evals = {p.max_evals}",
        f"distribution = {p.distribution}",
        f"truncate = {'true' if p.truncate else 'false'}",
        f"# N = {p.search_budget} when n <= {p.search_max_n}, else 0" if p.search_max_n else "N = 0",
    ]
    return "\n".join(lines) + "\n"


def cmd_print_preset(args) -> int:
    sys.stdout.write(preset_text(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zosso", description="Zeroth-order smoothing optimizers: runs and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("multi-seed", help="run a configuration over several seeds and tabulate")
    _add_config_flags(p)
    p.add_argument("--seeds", nargs="+", default=["0", "1", "2", "3", "4"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grid", type=int, default=20, help="number of evaluation-count grid points")
    p.set_defaults(func=cmd_multi_seed)

    p = sub.add_parser("verify", help="run the diagnostic checks and write a report")
    p.add_argument("--quick", action="store_true", help="smaller sample sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("print-preset", help="print a preset's formulas and settings")
    p.add_argument("name", choices=preset_names())
    p.set_defaults(func=cmd_print_preset)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
