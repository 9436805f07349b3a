"""Command-line front end.

Subcommands: simulate (replicated runs to CSV), sweep (grid of instances),
verify (property suites), solve (print one optimal policy), gap (utility
gap for a given mean-reward vector). Configuration is a single JSON file;
all randomness derives from one master seed, and outputs are byte-identical
for identical (config, seed), independent of --threads.

Exit codes: 0 success, 2 configuration/usage error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .model import (Action, AggregationFunction, BetaParam, Instance,
                    ModelError, PosteriorState)
from .seeding import mix64, replicate_seed
from .dynamics import SamplingMode, run_simulation
from .metrics import (FailureParams, count_considering_episodes, detect_fail,
                      detect_strong_fail, n_prior, pseudoregret, ugap,
                      ugap_bound_max, ugap_bound_min)
from .solver import format_policy, solve_posterior_optimal
from . import verify as verify_mod

RUNS_COLUMNS = ("replicate", "seed", "mu1", "mu2", "pulls1", "pulls2",
                "fail_c", "fail_N", "fail", "strong_fail",
                "considers_arm2_episodes", "reg_final")
CURVE_COLUMNS = ("T", "breg_mean", "breg_stderr")
VERIFY_COLUMNS = ("suite", "item", "trials", "violations", "excluded",
                  "status", "value")
SWEEP_METRIC_COLUMNS = ("pr_fail", "reg_per_episode", "mean_ugap", "n_replicates")

DEFAULT_SWEEP_MAX_CELLS = 1024
NO_PULL_DEFAULT_TRIALS = 10_000
STRONG_FAIL_DEFAULT_RUNS = 500
STRONG_FAIL_EPISODES = 100

SUITE_NAMES = ("no_pull_m2", "sym_general_m", "min_max", "general_f_m2",
               "appendix_g", "strong_failure_regret", "all")


class ConfigError(Exception):
    """Configuration file or flag problem; maps to exit code 2."""


def fmt(value: Any) -> str:
    """CSV cell serialization; floats use 17 significant digits."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


# ---------------------------------------------------------------------------
# Configuration parsing


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top-level config must be an object")
    return cfg


def _get(cfg: dict, field: str, default=None, required=False):
    if field in cfg:
        return cfg[field]
    if required:
        raise ConfigError(f"missing required config field {field!r}")
    return default


def parse_beta(field: str, value: Any) -> BetaParam:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"{field} must be a [alpha, beta] pair of numbers")
    try:
        return BetaParam(float(value[0]), float(value[1]))
    except ModelError as err:
        raise ConfigError(f"{field}: {err}") from err


def parse_f(field: str, value: Any, m: int) -> AggregationFunction:
    if not isinstance(value, dict) or len(value) != 1:
        raise ConfigError(f"{field} must be an object with exactly one of "
                          f"'named', 'symmetric', 'general'")
    (kind, payload), = value.items()
    try:
        if kind == "named":
            return AggregationFunction.named(payload, m)
        if kind == "symmetric":
            f = AggregationFunction.symmetric_table(payload)
            if f.m != m:
                raise ConfigError(f"{field}: symmetric table has m={f.m}, "
                                  f"instance has m={m}")
            return f
        if kind == "general":
            return AggregationFunction.general_table(m, payload)
    except ModelError as err:
        raise ConfigError(f"{field}: {err}") from err
    raise ConfigError(f"{field}: unknown aggregation kind {kind!r}")


def parse_instance(cfg: dict) -> Instance:
    block = _get(cfg, "instance", required=True)
    if not isinstance(block, dict):
        raise ConfigError("config field 'instance' must be an object")
    m = block.get("m")
    if not isinstance(m, int) or m < 1:
        raise ConfigError("instance.m must be an integer >= 1")
    prior1 = parse_beta("instance.prior1", _get(block, "prior1", required=True))
    prior2 = parse_beta("instance.prior2", _get(block, "prior2", required=True))
    cost = _get(block, "cost", required=True)
    if not isinstance(cost, (int, float)):
        raise ConfigError("instance.cost must be a number")
    f = parse_f("instance.f", _get(block, "f", required=True), m)
    try:
        return Instance(prior1, prior2, f, float(cost), m)
    except ModelError as err:
        raise ConfigError(f"instance: {err}") from err


def parse_mode(cfg: dict) -> SamplingMode:
    raw = _get(cfg, "sampling_mode", "mu_first")
    try:
        return SamplingMode(raw)
    except ValueError:
        raise ConfigError(f"sampling_mode must be one of "
                          f"{[m.value for m in SamplingMode]}, got {raw!r}") from None


def resolve_failure_params(cfg: dict, inst: Instance) -> FailureParams:
    block = _get(cfg, "metrics", {})
    if not isinstance(block, dict):
        raise ConfigError("config field 'metrics' must be an object")
    c = block.get("fail_c", 0.05)
    n = block.get("fail_N", "auto")
    if n == "auto":
        variant = "symmetric" if inst.f.symmetric else "general_m2"
        try:
            n = n_prior(inst, variant)
        except ModelError as err:
            raise ConfigError(f"metrics.fail_N: cannot resolve 'auto': {err}") from err
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError("metrics.fail_N must be an integer or 'auto'")
    try:
        return FailureParams(float(c), n)
    except ModelError as err:
        raise ConfigError(f"metrics: {err}") from err


def _positive_int(cfg: dict, field: str, default: int) -> int:
    v = _get(cfg, field, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"config field {field!r} must be a positive integer")
    return v


# ---------------------------------------------------------------------------
# Replicate execution


def _replicate_summary(args) -> dict:
    (r, inst, episodes, seed, mode, fail_c, fail_n) = args
    rec = run_simulation(inst, episodes, seed, mode)
    out: dict[str, Any] = {
        "replicate": r, "seed": seed,
        "mu1": None, "mu2": None,
        "pulls1": rec.pulls1, "pulls2": rec.pulls2,
        "fail_c": fail_c, "fail_N": fail_n,
        "fail": None, "strong_fail": None,
        "considers_arm2_episodes": count_considering_episodes(rec, Action.ARM2),
        "reg_final": None, "curve": None, "ugap": None,
    }
    if rec.mu is not None:
        fp = FailureParams(fail_c, fail_n)
        rr = pseudoregret(rec)
        out["mu1"], out["mu2"] = rec.mu
        out["fail"] = int(detect_fail(rec, fp))
        out["strong_fail"] = int(detect_strong_fail(rec, fp))
        out["reg_final"] = rr.final
        out["curve"] = rr.cumulative
        if rec.mu[0] != rec.mu[1]:
            out["ugap"] = ugap(rec.mu, inst)
    return out


def _run_replicates(inst: Instance, episodes: int, replicates: int,
                    master_seed: int, mode: SamplingMode,
                    fp: FailureParams, threads: int) -> list[dict]:
    jobs = [(r, inst, episodes, replicate_seed(master_seed, r), mode, fp.c, fp.n)
            for r in range(replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_replicate_summary, jobs,
                                 chunksize=max(1, replicates // (threads * 8) or 1)))
    return [_replicate_summary(job) for job in jobs]


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _curve_rows(summaries: list[dict], episodes: int) -> list[list[Any]]:
    curves = [s["curve"] for s in summaries if s["curve"] is not None]
    if not curves:
        return []
    stacked = np.vstack(curves)
    mean = stacked.mean(axis=0)
    if stacked.shape[0] > 1:
        stderr = stacked.std(axis=0, ddof=1) / math.sqrt(stacked.shape[0])
    else:
        stderr = np.zeros_like(mean)
    return [[t + 1, float(mean[t]), float(stderr[t])] for t in range(episodes)]


def cmd_simulate(cfg: dict, out_dir: Path, threads: int) -> int:
    inst = parse_instance(cfg)
    mode = parse_mode(cfg)
    episodes = _positive_int(cfg, "episodes", 100)
    replicates = _positive_int(cfg, "replicates", 100)
    master_seed = _get(cfg, "master_seed", 0)
    fp = resolve_failure_params(cfg, inst)
    summaries = _run_replicates(inst, episodes, replicates, master_seed,
                                mode, fp, threads)
    _write_csv(out_dir / "runs.csv", RUNS_COLUMNS,
               [[s[c] for c in RUNS_COLUMNS] for s in summaries])
    _write_csv(out_dir / "regret_curve.csv", CURVE_COLUMNS,
               _curve_rows(summaries, episodes))
    print(f"wrote {out_dir / 'runs.csv'} and {out_dir / 'regret_curve.csv'} "
          f"({replicates} replicates x {episodes} episodes)")
    return 0


# ---------------------------------------------------------------------------
# Sweeps

_AXIS_NAMES = ("cost", "f", "m", "prior1", "prior2")


def _axis_label(axis: str, value: Any) -> str:
    if axis in ("prior1", "prior2"):
        return f"{value[0]:g}:{value[1]:g}"
    if axis == "f":
        (kind, payload), = value.items()
        if kind == "named":
            return str(payload)
        if kind == "symmetric":
            return "sym:" + ",".join(format(float(v), "g") for v in payload)
        return "gen:" + ",".join(f"{k}={float(v):g}"
                                 for k, v in sorted(payload.items()))
    return fmt(value)


def cmd_sweep(cfg: dict, out_dir: Path, threads: int) -> int:
    base_instance = _get(cfg, "instance", required=True)
    sweep = _get(cfg, "sweep", required=True)
    if not isinstance(sweep, dict) or not isinstance(sweep.get("axes"), dict):
        raise ConfigError("config field 'sweep.axes' must be an object")
    axes = sweep["axes"]
    for axis, values in axes.items():
        if axis not in _AXIS_NAMES:
            raise ConfigError(f"unknown sweep axis {axis!r}; "
                              f"supported: {list(_AXIS_NAMES)}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {axis!r} must be a non-empty list")
    max_cells = sweep.get("max_cells", DEFAULT_SWEEP_MAX_CELLS)
    axis_names = sorted(axes)
    n_cells = math.prod(len(axes[a]) for a in axis_names)
    if n_cells > max_cells:
        raise ConfigError(f"sweep grid has {n_cells} cells, cap is {max_cells} "
                          f"(raise sweep.max_cells to allow)")

    mode = parse_mode(cfg)
    if mode is not SamplingMode.MU_FIRST:
        raise ConfigError("sweep aggregates need realized mean rewards; "
                          "set sampling_mode to 'mu_first'")
    episodes = _positive_int(cfg, "episodes", 100)
    replicates = _positive_int(cfg, "replicates", 100)
    master_seed = _get(cfg, "master_seed", 0)

    rows = []
    for combo in product(*(axes[a] for a in axis_names)):
        cell_instance = dict(base_instance)
        for axis, value in zip(axis_names, combo):
            cell_instance[axis] = value
        cell_cfg = dict(cfg)
        cell_cfg["instance"] = cell_instance
        inst = parse_instance(cell_cfg)
        fp = resolve_failure_params(cell_cfg, inst)
        summaries = _run_replicates(inst, episodes, replicates, master_seed,
                                    mode, fp, threads)
        pr_fail = sum(s["fail"] for s in summaries) / replicates
        curves = np.vstack([s["curve"] for s in summaries])
        mean_curve = curves.mean(axis=0)
        last_half = range(episodes // 2 + 1, episodes + 1)
        reg_per_episode = float(np.mean([mean_curve[t - 1] / t for t in last_half]))
        gaps = [s["ugap"] for s in summaries if s["ugap"] is not None]
        mean_ugap = float(np.mean(gaps)) if gaps else None
        rows.append([_axis_label(a, v) for a, v in zip(axis_names, combo)]
                    + [pr_fail, reg_per_episode, mean_ugap, replicates])

    _write_csv(out_dir / "sweep.csv",
               tuple(axis_names) + SWEEP_METRIC_COLUMNS, rows)
    print(f"wrote {out_dir / 'sweep.csv'} ({len(rows)} cells)")
    return 0


# ---------------------------------------------------------------------------
# Verification suites


def _default_dynamics_instance() -> Instance:
    return Instance(BetaParam(2.0, 2.0), BetaParam(1.0, 3.0),
                    AggregationFunction.named("min", 2), 0.001, 2)


def _suite_reports(name: str, trials: int | None, seed: int,
                   inst: Instance | None) -> list[verify_mod.CheckReport]:
    def npt(default):  # trials for no-pull style suites
        return trials if trials is not None else default

    if name == "no_pull_m2":
        return [verify_mod.check_no_pull_m2(npt(NO_PULL_DEFAULT_TRIALS), mix64(seed, 1))]
    if name == "sym_general_m":
        per_m = max(1, math.ceil(npt(NO_PULL_DEFAULT_TRIALS) / 5))
        return [verify_mod.check_no_pull_symmetric_general_m(m, per_m, mix64(seed, 2, m))
                for m in range(2, 7)]
    if name == "min_max":
        per_m = max(1, math.ceil(npt(NO_PULL_DEFAULT_TRIALS) / 5))
        return [verify_mod.check_no_pull_min_max(m, per_m, mix64(seed, 3, m))
                for m in range(2, 7)]
    if name == "general_f_m2":
        return [verify_mod.check_no_pull_general_f_m2(npt(NO_PULL_DEFAULT_TRIALS),
                                                      mix64(seed, 4))]
    if name == "appendix_g":
        return [verify_mod.reproduce_appendix_g()]
    if name == "strong_failure_regret":
        runs = npt(STRONG_FAIL_DEFAULT_RUNS)
        instance = inst if inst is not None else _default_dynamics_instance()
        records = (run_simulation(instance, STRONG_FAIL_EPISODES,
                                  replicate_seed(mix64(seed, 5), r))
                   for r in range(runs))
        return [verify_mod.check_strong_failure_regret(records)]
    raise ConfigError(f"unknown suite {name!r}; choose from {list(SUITE_NAMES)}")


def cmd_verify(suite: str, trials: int | None, seed: int, out_dir: Path,
               inst: Instance | None) -> int:
    if suite not in SUITE_NAMES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {list(SUITE_NAMES)}")
    names = [s for s in SUITE_NAMES if s != "all"] if suite == "all" else [suite]
    reports = []
    for name in names:
        reports.extend(_suite_reports(name, trials, seed, inst))

    rows: list[list[Any]] = []
    all_pass = True
    for rep in reports:
        rows.append([rep.name, "summary", rep.trials, len(rep.violations),
                     rep.excluded, rep.status, None])
        for key in sorted(rep.observed):
            rows.append([rep.name, key, None, None, None, None, rep.observed[key]])
        print(f"{rep.name}: {rep.status} ({rep.trials} trials, "
              f"{len(rep.violations)} violations, {rep.excluded} excluded)")
        for v in rep.violations[:5]:
            print(f"  violation: {v.inputs} | expected {v.expected} | got {v.observed}",
                  file=sys.stderr)
        all_pass &= rep.status == "pass"
    _write_csv(out_dir / "verify.csv", VERIFY_COLUMNS, rows)
    print(f"wrote {out_dir / 'verify.csv'}")
    return 0 if all_pass else 3


# ---------------------------------------------------------------------------
# solve / gap


def _posterior_override(cfg: dict, inst: Instance) -> PosteriorState:
    block = _get(cfg, "posterior", None)
    if block is None:
        return inst.initial_state()
    if not isinstance(block, dict):
        raise ConfigError("config field 'posterior' must be an object")
    counts = {}
    for field in ("pulls1", "successes1", "pulls2", "successes2"):
        v = block.get(field, 0)
        if not isinstance(v, int) or v < 0:
            raise ConfigError(f"posterior.{field} must be a non-negative integer")
        counts[field] = v
    try:
        arm1 = BetaParam(inst.prior1.alpha + counts["successes1"],
                         inst.prior1.beta + counts["pulls1"] - counts["successes1"])
        arm2 = BetaParam(inst.prior2.alpha + counts["successes2"],
                         inst.prior2.beta + counts["pulls2"] - counts["successes2"])
        return PosteriorState(arm1, arm2, **counts)
    except ModelError as err:
        raise ConfigError(f"posterior: {err}") from err


def cmd_solve(cfg: dict) -> int:
    inst = parse_instance(cfg)
    state = _posterior_override(cfg, inst)
    result = solve_posterior_optimal(state, inst)
    print(format_policy(result.policy))
    print(f"posterior utility: {result.posterior_utility:.12g}")
    return 0


_CANONICAL_MIN = "min"
_CANONICAL_MAX = "max"


def _canonical_min_max(f: AggregationFunction) -> str | None:
    if not f.symmetric:
        return None
    if f.table == tuple(AggregationFunction.named("min", f.m).table):
        return _CANONICAL_MIN
    if f.table == tuple(AggregationFunction.named("max", f.m).table):
        return _CANONICAL_MAX
    return None


def cmd_gap(cfg: dict, mu_text: str) -> int:
    inst = parse_instance(cfg)
    parts = mu_text.split(",")
    if len(parts) != 2:
        raise ConfigError("--mu must look like '0.5,0.9'")
    try:
        mu = (float(parts[0]), float(parts[1]))
    except ValueError:
        raise ConfigError("--mu must be two numbers") from None
    if not all(0.0 <= v <= 1.0 for v in mu):
        raise ConfigError("--mu components must lie in [0, 1]")
    if mu[0] == mu[1]:
        raise ConfigError("utility gap needs distinct mean rewards")
    exact = ugap(mu, inst)
    print(f"ugap: {exact:.12g}")
    shape = _canonical_min_max(inst.f)
    lo, hi = sorted(mu)
    if shape == _CANONICAL_MIN:
        print(f"bound (min): {ugap_bound_min((lo, hi), inst.m, inst.cost):.12g}")
    elif shape == _CANONICAL_MAX:
        print(f"bound (max): {ugap_bound_max((lo, hi), inst.m, inst.cost):.12g}")
    else:
        print("bound: none (closed form exists only for the min and max scores)")
    return 0


# ---------------------------------------------------------------------------
# Entry point


def _default_threads() -> int:
    raw = os.environ.get("EPIBSL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epibsl",
        description="Episodic bandit social learning: simulation and verification")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="path to the JSON configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's master_seed")
        p.add_argument("--out", default=".", help="output directory for CSV files")
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help="parallel replicate workers "
                            "(default: EPIBSL_THREADS or 1)")

    common(sub.add_parser("simulate", help="run replicated simulations"))
    common(sub.add_parser("sweep", help="run a parameter grid"))

    pv = sub.add_parser("verify", help="run property/golden-value suites")
    common(pv, config_required=False)
    pv.add_argument("--suite", default="all", help=f"one of {list(SUITE_NAMES)}")
    pv.add_argument("--trials", type=int, default=None,
                    help="conforming trials per suite (defaults are per-suite)")

    ps = sub.add_parser("solve", help="print the posterior-optimal policy")
    common(ps)

    pg = sub.add_parser("gap", help="print the utility gap for given means")
    common(pg)
    pg.add_argument("--mu", required=True, help="realized means, e.g. '0.5,0.9'")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        if args.seed is not None:
            cfg["master_seed"] = args.seed
        out_dir = Path(args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, args.threads)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, args.threads)
        if args.command == "verify":
            inst = parse_instance(cfg) if "instance" in cfg else None
            seed = cfg.get("master_seed", 0)
            return cmd_verify(args.suite, args.trials, seed, out_dir, inst)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "gap":
            return cmd_gap(cfg, args.mu)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ModelError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
