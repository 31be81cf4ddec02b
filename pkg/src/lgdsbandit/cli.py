"""Command-line entry point: ``lgdsbandit <subcommand> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 when more than 5% of
episodes were excluded for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import outputs
from .analysis import lower_bound_continuous_mc, lower_bound_discrete
from .config import DISTRIBUTIONS, ExperimentConfig
from .environment import load_spec, save_spec, validate_spec
from .errors import ConfigError, ParameterError
from .harness import (ROBUST_NUS, ROBUST_POLICIES, ROBUST_TARGETS, EpisodeResult, derive_seed, env_spec,
                      run_benchmark, run_episode, run_metric, run_robustness)
from .numerics import solve_dare_multi

log = logging.getLogger("lgdsbandit")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3
EXCLUSION_BUDGET = 0.05

# flags that map one-to-one onto ExperimentConfig fields
CONFIG_FLAGS = ("dist", "d", "k", "rho", "envs", "runs", "horizon", "warmup", "seed", "out", "jobs")


def _csv_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def _float_list(s: str) -> list[float]:
    return [float(x) for x in _csv_list(s)]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--dist", choices=DISTRIBUTIONS)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--envs", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--policies", type=_csv_list, help="comma-separated policy ids")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.add_argument("--per-round", action="store_true", help="also write every round to rounds.csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lgdsbandit", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write random environment specs as JSON")
    _common(p)

    p = sub.add_parser("validate", help="check spec files against the model assumptions")
    p.add_argument("specs", nargs="+")

    p = sub.add_parser("run", help="one episode per listed policy on one environment")
    _common(p)
    p.add_argument("--spec", help="spec JSON file (default: generate from --dist/--seed)")
    p.add_argument("--env", type=int, default=0, help="environment id used when generating")

    p = sub.add_parser("bench", help="normalized-regret benchmark over many environments")
    _common(p)

    p = sub.add_parser("robust", help="similarity-transform model-mismatch sweep")
    _common(p)
    p.add_argument("--nu", type=_float_list, help=f"comma-separated magnitudes (default {ROBUST_NUS})")
    p.add_argument("--perturb", type=_csv_list, help="comma-separated subset of gamma,actions,q")

    p = sub.add_parser("metric", help="phi performance intervals for IDEA and Kalman-UCB")
    _common(p)
    p.add_argument("--no-episodes", action="store_true", help="skip the paired episodes")

    p = sub.add_parser("bounds", help="continuous and discrete regret lower bounds")
    _common(p)
    p.add_argument("--spec")
    p.add_argument("--env", type=int, default=0)
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("plot", help="re-render figures from CSVs in --out")
    p.add_argument("--out", required=True)
    return ap


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if getattr(args, "config", None) else ExperimentConfig()
    for name in CONFIG_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "policies", None):
        cfg.policies = list(args.policies)
    if getattr(args, "per_round", False):
        cfg.per_round = True
    cfg.validate()
    return cfg


def _budget(excluded: int, total: int) -> int:
    if total and excluded / total > EXCLUSION_BUDGET:
        log.error("%d of %d episodes excluded (budget %.0f%%)", excluded, total, 100 * EXCLUSION_BUDGET)
        return EXIT_BUDGET
    if excluded:
        log.warning("%d of %d episodes excluded", excluded, total)
    return EXIT_OK


def _spec_for(args, cfg):
    return load_spec(args.spec) if args.spec else env_spec(cfg, args.env)


def cmd_generate(args) -> int:
    cfg = load_config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for e in range(cfg.envs):
        save_spec(env_spec(cfg, e), out / f"spec_{cfg.dist}_{e:04d}.json")
    print(f"wrote {cfg.envs} specs to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    status = EXIT_OK
    for path in args.specs:
        report = validate_spec(load_spec(path))
        print(json.dumps({"spec": path, **report.to_dict()}, sort_keys=True))
        if not report.ok:
            status = EXIT_CONFIG
    return status


def cmd_run(args) -> int:
    cfg = load_config(args)
    spec = _spec_for(args, cfg)
    seed = derive_seed(cfg.seed, args.env, 0, "episode")
    episodes = []
    for p in cfg.policies:
        rec = run_episode(spec, p, cfg.horizon, seed, cfg.warmup, cfg.policy_params.get(p), env=args.env)
        episodes.append(EpisodeResult(args.env, 0, p, rec.total_regret, float("nan"), record=rec))
        print(f"{p}\t{rec.total_regret:.6g}")
    out = Path(cfg.out)
    outputs.write_config(out, cfg)
    outputs.write_rows(out / "rounds.csv", outputs.ROUND_HEADER, outputs.round_rows(episodes))
    return EXIT_OK


def _print_summary(summary):
    for p, c in summary.items():
        print(f"{p:14s} median {c.median:.4g}  IQR {c.iqr:.4g}  n={c.count} excluded={c.excluded} undefined={c.undefined}")


def cmd_bench(args) -> int:
    cfg = load_config(args)
    result = run_benchmark(cfg)
    outputs.emit_benchmark(result, cfg.out)
    _print_summary(result.summary)
    return _budget(result.excluded, len(result.episodes))


def cmd_robust(args) -> int:
    cfg = load_config(args)
    if not args.policies:
        cfg.policies = list(ROBUST_POLICIES)
    nus = args.nu or ROBUST_NUS
    targets = args.perturb or ROBUST_TARGETS
    if any(t not in ROBUST_TARGETS for t in targets):
        raise ConfigError(f"--perturb must be a subset of {ROBUST_TARGETS}")
    if "actions" in targets and cfg.k != cfg.d:
        raise ConfigError("perturbing actions needs k == d")
    if any(nu <= 0 for nu in nus):
        raise ConfigError("--nu values must be positive")
    result = run_robustness(cfg, nus, targets, cfg.policies)
    outputs.emit_robustness(result, cfg.out)
    for g, s in result.summary.items():
        print(f"[{g}]")
        _print_summary(s)
    return _budget(sum(e.status != "ok" for e in result.episodes), len(result.episodes))


def cmd_metric(args) -> int:
    cfg = load_config(args)
    result = run_metric(cfg, with_episodes=not args.no_episodes)
    outputs.emit_metric(result, cfg.out)
    for r in result.intervals:
        print(f"env {r.env:4d} {r.policy:11s} [{r.low:.4g}, {r.high:.4g}] {r.status}")
    failed = sum(r.status != "ok" for r in result.intervals) + sum(e.status != "ok" for e in result.episodes)
    return _budget(failed, len(result.intervals) + len(result.episodes))


def cmd_bounds(args) -> int:
    cfg = load_config(args)
    spec = _spec_for(args, cfg)
    P_A, _ = solve_dare_multi(spec.gamma, spec.actions, spec.Q, spec.sigma2)
    rng = np.random.default_rng(derive_seed(cfg.seed, args.env, "bounds"))
    cont, se = lower_bound_continuous_mc(spec, cfg.horizon, P_A, args.samples, rng)
    disc = lower_bound_discrete(spec, cfg.horizon)
    print(json.dumps({"n": cfg.horizon, "continuous": cont, "continuous_se": se,
                      "discrete": disc.value, "discrete_skipped_pairs": len(disc.skipped)}, sort_keys=True))
    return EXIT_OK


def cmd_plot(args) -> int:
    paths = outputs.rerender(args.out)
    if not paths:
        log.warning("no result CSVs with plottable rows in %s", args.out)
    for p in paths:
        print(p)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "validate": cmd_validate, "run": cmd_run, "bench": cmd_bench,
            "robust": cmd_robust, "metric": cmd_metric, "bounds": cmd_bounds, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
