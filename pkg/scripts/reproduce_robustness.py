"""Model-mismatch sweep: perturb one matrix at a time by a similarity transform.

    python3 scripts/reproduce_robustness.py --out results/robust --envs 50 --runs 3
"""

import argparse
import logging

from lgdsbandit import ExperimentConfig, run_robustness
from lgdsbandit.harness import ROBUST_NUS, ROBUST_POLICIES
from lgdsbandit.outputs import emit_robustness


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/robust")
    ap.add_argument("--dist", default="gaussian")
    ap.add_argument("--envs", type=int, default=50)
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--horizon", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ExperimentConfig(dist=args.dist, envs=args.envs, runs=args.runs, horizon=args.horizon,
                           seed=args.seed, jobs=args.jobs, out=args.out, policies=list(ROBUST_POLICIES))
    res = run_robustness(cfg)
    emit_robustness(res, cfg.out)
    print(f"{'target':8s} {'nu':>5s} " + " ".join(f"{p:>11s}" for p in ROBUST_POLICIES))
    for t in res.targets:
        for nu in ROBUST_NUS:
            row = " ".join(f"{res.degradation(t, nu, p):+11.1%}" for p in ROBUST_POLICIES)
            print(f"{t:8s} {nu:5g} {row}")


if __name__ == "__main__":
    main()
