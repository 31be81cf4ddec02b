"""phi performance intervals of IDEA vs Kalman-UCB, with paired episodes.

    python3 scripts/reproduce_intervals.py --out results/intervals
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from lgdsbandit import ExperimentConfig, run_metric
from lgdsbandit.outputs import emit_metric


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/intervals")
    ap.add_argument("--dists", default="bernoulli,exponential")
    ap.add_argument("--envs", type=int, default=100)
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    for dist in args.dists.split(","):
        cfg = ExperimentConfig(dist=dist, envs=args.envs, runs=args.runs, seed=args.seed, jobs=args.jobs,
                               out=str(Path(args.out) / dist))
        res = run_metric(cfg)
        emit_metric(res, cfg.out)
        better = [e for e in range(cfg.envs)
                  if res.interval(e, "idea").status == "ok"
                  and res.interval(e, "idea").high < res.interval(e, "kalman_ucb").high]
        reg = {(e.env, e.run, e.policy): e.regret for e in res.episodes if e.status == "ok"}
        wins = [reg[e, r, "idea"] < reg[e, r, "kalman_ucb"] for e in better for r in range(cfg.runs)
                if (e, r, "idea") in reg and (e, r, "kalman_ucb") in reg]
        print(f"{dist}: IDEA interval top below Kalman-UCB's in {len(better)}/{cfg.envs} specs; "
              f"IDEA wins {np.mean(wins) if wins else float('nan'):.1%} of those paired runs")


if __name__ == "__main__":
    main()
