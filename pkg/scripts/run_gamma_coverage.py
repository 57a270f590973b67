"""Coverage, CI length and mean absolute bias for the covariate coefficients,
with and without the analytic bias correction.

    python3 scripts/run_gamma_coverage.py --n 100 --reps 200
"""
from __future__ import annotations

import argparse
import logging
from itertools import product

from dpdg.sim_harness import L_KINDS, Scenario, run_scenario

EPSILONS = ("two", "logn_over_n4", "logn_over_n2")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--n", type=int, nargs="+", default=[100, 200])
    p.add_argument("--L", nargs="+", default=list(L_KINDS), choices=list(L_KINDS))
    p.add_argument("--epsilon", nargs="+", default=list(EPSILONS))
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    print(f"{'n':>4} {'L':>9} {'epsilon':>13} {'estimator':>10} {'k':>2} {'cover%':>7} {'length':>7} {'|bias|':>7}")
    for n, L, eps in product(args.n, args.L, args.epsilon):
        s = Scenario(n=n, L_kind=L, epsilon_kind=eps, reps=args.reps, base_seed=args.seed)
        report = run_scenario(s, workers=args.workers)
        for row in report.gamma_rows():
            print(f"{n:>4} {L:>9} {s.epsilon_kind:>13} {row['estimator']:>10} {row['coordinate']:>2} "
                  f"{row['coverage']:7.2f} {row['length']:7.3f} {row['mean_abs_bias']:7.3f}")
        print(f"{'':>4} {'':>9} {'':>13} nonexistence {report.nonexistence_pct:.1f}%")


if __name__ == "__main__":
    main()
