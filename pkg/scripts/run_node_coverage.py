"""Coverage / CI-length / nonexistence grid for the node-parameter statistics.

Runs every scenario of the (n, L, epsilon) grid (or the JSON configs given on
the command line), writes one report directory per scenario under ``--out``
and prints a combined coverage table.

    python3 scripts/run_node_coverage.py --n 100 --reps 200 --out results/node_coverage
    python3 scripts/run_node_coverage.py scripts/configs/n100_zero_two.json
"""
from __future__ import annotations

import argparse
import json
import logging
from itertools import product
from pathlib import Path

from dpdg.sim_harness import L_KINDS, Scenario, run_scenario, write_report

EPSILONS = ("two", "logn_over_n4", "logn_over_n2")


def scenarios(args):
    if args.configs:
        for path in args.configs:
            cfg = json.loads(Path(path).read_text())
            if args.reps:
                cfg["reps"] = args.reps
            yield Scenario.from_config(cfg)
        return
    for n, L, eps in product(args.n, L_KINDS, EPSILONS):
        yield Scenario(n=n, L_kind=L, epsilon_kind=eps, reps=args.reps or 200, base_seed=args.seed)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("configs", nargs="*", help="scenario JSON configs (default: full grid)")
    p.add_argument("--n", type=int, nargs="+", default=[100, 200])
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="results/node_coverage")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    print(f"{'n':>4} {'L':>9} {'epsilon':>13} {'pair':>10} {'xi':>14} {'zeta':>14} {'eta':>14} {'nonexist':>9}")
    for s in scenarios(args):
        report = run_scenario(s, workers=args.workers)
        write_report(report, Path(args.out) / f"n{s.n}_{s.L_kind}_{s.epsilon_kind}")
        for idx, (i, j) in enumerate(s.pairs):
            cells = [
                f"{report.coverage(stat, idx):5.1f}[{report.ci_length(stat, idx):5.2f}]"
                for stat in ("xi", "zeta", "eta")
            ]
            print(f"{s.n:>4} {s.L_kind:>9} {s.epsilon_kind:>13} {f'({i},{j})':>10} "
                  + " ".join(f"{c:>14}" for c in cells) + f" {report.nonexistence_pct:8.1f}%")


if __name__ == "__main__":
    main()
