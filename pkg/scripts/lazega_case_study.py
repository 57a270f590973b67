"""Fit the Lazega lawyers' co-work network, noiseless and at several privacy
budgets, and print the covariate estimates with standard errors.

Expects ``edges.csv`` / ``attrs.csv`` (or the raw ``ELwork.dat`` /
``ELattr.dat``) under ``--data`` (default ``data/lazega``).

    python3 scripts/lazega_case_study.py --epsilon 1 2 3 --seed 2024
"""
from __future__ import annotations

import argparse
import json
import sys

from dpdg import cli, lazega


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data", default="data/lazega")
    p.add_argument("--epsilon", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    p.add_argument("--seed", type=int, default=2024)
    args = p.parse_args(argv)

    paths = lazega.find_dataset(args.data)
    if paths is None:
        sys.exit(f"no Lazega data under {args.data}; see data/lazega/README.md")
    base = ["fit", "--graph", str(paths["graph"]), "--attrs", str(paths["attrs"]), "--schema", str(paths["schema"])]
    runs = [("no noise", base + ["--no-noise"])]
    runs += [(f"epsilon={e:g}", base + ["--epsilon", str(e), "--seed", str(args.seed)]) for e in args.epsilon]
    for label, argv_fit in runs:
        print(f"== {label}", flush=True)
        code = cli.main(argv_fit)
        if code:
            print(f"   fit failed with exit code {code}")


if __name__ == "__main__":
    main()
