"""Command-line interface: release, fit, simulate, report, convert-lazega.

Exit codes: 0 success, 2 validation/parse error, 3 the estimate does not
exist (the JSON diagnostic is still written), 4 degenerate instance.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import lazega
from .data_io import (
    EdgeCovariateRule,
    build_covariates,
    load_attributes,
    load_graph,
    load_schema,
    preprocess_drop_isolates,
)
from .dp_release import NoisyDegrees, PrivacyBudget, release_bidegree
from .inference import fitted_theta_inference, gamma_inference
from .moment_system import DegeneracyError, MomentSystem
from .sim_harness import Scenario, run_scenario, write_report
from .solver import SolverConfig, fit

log = logging.getLogger("dpdg")

EXIT_OK, EXIT_INVALID, EXIT_NONEXIST, EXIT_DEGENERATE = 0, 2, 3, 4


def _epsilon(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        eps = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not eps > 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return eps


def _log_budget(budget: PrivacyBudget, n: int) -> None:
    log.info(
        "privacy: epsilon=%s alpha_n=%.6g kappa_n=%.6g s_n^2=%.6g (n=%d, formula=%s)",
        budget.epsilon, budget.alpha_n, budget.kappa_n, budget.s_n_sq(n), n, budget.alpha_formula,
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _num(x):
    x = float(x)
    return None if not math.isfinite(x) else x


def cmd_release(args) -> int:
    g = load_graph(args.graph)
    budget = PrivacyBudget(args.epsilon, args.alpha_formula)
    _log_budget(budget, g.n)
    noisy = release_bidegree(g, budget, args.seed)
    _emit(noisy.to_json(epsilon=args.epsilon, seed=args.seed, alpha_formula=args.alpha_formula,
                        nodes=list(g.labels)), args.out)
    return EXIT_OK


def _load_noisy(path, n) -> NoisyDegrees:
    noisy = NoisyDegrees.from_json(Path(path).read_text())
    if noisy.n != n:
        raise ValueError(f"{path}: released sequence has n={noisy.n}, graph has n={n}")
    return noisy


def cmd_fit(args) -> int:
    schema = load_schema(args.schema)
    attrs = load_attributes(args.attrs, schema)
    g = load_graph(args.graph, attrs.ids)
    removed = []
    if not args.keep_isolates:
        g2, attrs, id_map = preprocess_drop_isolates(g, attrs)
        removed = [x for x in g.labels if x not in set(id_map.values())]
        g = g2
        if removed:
            log.info("removed nodes with zero out- or in-degree: %s", ", ".join(removed))
    covs = build_covariates(attrs, EdgeCovariateRule.from_schema(schema))
    budget = PrivacyBudget(math.inf if args.no_noise else args.epsilon, args.alpha_formula)
    _log_budget(budget, g.n)
    if args.noisy:
        noisy = _load_noisy(args.noisy, g.n)
    else:
        noisy = release_bidegree(g, budget, args.seed)
    sys_ = MomentSystem(g, covs, noisy)
    cfg = SolverConfig(backtrack=args.backtrack)
    res = fit(sys_, cfg=cfg)
    doc = {
        "n": g.n,
        "removed_nodes": removed,
        "epsilon": None if budget.is_noiseless else budget.epsilon,
        "seed": args.seed,
        "privacy": {
            "alpha_formula": budget.alpha_formula,
            "alpha_n": budget.alpha_n,
            "kappa_n": budget.kappa_n,
            "s_n_sq": budget.s_n_sq(g.n),
        },
        "exists": res.exists,
        "reason": res.reason,
        "diagnostics": {
            "inner_iters": res.inner_iters,
            "outer_iters": res.outer_iters,
            "residual_F": _num(res.residual_F),
            "residual_Qc": _num(res.residual_Qc),
        },
    }
    code = EXIT_OK
    if res.exists:
        ti = fitted_theta_inference(sys_, res, budget)
        gi = gamma_inference(sys_, res, budget)
        se_beta = list(ti.se_beta) + [None]
        doc["nodes"] = [
            {
                "id": g.labels[i],
                "d_tilde": int(noisy.d_tilde[i]),
                "alpha": float(res.alpha_hat[i]),
                "se_alpha": float(ti.se_alpha[i]),
                "b_tilde": int(noisy.b_tilde[i]),
                "beta": float(res.beta_hat[i]),
                "se_beta": None if se_beta[i] is None else float(se_beta[i]),
            }
            for i in range(g.n)
        ]
        doc["covariates"] = [
            {
                "name": name,
                "gamma": float(gi.gamma_hat[k]),
                "gamma_bc": float(gi.gamma_bc[k]),
                "se": float(gi.se_gamma[k]),
                "p_value": float(gi.p_values[k]),
            }
            for k, name in enumerate(EdgeCovariateRule.from_schema(schema).names)
        ]
        doc["diagnostics"]["lambda_n"] = gi.lambda_n
        doc["diagnostics"]["noise_ratio"] = ti.noise_ratio
    else:
        code = EXIT_NONEXIST
        doc["d_tilde"] = [int(x) for x in noisy.d_tilde]
        doc["b_tilde"] = [int(x) for x in noisy.b_tilde]
    _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)
    return code


def cmd_simulate(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    if args.reps is not None:
        cfg["reps"] = args.reps
    if args.fixed_covariates:
        cfg["fixed_covariates"] = True
    s = Scenario.from_config(cfg)
    _log_budget(s.budget, s.n)
    report = run_scenario(s, SolverConfig(backtrack=args.backtrack), workers=args.workers)
    for path in write_report(report, args.out):
        log.info("wrote %s", path)
    return EXIT_OK


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _table(rows, cols) -> str:
    widths = [max(len(c), *(len(str(r[c])) for r in rows)) if rows else len(c) for c in cols]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(str(r[c]).rjust(w) for c, w in zip(cols, widths)) for r in rows]
    return "\n".join(lines)


def cmd_report(args) -> int:
    d = Path(args.input)
    summary = json.loads((d / "summary.json").read_text())
    sc = summary["scenario"]
    out = [
        f"n={sc['n']}  L={sc['L']} ({summary['L_value']:.4g})  epsilon={sc['epsilon']}"
        f"  reps={summary['replicates']}  existing={summary['existing']}"
        f"  nonexistence={summary['nonexist_pct']:.2f}%",
        "",
        "Coverage (%) of 95% intervals, mean interval length:",
        _table(_read_csv(d / "coverage.csv"), ["stat", "pair", "coverage_pct", "ci_len", "nonexist_pct"]),
        "",
        "Covariate effects:",
        _table(_read_csv(d / "gamma.csv"), ["estimator", "coordinate", "coverage", "length", "mean_abs_bias"]),
    ]
    sys.stdout.write("\n".join(out) + "\n")
    return EXIT_OK


def cmd_convert_lazega(args) -> int:
    for path in lazega.convert(args.work, args.attr, args.out):
        log.info("wrote %s", path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpdg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("release", help="release an edge-private bi-degree sequence")
    r.add_argument("--graph", required=True)
    r.add_argument("--epsilon", type=_epsilon, required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--alpha-formula", choices=["consistent", "inverse"], default="consistent")
    r.add_argument("--out")
    r.set_defaults(func=cmd_release)

    f = sub.add_parser("fit", help="fit the model to a graph with node attributes")
    f.add_argument("--graph", required=True)
    f.add_argument("--attrs", required=True)
    f.add_argument("--schema", required=True)
    f.add_argument("--epsilon", type=_epsilon, default=2.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--no-noise", action="store_true", help="fit the exact degrees")
    f.add_argument("--noisy", help="use a released sequence (JSON from `release`)")
    f.add_argument("--alpha-formula", choices=["consistent", "inverse"], default="consistent")
    f.add_argument("--keep-isolates", action="store_true")
    f.add_argument("--backtrack", action="store_true")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a Monte-Carlo scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--reps", type=int)
    s.add_argument("--fixed-covariates", action="store_true")
    s.add_argument("--workers", type=int)
    s.add_argument("--backtrack", action="store_true")
    s.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", help="summarise a simulate output directory")
    rp.add_argument("--in", dest="input", required=True)
    rp.set_defaults(func=cmd_report)

    c = sub.add_parser("convert-lazega", help="convert the raw SIENA Lazega files")
    c.add_argument("--work", required=True, help="ELwork.dat")
    c.add_argument("--attr", required=True, help="ELattr.dat")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convert_lazega)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except DegeneracyError as exc:
        log.error("degenerate instance: %s", exc)
        return EXIT_DEGENERATE
    except (ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
