"""Monte-Carlo coverage study over a grid of (n, L, epsilon) scenarios."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .dp_release import PrivacyBudget, release_bidegree
from .graph_model import CovariateSet, ModelParams, sample_graph
from .inference import fitted_theta_inference, gamma_inference, z_statistics
from .moment_system import DegeneracyError, MomentSystem
from .solver import SolverConfig, fit

log = logging.getLogger(__name__)

L_KINDS = {
    "zero": lambda n: 0.0,
    "loglogn": lambda n: math.log(math.log(n)),
    "sqrtlogn": lambda n: math.sqrt(math.log(n)),
    "logn": lambda n: math.log(n),
}

EPSILON_KINDS = {
    "two": lambda n: 2.0,
    "logn_over_n4": lambda n: math.log(n) / n**0.25,
    "logn_over_n2": lambda n: math.log(n) / n**0.5,
    "infinity": lambda n: math.inf,
}
_EPSILON_ALIASES = {"logn_n4": "logn_over_n4", "logn_n2": "logn_over_n2", "2": "two", "inf": "infinity"}

STATS = ("xi", "zeta", "eta")


class EmptySampleError(ValueError):
    pass


def default_pairs(n: int) -> list[tuple[int, int]]:
    """1-based pairs (1, 2), (n/2, n/2 + 1), (n-1, n)."""
    return [(1, 2), (n // 2, n // 2 + 1), (n - 1, n)]


@dataclass(frozen=True)
class Scenario:
    n: int
    L_kind: str = "zero"
    epsilon_kind: str = "two"
    gamma_true: tuple = (1.0, 1.5)
    reps: int = 200
    base_seed: int = 0
    pairs: tuple | None = None
    fixed_covariates: bool = False
    alpha_formula: str = "consistent"

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("scenarios need n >= 4")
        if self.L_kind not in L_KINDS:
            raise ValueError(f"L_kind must be one of {sorted(L_KINDS)}")
        eps = _EPSILON_ALIASES.get(self.epsilon_kind, self.epsilon_kind)
        if eps not in EPSILON_KINDS:
            raise ValueError(f"epsilon_kind must be one of {sorted(EPSILON_KINDS)}")
        object.__setattr__(self, "epsilon_kind", eps)
        object.__setattr__(self, "gamma_true", tuple(float(g) for g in self.gamma_true))
        pairs = default_pairs(self.n) if self.pairs is None else self.pairs
        pairs = tuple((int(i), int(j)) for i, j in pairs)
        for i, j in pairs:
            if not (1 <= i <= self.n and 1 <= j <= self.n) or i == j:
                raise ValueError(f"invalid 1-based pair ({i}, {j})")
        object.__setattr__(self, "pairs", pairs)
        if self.reps < 1:
            raise ValueError("reps must be positive")

    @property
    def L(self) -> float:
        return L_KINDS[self.L_kind](self.n)

    @property
    def epsilon(self) -> float:
        return EPSILON_KINDS[self.epsilon_kind](self.n)

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.epsilon, self.alpha_formula)

    def truth(self) -> ModelParams:
        n = self.n
        alpha = (n - 1 - np.arange(n)) * self.L / (n - 1)
        beta = alpha.copy()
        beta[-1] = 0.0
        return ModelParams(alpha, beta, np.array(self.gamma_true))

    @classmethod
    def from_config(cls, cfg: dict) -> "Scenario":
        known = {"n", "L", "epsilon", "gamma", "reps", "seed", "pairs", "fixed_covariates", "alpha_formula"}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "n" not in cfg:
            raise ValueError("config needs 'n'")
        kw = dict(n=int(cfg["n"]))
        if "L" in cfg:
            kw["L_kind"] = cfg["L"]
        if "epsilon" in cfg:
            kw["epsilon_kind"] = str(cfg["epsilon"])
        if "gamma" in cfg:
            kw["gamma_true"] = tuple(cfg["gamma"])
        if "reps" in cfg:
            kw["reps"] = int(cfg["reps"])
        if "seed" in cfg:
            kw["base_seed"] = int(cfg["seed"])
        if cfg.get("pairs") is not None:
            kw["pairs"] = tuple(tuple(p) for p in cfg["pairs"])
        for key in ("fixed_covariates", "alpha_formula"):
            if key in cfg:
                kw[key] = cfg[key]
        return cls(**kw)

    def to_config(self) -> dict:
        return {
            "n": self.n,
            "L": self.L_kind,
            "epsilon": self.epsilon_kind,
            "gamma": list(self.gamma_true),
            "reps": self.reps,
            "seed": self.base_seed,
            "pairs": [list(p) for p in self.pairs],
            "fixed_covariates": self.fixed_covariates,
            "alpha_formula": self.alpha_formula,
        }


def gen_covariates(n: int, rng_seed) -> CovariateSet:
    """Node attributes x1 in {1, -1} (P = 0.3, 0.7) and x2 ~ Beta(2, 2);
    Z_ij = (x_i1 x_j1, |x_i2 - x_j2|)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(rng_seed)
    x1 = np.where(rng.random(n) < 0.3, 1.0, -1.0)
    x2 = rng.beta(2.0, 2.0, size=n)
    z = np.stack([np.outer(x1, x1), np.abs(x2[:, None] - x2[None, :])], axis=-1)
    return CovariateSet(z)


def _fixed_covariate_seed(base_seed: int):
    return np.random.SeedSequence([base_seed, 0xC0FF])


@dataclass
class Replicate:
    seed: int
    exists: bool
    reason: str
    z: dict | None = None
    sd: dict | None = None
    gamma_hat: np.ndarray | None = None
    gamma_bc: np.ndarray | None = None
    se_gamma: np.ndarray | None = None


def run_replicate(s: Scenario, cfg: SolverConfig, r: int, covs: CovariateSet | None = None) -> Replicate:
    seed = s.base_seed + r
    rng = np.random.default_rng(seed)
    truth = s.truth()
    if covs is None:
        covs = gen_covariates(s.n, rng)
    g = sample_graph(truth, covs, rng)
    noisy = release_bidegree(g, s.budget, rng)
    sys = MomentSystem(g, covs, noisy)
    try:
        res = fit(sys, cfg=cfg)
        if not res.exists:
            return Replicate(seed, False, res.reason)
        gi = gamma_inference(sys, res)
    except DegeneracyError as exc:
        log.debug("replicate %d degenerate: %s", r, exc)
        return Replicate(seed, False, "degenerate")
    ti = fitted_theta_inference(sys, res, s.budget)
    pairs0 = [(i - 1, j - 1) for i, j in s.pairs]
    z = z_statistics(res, truth, ti, pairs0)
    sd = {
        "xi": np.array([math.sqrt(ti.pair_var("alpha", i, "alpha", j)) for i, j in pairs0]),
        "zeta": np.array([math.sqrt(ti.pair_var("alpha", i, "beta", j)) for i, j in pairs0]),
        "eta": np.array([math.sqrt(ti.pair_var("beta", i, "beta", j)) for i, j in pairs0]),
    }
    return Replicate(seed, True, "converged", z, sd, gi.gamma_hat, gi.gamma_bc, gi.se_gamma)


def _worker(args):
    s, cfg, r, covs = args
    return run_replicate(s, cfg, r, covs)


def worker_count() -> int:
    cap = os.environ.get("DPDG_THREADS")
    if cap:
        return max(1, int(cap))
    return 1


@dataclass
class ScenarioReport:
    scenario: Scenario
    replicates: list

    @property
    def existing(self) -> list:
        return [r for r in self.replicates if r.exists]

    @property
    def n_exist(self) -> int:
        return len(self.existing)

    @property
    def nonexistence_pct(self) -> float:
        return 100.0 * (len(self.replicates) - self.n_exist) / len(self.replicates)

    @property
    def existence_pct(self) -> float:
        return 100.0 * self.n_exist / len(self.replicates)

    def reasons(self) -> dict:
        out: dict = {}
        for r in self.replicates:
            out[r.reason] = out.get(r.reason, 0) + 1
        return out

    def values(self, stat: str, pair_idx: int) -> np.ndarray:
        return np.array([r.z[stat][pair_idx] for r in self.existing])

    def sds(self, stat: str, pair_idx: int) -> np.ndarray:
        return np.array([r.sd[stat][pair_idx] for r in self.existing])

    def coverage(self, stat: str, pair_idx: int, level: float = 0.95) -> float:
        """Percentage of existing replicates whose standardised statistic
        lies inside the normal interval; NaN when none exist."""
        v = self.values(stat, pair_idx)
        if v.size == 0:
            return math.nan
        z = stats.norm.ppf(0.5 + level / 2)
        return 100.0 * float(np.mean(np.abs(v) <= z))

    def ci_length(self, stat: str, pair_idx: int, level: float = 0.95) -> float:
        sd = self.sds(stat, pair_idx)
        if sd.size == 0:
            return math.nan
        return float(2 * stats.norm.ppf(0.5 + level / 2) * sd.mean())

    def gamma_rows(self, level: float = 0.95) -> list[dict]:
        g_true = np.array(self.scenario.gamma_true)
        rows = []
        ex = self.existing
        z = stats.norm.ppf(0.5 + level / 2)
        for est in ("gamma_hat", "gamma_bc"):
            for k in range(g_true.size):
                if ex:
                    centers = np.array([getattr(r, est)[k] for r in ex])
                    se = np.array([r.se_gamma[k] for r in ex])
                    cover = 100.0 * float(np.mean(np.abs(centers - g_true[k]) <= z * se))
                    length = float(2 * z * se.mean())
                    bias = float(np.mean(np.abs(centers - g_true[k])))
                else:
                    cover = length = bias = math.nan
                rows.append({"estimator": est, "coordinate": k + 1, "coverage": cover, "length": length, "mean_abs_bias": bias})
        return rows

    def coverage_rows(self, level: float = 0.95) -> list[dict]:
        s = self.scenario
        rows = []
        for stat in STATS:
            for idx, (i, j) in enumerate(s.pairs):
                rows.append({
                    "n": s.n,
                    "L": s.L_kind,
                    "epsilon": s.epsilon_kind,
                    "stat": stat,
                    "pair": f"({i},{j})",
                    "coverage_pct": self.coverage(stat, idx, level),
                    "ci_len": self.ci_length(stat, idx, level),
                    "nonexist_pct": self.nonexistence_pct,
                })
        return rows


def run_scenario(s: Scenario, cfg: SolverConfig = SolverConfig(), workers: int | None = None) -> ScenarioReport:
    covs = gen_covariates(s.n, _fixed_covariate_seed(s.base_seed)) if s.fixed_covariates else None
    jobs = [(s, cfg, r, covs) for r in range(s.reps)]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(_worker, jobs, chunksize=max(1, s.reps // (4 * workers))))
    else:
        reps = [_worker(j) for j in jobs]
    report = ScenarioReport(s, reps)
    log.info(
        "scenario n=%d L=%s eps=%s: %d/%d estimates exist",
        s.n, s.L_kind, s.epsilon_kind, report.n_exist, s.reps,
    )
    return report


def qq_table(values) -> np.ndarray:
    """Rows (theoretical, empirical): sorted values against standard normal
    quantiles at (k - 0.5)/m."""
    v = np.sort(np.asarray(values, dtype=float))
    m = v.size
    if m < 2:
        raise EmptySampleError("need at least two values for a QQ table")
    theo = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    return np.column_stack([theo, v])


def export_qq(report: ScenarioReport, stat: str, pair) -> np.ndarray:
    if stat not in STATS:
        raise ValueError(f"stat must be one of {STATS}")
    pair = tuple(pair)
    try:
        idx = report.scenario.pairs.index(pair)
    except ValueError:
        raise ValueError(f"pair {pair} not in scenario pairs {report.scenario.pairs}") from None
    return qq_table(report.values(stat, idx))


def _fmt(x):
    if isinstance(x, float):
        return "NA" if math.isnan(x) else f"{x:.6g}"
    return x


def _write_csv(path: Path, rows: list[dict], header: list[str]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def write_report(report: ScenarioReport, out_dir) -> list[Path]:
    """Write coverage.csv, gamma.csv, qq_<stat>_<i>-<j>.csv and summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    cov = out / "coverage.csv"
    _write_csv(cov, report.coverage_rows(), ["n", "L", "epsilon", "stat", "pair", "coverage_pct", "ci_len", "nonexist_pct"])
    written.append(cov)
    gam = out / "gamma.csv"
    _write_csv(gam, report.gamma_rows(), ["estimator", "coordinate", "coverage", "length", "mean_abs_bias"])
    written.append(gam)
    if report.n_exist >= 2:
        for stat in STATS:
            for i, j in report.scenario.pairs:
                tab = export_qq(report, stat, (i, j))
                path = out / f"qq_{stat}_{i}-{j}.csv"
                _write_csv(path, [{"theoretical": a, "empirical": b} for a, b in tab.tolist()], ["theoretical", "empirical"])
                written.append(path)
    summary = {
        "scenario": report.scenario.to_config(),
        "L_value": report.scenario.L,
        "epsilon_value": None if math.isinf(report.scenario.epsilon) else report.scenario.epsilon,
        "replicates": len(report.replicates),
        "existing": report.n_exist,
        "nonexist_pct": report.nonexistence_pct,
        "reasons": dict(sorted(report.reasons().items())),
    }
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
