"""Two-stage Newton solver for the noisy moment equations.

Inner stage: for fixed gamma, solve F(theta, gamma) = 0 by Newton's method.
Outer stage: update gamma with a Newton step on the profiled covariate
moment Q_c(gamma) = Q(theta_hat(gamma), gamma), whose derivative is -H.

A failure of the inner stage is not an error: it means the released degrees
admit no solution, and is reported through ``FitResult.exists``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph_model import ModelParams
from .moment_system import (
    MomentSystem,
    SingularityError,
    approx_inverse_S,
    eval_F,
    eval_Q,
    jacobian_V,
    schur_H,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances are l-inf norms of F (degree units) and Q_c (covariate-sum
    units).

    ``approx_inverse`` replaces the exact V^{-1} in the inner Newton step by
    its closed-form approximation S; the resulting step is only
    approximately Newton and should be combined with ``backtrack``.
    """

    tol_theta: float = 1e-8
    tol_gamma: float = 1e-8
    max_inner: int = 200
    max_outer: int = 100
    divergence_bound: float = 1e6
    backtrack: bool = False
    approx_inverse: bool = False

    def __post_init__(self):
        for name in ("tol_theta", "tol_gamma", "max_inner", "max_outer", "divergence_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class InnerResult:
    exists: bool
    theta: np.ndarray | None
    iters: int
    residual: float
    reason: str


@dataclass(frozen=True)
class FitResult:
    exists: bool
    theta_hat: np.ndarray | None
    gamma_hat: np.ndarray | None
    inner_iters: int
    outer_iters: int
    residual_F: float
    residual_Qc: float
    reason: str = "converged"

    @property
    def n(self) -> int:
        return (self.theta_hat.size + 1) // 2

    @property
    def alpha_hat(self) -> np.ndarray:
        return self.theta_hat[: self.n]

    @property
    def beta_hat(self) -> np.ndarray:
        """Receiver effects including the pinned beta_n = 0."""
        return np.append(self.theta_hat[self.n :], 0.0)

    def params(self) -> ModelParams:
        if not self.exists:
            raise ValueError(f"estimate does not exist ({self.reason})")
        return ModelParams.from_theta(self.theta_hat, self.gamma_hat)


def _logit_clamped(x, n):
    c = np.clip(np.asarray(x, dtype=float), 0.5, n - 1.5)
    return np.log(c / (n - 1 - c))


def initial_params(sys: MomentSystem, gamma=None) -> ModelParams:
    """Logit start from the released degrees, with beta_n shifted to 0."""
    n = sys.n
    alpha = _logit_clamped(sys.noisy.d_tilde, n)
    beta = _logit_clamped(sys.noisy.b_tilde, n)
    gamma = np.zeros(sys.p) if gamma is None else np.asarray(gamma, dtype=float)
    shift = beta[-1]
    return ModelParams(alpha + shift, beta - shift, gamma)


def degrees_feasible(sys: MomentSystem) -> bool:
    """Necessary condition for a root: every fitted degree lies strictly in
    (0, n-1), including the implied in-degree of node n."""
    n = sys.n
    d = sys.noisy.d_tilde
    b = sys.noisy.b_tilde[:-1]
    b_last = d.sum() - b.sum()
    lo, hi = 0, n - 1
    return bool(
        np.all((d > lo) & (d < hi)) and np.all((b > lo) & (b < hi)) and lo < b_last < hi
    )


def solve_theta_given_gamma(sys: MomentSystem, gamma, theta_init, cfg: SolverConfig = SolverConfig()) -> InnerResult:
    gamma = np.asarray(gamma, dtype=float)
    theta = np.array(theta_init, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta_init must be finite")
    f = eval_F(sys, ModelParams.from_theta(theta, gamma))
    res = float(np.abs(f).max())
    for k in range(cfg.max_inner + 1):
        if res <= cfg.tol_theta:
            return InnerResult(True, theta, k, res, "converged")
        if k == cfg.max_inner:
            break
        try:
            v = jacobian_V(sys, ModelParams.from_theta(theta, gamma))
            step = approx_inverse_S(v).matvec(f) if cfg.approx_inverse else v.solve(f)
        except SingularityError:
            return InnerResult(False, None, k, res, "singular")
        t = 1.0
        while True:
            cand = theta + t * step
            f_new = eval_F(sys, ModelParams.from_theta(cand, gamma))
            res_new = float(np.abs(f_new).max())
            if not cfg.backtrack or res_new < res or t < 1e-10:
                break
            t *= 0.5
        theta, f, res = cand, f_new, res_new
        if not np.all(np.isfinite(theta)) or np.abs(theta).max() > cfg.divergence_bound:
            return InnerResult(False, None, k + 1, res, "diverged")
    return InnerResult(False, None, cfg.max_inner, res, "max_inner")


def fit(sys: MomentSystem, init: ModelParams | None = None, cfg: SolverConfig = SolverConfig()) -> FitResult:
    """Solve all 2n-1+p moment equations.

    Raises ``DegeneracyError`` if H stops being positive definite.
    """
    if init is None:
        init = initial_params(sys)
    if not degrees_feasible(sys):
        return FitResult(False, None, None, 0, 0, np.inf, np.inf, "infeasible_degrees")
    theta = init.theta
    gamma = init.gamma.copy()
    inner_total = 0
    for outer in range(cfg.max_outer + 1):
        inner = solve_theta_given_gamma(sys, gamma, theta, cfg)
        inner_total += inner.iters
        if not inner.exists:
            log.debug("inner solve failed at outer step %d: %s", outer, inner.reason)
            return FitResult(False, None, None, inner_total, outer, inner.residual, np.inf, inner.reason)
        theta = inner.theta
        params = ModelParams.from_theta(theta, gamma)
        qc = eval_Q(sys, params)
        qres = float(np.abs(qc).max())
        if qres <= cfg.tol_gamma:
            return FitResult(True, theta, gamma, inner_total, outer, inner.residual, qres)
        if outer == cfg.max_outer:
            break
        h = schur_H(sys, params)
        step = np.linalg.solve(h.h, qc)
        if cfg.backtrack:
            gamma, theta = _backtrack_gamma(sys, gamma, theta, step, qres, cfg)
        else:
            gamma = gamma + step
    return FitResult(False, None, None, inner_total, cfg.max_outer, inner.residual, qres, "max_outer")


def _backtrack_gamma(sys, gamma, theta, step, qres, cfg):
    t = 1.0
    while t >= 1e-6:
        cand = gamma + t * step
        inner = solve_theta_given_gamma(sys, cand, theta, cfg)
        if inner.exists:
            q = eval_Q(sys, ModelParams.from_theta(inner.theta, cand))
            if np.abs(q).max() < qres:
                return cand, inner.theta
        t *= 0.5
    return gamma + step, theta


def profiled_Q(sys: MomentSystem, gamma, theta_init=None, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Q_c(gamma): covariate moment at the gamma-conditional root of F."""
    gamma = np.asarray(gamma, dtype=float)
    if theta_init is None:
        theta_init = initial_params(sys, gamma).theta
    inner = solve_theta_given_gamma(sys, gamma, theta_init, cfg)
    if not inner.exists:
        raise ValueError(f"no inner solution at gamma={gamma} ({inner.reason})")
    return eval_Q(sys, ModelParams.from_theta(inner.theta, gamma))
