"""Standard errors, bias correction and Wald statistics.

Degree parameters use the closed-form approximate inverse S of V plus the
variance that the summed privacy noise adds along the common direction.
Covariate effects use the inverse Schur complement H^{-1}, with an analytic
correction for the O(1/sqrt(N)) bias of gamma_hat, N = n(n-1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dp_release import PrivacyBudget
from .graph_model import DomainError, ModelParams, edge_prob_matrix
from .moment_system import (
    DegeneracyError,
    MomentSystem,
    StructuredJacobian,
    jacobian_V,
    schur_H,
)
from .solver import FitResult


@dataclass(frozen=True)
class ThetaInference:
    n: int
    v_diag: np.ndarray
    v2n2n: float
    s_n_sq: float

    @property
    def var_theta(self) -> np.ndarray:
        """1/v_ii + 1/v_{2n,2n} + s_n^2 / v_{2n,2n}^2 for each free coordinate."""
        c = 1.0 / self.v2n2n + self.s_n_sq / self.v2n2n**2
        return 1.0 / self.v_diag + c

    @property
    def se_theta(self) -> np.ndarray:
        return np.sqrt(self.var_theta)

    @property
    def se_alpha(self) -> np.ndarray:
        return self.se_theta[: self.n]

    @property
    def se_beta(self) -> np.ndarray:
        """Standard errors of beta_1..beta_{n-1} (beta_n is pinned)."""
        return self.se_theta[self.n :]

    @property
    def noise_ratio(self) -> float:
        """s_n / v_{2n,2n}^{1/2}, the quantity whose limit governs whether the
        noise term survives asymptotically."""
        return float(np.sqrt(self.s_n_sq / self.v2n2n))

    def block_diag(self, block: str) -> np.ndarray:
        """Diagonal of V for one block, extended to n entries.

        For the beta block the n-th entry is v_{2n,2n}, the information for
        the in-degree of node n whose parameter is pinned.
        """
        if block == "alpha":
            return self.v_diag[: self.n]
        if block == "beta":
            return np.append(self.v_diag[self.n :], self.v2n2n)
        raise DomainError(f"unknown block {block!r}")

    def pair_var(self, block_i: str, i: int, block_j: str, j: int) -> float:
        """Variance of a difference (same block) or sum (alpha_i + beta_j)."""
        di = self.block_diag(block_i)
        dj = self.block_diag(block_j)
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise DomainError(f"index out of range: ({i}, {j})")
        return float(1.0 / di[i] + 1.0 / dj[j])


def theta_se(v: StructuredJacobian, budget: PrivacyBudget) -> ThetaInference:
    diag = v.diag
    if np.any(diag <= 0) or not v.v2n2n > 0:
        raise DegeneracyError("V has a non-positive diagonal entry")
    return ThetaInference(n=v.n, v_diag=diag.copy(), v2n2n=v.v2n2n, s_n_sq=budget.s_n_sq(v.n))


def z_statistics(fit: FitResult, truth: ModelParams, inf: ThetaInference, pairs) -> dict:
    """Standardised xi (alpha_i - alpha_j), zeta (alpha_i + beta_j) and eta
    (beta_i - beta_j) for 0-based pairs (i, j).

    Returns ``{"xi": array, "zeta": array, "eta": array}`` aligned with
    ``pairs``.
    """
    a_hat, b_hat = fit.alpha_hat, fit.beta_hat
    out = {"xi": [], "zeta": [], "eta": []}
    for i, j in pairs:
        num = a_hat[i] - a_hat[j] - (truth.alpha[i] - truth.alpha[j])
        out["xi"].append(num / np.sqrt(inf.pair_var("alpha", i, "alpha", j)))
        num = a_hat[i] + b_hat[j] - truth.alpha[i] - truth.beta[j]
        out["zeta"].append(num / np.sqrt(inf.pair_var("alpha", i, "beta", j)))
        num = b_hat[i] - b_hat[j] - (truth.beta[i] - truth.beta[j])
        out["eta"].append(num / np.sqrt(inf.pair_var("beta", i, "beta", j)))
    return {k: np.array(v) for k, v in out.items()}


def bias_term(sys: MomentSystem, params: ModelParams) -> np.ndarray:
    """Plug-in estimate of the asymptotic bias vector B.

    B = 1/(2 sqrt(N)) [ sum_i (sum_j Z_ij mu2_ij) / (sum_j mu1_ij)
                        + sum_j (sum_i Z_ij mu2_ij) / (sum_i mu1_ij) ]

    with mu1 = p(1-p) and mu2 = p(1-p)(1-2p), the first and second
    derivatives of the logistic function at eta_ij.
    """
    p = edge_prob_matrix(params, sys.covs)
    mu1 = p * (1.0 - p)
    mu2 = mu1 * (1.0 - 2.0 * p)
    row_den = mu1.sum(axis=1)
    col_den = mu1.sum(axis=0)
    if np.any(row_den <= 0) or np.any(col_den <= 0):
        raise DegeneracyError("a node has zero total edge variance")
    zm = mu2[:, :, None] * sys.covs.z
    rows = (zm.sum(axis=1) / row_den[:, None]).sum(axis=0)
    cols = (zm.sum(axis=0) / col_den[:, None]).sum(axis=0)
    N = sys.n * (sys.n - 1)
    return (rows + cols) / (2.0 * np.sqrt(N))


@dataclass(frozen=True)
class GammaInference:
    gamma_hat: np.ndarray
    gamma_bc: np.ndarray
    se_gamma: np.ndarray
    bias_hat: np.ndarray
    H_inv: np.ndarray
    p_values: np.ndarray
    lambda_n: float

    def interval(self, level: float = 0.95, corrected: bool = True) -> tuple[np.ndarray, np.ndarray]:
        z = stats.norm.ppf(0.5 + level / 2)
        center = self.gamma_bc if corrected else self.gamma_hat
        return center - z * self.se_gamma, center + z * self.se_gamma


def bias_shift(h_inv: np.ndarray, bias: np.ndarray, n: int) -> np.ndarray:
    """Estimated bias of gamma_hat, E[gamma_hat - gamma] ~ -sqrt(N) H^{-1} B.

    H here is the positive Schur complement, and H/N is its normalised limit.
    """
    N = n * (n - 1)
    return -np.sqrt(N) * (h_inv @ bias)


def gamma_inference(sys: MomentSystem, fit: FitResult, budget: PrivacyBudget | None = None) -> GammaInference:
    if not fit.exists:
        raise ValueError(f"estimate does not exist ({fit.reason})")
    params = fit.params()
    h = schur_H(sys, params)
    h_inv = h.inverse
    b = bias_term(sys, params)
    gamma_bc = fit.gamma_hat - bias_shift(h_inv, b, sys.n)
    se = np.sqrt(np.diag(h_inv))
    pv = 2.0 * stats.norm.sf(np.abs(gamma_bc) / se)
    return GammaInference(
        gamma_hat=fit.gamma_hat,
        gamma_bc=gamma_bc,
        se_gamma=se,
        bias_hat=b,
        H_inv=h_inv,
        p_values=pv,
        lambda_n=h.lambda_n,
    )


def fitted_theta_inference(sys: MomentSystem, fit: FitResult, budget: PrivacyBudget) -> ThetaInference:
    return theta_se(jacobian_V(sys, fit.params()), budget)
