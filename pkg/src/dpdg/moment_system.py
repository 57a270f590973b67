"""Estimating equations for the noisy bi-degrees and the covariate moments.

Sign conventions: ``eval_F`` and ``eval_Q`` are residuals (observed minus
expected), so their true Jacobians are negative semi-definite. The
structured matrix ``V`` and the Schur complement ``H`` are stored as the
*positive* (Fisher-information-like) matrices, ``V = -dF/dtheta`` and
``H = -dQ_c/dgamma``. ``jacobian_blocks`` returns the true signed
derivatives for checking against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .dp_release import NoisyDegrees
from .graph_model import (
    CovariateSet,
    DirectedGraph,
    DomainError,
    ModelParams,
    edge_prob_matrix,
)


class SingularityError(np.linalg.LinAlgError):
    """V (or a diagonal entry of it) is not invertible."""


class DegeneracyError(ArithmeticError):
    """H is not positive definite, or a variance term vanishes."""


@dataclass(frozen=True)
class MomentSystem:
    graph: DirectedGraph
    covs: CovariateSet
    noisy: NoisyDegrees

    def __post_init__(self):
        if not (self.graph.n == self.covs.n == self.noisy.n):
            raise DomainError("graph, covariates and noisy degrees disagree on n")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def p(self) -> int:
        return self.covs.p

    @property
    def dim_theta(self) -> int:
        return 2 * self.n - 1

    @cached_property
    def observed_covariate_sum(self) -> np.ndarray:
        """sum_{i != j} Z_ij a_ij, from the raw adjacency."""
        return np.einsum("ij,ijk->k", self.graph.adjacency.astype(float), self.covs.z)

    def params(self, theta, gamma) -> ModelParams:
        return ModelParams.from_theta(theta, gamma)


def _weights(sys: MomentSystem, params: ModelParams):
    p = edge_prob_matrix(params, sys.covs)
    w = p * (1.0 - p)
    return p, w


def eval_F(sys: MomentSystem, params: ModelParams) -> np.ndarray:
    p = edge_prob_matrix(params, sys.covs)
    out = sys.noisy.d_tilde - p.sum(axis=1)
    inn = sys.noisy.b_tilde - p.sum(axis=0)
    return np.concatenate([out, inn[:-1]])


def eval_Q(sys: MomentSystem, params: ModelParams) -> np.ndarray:
    p = edge_prob_matrix(params, sys.covs)
    return sys.observed_covariate_sum - np.einsum("ij,ijk->k", p, sys.covs.z)


@dataclass(frozen=True)
class StructuredJacobian:
    """V = -dF/dtheta in block form.

    ``v11`` (n,) and ``v22`` (n-1,) are the diagonals of the two diagonal
    blocks; ``v12[i, j] = p_ij (1 - p_ij)`` couples alpha_i with beta_j.
    """

    v11: np.ndarray
    v22: np.ndarray
    v12: np.ndarray

    @property
    def n(self) -> int:
        return self.v11.size

    @property
    def dim(self) -> int:
        return 2 * self.n - 1

    @property
    def diag(self) -> np.ndarray:
        return np.concatenate([self.v11, self.v22])

    def dense(self) -> np.ndarray:
        n = self.n
        v = np.zeros((2 * n - 1, 2 * n - 1))
        v[:n, :n] = np.diag(self.v11)
        v[n:, n:] = np.diag(self.v22)
        v[:n, n:] = self.v12
        v[n:, :n] = self.v12.T
        return v

    @cached_property
    def v2n(self) -> np.ndarray:
        """Bookkeeping row v_{2n,i} = v_ii - sum_{j != i} v_ij, i < 2n."""
        first = self.v11 - self.v12.sum(axis=1)
        second = self.v22 - self.v12.sum(axis=0)
        return np.concatenate([first, second])

    @cached_property
    def v2n2n(self) -> float:
        return float(self.v2n.sum())

    @cached_property
    def _factor(self):
        # Eliminate the diagonal alpha block, then Cholesky on the
        # (n-1) x (n-1) Schur complement.
        if np.any(self.v11 <= 0) or np.any(self.v22 <= 0):
            raise SingularityError("V has a non-positive diagonal entry")
        scaled = self.v12 / self.v11[:, None]
        c = np.diag(self.v22) - self.v12.T @ scaled
        try:
            chol = scipy.linalg.cho_factor(c, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularityError(str(exc)) from exc
        return scaled, chol

    def solve(self, rhs) -> np.ndarray:
        """Exact V^{-1} rhs; ``rhs`` may be a vector or a (2n-1, k) matrix."""
        rhs = np.asarray(rhs, dtype=float)
        n = self.n
        scaled, chol = self._factor
        r1 = rhs[:n]
        r2 = rhs[n:]
        r1_scaled = r1 / (self.v11[:, None] if r1.ndim == 2 else self.v11)
        x2 = scipy.linalg.cho_solve(chol, r2 - self.v12.T @ r1_scaled)
        x1 = r1_scaled - scaled @ x2
        out = np.concatenate([x1, x2])
        if not np.all(np.isfinite(out)):
            raise SingularityError("non-finite solution of V x = rhs")
        return out

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))


def jacobian_V(sys: MomentSystem, params: ModelParams) -> StructuredJacobian:
    _, w = _weights(sys, params)
    return _jacobian_from_weights(w)


def _jacobian_from_weights(w: np.ndarray) -> StructuredJacobian:
    return StructuredJacobian(
        v11=w.sum(axis=1), v22=w.sum(axis=0)[:-1], v12=w[:, :-1].copy()
    )


def class_L_violations(v: StructuredJacobian, m: float, M: float, rtol: float = 1e-12) -> list[str]:
    """Return the conditions of the structured class L_n(m, M) that ``v``
    fails (empty list means membership)."""
    n = v.n
    tol_abs = rtol * max(1.0, float(np.abs(v.diag).max()))
    bad = []
    dense = v.dense()
    beta_sums = v.v12.sum(axis=1)
    gap = v.v11[: n - 1] - beta_sums[: n - 1]
    if np.any(gap < m - tol_abs) or np.any(gap > M + tol_abs):
        bad.append("alpha-row excess outside [m, M]")
    if abs(v.v11[n - 1] - beta_sums[n - 1]) > tol_abs:
        bad.append("v_nn != sum of beta-block entries in row n")
    a_block = dense[:n, :n] - np.diag(v.v11)
    b_block = dense[n:, n:] - np.diag(v.v22)
    if np.any(a_block != 0) or np.any(b_block != 0):
        bad.append("non-zero off-diagonal within a diagonal block")
    idx = np.arange(n - 1)
    if np.any(v.v12[idx, idx] != 0):
        bad.append("v_{i,n+i} != 0")
    mask = np.ones_like(v.v12, dtype=bool)
    mask[idx, idx] = False
    off = v.v12[mask]
    if np.any(off < m - tol_abs) or np.any(off > M + tol_abs):
        bad.append("coupling entry outside [m, M]")
    if not np.allclose(dense, dense.T):
        bad.append("V not symmetric")
    if np.any(np.abs(v.v22 - v.v12.sum(axis=0)) > tol_abs):
        bad.append("beta diagonal != column sum")
    return bad


@dataclass(frozen=True)
class ApproxInverse:
    """Closed-form approximation S of V^{-1}.

    Diagonal blocks: delta_ij / v_ii + 1/v_{2n,2n}; off-diagonal blocks:
    -1/v_{2n,2n}.
    """

    diag: np.ndarray
    v2n2n: float

    @property
    def dim(self) -> int:
        return self.diag.size

    @property
    def n(self) -> int:
        return (self.dim + 1) // 2

    def dense(self) -> np.ndarray:
        n = self.n
        c = 1.0 / self.v2n2n
        s = np.full((self.dim, self.dim), c)
        s[:n, n:] = -c
        s[n:, :n] = -c
        s[np.diag_indices(self.dim)] += 1.0 / self.diag
        return s

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        signed = x[:n].sum(axis=0) - x[n:].sum(axis=0)
        sign = np.concatenate([np.ones(n), -np.ones(self.dim - n)])
        rank_one = np.multiply.outer(sign, signed) / self.v2n2n
        return (x.T / self.diag).T + rank_one


def approx_inverse_S(v: StructuredJacobian) -> ApproxInverse:
    diag = v.diag
    if np.any(diag <= 0):
        raise SingularityError("S needs strictly positive diagonal entries of V")
    if not v.v2n2n > 0:
        raise SingularityError("v_{2n,2n} must be positive")
    return ApproxInverse(diag=diag.copy(), v2n2n=v.v2n2n)


def gamma_coupling(sys: MomentSystem, w: np.ndarray) -> np.ndarray:
    """(2n-1) x p matrix -dF/dgamma, which also equals (-dQ/dtheta)'."""
    wz = w[:, :, None] * sys.covs.z
    rows = wz.sum(axis=1)
    cols = wz.sum(axis=0)[:-1]
    return np.vstack([rows, cols])


def jacobian_blocks(sys: MomentSystem, params: ModelParams) -> dict[str, np.ndarray]:
    """True (signed) derivatives dF/dtheta, dF/dgamma, dQ/dtheta, dQ/dgamma."""
    _, w = _weights(sys, params)
    v = _jacobian_from_weights(w)
    b = gamma_coupling(sys, w)
    z = sys.covs.z
    a = np.einsum("ij,ijk,ijl->kl", w, z, z)
    return {
        "dF_dtheta": -v.dense(),
        "dF_dgamma": -b,
        "dQ_dtheta": -b.T,
        "dQ_dgamma": -a,
    }


@dataclass(frozen=True)
class SchurMatrix:
    """H = sum w Z Z' - B' V^{-1} B (positive definite form)."""

    h: np.ndarray
    n_pairs: int

    @property
    def p(self) -> int:
        return self.h.shape[0]

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.h)

    @property
    def lambda_n(self) -> float:
        """n^2 * ||H^{-1}||_inf (max absolute row sum)."""
        n = (1 + np.sqrt(1 + 4 * self.n_pairs)) / 2
        return float(n**2 * np.abs(self.inverse).sum(axis=1).max())

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.h).min())


def schur_H(sys: MomentSystem, params: ModelParams, v: StructuredJacobian | None = None) -> SchurMatrix:
    _, w = _weights(sys, params)
    if v is None:
        v = _jacobian_from_weights(w)
    b = gamma_coupling(sys, w)
    z = sys.covs.z
    a = np.einsum("ij,ijk,ijl->kl", w, z, z)
    h = a - b.T @ v.solve(b)
    h = 0.5 * (h + h.T)
    if not np.all(np.isfinite(h)):
        raise DegeneracyError("H has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    try:
        lam_min = np.linalg.eigvalsh(h).min()
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError(str(exc)) from exc
    if lam_min <= 1e-12 * scale:
        raise DegeneracyError(f"H is not positive definite (min eigenvalue {lam_min:.3g})")
    return SchurMatrix(h=h, n_pairs=sys.n * (sys.n - 1))
