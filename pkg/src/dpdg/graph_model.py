"""Directed beta-model with edge covariates.

An edge i -> j appears independently with probability

    p_ij = sigmoid(Z_ij' gamma + alpha_i + beta_j),

where alpha_i is the out-degree (sender) effect of node i, beta_j the
in-degree (receiver) effect of node j and Z_ij a p-vector of edge covariates.
The last receiver effect beta_n is pinned to zero for identifiability.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Raised for an invalid index or shape (e.g. a self-loop query)."""


def sigmoid(x):
    """Logistic function evaluated without overflow for any finite input."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class DirectedGraph:
    """Binary directed graph on ``n`` nodes without self-loops.

    ``labels`` optionally carries the original node identifiers (used by the
    ingestion code to keep track of relabelling).
    """

    adjacency: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError("adjacency must be a square matrix")
        if a.shape[0] < 2:
            raise DomainError("a graph needs at least two nodes")
        if not np.isin(a, (0, 1)).all():
            raise DomainError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0):
            raise DomainError("self-loops are not allowed")
        a = a.astype(np.int8)
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        if self.labels is not None:
            if len(self.labels) != a.shape[0]:
                raise DomainError("labels must have one entry per node")
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())

    @classmethod
    def from_edges(cls, n: int, edges, labels=None) -> "DirectedGraph":
        a = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            a[i, j] = 1
        return cls(a, labels)

    def subgraph(self, keep) -> "DirectedGraph":
        keep = np.asarray(keep)
        labels = None if self.labels is None else tuple(self.labels[k] for k in keep)
        return DirectedGraph(self.adjacency[np.ix_(keep, keep)], labels)


@dataclass(frozen=True)
class CovariateSet:
    """Dense edge covariates ``z[i, j, :]`` for every ordered pair i != j.

    Diagonal entries are stored as zeros and never used.
    """

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 2:
            z = z[:, :, None]
        if z.ndim != 3 or z.shape[0] != z.shape[1]:
            raise DomainError("covariates must have shape (n, n, p)")
        if z.shape[2] < 1:
            raise DomainError("covariate dimension p must be >= 1")
        z = z.copy()
        idx = np.arange(z.shape[0])
        z[idx, idx, :] = 0.0
        if not np.isfinite(z).all():
            raise DomainError("covariates must be finite")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def p(self) -> int:
        return self.z.shape[2]

    @property
    def q_bound(self) -> float:
        """max over i != j of the max-norm of Z_ij."""
        return float(np.abs(self.z).max())

    def subset(self, keep) -> "CovariateSet":
        keep = np.asarray(keep)
        return CovariateSet(self.z[np.ix_(keep, keep)])


@dataclass(frozen=True)
class ModelParams:
    """Sender effects ``alpha``, receiver effects ``beta`` (``beta[-1] == 0``)
    and covariate coefficients ``gamma``."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).ravel()
        beta = np.array(self.beta, dtype=float).ravel()
        gamma = np.array(self.gamma, dtype=float).ravel()
        if beta.shape == (alpha.size - 1,):
            beta = np.append(beta, 0.0)
        if alpha.shape != beta.shape:
            raise DomainError("alpha and beta must have the same length")
        if beta[-1] != 0.0:
            raise DomainError("beta_n must be 0 (identifiability constraint)")
        for arr in (alpha, beta, gamma):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def p(self) -> int:
        return self.gamma.size

    @property
    def theta(self) -> np.ndarray:
        """Free degree parameters (alpha_1..alpha_n, beta_1..beta_{n-1})."""
        return np.concatenate([self.alpha, self.beta[:-1]])

    @classmethod
    def from_theta(cls, theta, gamma) -> "ModelParams":
        theta = np.asarray(theta, dtype=float)
        if theta.size % 2 != 1:
            raise DomainError("theta must have odd length 2n-1")
        n = (theta.size + 1) // 2
        return cls(theta[:n], np.append(theta[n:], 0.0), gamma)

    @classmethod
    def zeros(cls, n: int, p: int) -> "ModelParams":
        return cls(np.zeros(n), np.zeros(n), np.zeros(p))

    def normalized(self) -> "ModelParams":
        """Shift (alpha + c, beta - c) so that beta_n = 0; the model is
        invariant under this shift."""
        c = self.beta[-1]
        return ModelParams(self.alpha + c, self.beta - c, self.gamma)


@dataclass(frozen=True)
class ModelBounds:
    rho_n: float
    m_lower: float
    M_upper: float = 0.25
    M1_upper: float = 0.25


def _check_compatible(params: ModelParams, covs: CovariateSet) -> None:
    if params.n != covs.n:
        raise DomainError(f"params have n={params.n}, covariates n={covs.n}")
    if params.p != covs.p:
        raise DomainError(f"params have p={params.p}, covariates p={covs.p}")


def linear_predictor(params: ModelParams, covs: CovariateSet) -> np.ndarray:
    """n x n matrix of eta_ij = Z_ij' gamma + alpha_i + beta_j (diagonal 0)."""
    _check_compatible(params, covs)
    eta = covs.z @ params.gamma + params.alpha[:, None] + params.beta[None, :]
    np.fill_diagonal(eta, 0.0)
    return eta


def edge_prob_matrix(params: ModelParams, covs: CovariateSet) -> np.ndarray:
    """All edge probabilities, with the diagonal set to 0."""
    p = sigmoid(linear_predictor(params, covs))
    np.fill_diagonal(p, 0.0)
    return p


def edge_prob(params: ModelParams, covs: CovariateSet, i: int, j: int) -> float:
    _check_compatible(params, covs)
    n = params.n
    if not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"node index out of range: ({i}, {j})")
    if i == j:
        raise DomainError("self-loop query: i == j")
    eta = covs.z[i, j] @ params.gamma + params.alpha[i] + params.beta[j]
    return float(sigmoid(np.array([eta]))[0])


def degree_sequences(g: DirectedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Out-degrees d (row sums) and in-degrees b (column sums)."""
    a = g.adjacency.astype(np.int64)
    return a.sum(axis=1), a.sum(axis=0)


def expected_degrees(params: ModelParams, covs: CovariateSet) -> tuple[np.ndarray, np.ndarray]:
    p = edge_prob_matrix(params, covs)
    return p.sum(axis=1), p.sum(axis=0)


def sample_graph(params: ModelParams, covs: CovariateSet, rng_seed) -> DirectedGraph:
    """Draw every a_ij independently from Bernoulli(p_ij).

    ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng_seed)
    p = edge_prob_matrix(params, covs)
    a = (rng.random(p.shape) < p).astype(np.int8)
    np.fill_diagonal(a, 0)
    return DirectedGraph(a)


def model_bounds(params: ModelParams, covs: CovariateSet) -> ModelBounds:
    """rho_n = max |eta_ij| over i != j, and the implied lower bound on
    p_ij (1 - p_ij)."""
    eta = linear_predictor(params, covs)
    mask = ~np.eye(params.n, dtype=bool)
    rho = float(np.abs(eta[mask]).max())
    # e^rho / (1 + e^rho)^2 written to stay finite for large rho
    m = float(np.exp(-rho) / (1.0 + np.exp(-rho)) ** 2)
    return ModelBounds(rho_n=rho, m_lower=m)
