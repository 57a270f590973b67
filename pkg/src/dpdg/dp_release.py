"""Discrete Laplace noise and the edge-private release of a bi-degree sequence."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .graph_model import DirectedGraph, degree_sequences

#: L1 change of (d, b) when one directed edge is added or removed.
SENSITIVITY = 2

ALPHA_FORMULAS = ("consistent", "inverse")


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteLaplace:
    """Two-sided geometric law, P(X = x) = (1 - a)/(1 + a) * a**|x|."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def variance(self) -> float:
        a = self.alpha
        return 2.0 * a / (1.0 - a) ** 2

    @property
    def subexp_param(self) -> float:
        """Sub-exponential parameter 2 / log(1/alpha)."""
        return 2.0 / math.log(1.0 / self.alpha)

    def pmf(self, x):
        a = self.alpha
        x = np.abs(np.asarray(x))
        return (1.0 - a) / (1.0 + a) * a ** x

    def tail(self, t):
        """P(|X| > t) for integer t >= 0."""
        a = self.alpha
        t = np.asarray(t)
        return 2.0 * a ** (t + 1) / (1.0 + a)

    def sample(self, rng, size=None):
        """Exact draws as the difference of two Geometric(1 - alpha) counts."""
        rng = np.random.default_rng(rng)
        p = 1.0 - self.alpha
        return rng.geometric(p, size=size) - rng.geometric(p, size=size)


def dlap_pmf(dist: DiscreteLaplace, x):
    return dist.pmf(x)


def dlap_sample(dist: DiscreteLaplace, rng, size=None):
    return dist.sample(rng, size)


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy level ``epsilon`` of the released bi-degree sequence.

    ``alpha_formula="consistent"`` uses alpha_n = exp(-epsilon/2), the value
    for which the discrete Laplace mechanism with sensitivity 2 is
    epsilon-private. ``"inverse"`` uses exp(-2/epsilon) instead.
    ``epsilon = inf`` means no noise at all.
    """

    epsilon: float
    alpha_formula: str = "consistent"

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.alpha_formula not in ALPHA_FORMULAS:
            raise ParameterError(f"alpha_formula must be one of {ALPHA_FORMULAS}")

    @property
    def sensitivity(self) -> int:
        return SENSITIVITY

    @property
    def is_noiseless(self) -> bool:
        return math.isinf(self.epsilon)

    @property
    def alpha_n(self) -> float:
        if self.is_noiseless:
            return 0.0
        if self.alpha_formula == "inverse":
            return math.exp(-2.0 / self.epsilon)
        return math.exp(-self.epsilon / SENSITIVITY)

    @property
    def kappa_n(self) -> float:
        """Sub-exponential parameter of one noise draw, 2 / log(1/alpha_n)."""
        if self.is_noiseless:
            return 0.0
        return 2.0 / math.log(1.0 / self.alpha_n)

    @property
    def noise_variance(self) -> float:
        a = self.alpha_n
        return 2.0 * a / (1.0 - a) ** 2

    def s_n_sq(self, n: int) -> float:
        """Variance of sum_i e_i^+ - sum_{i<n} e_i^-, i.e. (2n - 1) noise draws."""
        return (2 * n - 1) * self.noise_variance

    def distribution(self) -> DiscreteLaplace:
        if self.is_noiseless:
            raise ParameterError("no noise distribution for epsilon = inf")
        return DiscreteLaplace(self.alpha_n)


@dataclass(frozen=True)
class NoisyDegrees:
    d_tilde: np.ndarray
    b_tilde: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d_tilde)
        b = np.asarray(self.b_tilde)
        if d.shape != b.shape or d.ndim != 1:
            raise ParameterError("d_tilde and b_tilde must be 1-d of equal length")
        if not (np.all(d == np.round(d)) and np.all(b == np.round(b))):
            raise ParameterError("released degrees must be integers")
        d = d.astype(np.int64)
        b = b.astype(np.int64)
        d.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "d_tilde", d)
        object.__setattr__(self, "b_tilde", b)

    @property
    def n(self) -> int:
        return self.d_tilde.size

    @classmethod
    def exact(cls, g: DirectedGraph) -> "NoisyDegrees":
        d, b = degree_sequences(g)
        return cls(d, b)

    def to_json(self, epsilon=None, seed=None, **extra) -> str:
        doc = {
            "epsilon": None if epsilon is None or math.isinf(epsilon) else epsilon,
            "d_tilde": [int(x) for x in self.d_tilde],
            "b_tilde": [int(x) for x in self.b_tilde],
            "seed": seed,
        }
        doc.update(extra)
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NoisyDegrees":
        doc = json.loads(text)
        return cls(np.array(doc["d_tilde"]), np.array(doc["b_tilde"]))


def release_bidegree(g: DirectedGraph, budget: PrivacyBudget, rng_seed) -> NoisyDegrees:
    """Add i.i.d. discrete Laplace noise to every out- and in-degree.

    All 2n draws are made, including the one for b_n. The first n draws
    perturb d, the next n perturb b.
    """
    d, b = degree_sequences(g)
    if budget.is_noiseless:
        return NoisyDegrees(d, b)
    rng = np.random.default_rng(rng_seed)
    e = budget.distribution().sample(rng, size=2 * g.n)
    return NoisyDegrees(d + e[: g.n], b + e[g.n :])
