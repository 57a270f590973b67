"""Edge-private inference for the directed beta-model with covariates."""
from .dp_release import DiscreteLaplace, NoisyDegrees, PrivacyBudget, release_bidegree
from .graph_model import (
    CovariateSet,
    DirectedGraph,
    ModelParams,
    degree_sequences,
    edge_prob,
    expected_degrees,
    sample_graph,
)
from .inference import bias_term, gamma_inference, theta_se, z_statistics
from .moment_system import MomentSystem, approx_inverse_S, jacobian_V, schur_H
from .solver import FitResult, SolverConfig, fit

__version__ = "0.1.0"
