"""Contraction certificates for index-1 time-varying DAEs."""

from .certify import (
    Certificate,
    DecayFit,
    certify_box_reduced,
    certify_contraction,
    coppel_envelope,
    fd_variational_oracle,
    fit_decay,
    gamma_lower_bound,
    riccati_residual,
    transition_matrix,
)
from .dae import DaeSystem, JacobianBundle, Trajectory, consistent_init, evaluate_jacobians, integrate, simulate
from .linalg import NormKind, SingularMatrix, matrix_measure
from .registry import EXAMPLE_IDS, get_example
from .variational import (
    CoefficientBundle,
    MetricTransform,
    aux_matrix,
    coefficient_matrices,
    generalized_jacobian,
    integrate_aux,
    integrate_variational,
    q_value,
    reduced_jacobian,
)

__version__ = "0.1.0"
