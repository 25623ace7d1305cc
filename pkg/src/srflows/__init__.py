"""Numerical laboratory for sub-Riemannian geodesic flows.

Set ``SRFLOWS_NO_NUMBA=1`` before import to run the pure numpy/Python kernels.
"""
__version__ = "0.1.0"

from .errors import DomainError, NumericalError
from .models import ModelError, catalog_get, make_suspension_model, lie_poisson_model, model_from_descriptor
from .hamiltonian import sr_hamiltonian, hamilton_rhs, poisson_bracket, lie_poisson_rhs, reeb_momentum, riemannian_extension
from .integrate import IntegratorConfig, SectionSpec, flow, flow_with_tangent, poincare_crossings
from .analysis import (
    directional_entropy_profile,
    independence_rank,
    lyapunov_spectrum,
    reeb_verify,
    verify_first_integrals,
)
from .entropy import composition_entropy_table, spanning_entropy, toral_entropy
from .abnormal import ConstraintManifold

__all__ = [
    "DomainError",
    "NumericalError",
    "ModelError",
    "catalog_get",
    "make_suspension_model",
    "lie_poisson_model",
    "model_from_descriptor",
    "sr_hamiltonian",
    "hamilton_rhs",
    "poisson_bracket",
    "lie_poisson_rhs",
    "reeb_momentum",
    "riemannian_extension",
    "IntegratorConfig",
    "SectionSpec",
    "flow",
    "flow_with_tangent",
    "poincare_crossings",
    "directional_entropy_profile",
    "independence_rank",
    "lyapunov_spectrum",
    "reeb_verify",
    "verify_first_integrals",
    "composition_entropy_table",
    "spanning_entropy",
    "toral_entropy",
    "ConstraintManifold",
]
