"""Entropy and W-functional diagnostics for transport flows on weighted flat tori."""

from .entropy import (
    EntropySeries,
    Potential,
    boltzmann_entropy,
    entropy_series,
    fisher_information,
    hamiltonian,
    kinetic,
    rhs_integrals,
)
from .errors import ConfigurationError, DomainError, NumericError
from .flows import (
    FlowState,
    FlowTrajectory,
    SolverConfig,
    run_euler_damped,
    run_finite_dim,
    run_geodesic,
    run_heat,
    run_langevin,
)
from .geometry import ScalarField, TorusGeometry, VectorField, build_geometry, cd_lower_bound
from .reference import ReferenceModel, model_closed_forms, solve_u_beta
from .scenario import Scenario, run_scenario
from .verify import CHECKS, IdentitySpec, InequalitySpec, VerificationReport, check_identity, check_inequality, run_suite

__version__ = "0.1.0"

__all__ = [
    "EntropySeries",
    "Potential",
    "boltzmann_entropy",
    "entropy_series",
    "fisher_information",
    "hamiltonian",
    "kinetic",
    "rhs_integrals",
    "ConfigurationError",
    "DomainError",
    "NumericError",
    "FlowState",
    "FlowTrajectory",
    "SolverConfig",
    "run_euler_damped",
    "run_finite_dim",
    "run_geodesic",
    "run_heat",
    "run_langevin",
    "ScalarField",
    "TorusGeometry",
    "VectorField",
    "build_geometry",
    "cd_lower_bound",
    "ReferenceModel",
    "model_closed_forms",
    "solve_u_beta",
    "Scenario",
    "run_scenario",
    "CHECKS",
    "IdentitySpec",
    "InequalitySpec",
    "VerificationReport",
    "check_identity",
    "check_inequality",
    "run_suite",
]
