"""Kinetic chemotaxis with a noisy internal pathway and its fractional diffusion limit."""
from .coefficients import (
    CoefficientSet,
    ScalingContext,
    ValidationReport,
    compute_B0,
    compute_C_minus,
    compute_mu,
    compute_nu,
    eval_chi0,
    eval_D,
    eval_Lambda,
    eval_Q0,
    validate_parameters,
)
from .config import ExperimentConfig, load_config, parse_config, reference_config
from .errors import DomainError, FrackinError, InvalidInputError, QuadratureError, SolverAbort, StabilityError
from .fields import MacroField
from .fractional import FractionalProblem
from .kinetic import KineticState, PhaseGrid
from .particles import ParticleEnsemble

__version__ = "0.1.0"

__all__ = [
    "CoefficientSet", "ScalingContext", "ValidationReport", "validate_parameters",
    "compute_B0", "compute_C_minus", "compute_mu", "compute_nu",
    "eval_Q0", "eval_Lambda", "eval_D", "eval_chi0",
    "ExperimentConfig", "load_config", "parse_config", "reference_config",
    "FrackinError", "InvalidInputError", "DomainError", "QuadratureError", "SolverAbort", "StabilityError",
    "MacroField", "FractionalProblem", "KineticState", "PhaseGrid", "ParticleEnsemble",
]
