"""
Chemotaxis Lab - numerical laboratory for the regularized two-dimensional
Keller-Segel model: particle and finite-volume solvers plus runtime checks of
the model's a priori estimates.
"""

__version__ = "1.0.0"

from .errors import (
    BoundViolationError,
    CFLViolationError,
    ConfigError,
    DiagnosticFailure,
    DomainError,
    HypothesisViolationError,
    LabError,
    MassCaptureError,
    NegativeDensityError,
    SolverError,
)
from .kernels import KernelParams, eval_K, eval_K_eps, kernel_gap
from .measures import GridDensity, WeightedEnsemble
from .initial_data import InitialMeasure, mollified_density, project_to_grid, sample_mollified
from .diagnostics import DiagnosticSeries, InequalityReport, barycentric_delta, g_eps_triple
from .particle_solver import ParticleConfig, ParticleSolver, em_step
from .grid_solver import GridConfig, GridSolver, fv_step
from .config import RunConfig, load_config, parse_config
from .laboratory import Laboratory

__all__ = [
    "BoundViolationError",
    "CFLViolationError",
    "ConfigError",
    "DiagnosticFailure",
    "DomainError",
    "HypothesisViolationError",
    "LabError",
    "MassCaptureError",
    "NegativeDensityError",
    "SolverError",
    "KernelParams",
    "eval_K",
    "eval_K_eps",
    "kernel_gap",
    "GridDensity",
    "WeightedEnsemble",
    "InitialMeasure",
    "mollified_density",
    "project_to_grid",
    "sample_mollified",
    "DiagnosticSeries",
    "InequalityReport",
    "barycentric_delta",
    "g_eps_triple",
    "ParticleConfig",
    "ParticleSolver",
    "em_step",
    "GridConfig",
    "GridSolver",
    "fv_step",
    "RunConfig",
    "load_config",
    "parse_config",
    "Laboratory",
]
