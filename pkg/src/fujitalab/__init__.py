"""Semilinear heat equations on radial model manifolds: kernels, ground states, solver and sweeps."""

from .comparison import (BLOWUP, GLOBAL, UNKNOWN, best_certificate, build_typeI_supersolution,
                         certified_theta, dominance_gap, ode_supersolution, phi_functional,
                         series_audit, threshold_typeI, threshold_typeII)
from .config import ConfigError, RunConfig
from .estimators import GroundStateSolver, HeatSemigroup, SemilinearHeatFlow
from .geometry import ManifoldModel
from .grid import RadialField, RadialGrid, discretize
from .heat_kernel import NumericalKernel, calibrate_bounds, h_n, log_rate, semigroup_apply
from .nonlinearity import PowerReaction, TypeOneSpec, TypeTwoSpec
from .solver import Controls, Trajectory, Verdict, ZeroReaction, detect_blowup, evolve
from .spectral import GroundState, bottom_of_spectrum, ode_residual, solve_ground_state

__version__ = "0.1.0"

__all__ = [
    "BLOWUP", "GLOBAL", "UNKNOWN", "ConfigError", "Controls", "GroundState", "GroundStateSolver",
    "HeatSemigroup", "ManifoldModel", "NumericalKernel", "PowerReaction", "RadialField", "RadialGrid",
    "RunConfig", "SemilinearHeatFlow", "Trajectory", "TypeOneSpec", "TypeTwoSpec", "Verdict",
    "ZeroReaction", "best_certificate", "bottom_of_spectrum", "build_typeI_supersolution",
    "calibrate_bounds", "certified_theta", "detect_blowup", "discretize", "dominance_gap", "evolve",
    "h_n", "log_rate", "ode_residual", "ode_supersolution", "phi_functional", "semigroup_apply",
    "series_audit", "solve_ground_state", "threshold_typeI", "threshold_typeII",
]
