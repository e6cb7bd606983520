"""Valuation of a gas-fired power plant under spiky, regime-switching prices.

The package solves the coupled Hamilton-Jacobi-Bellman partial
integro-differential equations for the plant's value over electricity
price, gas price and boiler temperature, with Levy-copula-dependent
price spikes, and ships independent simulation oracles for validation.
"""

from .config import ConfigError, PlotSlices, RunConfig, SimulateConfig, parse_config
from .copula import Comonotone, Independence, SkewedClayton, copula_value, joint_tail
from .market import (
    InverseGaussian,
    JumpSpec,
    ModelSpec,
    PointMass,
    RegimeParams,
    SeasonalityFn,
    TruncatedNormal,
)
from .oracle import PathConfig, evaluate_policy_mc, simulate_path
from .plant import PlantSpec, control_bounds, equilibrium_temp, output
from .solver import GridSpec, HJBSolver, NumericalError, SolveResult, solve

__all__ = [
    "ConfigError",
    "PlotSlices",
    "RunConfig",
    "SimulateConfig",
    "parse_config",
    "Comonotone",
    "Independence",
    "SkewedClayton",
    "copula_value",
    "joint_tail",
    "InverseGaussian",
    "JumpSpec",
    "ModelSpec",
    "PointMass",
    "RegimeParams",
    "SeasonalityFn",
    "TruncatedNormal",
    "PathConfig",
    "evaluate_policy_mc",
    "simulate_path",
    "PlantSpec",
    "control_bounds",
    "equilibrium_temp",
    "output",
    "GridSpec",
    "HJBSolver",
    "NumericalError",
    "SolveResult",
    "solve",
]

__version__ = "0.1.0"
