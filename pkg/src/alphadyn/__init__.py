"""Spectral analysis and nonlinear time evolution for spherically symmetric
mean-field alpha^2 dynamos.

Lengths are measured in units of the outer radius, times in units of the
diffusion time, and alpha amplitudes in units of its inverse velocity scale,
so every quantity handled here is dimensionless.
"""

__version__ = "0.1.0"

from .bessel import BesselOrder, bessel_j, bessel_zero, free_decay_eigenvalue
from .profiles import (
    AlphaProfile,
    alpha_deriv,
    alpha_eval,
    constant_profile,
    kinematic_profile,
    polynomial_profile,
    sup_norms,
    tabulated_profile,
)
from .operator import OperatorMatrix, RadialGrid, assemble
from .eigen import EigenPair, SpectrumResult, eigenvalues, match_branches
from .spectral import (
    CriterionReport,
    ExceptionalPoint,
    SpectralBranch,
    SweepResult,
    anti_dynamo_check,
    critical_C,
    find_exceptional_points,
    finiteness_norm_check,
    im_bound_check,
    leading_eigenvalues,
    sweep,
)

from .dynamics import (
    NoiseState,
    SimConfig,
    SimState,
    SimulationDivergedError,
    TimeSeries,
    boundary_residuals,
    energy_density,
    energy_profile,
    evolve,
    fit_exponential_mode,
    initial_state,
    load_checkpoint,
    make_noise,
    noise_step,
    quenched_alpha,
    save_checkpoint,
    stable_dt,
    step,
)
from .reversal import (
    AsymmetryReport,
    ReversalEvent,
    ReversalStack,
    align_and_average,
    asymmetry,
    detect_reversals,
    load_series,
    rescale_to_geo,
    sawtooth_series,
)
from .config import Config, ConfigError, load_config, parse_config

__all__ = [
    "BesselOrder",
    "bessel_j",
    "bessel_zero",
    "free_decay_eigenvalue",
    "AlphaProfile",
    "alpha_eval",
    "alpha_deriv",
    "constant_profile",
    "kinematic_profile",
    "polynomial_profile",
    "sup_norms",
    "tabulated_profile",
    "RadialGrid",
    "OperatorMatrix",
    "assemble",
    "EigenPair",
    "SpectrumResult",
    "eigenvalues",
    "match_branches",
    "CriterionReport",
    "SpectralBranch",
    "SweepResult",
    "ExceptionalPoint",
    "anti_dynamo_check",
    "im_bound_check",
    "finiteness_norm_check",
    "leading_eigenvalues",
    "sweep",
    "find_exceptional_points",
    "critical_C",
    "SimConfig",
    "SimState",
    "NoiseState",
    "TimeSeries",
    "SimulationDivergedError",
    "stable_dt",
    "make_noise",
    "noise_step",
    "initial_state",
    "step",
    "evolve",
    "energy_profile",
    "energy_density",
    "quenched_alpha",
    "boundary_residuals",
    "fit_exponential_mode",
    "save_checkpoint",
    "load_checkpoint",
    "ReversalEvent",
    "ReversalStack",
    "AsymmetryReport",
    "detect_reversals",
    "align_and_average",
    "asymmetry",
    "rescale_to_geo",
    "load_series",
    "sawtooth_series",
    "Config",
    "ConfigError",
    "parse_config",
    "load_config",
]
