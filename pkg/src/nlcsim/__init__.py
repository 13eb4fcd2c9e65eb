"""Pseudospectral 2D nematic liquid-crystal flow with jump noise.

Layers: ``spectral`` (torus fields and transforms), ``operators``
(bilinear forms, nonlinearity, energies), ``noise`` (marked Poisson
machinery, entropy cost, exponential tilts), ``dynamics`` (skeleton and
jump-SDE solvers), ``ldp`` (rate-function optimization, small-noise
Monte Carlo, importance sampling), ``config``/``cli``/``verify``
(experiment orchestration).
"""

from .spectral import (
    DivergenceFreeField,
    ScalarField,
    TorusGrid,
    VectorField,
    leray_project,
)
from .operators import EnergyReport, PolynomialNonlinearity, energy_psi
from .noise import Control, JumpCoefficientSpec, JumpSample, MarkSpace, cost_LT, entropy_l
from .dynamics import (
    SolverConfig,
    SpectralState,
    Trajectory,
    solve_skeleton,
    solve_small_noise_sde,
    solve_stochastic_convolution,
)
from .ldp import RateProblem, RateSolution, optimize_control, rate_objective
from .config import ExperimentConfig, parse_config

__version__ = "0.1.0"

__all__ = [
    "Control",
    "DivergenceFreeField",
    "EnergyReport",
    "ExperimentConfig",
    "JumpCoefficientSpec",
    "JumpSample",
    "MarkSpace",
    "PolynomialNonlinearity",
    "RateProblem",
    "RateSolution",
    "ScalarField",
    "SolverConfig",
    "SpectralState",
    "TorusGrid",
    "Trajectory",
    "VectorField",
    "cost_LT",
    "energy_psi",
    "entropy_l",
    "leray_project",
    "optimize_control",
    "parse_config",
    "rate_objective",
    "solve_skeleton",
    "solve_small_noise_sde",
    "solve_stochastic_convolution",
]
