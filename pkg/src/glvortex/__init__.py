"""Magnetic Ginzburg-Landau vortices: profiles, linearized blocks, stability.

The package computes the radial n-vortex fields (f, a) at coupling lam,
assembles the angular-mode blocks L_m of the gauge-fixed linearization
(together with their factorizations and special vectors), and classifies
linear stability: the fundamental vortex is stable at every coupling,
higher-degree vortices are stable below critical coupling and unstable
above it.
"""

__version__ = "0.1.0"

from .grid import (
    RadialGrid,
    WeightedMatrix,
    build_grid,
    default_grid,
    radial_schrodinger_matrix,
    symmetrize_to_standard,
    weighted_inner_product,
)
from .profiles import (
    ProfileSolveConfig,
    VortexProfile,
    continue_in_lambda,
    initial_guess,
    lambda_derivative_check,
    profile_inequality_margin,
    radial_energy,
    solve_profile,
)
from .operators import (
    BlockOperator,
    SpecialVector,
    appendix_Z0_check,
    assemble_Fm,
    assemble_G0,
    assemble_Lm,
    assemble_M0_N0,
    assemble_hatLm,
    assemble_tildeFm_and_Mm,
    chi_mode,
    keysplit_residual,
    tildeW_mode,
    translation_mode,
    w_mode,
)
from .spectra import (
    EigenResult,
    ground_state_sign_check,
    rayleigh_quotient,
    smallest_eigenpairs,
    zero_threshold,
)
from .verdict import StabilityReport, choose_m_max, classify, sweep

__all__ = [
    "RadialGrid", "WeightedMatrix", "build_grid", "default_grid",
    "radial_schrodinger_matrix", "symmetrize_to_standard",
    "weighted_inner_product",
    "ProfileSolveConfig", "VortexProfile", "continue_in_lambda",
    "initial_guess", "lambda_derivative_check", "profile_inequality_margin",
    "radial_energy", "solve_profile",
    "BlockOperator", "SpecialVector", "appendix_Z0_check", "assemble_Fm",
    "assemble_G0", "assemble_Lm", "assemble_M0_N0", "assemble_hatLm",
    "assemble_tildeFm_and_Mm", "chi_mode", "keysplit_residual",
    "tildeW_mode", "translation_mode", "w_mode",
    "EigenResult", "ground_state_sign_check", "rayleigh_quotient",
    "smallest_eigenpairs", "zero_threshold",
    "StabilityReport", "choose_m_max", "classify", "sweep",
    "__version__",
]
