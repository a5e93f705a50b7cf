"""Spectral approximation of Kolmogorov operators from point clouds.

Builds variable bandwidth kernel matrices (with a tree accelerated
assembly), tunes their scales, estimates densities and intrinsic
dimension, approximates the weighted elliptic operator

    L f = laplacian(f) + c grad(f) . grad(psi) / psi,

computes its leading spectrum, solves L f = g spectrally, reconstructs
gradients through the carre du champ identity, and evolves weighted
particle systems with the resulting effective velocities.
"""

__version__ = "0.1.0"

from .density import (
    DensityEstimate,
    VariableBandwidthKDE,
    bandwidth_function,
    estimate_density,
    evaluate_density,
)
from .dynamics import (
    EvolutionConfig,
    EvolutionState,
    effective_velocity,
    run_evolution,
    step_euler_maruyama,
)
from .exceptions import (
    DegenerateInputError,
    EigenSolverError,
    IllConditionedError,
    KolspecError,
    ParameterError,
    StructuralError,
    TuningError,
)
from .gradient import (
    build_triple_tensor,
    carre_du_champ,
    spectral_gradient,
)
from .kernels import (
    assemble_brute_force,
    assemble_tree_sweep,
    row_sums,
    save_matrix_market,
)
from .neighbors import (
    TreeSequence,
    build_tree_sequence,
    k_nearest,
    radius_query_suffix,
)
from .operator import (
    KolmogorovOperator,
    alpha_from_c,
    apply_l,
    apply_lhat,
    assemble_operator,
)
from .pipeline import KolmogorovModel
from .sampling import (
    make_samples,
    sample_gaussian,
    sample_sphere_uniform,
    sample_vmf,
)
from .solver import SpectralSolution, residual_norm, solve_kolmogorov
from .spectra import (
    EigenBasis,
    leading_eigs,
    project,
    reconstruct,
    s_inner,
    truncate_basis,
)
from .tuning import TuningResult, chi, tune_bandwidth

__all__ = [
    "DensityEstimate",
    "VariableBandwidthKDE",
    "bandwidth_function",
    "estimate_density",
    "evaluate_density",
    "EvolutionConfig",
    "EvolutionState",
    "effective_velocity",
    "run_evolution",
    "step_euler_maruyama",
    "DegenerateInputError",
    "EigenSolverError",
    "IllConditionedError",
    "KolspecError",
    "ParameterError",
    "StructuralError",
    "TuningError",
    "build_triple_tensor",
    "carre_du_champ",
    "spectral_gradient",
    "assemble_brute_force",
    "assemble_tree_sweep",
    "row_sums",
    "save_matrix_market",
    "TreeSequence",
    "build_tree_sequence",
    "k_nearest",
    "radius_query_suffix",
    "KolmogorovOperator",
    "alpha_from_c",
    "apply_l",
    "apply_lhat",
    "assemble_operator",
    "KolmogorovModel",
    "make_samples",
    "sample_gaussian",
    "sample_sphere_uniform",
    "sample_vmf",
    "SpectralSolution",
    "residual_norm",
    "solve_kolmogorov",
    "EigenBasis",
    "leading_eigs",
    "project",
    "reconstruct",
    "s_inner",
    "truncate_basis",
    "TuningResult",
    "chi",
    "tune_bandwidth",
]
