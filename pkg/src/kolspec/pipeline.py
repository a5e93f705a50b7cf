"""End to end estimator: samples in, spectral calculus out.

`KolmogorovModel` chains the stages (bandwidths, tuned density, tuned
operator kernel, eigendecomposition) behind one `fit`, after which the
operator can be inverted against right hand sides and solution gradients
reconstructed, all on the fitted sample cloud.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator

from .density import (
    auto_tree_count,
    bandwidth_function,
    estimate_density,
)
from .exceptions import ParameterError
from .gradient import (
    MAX_TENSOR_ENTRIES,
    build_triple_tensor,
    spectral_gradient,
)
from .neighbors import build_tree_sequence
from .operator import assemble_operator
from .solver import SpectralSolution, solve_kolmogorov
from .spectra import leading_eigs, project
from .tuning import tune_bandwidth
from .validation import check_points, check_scalar, check_vector


def auto_mode_count(n):
    """Default retained mode count, ceil(3 log n)."""
    return int(math.ceil(3.0 * math.log(n)))


class KolmogorovModel(BaseEstimator):
    """Operator approximation, spectral solver and gradient field in one.

    Parameters
    ----------
    c : float
        Drift coefficient of the target operator.
    beta : float
        Bandwidth exponent of the operator kernel.
    n_modes : int or "auto"
        Retained non-constant eigenpairs; "auto" keeps ceil(3 log n).
    knn : int
        Neighbor count for the bandwidth function.
    eps_density, eps_operator : float or "auto"
        Kernel scales; "auto" tunes each kernel family separately.
    dim : float or "auto"
        Intrinsic dimension; "auto" rounds the density tuning estimate.
    delta_tol : float
        Kernel truncation threshold.
    tree_count : int or "auto"
        Suffix tree count for assembly.
    xi_range : tuple
        Tuning search range for the exponent of eps^2.
    tuning_delta : float
        Discrete derivative step in tuning.
    eig_tol : float
        Residual tolerance of the eigensolver.
    seed : int
        Seeds the eigensolver start vector.
    workers : int
        Thread cap for tree queries; never changes results.
    """

    def __init__(self, c=1.0, beta=-0.25, n_modes="auto", knn=25,
                 eps_density="auto", eps_operator="auto", dim="auto",
                 delta_tol=1e-2, operator_delta_tol=None, tree_count="auto",
                 xi_range=(-40.0, 40.0), tuning_delta=1.0, eig_tol=1e-8,
                 seed=0, workers=1, max_tensor_entries=MAX_TENSOR_ENTRIES):
        self.c = c
        self.beta = beta
        self.n_modes = n_modes
        self.knn = knn
        self.eps_density = eps_density
        self.eps_operator = eps_operator
        self.dim = dim
        self.delta_tol = delta_tol
        self.operator_delta_tol = operator_delta_tol
        self.tree_count = tree_count
        self.xi_range = xi_range
        self.tuning_delta = tuning_delta
        self.eig_tol = eig_tol
        self.seed = seed
        self.workers = workers
        self.max_tensor_entries = max_tensor_entries

    def fit(self, X, y=None):
        X = check_points(X, "X")
        n = X.shape[0]
        t = auto_tree_count(n) if self.tree_count == "auto" else self.tree_count
        seq = build_tree_sequence(X, t)
        b = bandwidth_function(X, seq, self.knn)

        self.tuning_density_ = None
        if self.eps_density == "auto" or self.dim == "auto":
            self.tuning_density_ = tune_bandwidth(
                X, seq, b, xi_range=self.xi_range, delta=self.tuning_delta,
                delta_tol=self.delta_tol, workers=self.workers)
        eps_d = self.tuning_density_.eps_star if self.eps_density == "auto" \
            else check_scalar(self.eps_density, "eps_density", positive=True)
        if self.dim == "auto":
            dim = max(1, round(self.tuning_density_.dim_estimate))
        else:
            dim = check_scalar(self.dim, "dim", positive=True)
        density = estimate_density(X, seq, b, eps_d, dim, self.delta_tol,
                                   self.workers)

        rho_op = 2.0 * density.values ** self.beta
        op_delta = self.delta_tol if self.operator_delta_tol is None \
            else self.operator_delta_tol
        self.tuning_operator_ = None
        if self.eps_operator == "auto":
            self.tuning_operator_ = tune_bandwidth(
                X, seq, rho_op, xi_range=self.xi_range,
                delta=self.tuning_delta, delta_tol=op_delta,
                workers=self.workers)
            eps_o = self.tuning_operator_.eps_star
        else:
            eps_o = check_scalar(self.eps_operator, "eps_operator",
                                 positive=True)
        operator = assemble_operator(X, seq, density, eps_o, c=self.c,
                                     beta=self.beta, delta_tol=op_delta,
                                     dim=dim, workers=self.workers)

        ell = auto_mode_count(n) if self.n_modes == "auto" else int(self.n_modes)
        self.basis_ = leading_eigs(operator, ell, tol=self.eig_tol,
                                   seed=self.seed)

        self.points_ = X
        self.tree_sequence_ = seq
        self.bandwidths_ = b
        self.density_ = density
        self.operator_ = operator
        self.eps_density_ = float(eps_d)
        self.eps_operator_ = float(eps_o)
        self.dim_ = float(dim)
        self.ell_ = ell
        self.eigenvalues_ = self.basis_.eigenvalues
        self.eigenfunctions_ = self.basis_.vectors
        self._tensor = None
        return self

    def solve(self, g):
        """Spectral solution of L f = g on the fitted cloud."""
        self._require_fit()
        return solve_kolmogorov(self.basis_, g)

    def triple_tensor(self):
        """Cached triple product tensor of the fitted basis."""
        self._require_fit()
        if self._tensor is None:
            self._tensor = build_triple_tensor(self.basis_,
                                               self.max_tensor_entries)
        return self._tensor

    def gradient_field(self, u):
        """Per-sample Euclidean gradient of a function on the cloud.

        `u` may be a SpectralSolution, a coefficient vector over the
        retained modes, or sample values (projected onto the basis).
        """
        self._require_fit()
        width = self.basis_.ell + 1
        if isinstance(u, SpectralSolution):
            coeffs = np.concatenate(([0.0], u.coeffs))
            coeffs = check_vector(coeffs, width, "u")
        else:
            u = np.asarray(u, dtype=np.float64).ravel()
            if u.shape[0] == width:
                coeffs = u
            elif u.shape[0] == self.basis_.n:
                coeffs = project(self.basis_, u)
            else:
                raise ParameterError(
                    f"u must hold {width} coefficients or "
                    f"{self.basis_.n} sample values, got {u.shape[0]}")
        return spectral_gradient(self.basis_, self.triple_tensor(), coeffs,
                                 self.points_)

    def _require_fit(self):
        if not hasattr(self, "basis_"):
            raise ParameterError("model is not fitted")
