"""Discrete approximation of the weighted elliptic operator

    L f = laplacian(f) + c grad(f) . grad(psi) / psi

from samples of the density psi.  The construction follows the variable
bandwidth diffusion map recipe: a kernel with bandwidths rho = 2 psi^beta
is assembled, right-normalized by a power alpha of its sampled mass, and
combined into the non-symmetric generator

    L = eps^-2 P^-2 (D^-1 K - I)

with diagonal weights P = psi^beta and D the row sums of the normalized
kernel.  The exponent alpha is chosen from the target drift coefficient c
through c = 2 - 2 alpha + d beta + 2 beta.  Conjugating by S = P D^(1/2)
yields the symmetric form

    Lhat = eps^-2 (S^-1 K S^-1 - P^-2) = S L S^-1

whose eigenvectors phi_hat pull back to eigenfunctions phi = S^-1 phi_hat
of L, orthonormal in the discrete weighted inner product.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .exceptions import DegenerateInputError
from .kernels import assemble_tree_sweep, row_sums
from .validation import check_points, check_scalar


def alpha_from_c(c, beta, dim):
    """Normalization exponent realizing drift coefficient c.

    Inverts c = 2 - 2 alpha + d beta + 2 beta.
    """
    c = check_scalar(c, "c")
    beta = check_scalar(beta, "beta")
    dim = check_scalar(dim, "dim", positive=True)
    return 0.5 * (2.0 + dim * beta + 2.0 * beta - c)


@dataclass
class KolmogorovOperator:
    """Factored discrete operator.

    Holds the normalized sparse kernel and the diagonal weight vectors;
    the generator and its symmetric conjugate are applied through these
    factors rather than stored as formed matrices.
    """

    kernel: csr_matrix
    P: np.ndarray
    D: np.ndarray
    S: np.ndarray
    eps: float
    c: float
    alpha: float
    beta: float
    dim: float

    @property
    def n(self):
        return self.P.shape[0]


def assemble_operator(points, seq, density, eps, c=1.0, beta=-0.25,
                      delta_tol=1e-2, dim=None, workers=1):
    """Build the factored operator from sampled densities.

    Parameters
    ----------
    points : array, shape (n, m)
    seq : TreeSequence over the same cloud.
    density : DensityEstimate
        Supplies psi values and, unless overridden, the dimension.
    eps : float
        Kernel scale for the operator kernel (tuned separately from the
        density kernel).
    c : float
        Drift coefficient of the target operator.
    beta : float
        Bandwidth exponent; rho = 2 psi^beta.
    delta_tol : float
        Kernel truncation threshold.
    dim : float, optional
        Overrides the dimension carried by the density estimate.
    """
    points = check_points(points, "points")
    eps = check_scalar(eps, "eps", positive=True)
    c = check_scalar(c, "c")
    beta = check_scalar(beta, "beta")
    dim = density.dim if dim is None else check_scalar(dim, "dim", positive=True)
    psi = density.values

    rho = 2.0 * psi ** beta
    if not np.all(np.isfinite(rho)) or not np.all(rho > 0.0):
        raise DegenerateInputError("psi^beta overflowed; densities span too "
                                   "many orders of magnitude for this beta")
    kernel = assemble_tree_sweep(points, seq, rho, eps, delta_tol,
                                 workers=workers)

    # Sampled kernel mass q_{eps,beta} and the alpha right-normalization
    # K <- K / (q_i q_j)^alpha applied to the CSR entries in place.
    q = psi ** (-beta * dim) * row_sums(kernel)
    alpha = alpha_from_c(c, beta, dim)
    qa = q ** alpha
    if not np.all(np.isfinite(qa)) or not np.all(qa > 0.0):
        raise DegenerateInputError("alpha normalization overflowed: "
                                   "q^alpha left the double range")
    kernel = kernel.copy()
    rows = np.repeat(np.arange(kernel.shape[0]), np.diff(kernel.indptr))
    kernel.data = kernel.data / (qa[rows] * qa[kernel.indices])

    P = psi ** beta
    D = row_sums(kernel)
    S = P * np.sqrt(D)
    return KolmogorovOperator(kernel=kernel, P=P, D=D, S=S, eps=float(eps),
                              c=float(c), alpha=float(alpha),
                              beta=float(beta), dim=float(dim))


def apply_l(op, f):
    """Apply the generator L = eps^-2 P^-2 (D^-1 K - I) to sample values."""
    f = np.asarray(f, dtype=np.float64)
    out = (op.kernel @ f) / op.D - f
    out /= op.P * op.P
    out /= op.eps * op.eps
    return out


def apply_lhat(op, f):
    """Apply the symmetric conjugate Lhat = eps^-2 (S^-1 K S^-1 - P^-2)."""
    f = np.asarray(f, dtype=np.float64)
    out = (op.kernel @ (f / op.S)) / op.S - f / (op.P * op.P)
    out /= op.eps * op.eps
    return out


def symmetric_matrix(op):
    """Materialize Lhat as a sparse CSR matrix.

    Scales the kernel entries by (S_i S_j)^-1 and subtracts the diagonal
    P^-2, all times eps^-2.  Used to hand the operator to sparse
    eigensolvers.
    """
    mat = op.kernel.copy()
    rows = np.repeat(np.arange(mat.shape[0]), np.diff(mat.indptr))
    inv_eps2 = 1.0 / (op.eps * op.eps)
    mat.data = inv_eps2 * mat.data / (op.S[rows] * op.S[mat.indices])
    diag = mat.diagonal() - inv_eps2 / (op.P * op.P)
    mat.setdiag(diag)
    return csr_matrix(mat)
