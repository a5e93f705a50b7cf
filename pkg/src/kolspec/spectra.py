"""Leading eigenpairs of the symmetric conjugate operator.

The symmetric form Lhat is handed to ARPACK's implicitly restarted
Lanczos iteration, asking for the algebraically largest eigenvalues: the
spectrum is nonpositive with a single null mode, so these are the slow
modes of the generator.  Eigenvectors phi_hat of Lhat are scaled to
squared norm n, given a deterministic sign (first nonzero component
positive), and pulled back to eigenfunctions phi = S^-1 phi_hat of the
generator itself.  The phi are orthonormal in the weighted inner product

    <f, g>_S = f . S^2 g / n

which discretizes the L^2(psi^c) pairing underlying the construction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .exceptions import EigenSolverError, ParameterError
from .operator import symmetric_matrix
from .validation import check_vector


@dataclass
class EigenBasis:
    """Sorted eigenpairs and the weights tying them to the sample cloud."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    S: np.ndarray

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def ell(self):
        """Number of non-constant modes retained."""
        return self.eigenvalues.shape[0] - 1

    @property
    def hat_vectors(self):
        """Eigenvectors of the symmetric form, squared norm n per column."""
        return self.vectors * self.S[:, None]


def leading_eigs(op, ell, tol=1e-8, seed=0, maxiter=None):
    """Compute the ell+1 leading eigenpairs of the operator.

    Parameters
    ----------
    op : KolmogorovOperator
    ell : int
        Non-constant modes to retain; ell+2 must not exceed n.
    tol : float
        Relative residual tolerance of the Lanczos iteration.
    seed : int
        Seeds the deterministic start vector.
    maxiter : int, optional
        Restart budget, default 30 * (ell + 1).

    Raises
    ------
    EigenSolverError
        If the iteration does not converge within the budget; the
        message reports how many pairs did converge.
    """
    n = op.n
    if not isinstance(ell, (int, np.integer)) or isinstance(ell, bool):
        raise ParameterError(f"ell must be an integer, got {ell!r}")
    ell = int(ell)
    if not 1 <= ell <= n - 2:
        raise ParameterError(f"ell must be in [1, {n - 2}], got {ell}")
    k = ell + 1
    if maxiter is None:
        maxiter = 30 * k
    mat = symmetric_matrix(op)
    v0 = np.random.default_rng(seed).standard_normal(n)
    ncv = min(n, max(2 * k + 1, 40))
    try:
        lam, vec = eigsh(mat, k=k, which="LA", tol=tol, v0=v0, ncv=ncv,
                         maxiter=maxiter)
    except ArpackNoConvergence as exc:
        got = 0 if exc.eigenvalues is None else len(exc.eigenvalues)
        raise EigenSolverError(
            f"Lanczos iteration converged only {got} of {k} pairs within "
            f"{maxiter} restarts at tol={tol}") from exc

    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    hat = vec[:, order] * np.sqrt(n)
    for j in range(k):
        col = hat[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0.0:
            hat[:, j] = -col
    return EigenBasis(eigenvalues=lam, vectors=hat / op.S[:, None],
                      S=op.S.copy())


def truncate_basis(basis, ell):
    """Restrict a basis to its first ell non-constant modes."""
    if not 1 <= ell <= basis.ell:
        raise ParameterError(f"ell must be in [1, {basis.ell}], got {ell}")
    return EigenBasis(eigenvalues=basis.eigenvalues[:ell + 1],
                      vectors=basis.vectors[:, :ell + 1],
                      S=basis.S)


def s_inner(S, f, g):
    """Weighted inner product f . S^2 g / n."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    return float(f @ (S * S * g)) / S.shape[0]


def s_norm(S, f):
    """Norm induced by the weighted inner product."""
    return np.sqrt(max(s_inner(S, f, f), 0.0))


def project(basis, g):
    """Coefficients <phi_j, g>_S for all retained modes, j = 0 first."""
    g = check_vector(g, basis.n, "g")
    return (basis.vectors.T @ (basis.S * basis.S * g)) / basis.n


def reconstruct(basis, coeffs):
    """Sample values of the expansion sum_j coeffs_j phi_j."""
    coeffs = check_vector(coeffs, basis.ell + 1, "coeffs")
    return basis.vectors @ coeffs
