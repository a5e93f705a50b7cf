"""Spectral solves of L f = g in the span of the leading eigenfunctions.

Expanding both sides in the computed basis diagonalizes the problem: the
minimizer of the weighted residual over the retained span is simply
f_tilde_j = g_tilde_j / lambda_j mode by mode, with the constant mode
excluded (the range of L is mean free, so g's projection onto it carries
no information about f).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import IllConditionedError, ParameterError
from .operator import apply_l
from .spectra import project, s_norm
from .validation import check_vector

# A retained eigenvalue whose magnitude falls below this fraction of the
# largest retained magnitude makes the diagonal solve meaningless.
MIN_EIG_RATIO = 1e-12


@dataclass
class SpectralSolution:
    """Solution values and the coefficient data behind them."""

    values: np.ndarray
    coeffs: np.ndarray
    g_coeffs: np.ndarray
    eigenvalues: np.ndarray

    @property
    def ell(self):
        return self.coeffs.shape[0]


def solve_kolmogorov(basis, g, min_eig_ratio=MIN_EIG_RATIO):
    """Invert the operator against g over the non-constant retained modes.

    Parameters
    ----------
    basis : EigenBasis
    g : array, shape (n,)
        Right hand side sampled on the cloud.
    min_eig_ratio : float
        Conditioning floor: every retained |lambda_j| must exceed this
        fraction of the largest retained magnitude.

    Raises
    ------
    IllConditionedError
        When a retained eigenvalue is numerically zero on the scale of
        the retained spectrum; reduce ell to drop the offending mode.
    """
    if basis.ell < 1:
        raise ParameterError("basis must retain at least one non-constant mode")
    g = check_vector(g, basis.n, "g")
    lam = basis.eigenvalues[1:]
    scale = float(np.max(np.abs(lam)))
    if scale == 0.0 or np.min(np.abs(lam)) < min_eig_ratio * scale:
        raise IllConditionedError(
            "retained spectrum contains a numerically zero eigenvalue; "
            "reduce ell")
    g_t = project(basis, g)[1:]
    f_t = g_t / lam
    values = basis.vectors[:, 1:] @ f_t
    return SpectralSolution(values=values, coeffs=f_t, g_coeffs=g_t,
                            eigenvalues=lam.copy())


def residual_norm(op, solution, g):
    """Weighted residual |L f - g|_S of a spectral solution."""
    g = np.asarray(g, dtype=np.float64)
    r = apply_l(op, solution.values) - g
    return s_norm(op.S, r)
