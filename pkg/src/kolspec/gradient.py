"""Gradient reconstruction through the carre du champ identity.

For the generator L of a reversible diffusion, the product rule

    L(u v) = u L v + v L u + 2 grad(u) . grad(v)

isolates the pointwise inner product of gradients.  Expanding products
of eigenfunctions back into the eigenbasis turns this into a purely
spectral formula: with the triple products C[l, j, k] = <phi_l, phi_j
phi_k>_S,

    grad(phi_j) . grad(phi_k) = sum_l C[l, j, k] / 2
                                (lambda_l - lambda_j - lambda_k) phi_l

and directional derivatives follow by expanding the coordinate functions
x -> x_s in the same basis.
"""

import numpy as np

from .exceptions import ParameterError
from .operator import apply_l
from .spectra import project
from .validation import check_points, check_vector

# Cap on (ell+1)^3 tensor entries, about 2.6 GB of doubles if exceeded.
MAX_TENSOR_ENTRIES = 40_000_000


def carre_du_champ(op, u, v):
    """Pointwise grad(u) . grad(v) from the generator's product rule."""
    u = check_vector(u, op.n, "u")
    v = check_vector(v, op.n, "v")
    return 0.5 * (apply_l(op, u * v) - u * apply_l(op, v)
                  - v * apply_l(op, u))


def build_triple_tensor(basis, max_entries=MAX_TENSOR_ENTRIES):
    """Triple product tensor C[l, j, k] = <phi_l, phi_j phi_k>_S.

    Symmetric in (j, k).  Memory grows as (ell+1)^3; the guard refuses
    budgets past `max_entries` entries.
    """
    width = basis.ell + 1
    if width ** 3 > max_entries:
        raise ParameterError(
            f"triple tensor would hold {width ** 3} entries, cap is "
            f"{max_entries}; reduce ell or raise the cap")
    phi = basis.vectors
    weighted = phi * (basis.S * basis.S)[:, None] / basis.n
    tensor = np.empty((width, width, width))
    for k in range(width):
        tensor[:, :, k] = weighted.T @ (phi * phi[:, k][:, None])
    return tensor


def gradient_inner(basis, tensor, j, k):
    """Sample values of grad(phi_j) . grad(phi_k) from the tensor."""
    lam = basis.eigenvalues
    coeff = 0.5 * tensor[:, j, k] * (lam - lam[j] - lam[k])
    return basis.vectors @ coeff


def spectral_gradient(basis, tensor, u_coeffs, points):
    """Euclidean gradient field of u = sum_j u_coeffs_j phi_j.

    Expands each coordinate function in the basis and contracts with the
    triple product tensor, so the result lives entirely in the retained
    span.  Returns an (n, m) array of per-sample gradients.
    """
    width = basis.ell + 1
    u_coeffs = check_vector(u_coeffs, width, "u_coeffs")
    points = check_points(points, "points")
    if points.shape[0] != basis.n:
        raise ParameterError(
            f"points rows {points.shape[0]} do not match basis size {basis.n}")
    lam = basis.eigenvalues
    lam_u = lam * u_coeffs
    grads = np.empty((basis.n, points.shape[1]))
    for s in range(points.shape[1]):
        x_c = project(basis, points[:, s])
        # a_l = 1/2 sum_jk C[l,j,k] u_j x_k (lam_l - lam_j - lam_k)
        cu = tensor @ x_c
        a = 0.5 * (lam * (cu @ u_coeffs) - cu @ lam_u
                   - (tensor @ (lam * x_c)) @ u_coeffs)
        grads[:, s] = basis.vectors @ a
    return grads
