"""Sparse symmetric assembly of variable bandwidth Gaussian kernel matrices.

The matrix entries are

    K(i, j) = exp(-|x_i - x_j|^2 / (eps^2 rho_i rho_j))

kept whenever the value exceeds a truncation threshold delta_tol, with the
diagonal always present.  Two assembly routines are provided, a blocked
brute force scan and a tree accelerated row sweep, and they must agree
bit for bit: both evaluate every surviving entry through the same helpers
(`kernel_block` / `kernel_pairs`) with the same per-pair operation order,
and both canonicalize through the same CSR builder.
"""

import math

import numpy as np
from scipy.io import mmwrite
from scipy.sparse import csr_matrix
from scipy.spatial import cKDTree

from .exceptions import StructuralError
from .neighbors import (
    _RADIUS_SLACK,
    pair_sq_dists,
    pairwise_sq_dists,
)
from .validation import (
    check_delta_tol,
    check_points,
    check_scalar,
    check_vector,
)

# Rows per brute force block, sized so one block of the dense pairwise
# slab stays around 32 MB.
_BLOCK_DOUBLES = 4_000_000


def exponent_clip(delta_tol):
    """Exponent cap that leaves every entry above delta_tol untouched.

    Capping the kernel exponent at -log(delta_tol) + 1 only affects
    entries strictly below the truncation threshold, which are discarded
    anyway, and keeps the exp argument out of the subnormal output range
    where libm falls off its fast path.  Returns None when delta_tol is
    zero and nothing may be clipped.
    """
    if delta_tol == 0.0:
        return None
    return 1.0 - math.log(delta_tol)


def kernel_block(points, rho, eps, rows, cols, clip=None):
    """Dense block of kernel values for row and column index arrays."""
    q = pairwise_sq_dists(points, rows, cols)
    q /= (eps * eps) * np.multiply.outer(rho[rows], rho[cols])
    if clip is not None:
        np.minimum(q, clip, out=q)
    np.negative(q, out=q)
    return np.exp(q, out=q)


def kernel_pairs(points, rho, eps, ii, jj, clip=None):
    """Kernel values for parallel pair index arrays.

    Bit-identical per pair to :func:`kernel_block`.
    """
    q = pair_sq_dists(points, ii, jj)
    q /= (eps * eps) * (rho[ii] * rho[jj])
    if clip is not None:
        np.minimum(q, clip, out=q)
    np.negative(q, out=q)
    return np.exp(q, out=q)


def truncation_radius_sq(eps, rho_max, delta_tol):
    """Squared radius outside which every kernel entry falls below delta_tol.

    Solves exp(-r^2 / (eps^2 rho_max^2)) = delta_tol for r^2.
    """
    if delta_tol == 0.0:
        return math.inf
    return -(eps * eps * rho_max * rho_max) * math.log(delta_tol)


def _csr_from_triplets(n, rows, cols, vals):
    """Canonical CSR from duplicate-free triplets: row-major, sorted columns."""
    order = np.lexsort((cols, rows))
    rows = rows[order]
    cols = cols[order]
    vals = vals[order]
    counts = np.bincount(rows, minlength=n)
    indptr = np.concatenate(([0], np.cumsum(counts)))
    mat = csr_matrix((vals, cols.astype(np.int64), indptr.astype(np.int64)),
                     shape=(n, n))
    mat.has_sorted_indices = True
    return mat


def _mirror_upper(rows_u, cols_u, vals_u):
    """Append the transposed strict upper triangle to upper triplets."""
    strict = cols_u > rows_u
    rows = np.concatenate([rows_u, cols_u[strict]])
    cols = np.concatenate([cols_u, rows_u[strict]])
    vals = np.concatenate([vals_u, vals_u[strict]])
    return rows, cols, vals


def _check_assembly_args(points, rho, eps, delta_tol):
    points = check_points(points, "points")
    n = points.shape[0]
    rho = check_vector(rho, n, "rho", positive=True)
    eps = check_scalar(eps, "eps", positive=True)
    delta_tol = check_delta_tol(delta_tol)
    return points, rho, eps, delta_tol


def assemble_brute_force(points, rho, eps, delta_tol):
    """Assemble the truncated kernel matrix by a blocked all-pairs scan."""
    points, rho, eps, delta_tol = _check_assembly_args(points, rho, eps, delta_tol)
    n = points.shape[0]
    all_cols = np.arange(n, dtype=np.intp)
    clip = exponent_clip(delta_tol)
    block = max(1, min(n, _BLOCK_DOUBLES // n))
    row_parts, col_parts, val_parts = [], [], []
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n), dtype=np.intp)
        vals = kernel_block(points, rho, eps, rows, all_cols, clip=clip)
        keep_r, keep_c = np.nonzero(vals > delta_tol)
        row_parts.append(rows[keep_r])
        col_parts.append(keep_c.astype(np.intp))
        val_parts.append(vals[keep_r, keep_c])
    return _csr_from_triplets(
        n,
        np.concatenate(row_parts),
        np.concatenate(col_parts),
        np.concatenate(val_parts),
    )


def _sweep_row_blocks(seq):
    """Yield (tree index, row range) pairs covered by each suffix tree."""
    n, lag, t = seq.n, seq.lag, seq.tree_count
    for r in range(t + 1):
        lo = r * lag
        hi = (r + 1) * lag if r < t else n
        yield r, lo, hi


def assemble_tree_sweep(points, seq, rho, eps, delta_tol, workers=1):
    """Assemble the truncated kernel matrix with suffix tree range queries.

    Sweeps rows in order, queries only pairs (i, j) with j >= i from the
    shortest suffix tree covering row i, and mirrors the strict upper
    triangle.  The truncation radius uses the largest bandwidth, so every
    entry above delta_tol is guaranteed to be among the candidates; the
    final strict threshold is applied to exactly evaluated kernel values.
    `workers` is accepted for interface compatibility; the candidate
    search already runs in compiled code and is single threaded.
    """
    points, rho, eps, delta_tol = _check_assembly_args(points, rho, eps, delta_tol)
    n = points.shape[0]
    if seq.n != n or seq.m != points.shape[1]:
        raise StructuralError(
            f"tree sequence covers ({seq.n}, {seq.m}) points, cloud is {points.shape}")
    if seq.points is not points and not np.array_equal(seq.points, points):
        raise StructuralError("tree sequence was built over a different cloud")

    r2 = truncation_radius_sq(eps, rho.max(), delta_tol)
    radius = math.sqrt(r2) * (1.0 + _RADIUS_SLACK)
    clip = exponent_clip(delta_tol)
    ii_parts, jj_parts, val_parts = [], [], []
    for r, lo, hi in _sweep_row_blocks(seq):
        offset = seq.offsets[r]
        # Chunk the rows so the candidate record array stays bounded even
        # when the radius saturates the suffix; evaluate and threshold each
        # chunk right away so only surviving entries are ever accumulated.
        chunk = max(1, _BLOCK_DOUBLES // max(1, n - offset))
        for start in range(lo, hi, chunk):
            stop = min(start + chunk, hi)
            block_tree = cKDTree(points[start:stop])
            hits = block_tree.sparse_distance_matrix(
                seq.trees[r], radius, output_type="ndarray")
            ii = hits["i"].astype(np.intp) + start
            jj = hits["j"].astype(np.intp) + offset
            del hits
            keep = jj >= ii
            ii = ii[keep]
            jj = jj[keep]
            vals = kernel_pairs(points, rho, eps, ii, jj, clip=clip)
            keep = vals > delta_tol
            ii_parts.append(ii[keep])
            jj_parts.append(jj[keep])
            val_parts.append(vals[keep])
    ii = np.concatenate(ii_parts)
    jj = np.concatenate(jj_parts)
    vals = np.concatenate(val_parts)
    rows, cols, vals = _mirror_upper(ii, jj, vals)
    return _csr_from_triplets(n, rows, cols, vals)


def row_sums(mat):
    """Row sums of a sparse matrix as a 1-D array.

    Computed as a matrix-vector product with ones so the accumulation
    order matches later applications of the same matrix.
    """
    return np.asarray(mat @ np.ones(mat.shape[1]))


def save_matrix_market(path, mat, comment=""):
    """Write a sparse matrix in Matrix Market coordinate format."""
    mmwrite(path, mat, comment=comment, field="real", precision=17)


def load_matrix_market(path):
    """Read a Matrix Market file back as CSR."""
    from scipy.io import mmread

    return csr_matrix(mmread(path))
