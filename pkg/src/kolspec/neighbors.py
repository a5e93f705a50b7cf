"""Spatial search structures for pairwise kernel assembly.

A :class:`TreeSequence` holds k-d trees over nested suffixes of the sample
array.  Tree r indexes the samples {r*L, ..., n-1} with lag L = n // t, so a
row sweep that only needs pairs (i, j) with j >= i can query the shortest
tree that still covers row i.  This trades t extra tree builds for queries
on suffixes that shrink as the sweep advances.

All exact squared distances are computed by the helpers at the bottom of
this module.  Kernel assembly reuses the same helpers so that tree based
and brute force code paths produce bit-identical matrices.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import ParameterError
from .validation import check_index, check_points, check_scalar

# Relative inflation applied to query radii before the exact strict
# re-filter, so floating point slack in the tree metric cannot drop a
# boundary neighbor.
_RADIUS_SLACK = 1e-12


@dataclass
class TreeSequence:
    """k-d trees over nested suffixes of a point cloud."""

    points: np.ndarray
    lag: int
    offsets: list = field(repr=False)
    trees: list = field(repr=False)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def m(self):
        return self.points.shape[1]

    @property
    def tree_count(self):
        """Number of trees past the first, i.e. the effective t."""
        return len(self.trees) - 1


def build_tree_sequence(points, tree_count=1):
    """Build the suffix tree sequence for a point cloud.

    Parameters
    ----------
    points : array-like, shape (n, m)
    tree_count : int
        Requested number of trees t with 1 <= t <= n.  The lag is
        L = n // t and trees cover the suffixes starting at 0, L, 2L, ...
        while the start lies inside the array, so the effective count is
        the largest r with r*L < n, plus one.
    """
    points = check_points(points, "points")
    n = points.shape[0]
    if not isinstance(tree_count, (int, np.integer)) or isinstance(tree_count, bool):
        raise ParameterError(f"tree_count must be an integer, got {tree_count!r}")
    tree_count = int(tree_count)
    if not 1 <= tree_count <= n:
        raise ParameterError(f"tree_count must be in [1, {n}], got {tree_count}")
    lag = n // tree_count
    r_max = (n - 1) // lag
    offsets = [r * lag for r in range(r_max + 1)]
    trees = [cKDTree(points[off:]) for off in offsets]
    return TreeSequence(points=points, lag=lag, offsets=offsets, trees=trees)


def suffix_tree_index(seq, i):
    """Index of the shortest tree whose suffix still contains row i."""
    i = check_index(i, seq.n, "i")
    return min(seq.tree_count, i // seq.lag)


def radius_query_suffix(seq, i, r2):
    """Neighbors j >= i of sample i with squared distance strictly below r2.

    Returns (indices, sq_dists) sorted by index; includes j = i itself
    whenever r2 > 0.  Squared distances are recomputed exactly, the tree
    only serves as a candidate filter.
    """
    i = check_index(i, seq.n, "i")
    r2 = check_scalar(r2, "r2", nonnegative=True)
    if r2 == 0.0:
        return np.empty(0, dtype=np.intp), np.empty(0)
    r = suffix_tree_index(seq, i)
    offset = seq.offsets[r]
    radius = np.sqrt(r2) * (1.0 + _RADIUS_SLACK)
    local = seq.trees[r].query_ball_point(seq.points[i], radius)
    cand = np.sort(np.asarray(local, dtype=np.intp)) + offset
    cand = cand[cand >= i]
    d2 = pair_sq_dists(seq.points, np.full(cand.shape[0], i, dtype=np.intp), cand)
    keep = d2 < r2
    return cand[keep], d2[keep]


def k_nearest(seq, x, k, exclude=None):
    """Exact k nearest samples to a query point, ties broken by index.

    Parameters
    ----------
    seq : TreeSequence
    x : array-like, shape (m,)
        Query location, not required to be a sample.
    k : int
        Number of neighbors to return.
    exclude : int or None
        Sample index to leave out, used for on-sample queries where the
        query point is itself a sample.

    Returns
    -------
    (indices, sq_dists) ordered by (distance, index).
    """
    n = seq.n
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != seq.m:
        raise ParameterError(f"query has dimension {x.shape[0]}, cloud has {seq.m}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("query point contains non-finite entries")
    if exclude is not None:
        exclude = check_index(exclude, n, "exclude")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ParameterError(f"k must be an integer, got {k!r}")
    k = int(k)
    limit = n - 1 if exclude is not None else n
    if not 1 <= k <= limit:
        raise ParameterError(f"k must be in [1, {limit}], got {k}")

    tree = seq.trees[0]
    kq = min(n, k + 1) if exclude is not None else k
    dist, _ = tree.query(x, k=kq)
    cutoff = float(np.atleast_1d(dist)[-1])
    radius = cutoff * (1.0 + _RADIUS_SLACK) if cutoff > 0.0 else 0.0
    cand = np.asarray(tree.query_ball_point(x, radius), dtype=np.intp)
    d2 = point_sq_dists(seq.points, x, cand)
    order = np.lexsort((cand, d2))
    cand, d2 = cand[order], d2[order]
    if exclude is not None:
        keep = cand != exclude
        cand, d2 = cand[keep], d2[keep]
    return cand[:k], d2[:k]


def pairwise_sq_dists(points, rows, cols):
    """Exact squared distances for a block of row and column indices.

    Accumulates coordinate contributions in a fixed order so the result
    for a pair (i, j) is identical no matter which block it appears in.
    """
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    out = np.zeros((rows.shape[0], cols.shape[0]))
    for s in range(points.shape[1]):
        diff = points[rows, s][:, None] - points[cols, s][None, :]
        out += diff * diff
    return out


def pair_sq_dists(points, ii, jj):
    """Exact squared distances for parallel index arrays of pairs.

    Bit-identical per pair to :func:`pairwise_sq_dists`.
    """
    ii = np.asarray(ii, dtype=np.intp)
    jj = np.asarray(jj, dtype=np.intp)
    out = np.zeros(ii.shape[0])
    for s in range(points.shape[1]):
        diff = points[ii, s] - points[jj, s]
        out += diff * diff
    return out


def point_sq_dists(points, x, cols):
    """Exact squared distances from one free point to indexed samples."""
    cols = np.asarray(cols, dtype=np.intp)
    out = np.zeros(cols.shape[0])
    for s in range(points.shape[1]):
        diff = x[s] - points[cols, s]
        out += diff * diff
    return out
