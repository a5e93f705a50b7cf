"""Variable bandwidth kernel density estimation on sampled manifolds.

The bandwidth at a point is the root of the summed squared distances to
its k_nn nearest neighbors (the query point itself is rank 0 and is not
counted).  Densities follow from row sums of the truncated kernel matrix
scaled by the local normalization

    w(x) = n (pi eps^2 b(x)^2)^(d/2)

where d is the intrinsic dimension, normally taken from bandwidth tuning
and rounded to the nearest integer.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import DegenerateInputError, ParameterError
from .kernels import (
    assemble_tree_sweep,
    row_sums,
    truncation_radius_sq,
)
from .neighbors import (
    _RADIUS_SLACK,
    build_tree_sequence,
    k_nearest,
    pair_sq_dists,
    point_sq_dists,
)
from .tuning import tune_bandwidth
from .validation import (
    check_delta_tol,
    check_points,
    check_scalar,
    check_vector,
)


@dataclass
class DensityEstimate:
    """Sampled density values and the ingredients that produced them."""

    values: np.ndarray
    bandwidths: np.ndarray
    eps: float
    dim: float

    @property
    def n(self):
        return self.values.shape[0]


def auto_tree_count(n):
    """Default suffix tree count, about 5 log n, clipped to [1, n]."""
    return int(max(1, min(n, math.ceil(5.0 * math.log(max(n, 2))))))


def bandwidth_function(points, seq, knn):
    """Per-sample bandwidths from summed squared neighbor distances.

    b(x_i)^2 = sum_{k=1..knn} |x_i - x_(i,k)|^2 over the knn nearest
    neighbors of x_i, self excluded.
    """
    points = check_points(points, "points")
    n = points.shape[0]
    if not isinstance(knn, (int, np.integer)) or isinstance(knn, bool):
        raise ParameterError(f"knn must be an integer, got {knn!r}")
    knn = int(knn)
    if not 1 <= knn <= n - 1:
        raise ParameterError(f"knn must be in [1, {n - 1}], got {knn}")
    _, idx = seq.trees[0].query(points, k=knn + 1)
    idx = np.asarray(idx, dtype=np.intp)
    # Exact squared distances to the knn+1 candidates.  The self (or a
    # coincident stand-in when duplicates crowd it out) contributes 0,
    # so the plain row sum equals the sum over ranks 1..knn.
    d2 = pair_sq_dists(points,
                       np.repeat(np.arange(n, dtype=np.intp), knn + 1),
                       idx.ravel()).reshape(n, knn + 1)
    b = np.sqrt(d2.sum(axis=1))
    if not np.all(b > 0.0):
        raise DegenerateInputError(
            "zero bandwidth: some sample coincides with all of its "
            f"{knn} nearest neighbors")
    return b


def local_normalization(bandwidths, eps, dim, n):
    """The weight w(x) = n (pi eps^2 b(x)^2)^(d/2)."""
    return n * (math.pi * eps * eps * bandwidths * bandwidths) ** (0.5 * dim)


def estimate_density(points, seq, bandwidths, eps, dim, delta_tol=1e-2,
                     workers=1):
    """Density values at the samples from the truncated kernel matrix."""
    points = check_points(points, "points")
    n = points.shape[0]
    if n < 2:
        raise DegenerateInputError(
            "density estimation needs at least 2 samples")
    bandwidths = check_vector(bandwidths, n, "bandwidths", positive=True)
    eps = check_scalar(eps, "eps", positive=True)
    dim = check_scalar(dim, "dim", positive=True)
    delta_tol = check_delta_tol(delta_tol)
    kernel = assemble_tree_sweep(points, seq, bandwidths, eps, delta_tol,
                                 workers=workers)
    psi = row_sums(kernel) / local_normalization(bandwidths, eps, dim, n)
    if not np.all(np.isfinite(psi)) or not np.all(psi > 0.0):
        raise DegenerateInputError(
            "density normalization overflowed; eps or bandwidths are "
            "out of range for this cloud")
    return DensityEstimate(values=psi, bandwidths=bandwidths, eps=eps,
                           dim=float(dim))


def evaluate_density(points, seq, estimate, queries, knn, delta_tol=1e-2):
    """Density values at arbitrary query locations.

    Each query gets its own bandwidth from its knn nearest samples; a
    query coinciding with a sample drops that sample from the count, so
    evaluation at the samples reproduces the fitted values.
    """
    points = check_points(points, "points")
    queries = check_points(queries, "queries")
    if queries.shape[1] != points.shape[1]:
        raise ParameterError(
            f"queries have dimension {queries.shape[1]}, cloud has "
            f"{points.shape[1]}")
    n = points.shape[0]
    eps, dim = estimate.eps, estimate.dim
    delta_tol = check_delta_tol(delta_tol)
    b_max = float(estimate.bandwidths.max())
    out = np.empty(queries.shape[0])
    for q, x in enumerate(queries):
        idx, d2 = k_nearest(seq, x, min(knn + 1, n))
        if d2[0] == 0.0:
            b2 = d2[1:knn + 1].sum()
        else:
            b2 = d2[:knn].sum()
        if b2 <= 0.0:
            raise DegenerateInputError(
                f"zero bandwidth at query {q}: coincident samples")
        b = math.sqrt(b2)
        r2 = truncation_radius_sq(eps, max(b, b_max), delta_tol)
        cand = np.asarray(
            seq.trees[0].query_ball_point(x, math.sqrt(r2) * (1.0 + _RADIUS_SLACK)),
            dtype=np.intp)
        vals = np.exp(-(point_sq_dists(points, x, cand)
                        / ((eps * eps) * (b * estimate.bandwidths[cand]))))
        total = vals[vals > delta_tol].sum()
        out[q] = total / local_normalization(b, eps, dim, n)
    return out


class VariableBandwidthKDE(BaseEstimator):
    """Density estimator with per-sample bandwidths and tuned kernel scale.

    Parameters
    ----------
    knn : int
        Neighbor count defining the bandwidth function.
    eps : float or "auto"
        Kernel scale; "auto" tunes it by kernel-sum sensitivity.
    dim : float or "auto"
        Intrinsic dimension used in the normalization; "auto" rounds the
        tuned estimate.
    delta_tol : float
        Kernel truncation threshold.
    tree_count : int or "auto"
        Suffix tree count for assembly.
    xi_range : tuple of float
        Search range for the tuning exponent, eps^2 = 2^xi.
    tuning_delta : float
        Step of the discrete log-log derivative in tuning.
    workers : int
        Thread cap for tree queries.  Results do not depend on it.
    """

    def __init__(self, knn=25, eps="auto", dim="auto", delta_tol=1e-2,
                 tree_count="auto", xi_range=(-40.0, 40.0),
                 tuning_delta=1.0, workers=1):
        self.knn = knn
        self.eps = eps
        self.dim = dim
        self.delta_tol = delta_tol
        self.tree_count = tree_count
        self.xi_range = xi_range
        self.tuning_delta = tuning_delta
        self.workers = workers

    def fit(self, X, y=None):
        X = check_points(X, "X")
        n = X.shape[0]
        if n < 2:
            raise DegenerateInputError(
                "density estimation needs at least 2 samples")
        t = auto_tree_count(n) if self.tree_count == "auto" else self.tree_count
        seq = build_tree_sequence(X, t)
        b = bandwidth_function(X, seq, self.knn)
        self.tuning_ = None
        if self.eps == "auto" or self.dim == "auto":
            self.tuning_ = tune_bandwidth(
                X, seq, b, xi_range=self.xi_range,
                delta=self.tuning_delta, delta_tol=self.delta_tol,
                workers=self.workers)
        eps = self.tuning_.eps_star if self.eps == "auto" else \
            check_scalar(self.eps, "eps", positive=True)
        if self.dim == "auto":
            dim = max(1, round(self.tuning_.dim_estimate))
        else:
            dim = check_scalar(self.dim, "dim", positive=True)
        self.estimate_ = estimate_density(X, seq, b, eps, dim,
                                          self.delta_tol, self.workers)
        self.points_ = X
        self.tree_sequence_ = seq
        self.bandwidths_ = b
        self.eps_ = float(eps)
        self.dim_ = float(dim)
        self.density_ = self.estimate_.values
        return self

    def evaluate(self, X):
        """Density values at new locations."""
        return evaluate_density(self.points_, self.tree_sequence_,
                                self.estimate_, X, self.knn, self.delta_tol)

    def score_samples(self, X):
        """Log density values at new locations."""
        return np.log(self.evaluate(X))
