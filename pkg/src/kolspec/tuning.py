"""Kernel bandwidth tuning by maximizing the log-log sensitivity of the
kernel sum.

For a candidate exponent xi with eps^2 = 2^xi, the objective is the
discrete derivative

    chi'(xi) = (log chi(xi + delta) - log chi(xi)) / (delta log 2)

where chi is the sum of all entries of the truncated kernel matrix.  The
maximizer gives the operating eps, and twice the maximal slope estimates
the intrinsic dimension of the sampled set.  A 33 point coarse grid over
the xi range is refined by golden section search around the best grid
point.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import TuningError
from .kernels import (
    exponent_clip,
    kernel_block,
    kernel_pairs,
    truncation_radius_sq,
)
from .neighbors import _RADIUS_SLACK
from .validation import (
    check_delta_tol,
    check_points,
    check_scalar,
    check_vector,
)

# Candidate-pair budget above which chi falls back to the blocked dense
# scan instead of materializing tree query results.
DENSE_PAIR_CAP = 30_000_000

# Flat-objective guard: the largest grid slope must exceed this.
_MIN_SLOPE = 1e-4

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class TuningResult:
    """Outcome of a bandwidth sweep."""

    xi_star: float
    eps_star: float
    chi_prime_max: float
    dim_estimate: float
    delta: float
    grid_xi: np.ndarray = field(repr=False)
    grid_chi: np.ndarray = field(repr=False)
    grid_chi_prime: np.ndarray = field(repr=False)


def chi(points, seq, rho, xi, delta_tol=1e-2, workers=1,
        dense_pair_cap=DENSE_PAIR_CAP):
    """Sum of all entries of the kernel matrix at eps^2 = 2^xi.

    Uses a tree pair query while the candidate pair count stays below
    both `dense_pair_cap` and a quarter of all pairs, otherwise a
    blocked dense scan of the upper triangle.  Both paths apply the same
    strict truncation threshold; delta_tol = 0 disables truncation and
    forces the dense path.
    """
    return _chi_path(points, seq, rho, xi, delta_tol=delta_tol,
                     workers=workers, dense_pair_cap=dense_pair_cap)[0]


def _chi_path(points, seq, rho, xi, delta_tol=1e-2, workers=1,
              dense_pair_cap=DENSE_PAIR_CAP, path="auto"):
    """chi with the route decision exposed.

    Returns (value, route) where route is "sparse" or "dense".  A caller
    that knows the route from a previous evaluation can force it through
    `path`, skipping the candidate counting pass; the candidate count is
    monotone in xi, so a route observed at some xi is valid below it
    (sparse) or above it (dense).
    """
    points = check_points(points, "points")
    n = points.shape[0]
    rho = check_vector(rho, n, "rho", positive=True)
    xi = check_scalar(xi, "xi")
    delta_tol = check_delta_tol(delta_tol, allow_zero=True)
    eps = 2.0 ** (0.5 * xi)
    clip = exponent_clip(delta_tol)
    r2 = truncation_radius_sq(eps, float(rho.max()), delta_tol)

    use_sparse = path == "sparse"
    if path == "auto":
        # The tree route pays off only while the candidate set is a
        # modest fraction of all pairs; past that the vectorized dense
        # scan is cheaper per pair.
        sparse_cap = min(dense_pair_cap, (n * n) // 4)
        spread2 = float(((points.max(axis=0) - points.min(axis=0)) ** 2).sum())
        if math.isfinite(r2) and r2 <= spread2:
            radius = math.sqrt(r2) * (1.0 + _RADIUS_SLACK)
            counts = seq.trees[0].query_ball_point(
                points, radius, workers=workers, return_length=True)
            use_sparse = int(counts.sum()) <= sparse_cap

    if use_sparse:
        radius = math.sqrt(r2) * (1.0 + _RADIUS_SLACK)
        pairs = seq.trees[0].query_pairs(radius, output_type="ndarray")
        vals = kernel_pairs(points, rho, eps, pairs[:, 0], pairs[:, 1],
                            clip=clip)
        vals *= vals > delta_tol
        # The diagonal contributes exactly 1 per row and each kept pair
        # appears on both sides of it.
        return 2.0 * float(vals.sum()) + float(n), "sparse"

    # Dense fallback: scan j >= i blocks; the diagonal contributes 1 per
    # row exactly, so the full sum is twice the inclusive upper sum less n.
    block = max(1, min(n, 4_000_000 // n))
    upper = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        rows = np.arange(start, stop, dtype=np.intp)
        cols = np.arange(start, n, dtype=np.intp)
        vals = kernel_block(points, rho, eps, rows, cols, clip=clip)
        vals *= (cols[None, :] >= rows[:, None]) & (vals > delta_tol)
        upper += float(vals.sum())
    return 2.0 * upper - float(n), "dense"


def tune_bandwidth(points, seq, rho, xi_range=(-40.0, 40.0), grid_size=33,
                   delta=1.0, delta_tol=1e-2, workers=1,
                   dense_pair_cap=DENSE_PAIR_CAP, refine_tol=0.05):
    """Locate the eps maximizing the kernel-sum sensitivity.

    Returns a :class:`TuningResult` whose `dim_estimate` is twice the
    maximal slope.  Raises :class:`TuningError` when the objective is
    flat over the whole range, which usually means the range should be
    widened.
    """
    points = check_points(points, "points")
    rho = check_vector(rho, points.shape[0], "rho", positive=True)
    lo, hi = (check_scalar(x, "xi_range") for x in xi_range)
    if not lo < hi:
        raise TuningError(f"empty tuning range [{lo}, {hi}]")
    delta = check_scalar(delta, "delta", positive=True)
    if not isinstance(grid_size, (int, np.integer)) or grid_size < 3:
        raise TuningError(f"grid_size must be an integer >= 3, got {grid_size}")

    cache = {}
    # Route watermarks: the candidate count grows with xi, so a route
    # observed once extends to every smaller xi (sparse) or larger xi
    # (dense), and the counting pass can be skipped there.
    marks = {"sparse_hi": -math.inf, "dense_lo": math.inf}

    def chi_at(xi):
        if xi not in cache:
            if xi <= marks["sparse_hi"]:
                path = "sparse"
            elif xi >= marks["dense_lo"]:
                path = "dense"
            else:
                path = "auto"
            val, route = _chi_path(
                points, seq, rho, xi, delta_tol=delta_tol, workers=workers,
                dense_pair_cap=dense_pair_cap, path=path)
            if route == "sparse":
                marks["sparse_hi"] = max(marks["sparse_hi"], xi)
            else:
                marks["dense_lo"] = min(marks["dense_lo"], xi)
            cache[xi] = val
        return cache[xi]

    def slope(xi):
        return ((math.log(chi_at(xi + delta)) - math.log(chi_at(xi)))
                / (delta * math.log(2.0)))

    grid_xi = np.linspace(lo, hi, int(grid_size))
    grid_chi = np.array([chi_at(float(x)) for x in grid_xi])
    grid_prime = np.array([slope(float(x)) for x in grid_xi])

    best = int(np.argmax(grid_prime))
    if grid_prime[best] < _MIN_SLOPE:
        raise TuningError(
            "flat tuning objective: all slopes are near zero over "
            f"[{lo}, {hi}]; widen the xi range")

    # Golden section refinement on the bracket around the best grid point.
    a = float(grid_xi[max(best - 1, 0)])
    b = float(grid_xi[min(best + 1, len(grid_xi) - 1)])
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = slope(c), slope(d)
    while (b - a) > refine_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = slope(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = slope(d)
    xi_star = c if fc >= fd else d
    best_slope = max(fc, fd)
    if grid_prime[best] > best_slope:
        xi_star, best_slope = float(grid_xi[best]), float(grid_prime[best])

    return TuningResult(
        xi_star=float(xi_star),
        eps_star=float(2.0 ** (0.5 * xi_star)),
        chi_prime_max=float(best_slope),
        dim_estimate=2.0 * float(best_slope),
        delta=float(delta),
        grid_xi=grid_xi,
        grid_chi=grid_chi,
        grid_chi_prime=grid_prime,
    )
