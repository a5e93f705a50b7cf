"""Input validation helpers used by the estimators and the low level API."""

import numbers

import numpy as np

from .exceptions import ParameterError, StructuralError


def check_points(X, name="X"):
    """Validate a point cloud and return it as a C-contiguous float64 array.

    Accepts any array-like of shape (n, m) with finite entries, n >= 1 and
    m >= 1.  A 1-D array is treated as n points in one dimension.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ParameterError(f"{name} must be 2-D (n, m), got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ParameterError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ParameterError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(X)


def check_vector(v, n, name="v", positive=False):
    """Validate a length-n float vector, optionally strictly positive."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != n:
        raise StructuralError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ParameterError(f"{name} contains non-finite entries")
    if positive and not np.all(v > 0.0):
        raise ParameterError(f"{name} must be strictly positive")
    return v


def check_scalar(x, name, *, positive=False, nonnegative=False):
    """Validate a finite real scalar."""
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise ParameterError(f"{name} must be a real number, got {x!r}")
    x = float(x)
    if not np.isfinite(x):
        raise ParameterError(f"{name} must be finite, got {x!r}")
    if positive and x <= 0.0:
        raise ParameterError(f"{name} must be positive, got {x!r}")
    if nonnegative and x < 0.0:
        raise ParameterError(f"{name} must be nonnegative, got {x!r}")
    return x


def check_index(i, n, name="i"):
    """Validate an integer sample index in [0, n)."""
    if not isinstance(i, numbers.Integral) or isinstance(i, bool):
        raise ParameterError(f"{name} must be an integer, got {i!r}")
    i = int(i)
    if not 0 <= i < n:
        raise ParameterError(f"{name}={i} out of range for {n} samples")
    return i


def check_delta_tol(delta_tol, allow_zero=False):
    """Validate the kernel truncation threshold, in [0, 1) or (0, 1)."""
    delta_tol = check_scalar(delta_tol, "delta_tol", nonnegative=True)
    if delta_tol >= 1.0:
        raise ParameterError(f"delta_tol must be below 1, got {delta_tol}")
    if delta_tol == 0.0 and not allow_zero:
        raise ParameterError("delta_tol must be positive for sparse assembly")
    return delta_tol
