"""Reference sample generators for validation runs.

All generators draw from a caller supplied seed through numpy's
Generator API, so a run is reproducible from its manifest.
"""

import numpy as np

from .exceptions import ParameterError
from .validation import check_scalar


def sample_gaussian(n, mean, cov_diag, rng):
    """Draw from a Gaussian with diagonal covariance."""
    mean = np.asarray(mean, dtype=np.float64).ravel()
    cov_diag = np.asarray(cov_diag, dtype=np.float64).ravel()
    if mean.shape != cov_diag.shape:
        raise ParameterError("mean and cov_diag must have matching shapes")
    if np.any(cov_diag <= 0.0):
        raise ParameterError("cov_diag entries must be positive")
    z = rng.standard_normal((n, mean.shape[0]))
    return mean + np.sqrt(cov_diag) * z


def sample_sphere_uniform(n, rng):
    """Draw uniformly from the unit sphere in R^3."""
    z = rng.standard_normal((n, 3))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    # A zero draw is measure zero but would divide to NaN; redraw it.
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        z[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
    return z / norms


def sample_vmf(n, kappa, mu, rng, batch=None):
    """Draw from the von Mises-Fisher distribution on the unit sphere.

    Rejection sampling from the uniform sphere: a proposal x is accepted
    with probability exp(kappa (mu . x - 1)), the density ratio divided
    by its maximum (attained at x = mu).
    """
    kappa = check_scalar(kappa, "kappa", positive=True)
    mu = np.asarray(mu, dtype=np.float64).ravel()
    if mu.shape[0] != 3:
        raise ParameterError("mu must be a 3-vector")
    norm = np.linalg.norm(mu)
    if norm == 0.0:
        raise ParameterError("mu must be nonzero")
    mu = mu / norm
    if batch is None:
        # Expected acceptance rate is (1 - exp(-2 kappa)) / (2 kappa).
        batch = int(min(max(4 * n * kappa, 1024), 2_000_000))
    out = np.empty((n, 3))
    have = 0
    while have < n:
        x = sample_sphere_uniform(batch, rng)
        accept = rng.random(batch) < np.exp(kappa * (x @ mu - 1.0))
        x = x[accept]
        take = min(n - have, x.shape[0])
        out[have:have + take] = x[:take]
        have += take
    return out


def make_samples(spec, n, seed):
    """Dispatch a generator description to samples.

    `spec` is a mapping with a "kind" key: "gaussian" (fields mean,
    cov_diag), "sphere_uniform", or "vmf" (fields kappa, mu).
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParameterError("generator spec must be a mapping with a 'kind'")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ParameterError(f"sample count must be a positive integer, got {n!r}")
    rng = np.random.default_rng(seed)
    kind = spec["kind"]
    known = {"gaussian", "sphere_uniform", "vmf"}
    extra = set(spec) - {"kind", "mean", "cov_diag", "kappa", "mu"}
    if extra:
        raise ParameterError(f"unknown generator fields {sorted(extra)}")
    if kind == "gaussian":
        mean = spec.get("mean", [0.0, 0.0])
        cov = spec.get("cov_diag", [1.0] * len(mean))
        return sample_gaussian(int(n), mean, cov, rng)
    if kind == "sphere_uniform":
        return sample_sphere_uniform(int(n), rng)
    if kind == "vmf":
        if "kappa" not in spec or "mu" not in spec:
            raise ParameterError("vmf generator needs 'kappa' and 'mu'")
        return sample_vmf(int(n), spec["kappa"], spec["mu"], rng)
    raise ParameterError(f"unknown generator kind {kind!r}, expected one of "
                         f"{sorted(known)}")
