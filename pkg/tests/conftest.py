"""Shared fixtures: one small 2-D Gaussian cloud with the derived
search structures, density, operator, and fitted model built once per
session.  Tests treat these objects as read-only."""

import numpy as np
import pytest

from kolspec import (
    KolmogorovModel,
    assemble_operator,
    bandwidth_function,
    build_tree_sequence,
    estimate_density,
    tune_bandwidth,
)


@pytest.fixture(scope="session")
def cloud2d():
    rng = np.random.default_rng(7)
    return rng.standard_normal((300, 2))


@pytest.fixture(scope="session")
def seq2d(cloud2d):
    return build_tree_sequence(cloud2d, 7)


@pytest.fixture(scope="session")
def bandwidths2d(cloud2d, seq2d):
    return bandwidth_function(cloud2d, seq2d, 10)


@pytest.fixture(scope="session")
def density2d(cloud2d, seq2d, bandwidths2d):
    tuned = tune_bandwidth(cloud2d, seq2d, bandwidths2d)
    return estimate_density(cloud2d, seq2d, bandwidths2d, tuned.eps_star, 2)


@pytest.fixture(scope="session")
def operator2d(cloud2d, seq2d, density2d):
    rho = 2.0 * density2d.values ** -0.25
    tuned = tune_bandwidth(cloud2d, seq2d, rho)
    return assemble_operator(cloud2d, seq2d, density2d, tuned.eps_star, dim=2)


@pytest.fixture(scope="session")
def model2d(cloud2d):
    return KolmogorovModel(n_modes=12, dim=2).fit(cloud2d)
