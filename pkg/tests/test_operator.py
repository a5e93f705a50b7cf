"""Discrete operator assembly against a dense reference implementation."""

import numpy as np
import pytest

from kolspec import (
    DegenerateInputError,
    alpha_from_c,
    apply_l,
    apply_lhat,
    assemble_operator,
    build_tree_sequence,
)
from kolspec.density import DensityEstimate
from kolspec.operator import symmetric_matrix
from kolspec.spectra import s_inner


def dense_reference(points, psi, eps, c, beta, dim, delta_tol):
    """Dense recomputation of the whole normalization chain."""
    n = points.shape[0]
    rho = 2.0 * psi ** beta
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    K = np.exp(-d2 / (eps * eps * np.outer(rho, rho)))
    K[K <= delta_tol] = 0.0
    np.fill_diagonal(K, 1.0)
    q = psi ** (-beta * dim) * K.sum(axis=1)
    alpha = 0.5 * (2.0 + dim * beta + 2.0 * beta - c)
    K = K / np.outer(q ** alpha, q ** alpha)
    P = psi ** beta
    D = K.sum(axis=1)
    L = ((K / D[:, None]) - np.eye(n)) / (P * P)[:, None] / (eps * eps)
    return K, P, D, L


class TestAlpha:
    def test_vanishes_at_the_default_parameters(self):
        assert alpha_from_c(1.0, -0.25, 2.0) == 0.0

    def test_inverts_the_drift_relation(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            c = float(rng.uniform(-2, 3))
            beta = float(rng.uniform(-1, 1))
            dim = float(rng.uniform(1, 5))
            alpha = alpha_from_c(c, beta, dim)
            np.testing.assert_allclose(
                2.0 - 2.0 * alpha + dim * beta + 2.0 * beta, c, rtol=1e-12)


class TestAgainstDenseReference:
    @pytest.mark.parametrize("c,beta", [(1.0, -0.25), (0.5, -0.25), (2.0, -0.5)])
    def test_normalized_kernel_and_factors(self, cloud2d, seq2d, density2d,
                                           c, beta):
        op = assemble_operator(cloud2d, seq2d, density2d, 0.6, c=c, beta=beta,
                               dim=2)
        K, P, D, _ = dense_reference(cloud2d, density2d.values, 0.6, c, beta,
                                     2.0, 1e-2)
        np.testing.assert_allclose(op.kernel.toarray(), K, rtol=1e-12)
        np.testing.assert_allclose(op.P, P, rtol=1e-14)
        np.testing.assert_allclose(op.D, D, rtol=1e-12)
        np.testing.assert_allclose(op.S, P * np.sqrt(D), rtol=1e-12)
        assert op.alpha == alpha_from_c(c, beta, 2.0)

    def test_generator_application(self, cloud2d, seq2d, density2d):
        op = assemble_operator(cloud2d, seq2d, density2d, 0.6, dim=2)
        _, _, _, L = dense_reference(cloud2d, density2d.values, 0.6, 1.0,
                                     -0.25, 2.0, 1e-2)
        rng = np.random.default_rng(4)
        for _ in range(3):
            f = rng.standard_normal(cloud2d.shape[0])
            np.testing.assert_allclose(apply_l(op, f), L @ f, rtol=1e-9,
                                       atol=1e-9 * np.abs(L @ f).max())

    def test_symmetric_matrix_is_the_conjugated_generator(self, cloud2d, seq2d,
                                                          density2d):
        op = assemble_operator(cloud2d, seq2d, density2d, 0.6, dim=2)
        _, _, _, L = dense_reference(cloud2d, density2d.values, 0.6, 1.0,
                                     -0.25, 2.0, 1e-2)
        dense_lhat = (op.S[:, None] * L) / op.S[None, :]
        got = symmetric_matrix(op).toarray()
        scale = np.abs(dense_lhat).max()
        np.testing.assert_allclose(got, dense_lhat, atol=1e-9 * scale)
        np.testing.assert_allclose(got, got.T, atol=1e-12 * scale)


class TestOperatorAlgebra:
    def test_constants_are_annihilated_exactly(self, operator2d):
        out = apply_l(operator2d, np.ones(operator2d.n))
        np.testing.assert_array_equal(out, np.zeros(operator2d.n))

    def test_conjugation_identity_on_random_vectors(self, operator2d):
        rng = np.random.default_rng(8)
        for _ in range(3):
            f = rng.standard_normal(operator2d.n)
            a = apply_l(operator2d, f)
            b = apply_lhat(operator2d, operator2d.S * f) / operator2d.S
            np.testing.assert_allclose(a, b, rtol=1e-11,
                                       atol=1e-11 * np.abs(a).max())

    def test_lhat_is_symmetric_in_the_euclidean_pairing(self, operator2d):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(operator2d.n)
        y = rng.standard_normal(operator2d.n)
        left = x @ apply_lhat(operator2d, y)
        right = y @ apply_lhat(operator2d, x)
        np.testing.assert_allclose(left, right, rtol=1e-11)

    def test_coordinates_are_near_eigenfunctions_of_the_drift(self, model2d,
                                                              cloud2d):
        # For the standard Gaussian the generator sends x_s to -x_s.  The
        # pointwise image is noisy at 300 samples, but the weighted Rayleigh
        # quotient averages that noise out and should sit near -1, and the
        # bulk correlation with -x_s should at least be clearly positive.
        op = model2d.operator_
        psi = model2d.density_.values
        bulk = psi >= np.median(psi)
        for s in range(cloud2d.shape[1]):
            x = cloud2d[:, s]
            lx = apply_l(op, x)
            ray = s_inner(op.S, x, lx) / s_inner(op.S, x, x)
            assert abs(ray + 1.0) < 0.15
            corr = np.corrcoef(lx[bulk], -x[bulk])[0, 1]
            assert corr > 0.3


class TestDegenerateInput:
    def test_overflowing_density_power_is_reported(self, cloud2d, seq2d,
                                                   bandwidths2d):
        psi = np.full(cloud2d.shape[0], 1e-300)
        psi[0] = 1.0
        fake = DensityEstimate(values=psi, bandwidths=bandwidths2d, eps=1.0,
                               dim=2.0)
        with np.errstate(over="ignore"):
            with pytest.raises(DegenerateInputError):
                assemble_operator(cloud2d, seq2d, fake, 0.6, beta=-2.0, dim=2)
