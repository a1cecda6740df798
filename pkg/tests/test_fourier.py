import numpy as np
import pytest
from conftest import random_series

from kamreduce.fourier import (FourierMatrix, commutator, diagonal_commutator,
                               fourier_multiply, lattice, truncation, weighted_norm)


def test_lattice_box_order():
    ks = lattice(2, 1)
    assert ks.shape == (9, 2)
    assert tuple(ks[0]) == (-1, -1) and tuple(ks[4]) == (0, 0)


def test_multiply_by_identity_is_noop(rng):
    A = random_series(rng, 1, 3, 2)
    out, tail = fourier_multiply(A, FourierMatrix.identity(1, 3))
    assert tail == 0.0
    np.testing.assert_allclose(out.resized(A.K).coeffs, A.coeffs, atol=0)


def test_single_modes_multiply_to_sum_mode():
    a = FourierMatrix.from_modes({(1,): np.eye(2)}, 1, 2)
    b = FourierMatrix.from_modes({(1,): 2 * np.eye(2)}, 1, 2)
    out, _ = fourier_multiply(a, b)
    assert out.support() == 2
    np.testing.assert_allclose(out.coefficient((2,)), 2 * np.eye(2))
    assert np.abs(out.coefficient((0,))).max() == 0


@pytest.mark.parametrize("n", [1, 2])
def test_product_matches_pointwise_product(rng, n):
    A = random_series(rng, n, 3, 1)
    B = random_series(rng, n, 3, 1)
    out, _ = fourier_multiply(A, B)
    theta = rng.uniform(0, 2 * np.pi, size=(16, n))
    expected = A.evaluate(theta) @ B.evaluate(theta)
    np.testing.assert_allclose(out.evaluate(theta), expected, atol=1e-12)


def test_truncated_product_reports_dropped_norm(rng):
    A = random_series(rng, 1, 2, 3)
    full, _ = fourier_multiply(A, A)
    kept, tail = fourier_multiply(A, A, K_keep=2)
    _, high = truncation(full, 2)
    assert kept.K == 2
    assert tail == pytest.approx(weighted_norm(high, 0), rel=1e-14)
    assert tail > 0


def test_derivative_channel_follows_product_rule(rng):
    A = random_series(rng, 1, 3, 2, derivative=True)
    B = random_series(rng, 1, 3, 2, derivative=True)
    out, _ = fourier_multiply(A, B)
    h = 1e-6
    Ap = FourierMatrix(A.coeffs + h * A.dcoeffs)
    Bp = FourierMatrix(B.coeffs + h * B.dcoeffs)
    Am = FourierMatrix(A.coeffs - h * A.dcoeffs)
    Bm = FourierMatrix(B.coeffs - h * B.dcoeffs)
    fd = (fourier_multiply(Ap, Bp)[0].coeffs - fourier_multiply(Am, Bm)[0].coeffs) / (2 * h)
    np.testing.assert_allclose(out.dcoeffs, fd, atol=1e-8)


def test_truncation_split_is_exact(rng):
    A = random_series(rng, 2, 2, 3)
    low, high = truncation(A, 0)
    assert low.K == 0
    np.testing.assert_allclose(low.coeffs[0, 0], A.coefficient((0, 0)))
    np.testing.assert_allclose((low + high).coeffs, A.coeffs)
    low, high = truncation(A, 10)
    assert weighted_norm(high) == 0


def test_truncation_tail_geometric_example():
    # A_hat(k) = q^|k| I on n = 1; tail beyond K on strip s' summed directly
    q, K, Kmax, s = 0.5, 4, 60, 0.2
    coeffs = np.zeros((2 * Kmax + 1, 1, 1), dtype=complex)
    for k in range(-Kmax, Kmax + 1):
        coeffs[k + Kmax] = q ** abs(k)
    A = FourierMatrix(coeffs, strip=0.5)
    _, high = truncation(A, K)
    direct = 2 * sum(q ** k * np.exp(k * s) for k in range(K + 1, Kmax + 1))
    assert weighted_norm(high, 0, s) == pytest.approx(direct, rel=1e-13)
    s0 = 0.5
    bound = weighted_norm(A, 0, s0) * 2 * sum(np.exp(-(s0 - s) * k) for k in range(K + 1, Kmax + 1))
    assert weighted_norm(high, 0, s) <= bound


def test_weighted_norm_dominates_strip_values(rng):
    A = random_series(rng, 1, 3, 3, strip=0.4)
    bound = weighted_norm(A, 0, 0.4)
    theta = rng.uniform(0, 2 * np.pi, 50) + 1j * rng.uniform(-0.4, 0.4, 50)
    vals = A.evaluate(theta[:, None])
    assert np.linalg.norm(vals, 2, axis=(1, 2)).max() <= bound
    with pytest.raises(ValueError):
        weighted_norm(A, 0, 0.5)


def test_weighted_norm_uses_sobolev_weights():
    A = FourierMatrix.constant(np.array([[0, 1], [0, 0]]), 1, strip=0.0)
    assert weighted_norm(A, 0) == pytest.approx(1.0)
    assert weighted_norm(A, 3) == pytest.approx(1.0 / 8.0)


def test_adjoint_is_pointwise_conjugate_transpose(rng):
    A = random_series(rng, 2, 3, 2)
    theta = rng.uniform(0, 2 * np.pi, size=(8, 2))
    np.testing.assert_allclose(A.adjoint().evaluate(theta),
                               np.conj(np.swapaxes(A.evaluate(theta), -1, -2)), atol=1e-13)


def test_commutator_and_diagonal_commutator(rng):
    lam = np.array([1.0, 4.0, 9.0])
    A = random_series(rng, 1, 3, 1)
    L = FourierMatrix.constant(np.diag(lam), 1)
    c1, _ = commutator(L, A)
    c2 = diagonal_commutator(lam, A)
    np.testing.assert_allclose(c1.resized(A.K).coeffs, c2.coeffs, atol=1e-13)


def test_dtheta_matches_finite_difference(rng):
    A = random_series(rng, 2, 2, 2)
    omega = np.array([1.0, np.sqrt(2.0)])
    theta = rng.uniform(0, 2 * np.pi, size=(5, 2))
    h = 1e-6
    fd = (A.evaluate(theta + h * omega) - A.evaluate(theta - h * omega)) / (2 * h)
    np.testing.assert_allclose(A.dtheta(omega).evaluate(theta), fd, atol=1e-7)
