import numpy as np
import pytest
import scipy.linalg
from conftest import admissible_instance, random_series

from kamreduce.exceptions import BoundViolation, InversionError, NoConvergence
from kamreduce.fourier import FourierMatrix, fourier_multiply, weighted_norm
from kamreduce.homological import solve_homological
from kamreduce.transform import (build_transform, compose, conjugate_oracle, inverse_series,
                                 unitarity_defect)


def test_zero_generator_gives_identity():
    F = FourierMatrix.zeros(1, 3, 2, strip=0.3)
    tr = build_transform(F, 1e-3, 1e-14)
    np.testing.assert_allclose(tr.G.coeffs, np.eye(3)[None])
    assert tr.distance == 0.0


def test_constant_generator_matches_matrix_exponential(rng):
    H = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    H = H + H.conj().T
    F = FourierMatrix.constant(H, 1, strip=0.2)
    eps = 1e-2
    tr = build_transform(F, eps, 1e-17)
    np.testing.assert_allclose(tr.G.mean(), scipy.linalg.expm(1j * eps * H), atol=1e-12)


def test_unitarity_at_real_angles(rng):
    F = random_series(rng, 1, 5, 3, hermitian=True, strip=0.3)
    tr = build_transform(F, 1e-2, 1e-15)
    theta = rng.uniform(0, 2 * np.pi, (16, 1))
    assert unitarity_defect(tr.G, theta) <= 1e-10


def test_distance_bound_and_non_convergence(rng):
    F = random_series(rng, 1, 3, 2, hermitian=True, strip=0.3)
    with pytest.raises(BoundViolation):
        build_transform(F, 1e-2, 1e-14, bound=1e-8)
    with pytest.raises(NoConvergence):
        build_transform(F * 1e3, 1.0, 1e-14)


def test_inverse_series(rng):
    F = random_series(rng, 1, 3, 2, hermitian=True, strip=0.3)
    G = build_transform(F, 1e-2, 1e-16).G
    Ginv = inverse_series(G)
    prod, _ = fourier_multiply(Ginv, G)
    ident = FourierMatrix.identity(1, 3)
    assert weighted_norm((prod - ident).with_strip(0.0), 0, 0.0) < 1e-13
    with pytest.raises(InversionError):
        inverse_series(G * 3.0)


def test_oracle_with_identity_returns_generator(rng):
    A = random_series(rng, 1, 3, 2, strip=0.3)
    out = conjugate_oracle(A, FourierMatrix.identity(1, 3), [1.3])
    np.testing.assert_allclose(out.resized(A.K).coeffs, A.coeffs, atol=1e-15)


def test_oracle_with_constant_unitary(rng):
    lam = np.array([1.0, 4.0, 9.0])
    H = rng.standard_normal((3, 3))
    U = scipy.linalg.expm(1j * 0.05 * (H + H.T))
    G = FourierMatrix.constant(U, 1)
    zero = FourierMatrix.zeros(1, 3)
    out = conjugate_oracle(zero, G, [1.0], lam=lam)
    np.testing.assert_allclose(out.mean(), np.linalg.inv(U) @ np.diag(lam) @ U, atol=1e-12)


def test_step_conjugation_removes_off_diagonal_first_order(rng):
    # direct conjugation by the generator of an admissible instance leaves
    # Lambda + eps [R] + O(eps^2)
    R, lam, omega, omega0, gamma = admissible_instance(rng, 1, J=3, K=2)
    eps = 1e-4
    F = solve_homological(R, lam, omega, 2, gamma, omega0).F
    G = build_transform(F, eps, 1e-20).G
    out = conjugate_oracle(R * eps, G, omega, lam=lam.values(), include_lambda=False)
    rest = out - R.diagonal_mean() * eps
    scale = weighted_norm(R.with_strip(0.0), 0, 0.0) * weighted_norm(F.with_strip(0.0), 0, 0.0)
    assert weighted_norm(rest.with_strip(0.0), 0, 0.0) <= 5 * eps ** 2 * scale


def test_compose_order(rng):
    A = FourierMatrix.constant(np.array([[1, 1], [0, 1]]), 1)
    B = FourierMatrix.constant(np.array([[1, 0], [1, 1]]), 1)
    out, _ = compose([A, B])
    np.testing.assert_allclose(out.mean(), A.mean() @ B.mean())
