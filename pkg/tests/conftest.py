import numpy as np
import pytest

from kamreduce.fourier import FourierMatrix


def random_series(rng, n, J, K, strip=0.3, hermitian=False, derivative=False, decay=1.0):
    """Random matrix series on the box |k|_1 <= K with geometric decay."""
    side = 2 * K + 1
    shape = (side,) * n + (J, J)
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    d = rng.standard_normal(shape) + 1j * rng.standard_normal(shape) if derivative else None
    A = FourierMatrix(coeffs, strip=strip, dcoeffs=d)
    absk = np.abs(A.modes()).sum(axis=1).reshape((side,) * n)
    scale = np.exp(-decay * absk)[..., None, None]
    A.coeffs *= scale
    if d is not None:
        A.dcoeffs *= scale
    A._mask_l1()
    if hermitian:
        H = A.adjoint()
        A = (A + H) * 0.5
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def admissible_instance(rng, n, J=4, K=3, gamma=0.05, max_tries=200):
    """Random Hermitian R, perturbed frequencies and a frequency vector whose
    divisors all clear their thresholds.  Returns (R, lam, omega, omega0, gamma)."""
    from kamreduce.exceptions import ResonanceViolation
    from kamreduce.homological import DiagonalFrequencies, solve_homological

    omega0 = np.array([1.0, (1 + np.sqrt(5)) / 2])[:n]
    for _ in range(max_tries):
        R = random_series(rng, n, J, K, hermitian=True, derivative=False, decay=0.5)
        tau = rng.uniform(1.0, 2.0)
        lam = DiagonalFrequencies.initial(J, rng.uniform(0, 1), tau)
        lam = lam.updated(rng.standard_normal(J), rng.standard_normal(J), 1e-2)
        try:
            solve_homological(R, lam, tau * omega0, K, gamma, omega0)
        except ResonanceViolation:
            continue
        return R, lam, tau * omega0, omega0, gamma
    raise RuntimeError("no admissible instance found")
