import numpy as np
import pytest
from conftest import random_series

from kamreduce.fourier import FourierMatrix, weighted_norm
from kamreduce.smoothing import (approximation_constant, decompose, phi_hat, scalar_series_sup,
                                 smooth, smoothness_proxy)


def test_cutoff_profile():
    r = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 3.0])
    vals = phi_hat(r)
    np.testing.assert_allclose(vals[[0, 1, 2]], 1.0)
    np.testing.assert_allclose(vals[[4, 5]], 0.0)
    assert vals[3] == pytest.approx(0.5)
    grid = np.linspace(0.5, 1.0, 200)
    assert np.all(np.diff(phi_hat(grid)) <= 0)
    np.testing.assert_allclose(phi_hat(-r), vals)


def test_smoothing_keeps_low_modes_and_kills_high_modes(rng):
    A = random_series(rng, 1, 2, 6, strip=0.0)
    S = smooth(A, 0.25)
    assert S.strip == 0.25
    np.testing.assert_allclose(S.resized(2).coeffs, A.resized(2).coeffs)
    assert S.support() <= 3


def test_scalar_series_smoothing():
    coeffs = np.ones(9)
    out = smooth(coeffs, 0.5)
    np.testing.assert_allclose(out[3:6], 1.0)
    assert out[0] == 0 and out[-1] == 0


@pytest.mark.parametrize("n", [1, 2])
def test_ladder_telescopes_back(rng, n):
    A = random_series(rng, n, 2, 5, strip=0.0)
    strips = [0.5, 0.4, 0.3, 0.2]
    ladder = decompose(A, strips)
    total = ladder.total()
    np.testing.assert_allclose(total.resized(A.K).coeffs, A.coeffs, atol=1e-14)
    assert [p.strip for p in ladder.pieces] == strips
    assert all(b >= 0 for b in ladder.bounds)


def test_ladder_rejects_bad_strips(rng):
    A = random_series(rng, 1, 2, 2)
    with pytest.raises(ValueError):
        decompose(A, [0.3, 0.4])
    with pytest.raises(ValueError):
        smooth(A, 0.0)


def test_first_piece_is_band_limited_and_analytic(rng):
    A = random_series(rng, 1, 2, 8, strip=0.0)
    ladder = decompose(A, [0.25, 0.2])
    first = ladder.pieces[0]
    assert first.support() <= 4
    assert weighted_norm(first, 0, 0.25) < np.inf


def _finite_smooth_series(N, K):
    k = np.arange(-K, K + 1)
    out = np.zeros(2 * K + 1)
    out[k != 0] = np.abs(k[k != 0]).astype(float) ** (-(N + 1))
    return out


def test_approximation_error_scales_like_power_of_sigma():
    N, K = 12, 4000
    f = _finite_smooth_series(N, K)
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    sig = np.array([0.08, 0.04, 0.02, 0.01])
    err = [scalar_series_sup(smooth(f, s) - f, theta) for s in sig]
    slope = np.polyfit(np.log(sig), np.log(err), 1)[0]
    assert abs(slope - N) / N < 0.1


def test_smoothness_proxy_and_constant(rng):
    A = random_series(rng, 1, 2, 5, strip=0.0)
    assert smoothness_proxy(A, 0) > 0
    C = approximation_constant(A, [0.4, 0.2, 0.1], 3)
    assert np.all(np.isfinite(C)) and np.all(C >= 0)
    zero = FourierMatrix.zeros(1, 2, 2)
    np.testing.assert_allclose(approximation_constant(zero, [0.3], 2), 0.0)
