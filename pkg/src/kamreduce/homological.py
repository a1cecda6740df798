"""Diagonal frequencies and the homological equation of one reduction step.

Dynamics convention: ``i du/dt = A(omega t) u`` with ``A = Lambda + R``.  The
generator ``F`` of a step solves

    omega . d_theta F + i (Lambda F - F Lambda) + Gamma_K R - [R] = 0,

whose Fourier form is ``D_ij(k) F_hat_ij(k) = i R_hat_ij(k)`` with
``D_ij(k) = <k, omega> + lambda_i - lambda_j``.  The same divisors, read at
``-k``, are the ``-<k, omega> + lambda_i - lambda_j`` that the parameter
excision controls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import HermiticityError, ResonanceViolation
from .fourier import FourierMatrix, diagonal_commutator, truncation
from .measure import thresholds


@dataclass(frozen=True)
class DiagonalFrequencies:
    """``lambda_j = j^2 + M + sum_i eps_i mu_j^(i)`` at the working ``tau``.

    Every correction is stored as the normalized ``mu`` (value and
    d/dtau) together with its size ``eps_i``, so the bookkeeping identity
    ``lambda - base = sum eps_i mu_i`` holds by construction.
    """

    base: np.ndarray
    tau: float
    mus: tuple = ()
    dmus: tuple = ()
    sizes: tuple = ()

    @classmethod
    def initial(cls, J, M, tau):
        base = np.arange(1, J + 1, dtype=float) ** 2 + float(M)
        return cls(base, float(tau))

    def values(self):
        return self.base + self.corrections()

    def derivatives(self):
        out = np.zeros_like(self.base)
        for eps, dmu in zip(self.sizes, self.dmus):
            out = out + eps * dmu
        return out

    def corrections(self):
        out = np.zeros_like(self.base)
        for eps, mu in zip(self.sizes, self.mus):
            out = out + eps * mu
        return out

    def updated(self, mu, dmu, eps):
        mu = np.asarray(mu, dtype=float)
        dmu = np.asarray(dmu, dtype=float)
        return DiagonalFrequencies(self.base, self.tau, self.mus + (mu,),
                                   self.dmus + (dmu,), self.sizes + (float(eps),))

    def with_tau(self, tau):
        return DiagonalFrequencies(self.base, float(tau), self.mus, self.dmus, self.sizes)

    def __len__(self):
        return len(self.base)


def diagonal_update(lam, R, eps_m, tol=1e-12):
    """Shift ``lambda_j`` by ``eps_m R_hat_jj(0)``; imaginary parts must vanish."""
    mean = np.diag(R.mean())
    dmean = np.diag(R.dmean())
    defect = float(max(np.max(np.abs(mean.imag), initial=0.0),
                       np.max(np.abs(dmean.imag), initial=0.0)))
    if defect > tol:
        raise HermiticityError(
            f"diagonal mean has imaginary part {defect:.3e} (tolerance {tol:.1e})")
    return lam.updated(mean.real, dmean.real, eps_m)


def divisors(n, K, lam, omega):
    """``D_ij(k) = <k, omega> + lambda_i - lambda_j`` over the box ``|k_i| <= K``."""
    vals = lam.values()
    ks = _box(n, K)
    kw = ks @ np.asarray(omega, dtype=float)
    return kw[:, None, None] + (vals[:, None] - vals[None, :])[None]


def _box(n, K):
    axes = [np.arange(-K, K + 1)] * n
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)


@dataclass
class HomologicalSolution:
    F: FourierMatrix
    divisor_min: float
    tail: FourierMatrix


def solve_homological(R, lam, omega, K, gamma_m, omega0=None, strip=None, check=True):
    """Solve for the generator ``F`` of one step.

    Parameters
    ----------
    R : FourierMatrix
        Normalized perturbation piece being removed.
    lam : DiagonalFrequencies
    omega : array
        Frequency vector ``tau * omega0``.
    K : int
        Fourier cutoff; modes ``|k|_1 > K`` go to the returned tail.
    gamma_m : float
        Diophantine constant of the step; divisors below
        ``(|i-j|+1) gamma_m / |k|^(n+3)`` raise :class:`ResonanceViolation`.
    omega0 : array, optional
        ``d omega / d tau``; defaults to ``omega / tau``.
    strip : float, optional
        Strip assigned to ``F`` (defaults to the strip of ``R``).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    n = R.n
    if omega0 is None:
        omega0 = omega / lam.tau
    omega0 = np.atleast_1d(np.asarray(omega0, dtype=float))
    low, tail = truncation(R, K)
    Kb = low.K
    D = divisors(n, Kb, lam, omega)
    ks = _box(n, Kb)
    absk = np.abs(ks).sum(axis=1)
    dvals = lam.derivatives()
    dD = (ks @ omega0)[:, None, None] + (dvals[:, None] - dvals[None, :])[None]

    flat = low.flat()
    dflat = low.dflat()
    J = low.J
    used = (flat != 0) | (dflat != 0)
    zero_k = absk == 0
    used[zero_k] &= ~np.eye(J, dtype=bool)

    if check and used.any():
        ii, jj = np.meshgrid(np.arange(J), np.arange(J), indexing="ij")
        thr = thresholds(absk[:, None, None], (ii - jj)[None], gamma_m, n)
        bad = used & (np.abs(D) < thr)
        if bad.any():
            ratio = np.where(bad, np.abs(D) / thr, np.inf)
            m, i, j = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
            raise ResonanceViolation(tuple(-ks[m]), i + 1, j + 1, D[m, i, j],
                                     thr[m, i, j])

    F = np.zeros_like(flat)
    dF = np.zeros_like(flat)
    Du = D[used]
    F[used] = 1j * flat[used] / Du
    dF[used] = (1j * dflat[used] - dD[used] * F[used]) / Du
    divisor_min = float(np.min(np.abs(Du))) if Du.size else float("inf")
    shape = low.coeffs.shape
    out = FourierMatrix(F.reshape(shape), low.strip if strip is None else strip,
                        dF.reshape(shape))
    return HomologicalSolution(out, divisor_min, tail)


def homological_residual(F, R, lam, omega, K):
    """Largest coefficient of ``omega.dF + i[Lambda, F] + Gamma_K R - [R]``."""
    low, _ = truncation(R, K)
    lhs = F.dtheta(omega) + 1j * diagonal_commutator(lam.values(), F.without_derivative())
    lhs = lhs.without_derivative() + low.without_derivative() - low.diagonal_mean().without_derivative()
    return float(np.max(np.abs(lhs.coeffs), initial=0.0))


def homological_derivative_residual(F, R, lam, omega, omega0, K):
    """Largest coefficient of the tau-derivative of the homological identity."""
    low, _ = truncation(R, K)
    dlam = lam.derivatives()
    lhs = F.dtheta(omega, omega0) + 1j * diagonal_commutator(lam.values(), F, dlam)
    rhs = low - low.diagonal_mean()
    diff = lhs.derivative_series() + rhs.derivative_series()
    return float(np.max(np.abs(diff.coeffs), initial=0.0))
