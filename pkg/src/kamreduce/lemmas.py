"""Numerical checks of two auxiliary inequalities used in the estimates.

* lattice sums ``sum_{k in Z^n} exp(-2|k| delta) |k|^nu`` against
  ``(nu/e)^nu (1+e)^n / delta^(nu+n)``;
* the off-diagonal division ``B_ij = |A_ij| / |i-j|`` against
  ``||B|| <= (pi/sqrt 3) ||A||``.
"""

from __future__ import annotations

import math

import numpy as np


def shell_count(n, r):
    """Number of ``k in Z^n`` with ``|k|_1 = r``."""
    if r == 0:
        return 1
    return sum(2 ** i * math.comb(n, i) * math.comb(r - 1, i - 1) for i in range(1, min(n, r) + 1))


def lattice_sum(delta, nu, n, rel_tol=1e-16, r_max=10 ** 7):
    """``sum_k exp(-2 |k|_1 delta) |k|_1^nu`` summed shell by shell.

    Summation runs past the peak of the shell terms and stops once a term is
    below ``rel_tol`` times the running sum.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    total = 0.0 if nu > 0 else 1.0
    peak = (nu + n) / (2 * delta)
    for r in range(1, r_max):
        logt = -2 * r * delta + nu * math.log(r) + math.log(shell_count(n, r))
        term = math.exp(logt)
        total += term
        if r > peak and term < rel_tol * total:
            return total
    raise RuntimeError("lattice sum did not converge")


def lattice_sum_bound(delta, nu, n):
    return (nu / math.e) ** nu * (1 + math.e) ** n / delta ** (nu + n)


def divided_operator(A):
    """``B_ij = |A_ij| / |i - j|`` off the diagonal, ``B_ii = 0``."""
    A = np.asarray(A)
    J = A.shape[0]
    idx = np.arange(J)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    np.fill_diagonal(dist, np.inf)
    return np.abs(A) / dist


def division_ratio(A):
    """``||B|| / ||A||`` in the spectral norm."""
    nA = np.linalg.norm(A, 2)
    return float(np.linalg.norm(divided_operator(A), 2) / nA) if nA > 0 else 0.0


DIVISION_CONSTANT = math.pi / math.sqrt(3.0)
