"""Analytic approximation of finite-smooth series and the strip ladder.

Smoothing is done on the Fourier side: the mode ``k`` of the input is
multiplied by ``phi_hat(sigma |k|)``, where ``phi_hat`` is a C-infinity cutoff
equal to 1 on [0, 1/2] and 0 on [1, inf).  The result is a trigonometric
polynomial, hence analytic on every strip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fourier import FourierMatrix, l1_norms, mode_norms, weighted_norm


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def phi_hat(r):
    """Smooth cutoff profile: 1 on [0, 1/2], 0 on [1, inf), monotone between."""
    r = np.abs(np.asarray(r, dtype=float))
    t = 2.0 * r - 1.0  # maps [1/2, 1] onto [0, 1]
    a, b = _bump(1.0 - t), _bump(t)
    with np.errstate(invalid="ignore"):
        out = np.where(r <= 0.5, 1.0, np.where(r >= 1.0, 0.0, a / (a + b)))
    return out


def _multiplier(n, K, sigma):
    return phi_hat(sigma * l1_norms(n, K))


def smooth(A, sigma):
    """Band-limit ``A`` at scale ``sigma``; the result is certified on strip ``sigma``.

    Works for :class:`FourierMatrix` and for plain scalar series given as a
    coefficient array over the box ``(2K+1,)*n``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if isinstance(A, FourierMatrix):
        mult = _multiplier(A.n, A.K, sigma)[..., None, None]
        d = None if A.dcoeffs is None else A.dcoeffs * mult
        return FourierMatrix(A.coeffs * mult, strip=sigma, dcoeffs=d, symmetric=A.symmetric)
    coeffs = np.asarray(A)
    n = coeffs.ndim
    return coeffs * _multiplier(n, coeffs.shape[0] // 2, sigma)


@dataclass
class AnalyticLadder:
    """Pieces ``R_0, ..., R_L`` summing to the input, each with its strip."""

    pieces: list
    strips: list
    bounds: list = field(default_factory=list)
    proxies: dict = field(default_factory=dict)

    def total(self):
        out = self.pieces[0]
        for p in self.pieces[1:]:
            out = out + p
        return out


def decompose(A, strips, norm_order=0):
    """Telescoping ladder ``R_0 = A_{s_0}``, ``R_l = A_{s_l} - A_{s_{l-1}}``.

    The residue ``A - A_{s_L}`` is folded into the last piece, so the pieces add
    back to ``A`` exactly on the stored modes.
    """
    strips = [float(s) for s in strips]
    if not strips or any(s <= 0 for s in strips):
        raise ValueError("strips must be positive")
    if any(b >= a for a, b in zip(strips, strips[1:])):
        raise ValueError("strips must be strictly decreasing")
    smoothed = [smooth(A, s) for s in strips]
    pieces = [smoothed[0]]
    for prev, cur, s in zip(smoothed, smoothed[1:], strips[1:]):
        pieces.append((cur - prev).with_strip(s))
    residue = (A - smoothed[-1]).with_strip(strips[-1])
    pieces[-1] = (pieces[-1] + residue).with_strip(strips[-1])
    bounds = [weighted_norm(p, norm_order, p.strip) for p in pieces]
    return AnalyticLadder(pieces, strips, bounds)


def smoothness_proxy(A, ell):
    """``sum_k |k|^ell ||A_hat(k)||``: computable stand-in for the C^ell norm."""
    absk = np.abs(A.modes()).sum(axis=1).astype(float)
    return float(np.sum(absk ** ell * mode_norms(A)))


def approximation_constant(A, sigmas, ell):
    """Measured ``C`` in ``sup|A_sigma - A| <= C proxy sigma^ell`` for each sigma."""
    proxy = smoothness_proxy(A, ell)
    out = []
    for s in sigmas:
        diff = smooth(A, s) - A
        err = weighted_norm(diff.with_strip(0.0), 0, 0.0)
        out.append(err / (proxy * s ** ell) if proxy > 0 else 0.0)
    return np.asarray(out)


def scalar_series_sup(coeffs, theta):
    """``sup`` over the sample angles of a scalar n = 1 series given on ``[-K, K]``."""
    coeffs = np.asarray(coeffs)
    K = coeffs.shape[0] // 2
    k = np.arange(-K, K + 1)
    vals = np.exp(1j * np.outer(theta, k)) @ coeffs
    return float(np.max(np.abs(vals)))
