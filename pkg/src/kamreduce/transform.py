"""Flow maps generated by a step and the direct conjugation used to check them.

The change of variables of a step is ``u = G(theta) v`` with
``G = exp(i eps_m F(theta))``, the time-one flow of ``dz/dt = i eps_m F z`` at
frozen angle.  ``F`` is Hermitian for real angles, so ``G`` is unitary there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BoundViolation, InversionError, NoConvergence
from .fourier import (FourierMatrix, diagonal_commutator, fourier_multiply,
                      weighted_norm)

MAX_TERMS = 50


@dataclass
class Transform:
    """One realized step map together with its diagnostics."""

    G: FourierMatrix
    F: FourierMatrix
    eps: float
    terms: int
    distance: float  # certified ||G - id|| on the strip of F
    truncation_tail: float


def build_transform(F, eps_m, tol, K_keep=None, N=0, bound=None, step=None):
    """Sum the Picard series of ``dz/dt = i eps_m F z`` from 0 to 1.

    Term ``j`` is ``(i eps_m F)^j / j!``; summation stops when the certified
    weighted norm of the next term drops below ``tol``.  If ``bound`` is given,
    ``||G - id|| <= bound`` is enforced.
    """
    n, J = F.n, F.J
    ident = FourierMatrix.identity(n, J, strip=F.strip)
    if eps_m == 0 or F.support() < 0:
        return Transform(ident, F, eps_m, 0, 0.0, 0.0)
    X = F * (1j * eps_m)
    G = ident
    term = ident
    tail = 0.0
    for j in range(1, MAX_TERMS + 1):
        term, t = fourier_multiply(term, X, K_keep, N)
        term = term * (1.0 / j)
        tail += t / j
        G = G + term
        size = weighted_norm(term, N)
        if size < tol:
            break
    else:
        raise NoConvergence(
            f"flow series did not reach {tol:.1e} within {MAX_TERMS} terms")
    G = G.with_strip(F.strip)
    distance = weighted_norm(G - ident, N)
    if bound is not None and distance > bound:
        raise BoundViolation("transform_distance", distance, bound, step)
    return Transform(G, F, eps_m, j, distance, tail)


def inverse_series(G, K_keep=None, N=0, tol=1e-16, max_terms=200):
    """``G^{-1} = sum_j (id - G)^j`` (requires ``||G - id|| < 1/2``)."""
    n, J = G.n, G.J
    ident = FourierMatrix.identity(n, J, strip=G.strip)
    E = ident - G
    q = weighted_norm(E, N)
    if q >= 0.5:
        raise InversionError(f"||G - id|| = {q:.3e} is not below 1/2")
    out = ident
    term = ident
    for _ in range(max_terms):
        term, _t = fourier_multiply(term, E, K_keep, N)
        out = out + term
        if weighted_norm(term, N) < tol:
            break
    return out.with_strip(G.strip)


def conjugate_oracle(A, G, omega, lam=None, K_keep=None, N=0, include_lambda=True):
    """Coefficients of the conjugated generator ``G^-1 A G - i G^-1 (omega.dG)``.

    ``A`` is the non-diagonal (or full) part of the generator as a
    :class:`FourierMatrix`.  A constant diagonal part may be passed separately
    as ``lam``; it is conjugated through ``G^-1 Lambda G = Lambda + G^-1 [Lambda, G]``
    so that large eigenvalues never enter a product.  With
    ``include_lambda=False`` the returned series omits that bare ``Lambda``.
    """
    Ginv = inverse_series(G.without_derivative(), K_keep, N)
    G0 = G.without_derivative()
    A0 = A.without_derivative()
    AG, _ = fourier_multiply(A0, G0, K_keep, N)
    out, _ = fourier_multiply(Ginv, AG, K_keep, N)
    dG = G0.dtheta(omega)
    drift, _ = fourier_multiply(Ginv, dG, K_keep, N)
    out = out - drift * 1j
    if lam is not None:
        lam = np.asarray(lam, dtype=float)
        comm = diagonal_commutator(lam, G0)
        extra, _ = fourier_multiply(Ginv, comm, K_keep, N)
        out = out + extra
        if include_lambda:
            out = out + FourierMatrix.constant(np.diag(lam), G.n)
    return out


def compose(Gs, K_keep=None, N=0):
    """Product ``G_0 G_1 ... G_m`` (the realized map ``u = G_0 ... G_m v``)."""
    if not Gs:
        raise ValueError("nothing to compose")
    out = Gs[0].without_derivative()
    tail = 0.0
    for G in Gs[1:]:
        out, t = fourier_multiply(out, G.without_derivative(), K_keep, N)
        tail += t
    return out, tail


def unitarity_defect(G, thetas):
    """``max ||G(theta)^* G(theta) - id||_2`` over the sample angles."""
    vals = G.evaluate(np.asarray(thetas, dtype=float).reshape(-1, G.n))
    eye = np.eye(G.J)
    prods = np.conj(np.swapaxes(vals, -1, -2)) @ vals
    return float(np.max(np.linalg.norm(prods - eye, ord=2, axis=(1, 2))))
