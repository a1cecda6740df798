"""Matrix-valued Fourier series on the torus T^n.

A :class:`FourierMatrix` stores the coefficients ``A_hat(k)`` of

    A(theta) = sum_k A_hat(k) exp(i <k, theta>)

on the lattice box ``|k_i| <= K`` as a dense array of shape
``(2K+1,)*n + (J, J)``.  Modes with ``|k|_1 > K`` are always zero.  An optional
second array carries the derivative of every coefficient with respect to the
frequency parameter ``tau`` so that Lipschitz bookkeeping travels with the
value instead of being reconstructed by differencing.
"""

from __future__ import annotations

import itertools

import numpy as np


def lattice(n, K):
    """Integer vectors of the box ``[-K, K]^n`` in C order, shape ``(m, n)``."""
    axes = [np.arange(-K, K + 1)] * n
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1).astype(np.int64)


def l1_norms(n, K):
    """``|k|_1`` over the box, shaped like the box."""
    return np.abs(lattice(n, K)).sum(axis=1).reshape((2 * K + 1,) * n)


def _crop(arr, n, K_old, K_new):
    if K_new == K_old:
        return arr
    if K_new < K_old:
        sl = (slice(K_old - K_new, K_old + K_new + 1),) * n
        return arr[sl]
    pad = [(K_new - K_old, K_new - K_old)] * n + [(0, 0)] * (arr.ndim - n)
    return np.pad(arr, pad)


class FourierMatrix:
    """Fourier series with ``J x J`` complex matrix coefficients.

    Parameters
    ----------
    coeffs : ndarray, shape ``(2K+1,)*n + (J, J)``
    strip : float
        Width of the complex strip on which norms are certified.
    dcoeffs : ndarray or None
        d/dtau of ``coeffs``; ``None`` means identically zero.
    symmetric : bool
        Whether every coefficient satisfies ``A_hat(k).T == A_hat(k)``.
    """

    def __init__(self, coeffs, strip=0.0, dcoeffs=None, symmetric=False):
        coeffs = np.asarray(coeffs, dtype=complex)
        n = coeffs.ndim - 2
        if n < 1:
            raise ValueError("coeffs must have at least one lattice axis")
        side = coeffs.shape[0]
        if side % 2 != 1 or any(s != side for s in coeffs.shape[:n]):
            raise ValueError(f"bad lattice box shape {coeffs.shape[:n]}")
        if coeffs.shape[-1] != coeffs.shape[-2]:
            raise ValueError("coefficients must be square matrices")
        self.n = n
        self.K = side // 2
        self.J = coeffs.shape[-1]
        self.coeffs = coeffs
        self.dcoeffs = None if dcoeffs is None else np.asarray(dcoeffs, dtype=complex)
        self.strip = float(strip)
        self.symmetric = bool(symmetric)

    # -- constructors -------------------------------------------------------
    @classmethod
    def zeros(cls, n, J, K=0, strip=0.0):
        return cls(np.zeros((2 * K + 1,) * n + (J, J), dtype=complex), strip=strip)

    @classmethod
    def constant(cls, matrix, n, strip=0.0, dmatrix=None):
        matrix = np.asarray(matrix, dtype=complex)
        coeffs = matrix.reshape((1,) * n + matrix.shape)
        d = None if dmatrix is None else np.asarray(dmatrix, complex).reshape(coeffs.shape)
        return cls(coeffs, strip=strip, dcoeffs=d)

    @classmethod
    def identity(cls, n, J, strip=0.0):
        return cls.constant(np.eye(J), n, strip=strip)

    @classmethod
    def from_modes(cls, modes, n, J, strip=0.0):
        """Build from a mapping ``{k_tuple: matrix}``."""
        K = max((int(np.abs(k).sum()) for k in modes), default=0)
        out = cls.zeros(n, J, K, strip)
        for k, mat in modes.items():
            out.coeffs[out.index(k)] += np.asarray(mat, dtype=complex)
        return out

    # -- indexing -----------------------------------------------------------
    def index(self, k):
        k = tuple(int(x) for x in np.atleast_1d(k))
        if len(k) != self.n:
            raise ValueError(f"mode {k} has wrong dimension for n={self.n}")
        return tuple(x + self.K for x in k)

    def coefficient(self, k):
        k = tuple(int(x) for x in np.atleast_1d(k))
        if any(abs(x) > self.K for x in k):
            return np.zeros((self.J, self.J), dtype=complex)
        return self.coeffs[self.index(k)]

    def modes(self):
        """Lattice vectors of the box, shape ``(m, n)`` in storage order."""
        return lattice(self.n, self.K)

    def flat(self):
        return self.coeffs.reshape(-1, self.J, self.J)

    def dflat(self):
        if self.dcoeffs is None:
            return np.zeros_like(self.flat())
        return self.dcoeffs.reshape(-1, self.J, self.J)

    def support(self):
        """Largest ``|k|_1`` carrying a nonzero coefficient (-1 if all zero)."""
        nz = np.any(self.flat() != 0, axis=(1, 2))
        if self.dcoeffs is not None:
            nz |= np.any(self.dflat() != 0, axis=(1, 2))
        if not nz.any():
            return -1
        return int(np.abs(self.modes()[nz]).sum(axis=1).max())

    # -- structural operations ---------------------------------------------
    def copy(self):
        return FourierMatrix(self.coeffs.copy(), self.strip,
                             None if self.dcoeffs is None else self.dcoeffs.copy(),
                             self.symmetric)

    def resized(self, K):
        """Same series stored on the box of half-width ``K`` (cropping drops modes)."""
        coeffs = _crop(self.coeffs, self.n, self.K, K)
        d = None if self.dcoeffs is None else _crop(self.dcoeffs, self.n, self.K, K)
        out = FourierMatrix(coeffs.copy(), self.strip, None if d is None else d.copy(),
                            self.symmetric)
        out._mask_l1()
        return out

    def compact(self):
        """Shrink storage to the actual support."""
        return self.resized(max(self.support(), 0))

    def _mask_l1(self):
        far = l1_norms(self.n, self.K) > self.K
        if far.any():
            self.coeffs[far] = 0
            if self.dcoeffs is not None:
                self.dcoeffs[far] = 0

    def with_strip(self, strip):
        out = self.copy()
        out.strip = float(strip)
        return out

    def without_derivative(self):
        return FourierMatrix(self.coeffs, self.strip, None, self.symmetric)

    def derivative_series(self):
        """The tau-derivative as a series of its own."""
        return FourierMatrix(self.dflat().reshape(self.coeffs.shape), self.strip)

    # -- algebra --------------------------------------------------------------
    def _binary(self, other, sign):
        if self.n != other.n or self.J != other.J:
            raise ValueError("incompatible Fourier matrices")
        K = max(self.K, other.K)
        a, b = self.resized(K), other.resized(K)
        coeffs = a.coeffs + sign * b.coeffs
        if a.dcoeffs is None and b.dcoeffs is None:
            d = None
        else:
            d = a.dflat().reshape(coeffs.shape) + sign * b.dflat().reshape(coeffs.shape)
        return FourierMatrix(coeffs, min(self.strip, other.strip), d,
                             self.symmetric and other.symmetric)

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        scalar = complex(scalar)
        d = None if self.dcoeffs is None else self.dcoeffs * scalar
        return FourierMatrix(self.coeffs * scalar, self.strip, d, self.symmetric)

    __rmul__ = __mul__

    def scale_dual(self, value, dvalue):
        """Multiply by a tau-dependent scalar given as (value, d/dtau)."""
        coeffs = self.coeffs * value
        d = self.dflat().reshape(coeffs.shape) * value + self.coeffs * dvalue
        return FourierMatrix(coeffs, self.strip, d, self.symmetric)

    def adjoint(self):
        """Series of ``A(theta)^*`` for real theta: coefficients ``A_hat(-k)^H``."""
        flip = tuple(slice(None, None, -1) for _ in range(self.n))
        c = np.conj(np.swapaxes(self.coeffs[flip], -1, -2))
        d = None
        if self.dcoeffs is not None:
            d = np.conj(np.swapaxes(self.dcoeffs[flip], -1, -2))
        return FourierMatrix(c.copy(), self.strip, None if d is None else d.copy(),
                             self.symmetric)

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.coeffs - self.adjoint().coeffs), initial=0.0))

    def mean(self):
        """The k = 0 coefficient."""
        return self.coeffs[(self.K,) * self.n].copy()

    def dmean(self):
        if self.dcoeffs is None:
            return np.zeros((self.J, self.J), dtype=complex)
        return self.dcoeffs[(self.K,) * self.n].copy()

    def diagonal_mean(self):
        """``[A]``: the constant diagonal part as a series."""
        out = FourierMatrix.zeros(self.n, self.J, 0, self.strip)
        out.coeffs[(0,) * self.n] = np.diag(np.diag(self.mean()))
        if self.dcoeffs is not None:
            out.dcoeffs = np.zeros_like(out.coeffs)
            out.dcoeffs[(0,) * self.n] = np.diag(np.diag(self.dmean()))
        return out

    def dtheta(self, omega, domega=None):
        """``omega . d/dtheta`` applied to the series.

        ``domega`` (d omega / d tau) feeds the derivative channel.
        """
        omega = np.asarray(omega, dtype=float)
        k = self.modes()
        phase = (1j * (k @ omega)).reshape((2 * self.K + 1,) * self.n + (1, 1))
        coeffs = self.coeffs * phase
        d = None
        if self.dcoeffs is not None or domega is not None:
            d = self.dflat().reshape(coeffs.shape) * phase
            if domega is not None:
                dphase = (1j * (k @ np.asarray(domega, float))).reshape(phase.shape)
                d = d + self.coeffs * dphase
        return FourierMatrix(coeffs, self.strip, d)

    def evaluate(self, theta):
        """Values at real (or complex) angles; ``theta`` has shape ``(..., n)``."""
        theta = np.asarray(theta)
        lead = theta.shape[:-1]
        th = theta.reshape(-1, self.n)
        k = self.modes()
        flat = self.flat()
        keep = np.any(flat != 0, axis=(1, 2))
        phases = np.exp(1j * th @ k[keep].T)
        vals = np.einsum("tm,mij->tij", phases, flat[keep])
        return vals.reshape(lead + (self.J, self.J))

    def __repr__(self):
        return (f"FourierMatrix(n={self.n}, J={self.J}, K={self.K}, "
                f"strip={self.strip:g}, support={self.support()})")


def weights(J, N):
    """Diagonal of ``D = diag(1^N, ..., J^N)`` as floats."""
    return np.arange(1, J + 1, dtype=float) ** N


def mode_norms(A, N=0, derivative=False):
    """Spectral norms of ``D A_hat(k) D^{-1}`` for every stored mode."""
    flat = A.dflat() if derivative else A.flat()
    w = weights(A.J, N)
    out = np.zeros(flat.shape[0])
    nz = np.any(flat != 0, axis=(1, 2))
    if nz.any():
        scaled = flat[nz] * (w[:, None] / w[None, :])
        out[nz] = np.linalg.norm(scaled, ord=2, axis=(1, 2))
    return out


def weighted_norm(A, N=0, s=None, derivative=False):
    """Certified bound ``sum_k ||D A_hat(k) D^{-1}||_2 exp(|k| s)``.

    Dominates the supremum over the strip ``|Im theta| <= s`` of the
    ``h_N -> h_N`` operator norm.  ``derivative=True`` bounds the tau-derivative
    instead (the Lipschitz seminorm).
    """
    s = A.strip if s is None else float(s)
    if s > A.strip + 1e-15:
        raise ValueError(f"strip {s} exceeds certified strip {A.strip}")
    norms = mode_norms(A, N, derivative)
    absk = np.abs(A.modes()).sum(axis=1)
    return float(np.sum(norms * np.exp(absk * s)))


def truncation(A, K):
    """Split ``A`` into ``(Gamma_K A, (1 - Gamma_K) A)`` by ``|k|_1 <= K``."""
    low = A.copy()
    high = A.copy()
    mask = l1_norms(A.n, A.K) > K
    low.coeffs[mask] = 0
    high.coeffs[~mask] = 0
    if A.dcoeffs is not None:
        low.dcoeffs[mask] = 0
        high.dcoeffs[~mask] = 0
    return low.resized(min(K, A.K)) if K >= 0 else low, high


def _convolve(a, Ka, b, Kb, n, J):
    Kc = Ka + Kb
    out = np.zeros((2 * Kc + 1,) * n + (J, J), dtype=complex)
    side_b = 2 * Kb + 1
    for pos in itertools.product(range(2 * Ka + 1), repeat=n):
        block = a[pos]
        if not block.any():
            continue
        target = tuple(slice(p, p + side_b) for p in pos)
        out[target] += block @ b
    return out


def fourier_multiply(A, B, K_keep=None, N=0):
    """Product series ``(AB)_hat(k) = sum_{k1+k2=k} A_hat(k1) B_hat(k2)``.

    Modes with ``|k|_1 > K_keep`` are discarded; the certified weighted norm of
    the discarded part (on the product's strip) is returned alongside.

    Returns
    -------
    (FourierMatrix, float)
    """
    if A.n != B.n or A.J != B.J:
        raise ValueError("incompatible Fourier matrices")
    A, B = A.compact(), B.compact()
    n, J = A.n, A.J
    coeffs = _convolve(A.coeffs, A.K, B.coeffs, B.K, n, J)
    d = None
    if A.dcoeffs is not None or B.dcoeffs is not None:
        d = np.zeros_like(coeffs)
        if A.dcoeffs is not None:
            d += _convolve(A.dcoeffs, A.K, B.coeffs, B.K, n, J)
        if B.dcoeffs is not None:
            d += _convolve(A.coeffs, A.K, B.dcoeffs, B.K, n, J)
    full = FourierMatrix(coeffs, min(A.strip, B.strip), d)
    if K_keep is None or K_keep >= full.K:
        return full, 0.0
    kept, dropped = truncation(full, K_keep)
    return kept, weighted_norm(dropped, N)


def commutator(A, B, K_keep=None, N=0):
    """``[A, B] = AB - BA`` with the combined truncation tail."""
    ab, t1 = fourier_multiply(A, B, K_keep, N)
    ba, t2 = fourier_multiply(B, A, K_keep, N)
    return ab - ba, t1 + t2


def diagonal_commutator(lam, A, dlam=None):
    """``[Lambda, A]`` for constant diagonal ``Lambda``: entries ``(l_i - l_j) A_ij``."""
    lam = np.asarray(lam, dtype=float)
    gap = lam[:, None] - lam[None, :]
    coeffs = A.coeffs * gap
    d = None
    if A.dcoeffs is not None or dlam is not None:
        d = A.dflat().reshape(coeffs.shape) * gap
        if dlam is not None:
            dlam = np.asarray(dlam, dtype=float)
            d = d + A.coeffs * (dlam[:, None] - dlam[None, :])
    return FourierMatrix(coeffs, A.strip, d)
