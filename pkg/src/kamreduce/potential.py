"""Perturbation W(theta, x), its cosine expansion and the Galerkin operator R(theta).

The spatial basis is ``sin(l x)`` (Dirichlet eigenfunctions on [0, pi]) and the
potential is expanded as ``W = sum_j v_j(theta) cos(2 j x)``; each ``v_j`` is a
real Fourier series in ``theta`` on the standard 2*pi torus.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, UnderResolvedPotential
from .fourier import FourierMatrix, lattice, mode_norms

QUARTER_PI = math.pi / 4


def coupling_coefficient(j, l, k):
    """Exact value of the integral of cos(2jx) sin(lx) sin(kx) over [0, pi].

    Branches ``k = l + 2j``, ``k = l - 2j`` contribute +pi/4 and ``k = 2j - l``
    contributes -pi/4; coinciding branches add (so j = 0 gives pi/2 on the
    diagonal).
    """
    if j < 0 or l < 1 or k < 1:
        raise ValueError(f"indices out of range: j={j}, l={l}, k={k}")
    value = 0.0
    if k == l + 2 * j:
        value += QUARTER_PI
    if k == l - 2 * j:
        value += QUARTER_PI
    if k == 2 * j - l:
        value -= QUARTER_PI
    return value


def coupling_tensor(j_max, J):
    """``c[j, k, l] = coupling_coefficient(j, l, k)`` for ``j <= j_max``, ``k, l <= J``."""
    c = np.zeros((j_max + 1, J, J))
    idx = np.arange(1, J + 1)
    kk, ll = np.meshgrid(idx, idx, indexing="ij")
    for j in range(j_max + 1):
        c[j] += QUARTER_PI * (kk == ll + 2 * j)
        c[j] += QUARTER_PI * (kk == ll - 2 * j)
        c[j] -= QUARTER_PI * (kk == 2 * j - ll)
    return c


def diophantine_check(omega0, gamma, n=None, k_max=20):
    """Check ``|<k, omega0>| >= gamma / |k|^(n+1)`` for ``0 < |k|_1 <= k_max``.

    Returns ``(ok, worst_k, worst_value)`` where ``worst_value`` is the minimum of
    ``|<k, omega0>| |k|^(n+1)`` and ``worst_k`` attains it.
    """
    omega0 = np.atleast_1d(np.asarray(omega0, dtype=float))
    n = len(omega0) if n is None else int(n)
    if len(omega0) != n:
        raise ValueError("omega0 length does not match n")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    ks = lattice(n, k_max)
    absk = np.abs(ks).sum(axis=1)
    keep = (absk > 0) & (absk <= k_max)
    ks, absk = ks[keep], absk[keep]
    vals = np.abs(ks @ omega0) * absk.astype(float) ** (n + 1)
    pos = int(np.argmin(vals))
    worst = float(vals[pos])
    return worst >= gamma, tuple(int(x) for x in ks[pos]), worst


@dataclass
class PotentialSpec:
    """Cosine-in-x, Fourier-in-theta description of the perturbation.

    ``v_hat[j]`` is the coefficient table of ``v_j(theta)`` on the lattice box
    ``|k_i| <= K_pot`` (shape ``(Jx+1,) + (2 K_pot + 1,)*n``).  ``jx_resolved``
    bounds the spatial index up to which the table is trustworthy (``None``
    when the table is exact, as for explicit Fourier input).
    """

    n: int
    N: int
    M: float
    omega0: np.ndarray
    gamma: float
    epsilon: float
    v_hat: np.ndarray
    jx_resolved: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega0 = np.atleast_1d(np.asarray(self.omega0, dtype=float))
        self.v_hat = np.asarray(self.v_hat, dtype=complex)
        if self.v_hat.ndim != self.n + 1:
            raise ConfigError(f"v_hat must have {self.n + 1} axes")

    @property
    def Jx(self):
        return self.v_hat.shape[0] - 1

    @property
    def K_pot(self):
        return self.v_hat.shape[1] // 2

    def validate(self, tol=1e-12):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if len(self.omega0) != self.n:
            raise ConfigError("omega0 must have n entries")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.N < 80 * self.n:
            warnings.warn(f"smoothness N={self.N} is below 80*n={80 * self.n}",
                          stacklevel=2)
        flip = (slice(None),) + (slice(None, None, -1),) * self.n
        defect = np.max(np.abs(self.v_hat - np.conj(self.v_hat[flip])), initial=0.0)
        scale = max(1.0, float(np.max(np.abs(self.v_hat), initial=0.0)))
        if defect > tol * scale:
            raise ConfigError(f"potential is not real: reality defect {defect:.2e}")
        return self

    def decay_proxy(self):
        """``sum_j j^(2N) sup_k |v_hat_j(k)|^2`` on the stored table (finite by construction)."""
        sup = np.abs(self.v_hat).reshape(self.Jx + 1, -1).max(axis=1)
        j = np.arange(self.Jx + 1, dtype=float)
        with np.errstate(over="ignore"):
            return float(np.sum(j ** (2 * self.N) * sup ** 2))

    def evaluate(self, theta, x):
        """Direct evaluation of W at angles ``theta`` (shape ``(..., n)``) and points ``x``."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        ks = lattice(self.n, self.K_pot)
        phases = np.exp(1j * theta @ ks.T)
        v = np.einsum("tm,jm->tj", phases, self.v_hat.reshape(self.Jx + 1, -1)).real
        cos = np.cos(2 * np.outer(np.arange(self.Jx + 1), np.atleast_1d(x)))
        return v @ cos

    def with_epsilon(self, epsilon):
        return PotentialSpec(self.n, self.N, self.M, self.omega0.copy(), self.gamma,
                             float(epsilon), self.v_hat.copy(), self.jx_resolved,
                             dict(self.meta))

    @classmethod
    def from_modes(cls, n, N, M, omega0, gamma, epsilon, modes, jx_resolved=None):
        """Build from a list of ``(j, k_vector, re, im)`` entries.

        Entries whose conjugate partner (same j, -k) is missing get it filled in.
        """
        entries = []
        for row in modes:
            j, k, re, im = row
            k = tuple(int(x) for x in np.atleast_1d(k))
            if len(k) != n:
                raise ConfigError(f"mode {k} does not have n={n} components")
            if int(j) < 0:
                raise ConfigError(f"negative spatial index j={j}")
            entries.append((int(j), k, complex(float(re), float(im))))
        Jx = max((e[0] for e in entries), default=0)
        Kp = max((sum(abs(x) for x in e[1]) for e in entries), default=0)
        table = np.zeros((Jx + 1,) + (2 * Kp + 1,) * n, dtype=complex)
        given = set()
        for j, k, val in entries:
            table[(j,) + tuple(x + Kp for x in k)] += val
            given.add((j, k))
        for j, k, val in entries:
            neg = tuple(-x for x in k)
            if (j, neg) not in given:
                table[(j,) + tuple(x + Kp for x in neg)] += np.conj(val)
        return cls(n, N, M, omega0, gamma, epsilon, table, jx_resolved)

    @classmethod
    def from_grid(cls, n, N, M, omega0, gamma, epsilon, samples, K_pot=None, Jx=None):
        """Project samples on a (theta, x) lattice onto the cosine/Fourier basis.

        ``samples`` has shape ``(m_1, ..., m_n, n_x)``: theta_i = 2 pi a / m_i and
        midpoints ``x_p = pi (p + 1/2) / n_x``.  The spatial index is resolved up
        to ``n_x // 2``; theta modes are kept for ``|k|_1 <= K_pot``.
        """
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != n + 1:
            raise ConfigError(f"grid must have {n + 1} axes, got {samples.ndim}")
        m = samples.shape[:n]
        nx = samples.shape[n]
        jx_res = nx // 2
        Jx = jx_res if Jx is None else min(int(Jx), jx_res)
        K_pot = (min(m) - 1) // 2 if K_pot is None else int(K_pot)
        if K_pot > (min(m) - 1) // 2:
            raise ConfigError("K_pot exceeds what the theta grid resolves")
        x = np.pi * (np.arange(nx) + 0.5) / nx
        j = np.arange(Jx + 1)
        basis = np.cos(2 * np.outer(j, x)) * (2.0 / nx)
        basis[0] *= 0.5
        v_theta = np.tensordot(samples, basis, axes=([n], [1]))  # (m..., Jx+1)
        spec = np.fft.fftn(v_theta, axes=tuple(range(n))) / float(np.prod(m))
        table = np.zeros((Jx + 1,) + (2 * K_pot + 1,) * n, dtype=complex)
        for k in lattice(n, K_pot):
            if np.abs(k).sum() > K_pot:
                continue
            src = tuple(int(ki) % mi for ki, mi in zip(k, m))
            table[(slice(None),) + tuple(int(ki) + K_pot for ki in k)] = spec[src]
        flip = (slice(None),) + (slice(None, None, -1),) * n
        table = 0.5 * (table + np.conj(table[flip]))
        return cls(n, N, M, omega0, gamma, epsilon, table, jx_resolved=jx_res)


def desk_potential(epsilon=1e-3, N=80, M=0.0, gamma=0.1, K_pot=4, amplitude=1.0):
    """The standard one-frequency test potential.

    ``W(theta, x) = (0.2 + 0.5 cos theta) + 0.8 g(theta) cos 2x`` with
    ``g(theta) = sum_{k=1}^{K_pot} k^(-(N+1)) cos(k theta)``, a finite-smooth
    profile of class C^(N-1+).
    """
    modes = [(0, (0,), 0.2 * amplitude, 0.0), (0, (1,), 0.25 * amplitude, 0.0)]
    for k in range(1, K_pot + 1):
        modes.append((1, (k,), 0.4 * amplitude * float(k) ** (-(N + 1)), 0.0))
    spec = PotentialSpec.from_modes(1, N, M, [1.0], gamma, epsilon, modes)
    spec.meta["name"] = "desk"
    return spec


def _check_resolution(spec, J):
    if spec.jx_resolved is not None and spec.jx_resolved < J:
        raise UnderResolvedPotential(
            f"Galerkin dimension J={J} needs cosine modes up to j={J}, "
            f"but the potential only resolves j<={spec.jx_resolved}"
        )


def assemble_R(spec, J, strip=0.0):
    """Galerkin matrix ``R(theta)`` with ``R_hat(k)[k', l'] = sum_j c_{j l' k'} v_hat_j(k)``."""
    if J < 1:
        raise ValueError("J must be >= 1")
    _check_resolution(spec, J)
    j_use = min(spec.Jx, J)
    c = coupling_tensor(j_use, J)
    table = spec.v_hat[: j_use + 1]
    coeffs = np.tensordot(table, c, axes=([0], [0]))  # (box..., J, J)
    return FourierMatrix(coeffs, strip=strip, symmetric=True)


def coupling_tail_norm(spec, J, N=0, s=0.0):
    """Certified size of the dropped coupling ``rows <= J``, ``columns > J``."""
    _check_resolution(spec, J)
    extra = 2 * spec.Jx
    if extra == 0:
        return 0.0
    full = assemble_R(PotentialSpec(spec.n, spec.N, spec.M, spec.omega0, spec.gamma,
                                    spec.epsilon, spec.v_hat), J + extra, strip=s)
    block = full.coeffs[..., :J, J:]
    w = np.arange(1, J + extra + 1, dtype=float) ** N
    scaled = block * (w[:J, None] / w[None, J:])
    flat = scaled.reshape(-1, J, extra)
    norms = np.linalg.norm(flat, ord=2, axis=(1, 2))
    absk = np.abs(full.modes()).sum(axis=1)
    return float(np.sum(norms * np.exp(absk * s)))


def operator_matrix(spec, J, theta):
    """Full truncated generator ``Lambda + eps R(theta)`` at the given angles."""
    R = assemble_R(spec, J)
    lam = np.arange(1, J + 1, dtype=float) ** 2 + spec.M
    return np.diag(lam) + spec.epsilon * R.evaluate(theta)


__all__ = [
    "PotentialSpec",
    "assemble_R",
    "coupling_coefficient",
    "coupling_tail_norm",
    "coupling_tensor",
    "desk_potential",
    "diophantine_check",
    "mode_norms",
    "operator_matrix",
]
