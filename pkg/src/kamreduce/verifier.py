"""Dynamical checks of a reduction against direct integration.

The truncated equation ``i du/dt = A(omega t) u`` is integrated with a
fourth-order Magnus scheme (two Gauss points plus one commutator).  For a
Hermitian generator every step is the exponential of an anti-Hermitian
matrix, computed through ``eigh``, so unitarity is structural rather than
enforced by renormalization.  Step sizes are chosen by step doubling.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import IntegratorError
from .potential import assemble_R

SQRT3 = math.sqrt(3.0)
GAUSS = (0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0)


class Generator:
    """``A(t) = diag(lam) + eps R(omega t) + shift * I`` evaluated from a few modes."""

    def __init__(self, lam, R=None, eps=0.0, omega=None, shift=0.0):
        self.lam = np.asarray(lam, dtype=float)
        self.J = len(self.lam)
        self.shift = complex(shift)
        self.base = np.diag(self.lam).astype(complex) + self.shift * np.eye(self.J)
        self.hermitian = self.shift.imag == 0
        if R is None or eps == 0 or R.support() < 0:
            self.ks = np.zeros((0, 1))
            self.mats = np.zeros((0, self.J, self.J), dtype=complex)
        else:
            flat = R.flat()
            keep = np.any(flat != 0, axis=(1, 2))
            self.ks = R.modes()[keep].astype(float)
            self.mats = eps * flat[keep]
        self.omega = np.zeros(self.ks.shape[1]) if omega is None else np.atleast_1d(omega)

    def __call__(self, t):
        if not len(self.mats):
            return self.base.copy()
        phases = np.exp(1j * (self.ks @ (self.omega * t)))
        return self.base + np.tensordot(phases, self.mats, axes=(0, 0))


def _expm_step(A1, A2, h, hermitian):
    """Propagator of one Magnus-4 step for ``i du/dt = A u``."""
    # Omega = -i h/2 (A1 + A2) + (sqrt3/12) h^2 [A1, A2]
    comm = A1 @ A2 - A2 @ A1
    if hermitian:
        # i Omega = h/2 (A1 + A2) + i (sqrt3/12) h^2 [A1, A2] is Hermitian
        H = 0.5 * h * (A1 + A2) + 1j * (SQRT3 / 12.0) * h * h * comm
        H = 0.5 * (H + H.conj().T)
        mu, V = np.linalg.eigh(H)
        return (V * np.exp(-1j * mu)) @ V.conj().T
    Om = -0.5j * h * (A1 + A2) + (SQRT3 / 12.0) * h * h * comm
    return scipy.linalg.expm(Om)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    N: int
    info: dict = field(default_factory=dict)

    @property
    def log_norms(self):
        return log_sobolev_norm(self.states, self.N)

    @property
    def norms(self):
        """``h_N`` norms relative to the first sample (absolute values may overflow)."""
        ln = self.log_norms
        return np.exp(ln - ln[0])

    def l2_norms(self):
        return np.linalg.norm(self.states, axis=1)

    def to_csv(self, J_export=None):
        J = self.states.shape[1] if J_export is None else min(J_export, self.states.shape[1])
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["t"]
        for k in range(1, J + 1):
            header += [f"re_u{k}", f"im_u{k}"]
        writer.writerow(header)
        for t, u in zip(self.times, self.states):
            row = [repr(float(t))]
            for z in u[:J]:
                row += [repr(float(z.real)), repr(float(z.imag))]
            writer.writerow(row)
        return buf.getvalue()


def log_sobolev_norm(states, N):
    """``log ||u||_N`` with ``||u||_N^2 = sum_j j^(2N) |u_j|^2`` (overflow-safe)."""
    states = np.atleast_2d(states)
    J = states.shape[-1]
    logw = N * np.log(np.arange(1, J + 1, dtype=float))
    top = logw.max()
    scaled = np.abs(states) * np.exp(logw - top)
    with np.errstate(divide="ignore"):
        return top + np.log(np.linalg.norm(scaled, axis=-1))


def sobolev_norm(u, N):
    return float(np.exp(log_sobolev_norm(u, N)[0]))


def integrate(generator, u0, T, tol=1e-10, samples=1000, t0=0.0, h0=None, h_min=1e-9, N=0):
    """Integrate ``i du/dt = A(t) u`` from ``t0`` to ``t0 + T`` (``T`` may be negative).

    The local error estimate from step doubling is kept below ``tol * |h|``,
    so the accumulated error is of order ``tol * |T|``.
    """
    u = np.asarray(u0, dtype=complex).copy()
    if not np.all(np.isfinite(u)):
        raise IntegratorError("initial state is not finite")
    sign = 1.0 if T >= 0 else -1.0
    times = t0 + np.linspace(0.0, T, samples + 1)
    states = np.empty((len(times), len(u)), dtype=complex)
    states[0] = u
    h = abs(h0) if h0 else min(0.05, abs(T) / samples if T else 0.05)
    t = t0
    herm = generator.hermitian
    accepted = rejected = 0
    err_sum = 0.0
    for idx in range(1, len(times)):
        target = times[idx]
        while sign * (target - t) > 1e-14 * max(1.0, abs(target)):
            step = min(h, abs(target - t))
            hs = sign * step
            A = [generator(t + c * hs) for c in GAUSS]
            big = _expm_step(A[0], A[1], hs, herm) @ u
            half = 0.5 * hs
            Aa = [generator(t + c * half) for c in GAUSS]
            Ab = [generator(t + half + c * half) for c in GAUSS]
            fine = _expm_step(Ab[0], Ab[1], half, herm) @ (_expm_step(Aa[0], Aa[1], half, herm) @ u)
            scale = max(1.0, float(np.linalg.norm(fine)))
            err = float(np.linalg.norm(fine - big)) / 15.0 / scale
            if err <= tol * step or step <= h_min:
                if step <= h_min and err > tol * step:
                    raise IntegratorError(f"step size underflow at t={t:.6g}")
                u = fine
                t = t + hs
                accepted += 1
                err_sum += err
                grow = 2.0 if err == 0 else min(2.0, 0.9 * (tol * step / err) ** 0.25)
                if step == h or grow < 1.0:
                    h = max(step * grow, h_min)
            else:
                rejected += 1
                h = max(step * max(0.2, 0.9 * (tol * step / err) ** 0.25), h_min)
        states[idx] = u
    info = {"accepted": accepted, "rejected": rejected, "error_estimate": err_sum,
            "tol": tol, "hermitian": herm}
    return Trajectory(times, states, N, info)


def original_generator(spec, tau, J, contamination=0.0):
    R = assemble_R(spec, J)
    lam = np.arange(1, J + 1, dtype=float) ** 2 + spec.M
    return Generator(lam, R, spec.epsilon, tau * spec.omega0, shift=1j * contamination)


def integrate_original(spec, tau, u0, T, tol=1e-10, samples=1000, contamination=0.0, N=None):
    """Integrate the truncated original system at ``omega = tau omega0`` from angle 0."""
    u0 = np.asarray(u0, dtype=complex)
    gen = original_generator(spec, tau, len(u0), contamination)
    return integrate(gen, u0, T, tol, samples, N=spec.N if N is None else N)


def integrate_reduced(xi, M, u0, T, samples=1000, N=0):
    """Closed-form flow ``v_k(t) = v_k(0) exp(-i (k^2 + M + xi_k) t)``."""
    xi = np.asarray(xi, dtype=float)
    J = len(xi)
    freq = np.arange(1, J + 1, dtype=float) ** 2 + M + xi
    times = np.linspace(0.0, T, samples + 1)
    states = np.asarray(u0, dtype=complex)[None, :] * np.exp(-1j * np.outer(times, freq))
    return Trajectory(times, states, N, {"exact": True})


def conjugacy_residual(result, spec, tau, u0, T, tol=1e-10, samples=1000, details=False,
                       N=None):
    """``max_t ||u(t) - G(omega t) v(t)||_N / ||u0||_N`` with ``v(0) = G(0)^-1 u0``."""
    N = spec.N if N is None else N
    u0 = np.asarray(u0, dtype=complex)
    n = spec.n
    chain = result.chain
    theta0 = np.zeros((1, n))
    v0 = chain.apply_inverse(theta0, u0[None, :])[0]
    orig = integrate_original(spec, tau, u0, T, tol, samples, N=N)
    red = integrate_reduced(result.xi, spec.M, v0, T, samples, N)
    thetas = np.outer(orig.times, tau * spec.omega0)
    back = chain.apply(thetas, red.states)
    diff = log_sobolev_norm(orig.states - back, N)
    ref = log_sobolev_norm(u0, N)[0]
    residual = float(np.exp(np.max(diff) - ref))
    if not details:
        return residual
    return residual, {"original": orig, "reduced": red, "integrator_error": orig.info["error_estimate"],
                      "per_time": np.exp(diff - ref)}


def lyapunov_estimate(traj):
    """Slope of ``log ||u(t)||_N`` fitted over the second half of the window."""
    t = traj.times
    half = t >= t[0] + 0.5 * (t[-1] - t[0])
    if half.sum() < 2:
        raise ValueError("trajectory too short for a fit")
    slope, _ = np.polyfit(t[half] - t[half][0], traj.log_norms[half], 1)
    return float(slope)


def sobolev_growth_report(traj, max_ratio=None):
    """Max/min/final ``h_N`` norm (relative to the start) and a power-law growth fit."""
    ln = traj.log_norms
    rel = ln - ln[0]
    t = traj.times
    late = t > t[0] + 0.1 * (t[-1] - t[0])
    if late.sum() >= 2:
        exponent = float(np.polyfit(np.log(t[late] - t[0]), rel[late], 1)[0])
    else:
        exponent = 0.0
    ratio = float(np.exp(rel.max() - rel.min()))
    out = {
        "max": float(np.exp(rel.max())),
        "min": float(np.exp(rel.min())),
        "final": float(np.exp(rel[-1])),
        "ratio": ratio,
        "growth_exponent": exponent,
        "log_norm_initial": float(ln[0]),
    }
    if max_ratio is not None:
        out["bounded"] = bool(ratio <= max_ratio)
    return out


def default_initial_state(J, seed=0):
    """Unit vector with equal moduli and random phases."""
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=J)
    return np.exp(1j * phases) / math.sqrt(J)
