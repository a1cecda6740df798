"""Estimator-style front end: ``fit`` a potential, then map states between frames."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .engine import ReductionSettings, run
from .exceptions import ConfigError
from .potential import PotentialSpec


def check_potential(potential):
    """Validate a potential description and return it."""
    if not isinstance(potential, PotentialSpec):
        raise TypeError(f"expected a PotentialSpec, got {type(potential).__name__}")
    return potential.validate()


def check_tau(tau):
    """``None`` (automatic) or a float in [1, 2]."""
    if tau is None:
        return None
    if not isinstance(tau, numbers.Real) or isinstance(tau, bool):
        raise ConfigError(f"tau must be a real number, got {tau!r}")
    tau = float(tau)
    if not 1.0 <= tau <= 2.0:
        raise ConfigError(f"tau must lie in [1, 2], got {tau}")
    return tau


def check_states(u, J):
    """Coerce to a complex array of shape ``(n_samples, J)``."""
    u = np.asarray(u, dtype=complex)
    if u.ndim == 1:
        u = u[None, :]
    if u.ndim != 2 or u.shape[1] != J:
        raise ValueError(f"states must have shape (n_samples, {J}), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("states contain non-finite values")
    return u


def _check_angles(theta, n_samples, n):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = np.full((n_samples, n), float(theta))
    elif theta.ndim == 1 and n == 1 and theta.shape[0] == n_samples:
        theta = theta[:, None]
    elif theta.ndim == 1 and theta.shape[0] == n:
        theta = np.broadcast_to(theta, (n_samples, n))
    if theta.shape != (n_samples, n):
        raise ValueError(f"angles must have shape ({n_samples}, {n}), got {theta.shape}")
    return theta


class KAMReducer(BaseEstimator, TransformerMixin):
    """Reduce ``i du/dt = (Lambda + eps R(omega t)) u`` to constant diagonal form.

    After :meth:`fit`, ``xi_`` holds the frequency shifts of the reduced
    equation ``i dv/dt = (Lambda + diag(xi)) v`` and ``u = G(omega t) v`` links
    the two.  :meth:`transform` maps states of the original system to the
    reduced frame at given angles; :meth:`predict` evolves an initial state of
    the original system through the reduced flow.

    Parameters
    ----------
    J : int
        Galerkin dimension.
    max_steps : int
        Maximal number of reduction steps.
    tau : float or None
        Frequency scale ``omega = tau * omega0``; ``None`` selects one from the
        retained parameter set.
    target_residual : float
        Stop once the certified remainder falls below this value.
    norm_order : int
        Weight exponent of the norm used for step bookkeeping.
    slack : float
        Factor by which certified norms may exceed their step budgets.
    cross_check : bool
        Compare every step with direct conjugation.
    """

    def __init__(self, J=16, max_steps=4, tau=None, target_residual=1e-12, norm_order=1,
                 slack=10.0, cross_check=False):
        self.J = J
        self.max_steps = max_steps
        self.tau = tau
        self.target_residual = target_residual
        self.norm_order = norm_order
        self.slack = slack
        self.cross_check = cross_check

    def _settings(self):
        return ReductionSettings(J=int(self.J), max_steps=int(self.max_steps),
                                 target_residual=float(self.target_residual),
                                 norm_order=int(self.norm_order), slack=float(self.slack),
                                 cross_check=bool(self.cross_check))

    def fit(self, X, y=None):
        """Run the reduction for the potential ``X``."""
        spec = check_potential(X)
        tau = check_tau(self.tau)
        result = run(spec, self._settings(), tau)
        self.result_ = result
        self.xi_ = result.xi.copy()
        self.chain_ = result.chain
        self.step_log_ = list(result.step_log)
        self.retained_set_ = result.retained
        self.tau_ = result.tau
        self.omega_ = result.tau * spec.omega0
        self.n_steps_ = result.steps
        self.remainder_ = result.remainder
        self.M_ = float(spec.M)
        self.n_features_in_ = int(self.J)
        return self

    def _angles(self, theta, count):
        return _check_angles(theta, count, len(self.omega_))

    def transform(self, X, theta=0.0):
        """Reduced-frame coordinates ``v = G(theta)^-1 u``."""
        check_is_fitted(self, "chain_")
        u = check_states(X, self.J)
        return self.chain_.apply_inverse(self._angles(theta, len(u)), u)

    def inverse_transform(self, X, theta=0.0):
        """Original coordinates ``u = G(theta) v``."""
        check_is_fitted(self, "chain_")
        v = check_states(X, self.J)
        return self.chain_.apply(self._angles(theta, len(v)), v)

    def reduced_frequencies(self):
        check_is_fitted(self, "xi_")
        return np.arange(1, self.J + 1, dtype=float) ** 2 + self.M_ + self.xi_

    def predict(self, X, t=None):
        """Evolve initial states of the original system to time(s) ``t``.

        Returns shape ``(n_samples, J)`` for scalar ``t`` (one time per
        sample when ``t`` has length ``n_samples``), or ``(len(t), J)`` for a
        single initial state and an array of times.
        """
        check_is_fitted(self, "xi_")
        u0 = check_states(X, self.J)
        t = np.zeros(len(u0)) if t is None else np.asarray(t, dtype=float)
        if t.ndim == 0:
            t = np.full(len(u0), float(t))
        if len(u0) == 1 and len(t) > 1:
            u0 = np.repeat(u0, len(t), axis=0)
        if len(t) != len(u0):
            raise ValueError("times and initial states have incompatible lengths")
        v0 = self.transform(u0, 0.0)
        vt = v0 * np.exp(-1j * np.outer(t, self.reduced_frequencies()))
        return self.inverse_transform(vt, np.outer(t, self.omega_))


__all__ = ["KAMReducer", "NotFittedError", "check_potential", "check_tau", "check_states"]
