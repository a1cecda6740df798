"""Per-step sizes, strips, Fourier cutoffs and Diophantine constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ScheduleError

GROWTH = 4.0 / 3.0


@dataclass(frozen=True)
class IterationSchedule:
    """Schedule for ``max_steps`` steps.

    ``eps[nu] = epsilon ** (4/3)**nu`` and the strip ``strips[nu]`` is
    proportional to ``eps[nu+1] ** (1/N)``.  The raw strips are rescaled by a
    common factor so that ``strips[0] <= 1/2`` (``clamp_active`` records whether
    this happened); rescaling rather than clipping keeps them strictly
    decreasing.  ``cutoffs[nu] = ceil(10 (4/3)**nu |ln eps| / strips[nu])``.

    Arrays ``eps`` and ``strips`` run over ``nu = 0 .. max_steps + 1``; the last
    strip is where the final generator is certified.
    """

    epsilon: float
    N: int
    gamma: float
    max_steps: int
    eps: np.ndarray
    strips: np.ndarray
    cutoffs: np.ndarray
    gammas: np.ndarray
    strip_scale: float
    clamp_active: bool
    decay_margins: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, epsilon, N, gamma, max_steps, strict=False, reference_epsilon=1e-3):
        """Construct the schedule.

        ``epsilon = 0`` is allowed: sizes are all zero and strips/cutoffs are
        taken from ``reference_epsilon`` so downstream bookkeeping stays finite.
        """
        epsilon = float(epsilon)
        if not 0 <= epsilon < 1:
            raise ScheduleError(f"epsilon must lie in [0, 1), got {epsilon}")
        if N <= 0:
            raise ScheduleError("N must be positive")
        if max_steps < 1:
            raise ScheduleError("max_steps must be >= 1")
        if not 0 < gamma < 1:
            raise ScheduleError("gamma must lie in (0, 1)")
        e_geom = epsilon if epsilon > 0 else float(reference_epsilon)
        nus = np.arange(max_steps + 2)
        powers = GROWTH ** nus
        eps_geom = e_geom ** powers
        eps = epsilon ** powers if epsilon > 0 else np.zeros(len(nus))

        raw = np.append(eps_geom[1:], e_geom ** (GROWTH ** (max_steps + 2))) ** (1.0 / N)
        scale = min(1.0, 0.5 / raw[0])
        strips = raw * scale
        log_eps = abs(math.log(e_geom))
        cutoffs = np.array([math.ceil(10.0 * powers[v] * log_eps / strips[v]) for v in nus],
                           dtype=np.int64)
        gammas = gamma / 2.0 ** nus

        gaps = strips[:-1] - strips[1:]
        decay = -cutoffs[:-1] * gaps
        margins = decay - 1.5 * np.log(eps_geom[:-1])  # <= 0 means the decay invariant holds
        out = cls(epsilon, int(N), float(gamma), int(max_steps), eps, strips, cutoffs,
                  gammas, float(scale), bool(scale < 1.0), margins)
        out.check(strict)
        return out

    def check(self, strict=False):
        """Verify monotonicity; the tail-decay invariant is enforced only if ``strict``."""
        if self.epsilon > 0 and not np.all(np.diff(self.eps) < 0):
            raise ScheduleError("eps sequence is not strictly decreasing")
        if not np.all(np.diff(self.strips) < 0):
            raise ScheduleError("strips are not strictly decreasing")
        if not np.all(np.diff(self.cutoffs) > 0):
            raise ScheduleError("cutoffs are not strictly increasing")
        if strict:
            bad = np.nonzero(self.decay_margins > 0)[0]
            if bad.size:
                nu = int(bad[0])
                raise ScheduleError(
                    f"tail decay exp(-K(s-s')) exceeds eps^1.5 at step {nu} "
                    f"by a factor exp({self.decay_margins[nu]:.3g})")
        return self

    @property
    def decay_invariant_holds(self):
        return bool(np.all(self.decay_margins <= 0))

    def budget(self, nu, C1, C2):
        """Growth-shaped constant ``C(nu) = C1 * 2**(C2 nu)``."""
        return float(C1) * 2.0 ** (float(C2) * nu)

    def as_dict(self):
        return {
            "epsilon": self.epsilon,
            "N": self.N,
            "gamma": self.gamma,
            "max_steps": self.max_steps,
            "eps": [float(x) for x in self.eps],
            "strips": [float(x) for x in self.strips],
            "cutoffs": [int(x) for x in self.cutoffs],
            "gammas": [float(x) for x in self.gammas],
            "strip_scale": self.strip_scale,
            "clamp_active": self.clamp_active,
            "decay_invariant_holds": self.decay_invariant_holds,
        }


def fit_growth_constants(values):
    """Fit ``C(nu) = C1 2**(C2 nu)`` to measured per-step constants (least squares in log)."""
    values = np.asarray([v for v in values], dtype=float)
    nus = np.arange(len(values), dtype=float)
    pos = values > 0
    if pos.sum() == 0:
        return 0.0, 0.0
    if pos.sum() == 1:
        return float(values[pos][0]), 0.0
    slope, icpt = np.polyfit(nus[pos], np.log2(values[pos]), 1)
    # shift the intercept so the fitted curve dominates every sample
    icpt += max(0.0, float(np.max(np.log2(values[pos]) - (slope * nus[pos] + icpt))))
    return float(2.0 ** icpt), float(slope)
