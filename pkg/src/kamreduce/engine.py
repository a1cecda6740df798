"""Step driver: solve, transform, update frequencies, assemble the next remainder.

State bookkeeping.  After ``m`` steps the generator is

    Lambda^(m) + sum_{l >= m} eps_l R_l^(m)

with normalized pieces ``R_l^(m)`` certified on strips ``s_l``.  Step ``m``
removes the piece ``R_m^(m)`` up to its diagonal mean, and everything new it
creates (quadratic terms and the Fourier tail) is divided by ``eps_{m+1}`` and
added to piece ``m + 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (BoundViolation, ConfigError, NoConvergence,
                         ResonanceViolation)
from .fourier import FourierMatrix, commutator, truncation, weighted_norm
from .homological import (DiagonalFrequencies, diagonal_update,
                          homological_residual, solve_homological)
from .measure import ParamSet, excise
from .potential import assemble_R, diophantine_check
from .schedule import IterationSchedule, fit_growth_constants
from .smoothing import decompose
from .transform import build_transform, compose, conjugate_oracle

logger = logging.getLogger(__name__)

MAX_SERIES_TERMS = 50


@dataclass(frozen=True)
class ReductionSettings:
    """Numerical knobs of a reduction run."""

    J: int = 16
    max_steps: int = 4
    target_residual: float = 1e-12
    norm_order: int = 1
    slack: float = 10.0
    C1: float | None = None
    C2: float = 1.0
    strict_schedule: bool = False
    measure_floor: float = 1e-3
    lie_tol_factor: float = 1e-2
    flow_tol_cap: float = 1e-13
    homological_tol: float = 1e-10
    max_tau_retries: int = 5
    cross_check: bool = False
    diophantine_kmax: int = 20

    def validate(self):
        if self.J < 1:
            raise ConfigError("J must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.target_residual <= 0:
            raise ConfigError("target_residual must be positive")
        if self.slack < 1:
            raise ConfigError("slack must be >= 1")
        if self.norm_order < 0:
            raise ConfigError("norm_order must be >= 0")
        return self


@dataclass(frozen=True)
class StepContext:
    spec: object
    schedule: IterationSchedule
    settings: ReductionSettings
    C1: float
    C2: float

    @property
    def omega0(self):
        return self.spec.omega0

    def C(self, nu):
        return self.schedule.budget(nu, self.C1, self.C2)

    def K_keep(self, m):
        return int(self.schedule.cutoffs[m] + self.spec.K_pot)


@dataclass(frozen=True)
class ReductionState:
    """Immutable snapshot between steps."""

    m: int
    tau: float
    lam: DiagonalFrequencies
    pieces: dict
    retained: ParamSet
    transforms: tuple = ()
    log: tuple = ()
    witnesses: tuple = ()
    truncation_slack: float = 0.0

    def remainder_norm(self, ctx):
        """Certified size of everything not yet removed."""
        total = 0.0
        N = ctx.settings.norm_order
        for l, piece in self.pieces.items():
            if l >= self.m:
                total += ctx.schedule.eps[l] * weighted_norm(piece, N, piece.strip)
        return float(total + self.truncation_slack)


@dataclass
class TransformChain:
    """Per-step generators and maps ``u = G_0(theta) ... G_m(theta) v``."""

    transforms: list
    K_keep: int | None = None
    _composed: FourierMatrix | None = field(default=None, repr=False)

    @property
    def generators(self):
        return [t.F for t in self.transforms]

    @property
    def maps(self):
        return [t.G for t in self.transforms]

    def __len__(self):
        return len(self.transforms)

    def composed(self):
        if self._composed is None:
            self._composed, _ = compose(self.maps, self.K_keep)
        return self._composed

    def matrix(self, theta):
        return self.composed().evaluate(np.atleast_2d(theta))

    def apply(self, theta, v):
        """``u = G(theta) v`` for angles of shape ``(T, n)`` and ``v`` of shape ``(T, J)``."""
        G = self.composed().evaluate(np.atleast_2d(theta))
        return np.einsum("tij,tj->ti", G, np.atleast_2d(v))

    def apply_inverse(self, theta, u):
        """``v = G(theta)^* u``; exact inverse for real angles (unitary maps)."""
        G = self.composed().evaluate(np.atleast_2d(theta))
        return np.einsum("tji,tj->ti", np.conj(G), np.atleast_2d(u))


@dataclass
class ReductionResult:
    xi: np.ndarray
    chain: TransformChain
    step_log: list
    retained: ParamSet
    retained_history: list
    witnesses: list
    schedule: IterationSchedule
    settings: ReductionSettings
    tau: float
    lam: DiagonalFrequencies
    remainder: float
    C1: float
    C2: float
    fitted_C1: float
    fitted_C2: float
    tau_attempts: list
    spec: object = None

    @property
    def xi_constant(self):
        """``max |xi_k| / eps``: the measured constant of the multiplier bound."""
        eps = self.schedule.epsilon
        return float(np.max(np.abs(self.xi)) / eps) if eps > 0 else 0.0

    @property
    def steps(self):
        return len(self.step_log)

    def measure_constant(self):
        """Smallest ``C`` with per-step loss ``<= C gamma_m``."""
        losses = [e["excluded_measure"] / e["gamma_m"] for e in self.step_log if e["gamma_m"] > 0]
        return float(max(losses, default=0.0))

    def to_dict(self):
        return {
            "tau": self.tau,
            "omega": [float(self.tau * w) for w in self.spec.omega0] if self.spec is not None else None,
            "xi": [float(x) for x in self.xi],
            "xi_constant": self.xi_constant,
            "lambda_final": [float(x) for x in self.lam.values()],
            "remainder": self.remainder,
            "steps": self.steps,
            "C1": self.C1,
            "C2": self.C2,
            "fitted_C1": self.fitted_C1,
            "fitted_C2": self.fitted_C2,
            "retained_measure": self.retained.measure,
            "retained_intervals": len(self.retained),
            "measure_constant": self.measure_constant(),
            "tau_attempts": list(self.tau_attempts),
            "schedule": self.schedule.as_dict(),
            "step_log": list(self.step_log),
        }


# -- series helpers ------------------------------------------------------------

def _lie_tail(Z, X, shift, tol, K_keep, N, scale=1.0):
    """``sum_{p >= 1} ad^p(Z) / (p + shift)!`` with ``ad(W) = [W, X]``.

    ``shift = 0`` gives the conjugation series ``exp(-X) Z exp(X) - Z``;
    ``shift = 1`` gives the drift series.  Summation stops once
    ``scale * ||term||`` drops below ``tol``.
    Returns ``(sum, terms_used, truncation_tail)``.
    """
    term = Z
    total = None
    dropped = 0.0
    for p in range(1, MAX_SERIES_TERMS + 1):
        term, t = commutator(term, X, K_keep, N)
        term = term * (1.0 / (p + shift))
        dropped += t / (p + shift)
        total = term if total is None else total + term
        size = abs(scale) * weighted_norm(term, N, term.strip) if term.support() >= 0 else 0.0
        if size < tol:
            return total, p, dropped
    raise NoConvergence(f"Lie series did not reach {tol:.1e} within {MAX_SERIES_TERMS} terms")


def _norm(A, N):
    if A is None or A.support() < 0:
        return 0.0
    return weighted_norm(A, N, A.strip)


def assemble_remainder(state, R, F, eps_m, ctx):
    """Collect every term of the conjugated generator beyond ``Lambda + eps_m [R]``.

    Returns the new piece dictionary (indices ``> m``), diagnostics, and the
    certified truncation slack created by dropped Fourier modes.
    """
    m = state.m
    sch, st = ctx.schedule, ctx.settings
    N = st.norm_order
    eps_next = float(sch.eps[m + 1])
    tol = eps_next ** 2 * st.lie_tol_factor
    K_keep = ctx.K_keep(m)
    s_next = float(sch.strips[m + 1])
    X = F * (1j * eps_m)
    n, J = R.n, R.J
    zero = FourierMatrix.zeros(n, J, 0, s_next)

    # (i) Fourier tail left untouched by the solve
    _, high = truncation(R, int(sch.cutoffs[m]))
    tail = high * eps_m
    # (ii) drift + diagonal part: Y = [Lambda, X] - i omega.dX = eps_m ([R] - Gamma R)
    low, _ = truncation(R, int(sch.cutoffs[m]))
    Y = (low.diagonal_mean() - low) * eps_m
    slack = 0.0
    diag = {"series_terms": {}}
    if eps_m == 0 or F.support() < 0:
        double = bracket = None
    else:
        double, p2, d2 = _lie_tail(Y, X, 1, tol, K_keep, N)
        bracket, p3, d3 = _lie_tail(R * eps_m, X, 0, tol, K_keep, N)
        slack += d2 + d3
        diag["series_terms"].update(double=p2, bracket=p3)

    tail_n, double_n, bracket_n = _norm(tail, N), _norm(double, N), _norm(bracket, N)
    C = ctx.C
    if tail_n > st.slack * eps_m ** 2 * C(m) and eps_m > 0:
        raise BoundViolation("fourier_tail", tail_n, st.slack * eps_m ** 2 * C(m), m)
    for name, val in (("double_bracket", double_n), ("bracket", bracket_n)):
        if val > st.slack * C(m + 1) * eps_next:
            raise BoundViolation(name, val, st.slack * C(m + 1) * eps_next, m)

    new_content = tail.with_strip(s_next)
    for extra in (double, bracket):
        if extra is not None:
            new_content = new_content + extra.with_strip(s_next)

    pieces = {}
    for l in sorted(state.pieces):
        if l <= m:
            continue
        piece = state.pieces[l]
        if eps_m > 0 and F.support() >= 0 and piece.support() >= 0:
            conj, p, d = _lie_tail(piece, X, 0, tol, K_keep, N, scale=sch.eps[l])
            slack += d * sch.eps[l]
            diag["series_terms"][f"piece_{l}"] = p
            if conj is not None:
                piece = piece + conj
        pieces[l] = piece.with_strip(sch.strips[l])

    actual_new = _norm(new_content, N)
    if eps_next > 0:
        target = pieces.get(m + 1, zero.with_strip(s_next))
        pieces[m + 1] = (target + new_content * (1.0 / eps_next)).with_strip(s_next)
    for l, piece in pieces.items():
        size = _norm(piece, N)
        if size > st.slack * C(l):
            raise BoundViolation(f"piece_{l}", size, st.slack * C(l), m)
    diag.update(tail=tail_n, double=double_n, bracket=bracket_n, new_content=actual_new)
    return pieces, diag, slack


def kam_step(state, ctx):
    """One full reduction cycle; returns the next :class:`ReductionState`."""
    m = state.m
    sch, st, spec = ctx.schedule, ctx.settings, ctx.spec
    N = st.norm_order
    eps_m = float(sch.eps[m])
    eps_next = float(sch.eps[m + 1])
    K_m = int(sch.cutoffs[m])
    gamma_m = float(sch.gammas[m])
    omega0 = spec.omega0
    omega = state.tau * omega0
    R = state.pieces[m]

    exc = excise(state.retained, state.lam, omega0, K_m, gamma_m, spec.n, st.measure_floor)
    if state.tau not in exc.retained:
        w = _witness_for(exc.witnesses, state.tau)
        err = ResonanceViolation(w["k"], w["i"], w["j"], _divisor_at(state, w, omega0),
                                 w["threshold"],
                                 f"tau={state.tau!r} lies in removed interval {w['interval']} at step {m}")
        err.retained = exc.retained
        err.step = m
        err.step_log = list(state.log)
        raise err

    sol = solve_homological(R, state.lam, omega, K_m, gamma_m, omega0, strip=sch.strips[m + 1])
    F = sol.F
    res = homological_residual(F, R, state.lam, omega, K_m)
    if res > st.homological_tol:
        raise BoundViolation("homological_residual", res, st.homological_tol, m)

    flow_tol = min(eps_next ** 2 * st.lie_tol_factor, st.flow_tol_cap) if eps_next > 0 else st.flow_tol_cap
    tr = build_transform(F, eps_m, flow_tol, ctx.K_keep(m), N, bound=eps_m ** 0.5, step=m)
    lam_next = diagonal_update(state.lam, R, eps_m)
    pieces, diag, slack = assemble_remainder(state, R, F, eps_m, ctx)

    oracle_gap = None
    if st.cross_check and eps_m > 0:
        oracle_gap = oracle_discrepancy(state, R, tr, pieces, ctx)

    new_state = ReductionState(m + 1, state.tau, lam_next, pieces, exc.retained,
                               state.transforms + (tr,), state.log,
                               state.witnesses + (exc.witnesses,),
                               state.truncation_slack + slack + tr.truncation_tail)
    entry = {
        "m": m,
        "eps_m": eps_m,
        "s_m": float(sch.strips[m]),
        "K_m": K_m,
        "gamma_m": gamma_m,
        "norm_Rmm": _norm(R, N),
        "norm_F": _norm(F, N),
        "divisor_min": sol.divisor_min,
        "norm_Psi_minus_id": tr.distance,
        "remainder_budget": ctx.C(m + 1) * eps_next,
        "remainder_actual": diag["new_content"],
        "remainder_total": float(new_state.remainder_norm(ctx)),
        "excluded_measure": exc.excluded_measure,
        "retained_measure": exc.retained.measure,
        "homological_residual": res,
        "flow_terms": tr.terms,
        "tail_norm": diag["tail"],
        "double_bracket_norm": diag["double"],
        "bracket_norm": diag["bracket"],
        "mu_max": float(np.max(np.abs(lam_next.mus[-1]))) if lam_next.mus else 0.0,
        "C_m": ctx.C(m),
        "oracle_gap": oracle_gap,
    }
    logger.info("step %d: remainder %.3e, |G-id| %.3e", m, entry["remainder_total"], tr.distance)
    return replace(new_state, log=state.log + (entry,))


def oracle_discrepancy(state, R, tr, pieces, ctx):
    """Distance between the Lie-series result and direct conjugation.

    Returns ``(gap, tolerance)`` in the unweighted norm on real angles.
    """
    m = state.m
    sch = ctx.schedule
    K_keep = None
    eps_m = float(sch.eps[m])
    A = R * eps_m
    for l, piece in state.pieces.items():
        if l > m:
            A = A + piece * float(sch.eps[l])
    omega = state.tau * ctx.omega0
    direct = conjugate_oracle(A, tr.G, omega, state.lam.values(), K_keep, 0,
                              include_lambda=False)
    lie = R.diagonal_mean() * eps_m
    for l, piece in pieces.items():
        lie = lie + piece * float(sch.eps[l])
    gap = weighted_norm((direct - lie).with_strip(0.0), 0, 0.0)
    eps_next = float(sch.eps[m + 1])
    lam_max = float(np.max(np.abs(state.lam.values())))
    tol = 10 * (eps_next ** 2 * ctx.settings.lie_tol_factor) * (len(pieces) + 2) \
        + 1e-14 * lam_max * max(1.0, tr.distance) * 100
    return {"gap": gap, "tolerance": tol}


def _witness_for(witnesses, tau):
    for w in witnesses:
        a, b = w["interval"]
        if a < tau < b:
            return w
    # tau sits on a boundary shared by open removed intervals
    best = min(witnesses, key=lambda w: min(abs(tau - w["interval"][0]), abs(tau - w["interval"][1])))
    return best


def _divisor_at(state, w, omega0):
    k = np.asarray(w["k"], dtype=float)
    vals = state.lam.values()
    return float(-np.dot(k, omega0) * state.tau + vals[w["i"] - 1] - vals[w["j"] - 1])


def initial_state(spec, tau, ctx):
    sch, st = ctx.schedule, ctx.settings
    R = assemble_R(spec, st.J)
    L = st.max_steps
    ladder = decompose(R, sch.strips[: L + 1], st.norm_order)
    pieces = {}
    for l, piece in enumerate(ladder.pieces):
        if spec.epsilon > 0:
            pieces[l] = piece * (spec.epsilon / float(sch.eps[l]))
        else:
            pieces[l] = FourierMatrix.zeros(spec.n, st.J, 0, float(sch.strips[l]))
        pieces[l] = pieces[l].with_strip(float(sch.strips[l]))
    lam = DiagonalFrequencies.initial(st.J, spec.M, tau)
    return ReductionState(0, float(tau), lam, pieces, ParamSet())


def default_C1(spec, settings):
    """``10 max(1, ||R||)`` measured on the strip of the first piece."""
    R = assemble_R(spec, settings.J)
    return 10.0 * max(1.0, weighted_norm(R.with_strip(0.5), settings.norm_order, 0.5))


def make_context(spec, settings):
    settings.validate()
    spec.validate()
    ok, worst_k, worst = diophantine_check(spec.omega0, spec.gamma, spec.n, settings.diophantine_kmax)
    if not ok:
        raise ConfigError(
            f"omega0 fails the Diophantine check at k={worst_k}: {worst:.3e} < gamma={spec.gamma}")
    sch = IterationSchedule.build(spec.epsilon, spec.N, spec.gamma, settings.max_steps,
                                  settings.strict_schedule)
    C1 = settings.C1 if settings.C1 is not None else default_C1(spec, settings)
    return StepContext(spec, sch, settings, float(C1), float(settings.C2))


def choose_tau(spec, ctx):
    """Midpoint of the longest interval retained by the first excision."""
    lam = DiagonalFrequencies.initial(ctx.settings.J, spec.M, 1.5)
    exc = excise(ParamSet(), lam, spec.omega0, int(ctx.schedule.cutoffs[0]),
                 float(ctx.schedule.gammas[0]), spec.n, ctx.settings.measure_floor)
    return exc.retained.midpoint_of_longest()


def _check_initial_pieces(state, ctx):
    N = ctx.settings.norm_order
    for l, piece in state.pieces.items():
        size = _norm(piece, N)
        if size > ctx.settings.slack * ctx.C(l):
            raise BoundViolation(f"initial_piece_{l}", size, ctx.settings.slack * ctx.C(l), None)


def run_steps(spec, tau, ctx):
    state = initial_state(spec, tau, ctx)
    _check_initial_pieces(state, ctx)
    history = [state.retained]
    while state.m < ctx.settings.max_steps:
        state = kam_step(state, ctx)
        history.append(state.retained)
        if state.remainder_norm(ctx) < ctx.settings.target_residual:
            break
    return state, history


def run(spec, settings=None, tau=None):
    """Reduce the operator ``Lambda + eps R(tau omega0 t)`` to diagonal form.

    ``tau=None`` picks a parameter automatically and retries with a fresh one
    if a later excision removes it; an explicit ``tau`` is never changed.
    """
    settings = settings or ReductionSettings()
    ctx = make_context(spec, settings)
    pinned = tau is not None
    if pinned and not 1.0 <= float(tau) <= 2.0:
        raise ConfigError(f"tau must lie in [1, 2], got {tau}")
    tau = float(tau) if pinned else choose_tau(spec, ctx)
    attempts = []
    while True:
        attempts.append(tau)
        try:
            state, history = run_steps(spec, tau, ctx)
            break
        except ResonanceViolation as err:
            if pinned or len(attempts) > settings.max_tau_retries or not hasattr(err, "retained"):
                raise
            logger.warning("tau=%r excised at step %s; retrying", tau, err.step)
            tau = err.retained.midpoint_of_longest()

    xi = state.lam.corrections()
    chain = TransformChain(list(state.transforms), K_keep=None)
    C_meas = [e["norm_Rmm"] for e in state.log]
    fC1, fC2 = fit_growth_constants(C_meas)
    return ReductionResult(
        xi=xi, chain=chain, step_log=list(state.log), retained=state.retained,
        retained_history=history, witnesses=list(state.witnesses), schedule=ctx.schedule,
        settings=settings, tau=tau, lam=state.lam, remainder=state.remainder_norm(ctx),
        C1=ctx.C1, C2=ctx.C2, fitted_C1=fC1, fitted_C2=fC2, tau_attempts=attempts,
        spec=spec)
