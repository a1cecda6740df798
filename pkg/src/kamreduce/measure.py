"""Retained parameter sets and the excision of small-divisor resonances.

For the frequency ``omega = tau * omega0`` with ``tau`` in [1, 2], step ``m``
removes every ``tau`` at which

    | -<k, omega0> tau + lambda_i(tau) - lambda_j(tau) | < (|i-j|+1) gamma_m / |k|^(n+3)

for ``|k| <= K_m``.  The frequencies ``lambda`` are known at a working point
``tau*`` as value and derivative; away from ``tau*`` they are modelled by the
tangent line and the removed sets are widened by ``|d lambda_ij / d tau| |tau - tau*|``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyRetainedSet
from .fourier import lattice

TAU_MIN, TAU_MAX = 1.0, 2.0


class ParamSet:
    """Finite union of disjoint closed intervals inside [1, 2]."""

    def __init__(self, intervals=((TAU_MIN, TAU_MAX),)):
        cleaned = []
        for a, b in sorted((float(a), float(b)) for a, b in intervals):
            a, b = max(a, TAU_MIN), min(b, TAU_MAX)
            if b <= a:
                continue
            if cleaned and a <= cleaned[-1][1]:
                cleaned[-1] = (cleaned[-1][0], max(b, cleaned[-1][1]))
            else:
                cleaned.append((a, b))
        self.intervals = tuple(cleaned)
        self.measure = float(sum(b - a for a, b in self.intervals))

    def __contains__(self, tau):
        return any(a <= tau <= b for a, b in self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __repr__(self):
        return f"ParamSet(pieces={len(self)}, measure={self.measure:.6f})"

    def __eq__(self, other):
        return isinstance(other, ParamSet) and self.intervals == other.intervals

    def is_subset_of(self, other):
        return all(any(c <= a and b <= d for c, d in other.intervals)
                   for a, b in self.intervals)

    def subtract(self, removed):
        """Remove a collection of open intervals."""
        removed = sorted((float(a), float(b)) for a, b in removed if b > a)
        merged = []
        for a, b in removed:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        out = []
        r = 0
        for a, b in self.intervals:
            cur = a
            while r < len(merged) and merged[r][1] <= cur:
                r += 1
            q = r
            while q < len(merged) and merged[q][0] < b:
                lo, hi = merged[q]
                if lo > cur:
                    out.append((cur, lo))
                cur = max(cur, hi)
                if hi >= b:
                    break
                q += 1
            if cur < b:
                out.append((cur, b))
        return ParamSet(out)

    def longest(self):
        if not self.intervals:
            raise EmptyRetainedSet("retained set is empty")
        return max(self.intervals, key=lambda ab: ab[1] - ab[0])

    def midpoint_of_longest(self):
        a, b = self.longest()
        return 0.5 * (a + b)

    def sample(self, count, rng):
        """Uniform samples from the set (by length)."""
        if self.measure <= 0:
            raise EmptyRetainedSet("cannot sample from an empty set")
        lengths = np.array([b - a for a, b in self.intervals])
        u = rng.uniform(0.0, self.measure, size=count)
        edges = np.concatenate([[0.0], np.cumsum(lengths)])
        idx = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, len(lengths) - 1)
        starts = np.array([a for a, _ in self.intervals])
        return starts[idx] + (u - edges[idx])

    def interval_containing(self, tau):
        for a, b in self.intervals:
            if a <= tau <= b:
                return (a, b)
        return None

    def to_csv(self, step=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for a, b in self.intervals:
            writer.writerow(([step] if step is not None else []) + [repr(a), repr(b)])
        return buf.getvalue()


@dataclass
class DivisorModel:
    """``d(tau) = slope * tau + offset`` with uncertainty ``lip * |tau - tau_ref|``."""

    k: tuple
    i: int
    j: int
    slope: float
    offset: float
    lip: float
    tau_ref: float

    def __call__(self, tau):
        return self.slope * np.asarray(tau) + self.offset

    def derivative_bounds(self):
        """Certified range of d'(tau) consistent with the model."""
        return self.slope - self.lip, self.slope + self.lip


def divisor_function(k, i, j, lam, omega0):
    """Model of ``tau -> -<k, omega0> tau + lambda_i(tau) - lambda_j(tau)``.

    ``lam`` is a :class:`~kamreduce.engine.DiagonalFrequencies`; indices are
    1-based.
    """
    k = tuple(int(x) for x in np.atleast_1d(k))
    a = -float(np.dot(k, omega0))
    vals, ders = lam.values(), lam.derivatives()
    gap = vals[i - 1] - vals[j - 1]
    dgap = ders[i - 1] - ders[j - 1]
    base = lam.base[i - 1] - lam.base[j - 1]
    delta = gap - base
    slope = a + dgap
    offset = base + delta - dgap * lam.tau
    return DivisorModel(k, i, j, slope, offset, abs(dgap), lam.tau)


def thresholds(absk, i_minus_j, gamma_m, n):
    """``(|i-j|+1) gamma_m / A_k`` with ``A_k = |k|^(n+3)`` (and ``A_0 = 1``)."""
    A = np.where(absk > 0, np.asarray(absk, float) ** (n + 3), 1.0)
    return (np.abs(i_minus_j) + 1.0) * gamma_m / A


def _solve_linear(c, r, want_less):
    """Solution set of ``c * tau < r`` (or ``>``) as arrays ``(lo, hi)``."""
    lo = np.full(c.shape, -np.inf)
    hi = np.full(c.shape, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = r / c
    if not want_less:
        c, r = -c, -r
    pos, neg, zero = c > 0, c < 0, c == 0
    hi = np.where(pos, root, hi)
    lo = np.where(neg, root, lo)
    empty = zero & ~(r > 0)
    lo = np.where(empty, np.inf, lo)
    hi = np.where(empty, -np.inf, hi)
    return lo, hi


def sublevel_intervals(slope, offset, lip, tau_ref, thr, lo=TAU_MIN, hi=TAU_MAX):
    """Open sets ``{tau : |slope tau + offset| < thr + lip |tau - tau_ref|}``.

    Vectorized over arrays; returns two ``(lo, hi)`` pairs (right and left of
    ``tau_ref``), empty where ``lo >= hi``.
    """
    slope, offset, lip, thr = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (slope, offset, lip, thr)))
    sides = []
    for side in (+1, -1):
        # band = side * lip * (tau - tau_ref) on this side
        l = side * lip
        a_lo, a_hi = _solve_linear(slope - l, thr - offset - l * tau_ref, True)
        b_lo, b_hi = _solve_linear(slope + l, -thr - offset + l * tau_ref, False)
        s_lo = np.maximum(a_lo, b_lo)
        s_hi = np.minimum(a_hi, b_hi)
        exact = lip == 0  # no band: one side covers the whole range
        if side > 0:
            s_lo = np.maximum(s_lo, np.where(exact, lo, max(tau_ref, lo)))
            s_hi = np.minimum(s_hi, hi)
        else:
            s_lo = np.maximum(s_lo, lo)
            s_hi = np.minimum(s_hi, np.where(exact, -np.inf, min(tau_ref, hi)))
        sides.append((s_lo, s_hi))
    return sides


@dataclass
class ExcisionResult:
    retained: ParamSet
    excluded_measure: float
    witnesses: list = field(default_factory=list)
    diagonal_verified: bool = True
    pairs_examined: int = 0

    def witnesses_jsonl(self, step=None):
        lines = []
        for w in self.witnesses:
            rec = dict(w)
            if step is not None:
                rec = {"step": step, **rec}
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


def excise(Pi, lam, omega0, K, gamma_m, n=None, floor=0.0):
    """Remove the resonance sets of one step from ``Pi``.

    Returns an :class:`ExcisionResult` with the new set, the lost measure and
    one witness record ``{k, i, j, interval, threshold}`` per removed interval.
    """
    omega0 = np.atleast_1d(np.asarray(omega0, dtype=float))
    n = len(omega0) if n is None else n
    if Pi.measure <= 0:
        raise EmptyRetainedSet("cannot excise from an empty set")
    J = len(lam.base)
    vals, ders = lam.values(), lam.derivatives()
    tau_ref = lam.tau

    ks = lattice(n, K)
    absk = np.abs(ks).sum(axis=1)
    ks, absk = ks[absk <= K], absk[absk <= K]
    kw = -(ks @ omega0)  # slope contribution per k for the divisor -<k,omega> + lambda_i - lambda_j

    # i == j, k != 0: empty whenever the Diophantine bound covers gamma_m / A_k
    nonzero = absk > 0
    diag_thr = thresholds(absk[nonzero], 0, gamma_m, n)
    diagonal_verified = bool(np.all(np.abs(kw[nonzero]) * TAU_MIN >= diag_thr))

    ii, jj = np.meshgrid(np.arange(J), np.arange(J), indexing="ij")
    off = ii != jj
    ii, jj = ii[off], jj[off]
    gap = vals[ii] - vals[jj]
    dgap = ders[ii] - ders[jj]
    slope = kw[:, None] + dgap[None, :]
    offset = np.broadcast_to(gap - dgap * tau_ref, slope.shape)
    lip = np.broadcast_to(np.abs(dgap), slope.shape)
    thr = thresholds(absk[:, None], (ii - jj)[None, :], gamma_m, n)
    thr = np.broadcast_to(thr, slope.shape)

    removed = []
    witnesses = []
    for s_lo, s_hi in sublevel_intervals(slope, offset, lip, tau_ref, thr):
        hit = s_hi > s_lo
        for a, b in zip(*np.nonzero(hit)):
            lo_, hi_ = float(s_lo[a, b]), float(s_hi[a, b])
            removed.append((lo_, hi_))
            witnesses.append({
                "k": [int(x) for x in ks[a]],
                "i": int(ii[b]) + 1,
                "j": int(jj[b]) + 1,
                "interval": [lo_, hi_],
                "threshold": float(thr[a, b]),
            })

    if not diagonal_verified:
        for a in np.nonzero(nonzero)[0]:
            t = thresholds(absk[a], 0, gamma_m, n)
            for s_lo, s_hi in sublevel_intervals(kw[a], 0.0, 0.0, tau_ref, t):
                if s_hi > s_lo:
                    for i in range(1, J + 1):
                        removed.append((float(s_lo), float(s_hi)))
                        witnesses.append({"k": [int(x) for x in ks[a]], "i": i, "j": i,
                                          "interval": [float(s_lo), float(s_hi)],
                                          "threshold": float(t)})

    new = Pi.subtract(removed)
    kept = [w for w in witnesses if _overlaps(Pi, w["interval"])]
    kept.sort(key=lambda w: (w["interval"][0], w["interval"][1], w["k"], w["i"], w["j"]))
    if new.measure < floor:
        raise EmptyRetainedSet(
            f"retained measure {new.measure:.3e} below floor {floor:.3e}")
    return ExcisionResult(new, Pi.measure - new.measure, kept, diagonal_verified,
                          int(slope.size))


def _overlaps(Pi, interval):
    a, b = interval
    return any(a < d and b > c for c, d in Pi.intervals)


def excluded_indicator(taus, lam, omega0, K, gamma_m, n=None):
    """Pointwise membership in the removed set, by direct evaluation.

    Independent of the interval arithmetic in :func:`excise`; used as the
    brute-force referee.
    """
    omega0 = np.atleast_1d(np.asarray(omega0, dtype=float))
    n = len(omega0) if n is None else n
    taus = np.asarray(taus, dtype=float)
    J = len(lam.base)
    vals, ders = lam.values(), lam.derivatives()
    out = np.zeros(taus.shape, dtype=bool)
    for k in lattice(n, K):
        ak = int(np.abs(k).sum())
        if ak > K:
            continue
        a = -float(k @ omega0)
        for i in range(J):
            for j in range(J):
                if i == j and ak == 0:
                    continue
                g = vals[i] - vals[j]
                dg = ders[i] - ders[j]
                d = a * taus + g + dg * (taus - lam.tau)
                t = (abs(i - j) + 1) * gamma_m / (ak ** (n + 3) if ak else 1.0)
                out |= np.abs(d) < t + abs(dg) * np.abs(taus - lam.tau)
    return out
