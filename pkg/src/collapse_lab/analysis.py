"""Classification of collision sequences and finite-run convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import gmpy2
import numpy as np

from .core import PAIRS, is_mp, norm, norm2, scale, sub, to_relative_frame
from .mapping import MapStep


def _pair_of(item) -> tuple[int, int]:
    if hasattr(item, "pair"):
        return tuple(item.pair)
    if isinstance(item, str):
        s = item.strip()
        return (int(s[0]), int(s[1]))
    return tuple(item)


def _working_precision(sample):
    """gmpy2 context at the precision of an mpfr sample (53 bits for floats)."""
    bits = max(53, sample.precision) if is_mp(sample) else 53
    return gmpy2.context(gmpy2.get_context(), precision=bits)


def _log_abs(x) -> float:
    return float(gmpy2.log(abs(x))) if is_mp(x) else math.log(abs(x))


# --------------------------------------------------------------------------
# counting functions and maximal gaps


@dataclass(frozen=True)
class GapReport:
    indices: dict  # pair -> tuple of 1-based event indices (the counting function)
    max_gap: dict  # pair -> int or None when the pair collided fewer than twice
    unbounded: dict  # pair -> True when the still-open trailing gap already exceeds max_gap
    n_events: int

    def gaps(self) -> tuple:
        return tuple(self.max_gap[p] for p in PAIRS)


def counting_functions(events: Sequence) -> GapReport:
    """Counting function and maximal gap of each collision type.

    ``events`` may hold CollisionEvents, pair tuples, or strings like ``"01"``.
    """
    pairs = [_pair_of(e) for e in events]
    n = len(pairs)
    indices = {p: tuple(k + 1 for k, q in enumerate(pairs) if q == p) for p in PAIRS}
    max_gap, unbounded = {}, {}
    for p, idx in indices.items():
        if len(idx) >= 2:
            k = max(b - a for a, b in zip(idx, idx[1:]))
            max_gap[p] = k
            unbounded[p] = (n - idx[-1]) > k
        else:
            max_gap[p] = None
            unbounded[p] = False
    return GapReport(indices, max_gap, unbounded, n)


# --------------------------------------------------------------------------
# order classification


@dataclass(frozen=True)
class CollisionOrder:
    kind: str  # nearly-linear | triangular | finite | undetermined
    period_start_index: Optional[int] = None  # 0-based index of the first event of the periodic tail
    central_particle: Optional[int] = None


def _periodic_start(pairs, period):
    n = len(pairs)
    if n < period:
        return n
    s = n - period
    while s > 0 and pairs[s - 1] == pairs[s - 1 + period]:
        s -= 1
    head = pairs[s:s + period]
    if len(set(head)) != period:
        return n
    return s


def classify_order(events: Sequence, min_periods: int = 10, termination: Optional[str] = None) -> CollisionOrder:
    """Find a periodic tail: 2-cycle (nearly-linear) or 3-cycle over all pairs (triangular)."""
    pairs = [_pair_of(e) for e in events]
    n = len(pairs)
    s2 = _periodic_start(pairs, 2)
    if (n - s2) // 2 >= min_periods:
        a, b = set(pairs[s2]), set(pairs[s2 + 1])
        return CollisionOrder("nearly-linear", s2, (a & b).pop())
    s3 = _periodic_start(pairs, 3)
    if (n - s3) // 3 >= min_periods:
        return CollisionOrder("triangular", s3, None)
    if termination == "separation":
        return CollisionOrder("finite")
    return CollisionOrder("undetermined")


# --------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceReport:
    eta_l2_partial_sums: dict  # pair -> partial sums of eta_pre^2
    tau_partial_sums: tuple
    omega_cauchy_residuals: dict  # pair -> |omega_n - omega_last| over recorded states
    gap_tail: tuple  # gap of the next colliding pair at the start of each of the last flights
    tau_star_estimate: object
    eta_decay_rate: Optional[float] = None


def fit_decay_rate(values: Sequence) -> Optional[float]:
    """exp of the least-squares slope of log|v| against index over the trailing half."""
    vals = [v for v in values if v != 0]
    if len(vals) < 4:
        return None
    tail = vals[len(vals) // 2:]
    y = np.array([_log_abs(v) for v in tail])
    x = np.arange(len(tail), dtype=float)
    slope = np.polyfit(x, y, 1)[0]
    return float(math.exp(slope))


def tau_star_estimates(events: Sequence, window: int = 64) -> list:
    """Running estimate of the accumulation time: t_n plus a geometric tail bound.

    The tail bound uses the largest flight-time ratio over the trailing window
    and only engages once that ratio is below 1.  The previous estimate is kept
    when it is smaller and not yet overtaken by the clock, so the sequence is
    nonincreasing while the ratios stay within their earlier window maxima.
    """
    out = []
    best = None
    for k, ev in enumerate(events):
        est = ev.time
        if k >= 1:
            lo = max(1, k - window + 1)
            rho = max(events[j].tau / events[j - 1].tau for j in range(lo, k + 1))
            if rho < 1:
                est = ev.time + ev.tau * rho / (1 - rho)
                if best is not None and ev.time <= best < est:
                    est = best
                best = est
        out.append(est)
    return out


def convergence_report(events: Sequence, states: Optional[Sequence] = None, tail: int = 50) -> ConvergenceReport:
    if not events:
        raise ValueError("convergence_report needs at least one event")
    with _working_precision(events[0].time):
        return _convergence_report(events, states, tail)


def _convergence_report(events, states, tail):
    sums = {p: [] for p in PAIRS}
    acc = {p: 0 for p in PAIRS}
    for ev in events:
        p = tuple(ev.pair)
        acc[p] = acc[p] + ev.eta_pre * ev.eta_pre
        sums[p].append(acc[p])
    taus, total = [], 0
    for ev in events:
        total = total + ev.tau
        taus.append(total)

    residuals = {p: () for p in PAIRS}
    gap_tail = ()
    if states:
        residuals, gap_tail = _trajectory_residuals(states, events, tail)
    est = tau_star_estimates(events)[-1]
    rate = fit_decay_rate([ev.eta_pre for ev in events])
    return ConvergenceReport({p: tuple(v) for p, v in sums.items()}, tuple(taus), residuals, gap_tail, est, rate)


def _trajectory_residuals(states, events, tail):
    """Direction residuals of every pair and the gap of each colliding pair at flight start."""
    dirs = {p: [] for p in PAIRS}
    for st in states:
        xs = st.positions
        for i, j in PAIRS:
            d = sub(xs[j], xs[i])
            dirs[(i, j)].append(scale(1 / norm(d), d))
    residuals = {p: tuple(norm(sub(w, v[-1])) for w in v) for p, v in dirs.items()}
    gaps = []
    for st, ev in zip(states, events):
        i, j = ev.pair
        gaps.append(norm(sub(st.positions[j], st.positions[i])) - 1)
    gap_tail = tuple(gaps[-tail:])
    return residuals, gap_tail


# --------------------------------------------------------------------------
# Zhou-Kadanoff regime along a trajectory


@dataclass(frozen=True)
class ZkRegimeReport:
    rows: tuple  # (zeta, phi1, phi2) per step
    zeta_nonincreasing: bool
    max_zeta_ratio: Optional[float]


def relative_configs(outcome) -> list:
    """RelativeConfig at every recorded state of a nearly-linear run around particle 0."""
    out = []
    with _working_precision(outcome.states[0].x0[0]):
        for k, st in enumerate(outcome.states):
            if k == 0:
                contact = 1 if outcome.events and tuple(outcome.events[0].pair) == (0, 2) else 2
            else:
                contact = outcome.events[k - 1].pair[1]
            out.append(to_relative_frame(st, 0, contact, 3 - contact))
    return out


def zk_regime_report(steps: Iterable) -> ZkRegimeReport:
    """phi1 = eta1/(-eta2), phi2 = gap/eta2^2 and zeta for each step or RelativeConfig."""
    cfgs = [item.input if isinstance(item, MapStep) else item for item in steps]
    rows = []
    with _working_precision(cfgs[0].gap if cfgs else 0.0):
        for cfg in cfgs:
            e1, e2 = cfg.eta1, cfg.eta2
            g = cfg.gap
            zeta = g * (2 + g) * norm2(cfg.w2) / ((1 + g) ** 2 * e2 * e2)
            rows.append((zeta, e1 / (-e2), g / (e2 * e2)))
    zetas = [row[0] for row in rows]
    ratios = [b / a for a, b in zip(zetas, zetas[1:]) if a != 0]
    nonincreasing = all(b <= a for a, b in zip(zetas, zetas[1:]))
    return ZkRegimeReport(tuple(rows), nonincreasing, float(max(ratios)) if ratios else None)


# --------------------------------------------------------------------------
# asymptotic comparisons along map iterations


def asymptotic_ratios(steps: Sequence[MapStep]) -> dict:
    """Ratios whose boundedness is predicted along collapsing trajectories."""
    out = {k: [] for k in ("gap_prime", "omega1_shift", "w2perp_shift", "tau_over_eta2", "gap_over_eta2_sq")}
    if steps:
        with _working_precision(steps[0].tau):
            _fill_ratios(steps, out)
    return {k: tuple(v) for k, v in out.items()}


def _fill_ratios(steps, out):
    for st in steps:
        cin, cout, tau = st.input, st.output, st.tau
        e1, e2 = cin.eta1, cin.eta2
        w2perp = sub(cin.w2, scale(e2, cin.omega2))
        w2perp_p = sub(cout.w2, scale(st.eta2_post, cout.omega2))
        out["gap_prime"].append(cout.gap / (tau * (e1 + tau)))
        out["omega1_shift"].append(norm(sub(cout.omega1, cin.omega1)) / tau)
        out["w2perp_shift"].append(norm(sub(w2perp_p, w2perp)) / (tau * e2 * e2 + tau * norm2(w2perp)))
        out["tau_over_eta2"].append(tau / (-e2))
        out["gap_over_eta2_sq"].append(cin.gap / (e2 * e2))


def windowed_bounded(values: Sequence, window: int = 128, growth: float = 0.05) -> bool:
    """True when window maxima over the second half never grow by more than ``growth``."""
    vals = [abs(float(v)) for v in values]
    tail = vals[len(vals) // 2:]
    maxima = [max(tail[k:k + window]) for k in range(0, len(tail), window) if tail[k:k + window]]
    return all(b <= (1 + growth) * a for a, b in zip(maxima, maxima[1:]))


__all__ = [
    "GapReport", "CollisionOrder", "ConvergenceReport", "ZkRegimeReport", "counting_functions", "classify_order",
    "convergence_report", "fit_decay_rate", "tau_star_estimates", "zk_regime_report", "relative_configs",
    "asymptotic_ratios", "windowed_bounded",
]
