"""Nearly-linear collapse: limiting matrix, Zhou-Kadanoff thresholds, and an
explicit set of initial data that collapses, with a checker for every
inequality the construction relies on.

Labels follow the collision order (0,2), (0,1), (0,2), ...  At the state
right after the n-th collision (n = 0 is the initial datum, where particles 0
and 1 have just collided) the subscript ``s`` is the particle that just
collided and ``c`` the one that collides next.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import gmpy2
import numpy as np
from scipy.optimize import brentq

from .analysis import fit_decay_rate
from .core import (CollapseLabError, InvalidArgument, SystemState, as_restitution, axpy, dot, norm, norm2,
                   scale, sqrt, sub)
from .engine import CollapseCriteria, Limits, SimulationOutcome, run

R_EXISTENCE = 7 - 4 * math.sqrt(3)
R_STABILITY = 9 - 4 * math.sqrt(5)


class NoConstruction(CollapseLabError, ValueError):
    pass


# --------------------------------------------------------------------------
# thresholds


def existence_threshold(r: float) -> float:
    """Smallest -cos(theta) for which a nearly-linear collapse can exist."""
    r = as_restitution(r).r
    return 4 * math.sqrt(r) / (1 + r)


def stability_threshold(r: float) -> float:
    """-cos(theta) above which the nearly-linear collapse is stable."""
    r = as_restitution(r).r
    c = r ** (1 / 3)
    return 2 * c * (1 + c) / (1 + r)


def critical_existence_restitution() -> float:
    return brentq(lambda r: existence_threshold(r) - 1, 1e-6, 0.5, xtol=1e-15, rtol=1e-15)


def critical_stability_restitution() -> float:
    return brentq(lambda r: stability_threshold(r) - 1, 1e-6, 0.5, xtol=1e-15, rtol=1e-15)


# --------------------------------------------------------------------------
# limiting 2x2 matrix


@dataclass(frozen=True)
class LimitMatrix2:
    r: float
    cos_theta_bar: float
    entries: tuple
    eigenvalues: tuple
    spectral_radius: float

    @property
    def trace(self) -> float:
        return self.entries[1][1]

    @property
    def det(self) -> float:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)


def limit_matrix(r: float, cos_theta_bar: float) -> LimitMatrix2:
    """A = [[0, -r], [1, -(1+r)/2 cos(theta_bar)]] acting on (eta_s, eta_c)."""
    r = as_restitution(r).r
    if not -1 <= cos_theta_bar < 0:
        raise InvalidArgument(f"cos_theta_bar must lie in [-1, 0), got {cos_theta_bar!r}")
    tr = -(1 + r) / 2 * cos_theta_bar
    disc = tr * tr - 4 * r
    if disc >= 0:
        s = math.sqrt(disc)
        lams = (complex((tr + s) / 2), complex((tr - s) / 2))
    else:
        s = math.sqrt(-disc)
        lams = (complex(tr / 2, s / 2), complex(tr / 2, -s / 2))
    return LimitMatrix2(r, cos_theta_bar, ((0.0, -r), (1.0, tr)), lams, max(abs(z) for z in lams))


def homography_fixed_points(alpha0: float, r: float) -> tuple[float, float]:
    """Fixed points of phi -> r / (alpha0 - phi); only the smaller one attracts."""
    r = as_restitution(r).r
    disc = alpha0 * alpha0 - 4 * r
    if not disc > 0:
        raise NoConstruction(f"alpha0^2 > 4r fails: alpha0^2 = {alpha0 * alpha0!r}, 4r = {4 * r!r}")
    s = math.sqrt(disc)
    phi_plus = (alpha0 + s) / 2
    phi_minus = r / phi_plus  # product of the roots is r; avoids cancellation
    if not r / (alpha0 - phi_minus) ** 2 < 1:
        raise NoConstruction("the smaller fixed point is not attracting")
    return phi_minus, phi_plus


def homography(phi, alpha0, r):
    return r / (alpha0 - phi)


# --------------------------------------------------------------------------
# explicit construction


@dataclass(frozen=True)
class ZkConstruction:
    r: float
    cos_theta0: float
    delta_theta: float
    alpha0: float
    phi_minus: float
    phi_plus: float
    delta1: float
    delta2: float
    delta3: float
    delta4: float
    delta5: float
    h4: float
    h5: float
    C_eta: float
    V0: float
    V1: float
    delta_x: float
    delta_y: float
    x0_bound: float
    dtheta_bound: float
    eta_bar: float
    zeta_bar: float
    d_bar_candidates: tuple  # the four constant entries of the d_bar minimum
    d_bar_coefficient: float  # d_bar(e) also contains d_bar_coefficient * e^2

    @property
    def theta0(self) -> float:
        return math.acos(self.cos_theta0)

    def d_bar(self, minus_eta_c0) -> float:
        e = float(minus_eta_c0)
        return min(*self.d_bar_candidates, self.d_bar_coefficient * e * e)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["d_bar_candidates"] = list(self.d_bar_candidates)
        return d


def build_construction(r: float, theta0: Optional[float] = None, delta_theta: float = 0.05, *,
                       cos_theta0: Optional[float] = None, V0: float = 1.0) -> ZkConstruction:
    """Every constant of the explicit collapse construction for (r, theta0, delta_theta).

    Admissible inputs: 0 < r < 9 - 4 sqrt(5) and
    2 r^(1/3) (1 + r^(1/3)) / (1 + r) < -cos(theta0) <= 1.
    """
    if (theta0 is None) == (cos_theta0 is None):
        raise InvalidArgument("give exactly one of theta0 and cos_theta0")
    c0 = math.cos(theta0) if cos_theta0 is None else float(cos_theta0)
    if not 0 < r < R_STABILITY:
        raise NoConstruction(f"0 < r < 9-4*sqrt(5) = {R_STABILITY:.8f} fails for r = {r!r}")
    if not -1 <= c0 < 0:
        raise NoConstruction(f"-1 <= cos(theta0) < 0 fails for cos(theta0) = {c0!r}")
    thr = stability_threshold(r)
    if not -c0 > thr:
        raise NoConstruction(
            f"-cos(theta0) > 2r^(1/3)(1+r^(1/3))/(1+r) = {thr:.6f} fails for -cos(theta0) = {-c0!r}")
    if not delta_theta > 0:
        raise NoConstruction(f"delta_theta > 0 fails for delta_theta = {delta_theta!r}")
    if not V0 > 0:
        raise InvalidArgument("V0 must be positive")

    alpha0 = (1 + r) / 2 * (-c0)
    phi_m, phi_p = homography_fixed_points(alpha0, r)
    gap = alpha0 - phi_m  # equals phi_p
    delta1 = alpha0 / 2 - phi_m
    delta2 = gap / 2
    delta3 = (1 - gap) / 2
    C_eta = 1 - delta3
    h4 = (1 - r / gap ** 2) / 2
    delta4 = gap - math.sqrt(r / (1 - h4))
    h5 = (1 - phi_m / gap ** 2) / 2
    delta5 = gap - math.sqrt(phi_m / (1 - h5))
    V1 = V0 * (1 - h5 / 2) / (1 - h5)
    delta_x = min(delta1, delta2, delta3, delta4, delta5)
    delta_y = delta_x
    x0 = min((1 - h4) * delta_x, (V0 / V1) * delta2 ** 2 * h5 / 12)
    dtheta = min(abs(c0) / 2, h4 / 8 * delta_x, delta_theta)
    sV1 = math.sqrt(V1)
    eta_bar = min(
        1.0,
        (math.sqrt(2) - 1) / 16 * V0 / sV1,
        V0 / (33 * sV1) * dtheta,
        (1 - C_eta) * (V1 - V0) / (12 * (sV1 + 2)),
        V0 / sV1 * (2 / (15 * alpha0) + h4 * delta2 / 6 + h4 / (12 * alpha0) + h4 / 24) * delta_x,
    )
    zeta_bar = min(
        2 * (math.sqrt(2) - 1),
        V0 * h5 / (3 * V1 * (alpha0 + 8 * V1 / V0)) * delta2 ** 2,
        (1 + 4 * delta2 + V0 / V1) * h4 * delta_x / 16,
    )
    d_cands = (
        (math.sqrt(2) - 1) / 4,
        dtheta / 3,
        (1 + delta2 * h4) * delta_x / 5,
        (1 + 2 * delta2) * h4 * delta_x / 4,
    )
    zk = ZkConstruction(r, c0, delta_theta, alpha0, phi_m, phi_p, delta1, delta2, delta3, delta4, delta5, h4, h5,
                        C_eta, V0, V1, delta_x, delta_y, x0, dtheta, eta_bar, zeta_bar, d_cands,
                        zeta_bar / (2 * V1))
    for name in ("delta1", "delta2", "delta3", "delta4", "delta5", "h4", "h5", "eta_bar", "zeta_bar", "x0_bound"):
        if not getattr(zk, name) > 0:
            raise NoConstruction(f"{name} > 0 fails ({getattr(zk, name)!r})")
    return zk


# --------------------------------------------------------------------------
# sampling initial data


def required_precision(zk: ZkConstruction, n_collisions: int, d0: Optional[float] = None) -> int:
    """mpfr bits needed to resolve the gaps of ``n_collisions`` collisions."""
    if d0 is None:
        d0 = zk.d_bar(zk.eta_bar / 2) / 2
    per = 1.15 * math.log2(1 / zk.phi_minus)
    bits = math.log2(1 / float(d0)) + per * n_collisions + 160
    return int(math.ceil(bits / 64) * 64)


def _unit(v):
    return scale(1 / norm(v), v)


def _orthonormal_frame(rng, dim, k):
    g = rng.standard_normal((dim, k))
    q, rr = np.linalg.qr(g)
    q = q * np.sign(np.diag(rr))
    basis = []
    for col in q.T:
        v = tuple(gmpy2.mpfr(float(x)) for x in col)
        for b in basis:
            v = axpy(-dot(v, b), b, v)
        basis.append(_unit(v))
    return basis


def _tangent(rng, omega):
    dim = len(omega)
    while True:
        g = tuple(gmpy2.mpfr(float(x)) for x in rng.standard_normal(dim))
        t = axpy(-dot(g, omega), omega, g)
        if norm(t) > 1e-3:
            return _unit(t)


def sample_initial_configuration(zk: ZkConstruction, seed: int, dim: int = 2, *, precision: Optional[int] = None,
                                 n_collisions: int = 500, eta_c0: Optional[float] = None) -> SystemState:
    """A state in the construction's initial set, as mpfr numbers.

    ``eta_c0`` overrides the sampled normal velocity of the 0-2 pair (no
    admissibility check, used to build deliberately bad data).
    """
    if dim < 2:
        raise InvalidArgument("dim must be >= 2")
    rng = np.random.default_rng(seed)
    u = rng.random(5)
    minus_eta_c = zk.eta_bar * (0.5 + 0.5 * u[0]) if eta_c0 is None else -float(eta_c0)
    x = zk.x0_bound * (2 * u[1] - 1)
    d0 = zk.d_bar(minus_eta_c) * (0.5 + 0.5 * u[2])
    lo = zk.V0 + (zk.V1 - zk.V0) / 3
    hi = zk.V1 - (zk.V1 - zk.V0) / 3
    wc2 = lo + (hi - lo) * u[3]
    ws2 = lo + (hi - lo) * u[4]
    bits = precision or required_precision(zk, n_collisions, d0)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        e1, e2 = _orthonormal_frame(rng, dim, 2)
        c0 = gmpy2.mpfr(zk.cos_theta0)
        s0 = sqrt(1 - c0 * c0)
        omega_s = e1
        omega_c = axpy(c0, e1, scale(s0, e2))
        eta_c = -gmpy2.mpfr(minus_eta_c)
        eta_s = gmpy2.mpfr(minus_eta_c) * (gmpy2.mpfr(zk.phi_minus) + gmpy2.mpfr(x))
        t_c = _tangent(rng, omega_c)
        t_s = _tangent(rng, omega_s)
        w_c = axpy(eta_c, omega_c, scale(sqrt(gmpy2.mpfr(wc2) - eta_c * eta_c), t_c))
        w_s = axpy(eta_s, omega_s, scale(sqrt(gmpy2.mpfr(ws2) - eta_s * eta_s), t_s))
        origin = tuple(gmpy2.mpfr(0) for _ in range(dim))
        x2 = scale(1 + gmpy2.mpfr(d0), omega_c)
        return SystemState(dim, origin, omega_s, x2, origin, w_s, w_c, gmpy2.mpfr(0))


def check_initial_configuration(state: SystemState, zk: ZkConstruction, tol: float = 1e-12) -> dict:
    """Re-verify each defining inequality of the initial set from raw positions and velocities."""
    x0, x1, x2 = state.positions
    v0, v1, v2 = state.velocities
    rs, rc = sub(x1, x0), sub(x2, x0)
    ds, dc = norm(rs), norm(rc)
    om_s, om_c = scale(1 / ds, rs), scale(1 / dc, rc)
    w_s, w_c = sub(v1, v0), sub(v2, v0)
    eta_s, eta_c = dot(w_s, om_s), dot(w_c, om_c)
    d0 = dc - 1
    lo = zk.V0 + (zk.V1 - zk.V0) / 3
    hi = zk.V1 - (zk.V1 - zk.V0) / 3
    checks = {
        "contact_01": abs(ds - 1) <= 1e-10,
        "post_collisional_01": eta_s > 0,
        "eta_c0_negative": eta_c < 0,
        "eta_c0_bound": -eta_c <= zk.eta_bar,
        "ratio_bound": eta_c < 0 and abs(eta_s / (-eta_c) - zk.phi_minus) <= zk.x0_bound,
        "gap_bound": 0 < d0 <= zk.d_bar(-eta_c),
        "norm_c": lo <= norm2(w_c) <= hi,
        "norm_s": lo <= norm2(w_s) <= hi,
        "angle": abs(dot(om_c, om_s) - zk.cos_theta0) <= tol,
    }
    return {k: bool(v) for k, v in checks.items()}


# --------------------------------------------------------------------------
# recursion certificate

CONDITIONS = ("Cnd1", "Cnd2", "Cnd3", "Cnd4", "CndT", "Cnd5", "Cnd6", "Cnd7", "Cnd8", "Cnd9", "Cnd10")


@dataclass(frozen=True)
class RecursionCertificate:
    flags: tuple  # per collision index n: {condition: bool}
    first_violation: Optional[tuple]  # (n, condition)
    x_n: tuple
    y_n: tuple
    zeta_n: tuple
    eta_c_n: tuple
    strengthened_cnd9: tuple  # |x_n| <= (1 - h4/2) delta_x, n >= 1
    zeta_contraction: tuple  # zeta_{n+1} <= (1 - h5/4) zeta_n
    alternation_ok: bool
    final_cos_angle: Optional[float]
    final_angle_ok: Optional[bool]
    n_checked: int

    @property
    def clean(self) -> bool:
        return self.first_violation is None and self.alternation_ok and self.n_checked > 0

    def to_dict(self) -> dict:
        return {
            "n_checked": self.n_checked,
            "clean": self.clean,
            "first_violation": list(self.first_violation) if self.first_violation else None,
            "alternation_ok": self.alternation_ok,
            "all_strengthened_cnd9": all(self.strengthened_cnd9),
            "all_zeta_contraction": all(self.zeta_contraction),
            "final_cos_angle": self.final_cos_angle,
            "final_angle_ok": self.final_angle_ok,
            "violations": {c: sum(1 for f in self.flags if not f[c]) for c in CONDITIONS},
            "x_n": [float(v) for v in self.x_n],
            "y_n": [float(v) for v in self.y_n],
        }


def _labels(n):
    # (colliding next, just collided) at the state after the n-th collision
    return (2, 1) if n % 2 == 0 else (1, 2)


def _snapshot(state: SystemState, n: int) -> dict:
    c, s = _labels(n)
    xs, vs = state.positions, state.velocities
    rc, rs = sub(xs[c], xs[0]), sub(xs[s], xs[0])
    nc, ns = norm(rc), norm(rs)
    om_c, om_s = scale(1 / nc, rc), scale(1 / ns, rs)
    w_c, w_s = sub(vs[c], vs[0]), sub(vs[s], vs[0])
    eta_c, eta_s = dot(w_c, om_c), dot(w_s, om_s)
    d = nc - 1
    wc2 = norm2(w_c)
    zeta = d * (2 + d) * wc2 / ((1 + d) ** 2 * eta_c * eta_c)
    return {
        "c": c, "s": s, "eta_c": eta_c, "eta_s": eta_s, "d": d, "zeta": zeta, "cos": dot(om_c, om_s),
        "wc2": wc2, "ws2": norm2(w_s), "w1sq": norm2(sub(vs[1], vs[0])), "w2sq": norm2(sub(vs[2], vs[0])),
        "p": sub(xs[c], xs[s]), "q": sub(vs[c], vs[s]),
    }


def _min_distance_sq(p, q, tau):
    """min over s in [0, tau] of |p + s q|^2."""
    qq = norm2(q)
    s = 0 * tau
    if qq > 0:
        s = -dot(p, q) / qq
        s = min(max(s, 0 * tau), tau)
    return norm2(axpy(s, q, p))


def verify_recursion(outcome: SimulationOutcome, zk: ZkConstruction) -> RecursionCertificate:
    """Evaluate every recursion inequality of the construction along a run.

    Quantities are recomputed from the recorded engine states.  Violations are
    data: they are recorded, not raised.
    """
    if outcome.states is None:
        raise InvalidArgument("verify_recursion needs a run with recorded states")
    events, states = outcome.events, outcome.states
    expected = [(0, 2) if k % 2 == 0 else (0, 1) for k in range(len(events))]
    n_ok = len(events)
    for k, ev in enumerate(events):
        if tuple(ev.pair) != expected[k]:
            n_ok = k
            break
    alternation_ok = n_ok == len(events)
    ctx = gmpy2.context(gmpy2.get_context(), precision=outcome.precision or 53)
    with ctx:
        snaps = [_snapshot(states[n], n) for n in range(n_ok + 1)]
        C, h4, h5 = zk.C_eta, zk.h4, zk.h5
        sV1 = math.sqrt(zk.V1)
        e20 = -snaps[0]["eta_c"]
        d0 = snaps[0]["d"]
        wc0, ws0 = snaps[0]["wc2"], snaps[0]["ws2"]
        flags, xs, ys, strong, contraction = [], [], [], [], []
        first = None
        geo = 0  # sum_{k=0}^{n-1} C^k
        for n in range(n_ok):
            a, b = snaps[n], snaps[n + 1]
            bound67 = 4 * (sV1 + 2) * geo * e20
            sum8 = C * geo  # sum_{k=1}^{n} C^k
            x_n = a["eta_s"] / (-a["eta_c"]) - zk.phi_minus
            y_n = b["eta_c"] / (-a["eta_c"]) - zk.phi_minus + zk.alpha0
            f = {
                "Cnd1": a["eta_c"] < 0,
                "Cnd2": abs(a["eta_c"]) <= zk.eta_bar and (n == 0 or abs(a["eta_c"]) <= C * abs(snaps[n - 1]["eta_c"])),
                "Cnd3": a["zeta"] < 1,
                "Cnd4": a["zeta"] <= zk.zeta_bar,
                "CndT": _min_distance_sq(a["p"], a["q"], events[n].tau) > 1,
                "Cnd5": zk.V0 <= a["w1sq"] <= zk.V1 and zk.V0 <= a["w2sq"] <= zk.V1,
                "Cnd6": n % 2 == 0 or (a["wc2"] - ws0 <= bound67 and a["ws2"] - wc0 <= bound67),
                "Cnd7": n % 2 == 1 or (a["wc2"] - wc0 <= bound67 and a["ws2"] - ws0 <= bound67),
                "Cnd8": abs(b["cos"] - zk.cos_theta0) <= d0 + 11 * sV1 / zk.V0 * e20
                + sV1 / (zk.V0 * C) * (3 + 11 * C) * sum8 * e20,
                "Cnd9": abs(x_n) <= zk.delta_x,
                "Cnd10": abs(y_n) <= zk.delta_y,
            }
            f = {k: bool(v) for k, v in f.items()}
            flags.append(f)
            if first is None:
                for cond in CONDITIONS:
                    if not f[cond]:
                        first = (n, cond)
                        break
            xs.append(float(x_n))
            ys.append(float(y_n))
            if n >= 1:
                strong.append(bool(abs(x_n) <= (1 - h4 / 2) * zk.delta_x))
            contraction.append(bool(b["zeta"] <= (1 - h5 / 4) * a["zeta"]))
            geo = geo * C + 1
        final_cos = float(snaps[n_ok]["cos"]) if n_ok else None
        final_ok = abs(final_cos - zk.cos_theta0) <= zk.delta_theta if n_ok else None
        zetas = tuple(s["zeta"] for s in snaps)
        etas = tuple(s["eta_c"] for s in snaps)
    return RecursionCertificate(tuple(flags), first, tuple(xs), tuple(ys), zetas, etas, tuple(strong),
                                tuple(contraction), alternation_ok, final_cos, final_ok, n_ok)


# --------------------------------------------------------------------------
# end-to-end helper


@dataclass(frozen=True)
class ConstructionRun:
    state: SystemState
    outcome: SimulationOutcome
    certificate: RecursionCertificate
    precision: int
    eta_decay_rate: Optional[float]


def run_construction(zk: ZkConstruction, seed: int, n_collisions: int = 500, dim: int = 2,
                     precision: Optional[int] = None) -> ConstructionRun:
    """Sample an initial datum, run it for ``n_collisions`` collisions, certify it."""
    guard = 16
    state = sample_initial_configuration(zk, seed, dim, precision=precision, n_collisions=n_collisions + guard)
    bits = precision or state.x0[0].precision
    limits = Limits(max_collisions=n_collisions + guard,
                    collapse=CollapseCriteria(min_events=n_collisions))
    outcome = run(state, zk.r, limits, precision=bits)
    cert = verify_recursion(outcome, zk)
    rate = fit_decay_rate([ev.eta_pre for ev in outcome.events])
    return ConstructionRun(state, outcome, cert, bits, rate)


__all__ = [
    "R_EXISTENCE", "R_STABILITY", "NoConstruction", "existence_threshold", "stability_threshold",
    "critical_existence_restitution", "critical_stability_restitution", "LimitMatrix2", "limit_matrix",
    "homography_fixed_points", "homography", "ZkConstruction", "build_construction", "required_precision",
    "sample_initial_configuration", "check_initial_configuration", "CONDITIONS", "RecursionCertificate",
    "verify_recursion", "ConstructionRun", "run_construction",
]
