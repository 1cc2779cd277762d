"""Event-driven r-inelastic hard-sphere flow for three spheres.

Spheres have unit diameter and unit mass.  Between collisions they move in
straight lines; at contact the normal relative velocity of the colliding pair
is multiplied by ``-r`` and everything else is left alone.

The same code runs in double precision or, when ``run`` is given a
``precision`` in bits, in gmpy2 ``mpfr`` arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import gmpy2

from .core import (PAIRS, TOL, CollapseLabError, InvalidArgument, SystemState, VecD, as_restitution,
                   axpy, dot, norm, norm2, sqrt, sub)


class TripleCollision(CollapseLabError):
    pass


class GrazingCollision(CollapseLabError):
    pass


class ContactError(CollapseLabError, ValueError):
    pass


class PreconditionError(CollapseLabError, ValueError):
    pass


class FlightOverrun(CollapseLabError, ValueError):
    pass


TERMINATIONS = ("max-collisions", "max-time", "collapse-detected", "separation",
                "triple-collision", "grazing", "precision-exhausted")


@dataclass(frozen=True)
class CollisionEvent:
    index: int  # 1-based collision counter
    time: object
    pair: tuple[int, int]
    eta_pre: object
    eta_post: object
    zeta: object
    tau: object


@dataclass(frozen=True)
class CollapseCriteria:
    """Finite-run stand-in for an accumulation of collision times.

    Collapse is declared once the last ``window`` ratios of consecutive flight
    times are all <= ``rho_max`` and the geometric tail bound
    ``tau_n * rho / (1 - rho)`` is below ``horizon_eps``.  Nothing is declared
    before ``min_events`` collisions have been logged.
    """

    window: int = 64
    rho_max: float = 0.999
    horizon_eps: float = 1e-9
    min_events: int = 0

    def check(self, taus) -> bool:
        n = len(taus)
        if n < max(self.window + 1, self.min_events):
            return False
        tail = taus[n - self.window - 1:]
        rho = max(tail[k + 1] / tail[k] for k in range(self.window))
        if not rho <= self.rho_max:
            return False
        return taus[-1] * rho / (1 - rho) < self.horizon_eps


@dataclass(frozen=True)
class Limits:
    max_collisions: int = 1000
    max_time: Optional[float] = None
    collapse: Optional[CollapseCriteria] = field(default_factory=CollapseCriteria)


@dataclass(frozen=True)
class SimulationOutcome:
    events: tuple[CollisionEvent, ...]
    final_state: SystemState
    termination: str
    states: Optional[tuple[SystemState, ...]] = None  # initial state, then the state after each event
    detail: str = ""
    precision: Optional[int] = None


class NextCollision(NamedTuple):
    dt: object
    pair: tuple[int, int]
    time: object


# --------------------------------------------------------------------------


def kinetic_energy(state: SystemState):
    return sum(norm2(v) for v in state.velocities) / 2


def momentum(state: SystemState) -> VecD:
    v0, v1, v2 = state.velocities
    return tuple(a + b + c for a, b, c in zip(v0, v1, v2))


def _pair_quadratic(state: SystemState, i: int, j: int):
    """Coefficients of |dx + s dv|^2 - 1 = a s^2 + 2 b s + c for the pair (i, j)."""
    dx = sub(state.positions[j], state.positions[i])
    dv = sub(state.velocities[j], state.velocities[i])
    return norm2(dv), dot(dx, dv), norm2(dx) - 1


def pair_zeta(state: SystemState, pair) -> object:
    """Zhou-Kadanoff parameter of ``pair`` read off the absolute state (a c / b^2)."""
    a, b, c = _pair_quadratic(state, *pair)
    return a * c / (b * b)


def _candidates(state: SystemState):
    out = []
    for pair in PAIRS:
        a, b, c = _pair_quadratic(state, *pair)
        if not b < 0:
            continue
        if c <= 0:
            out.append((c * 0, pair, 0 * c, c))
            continue
        disc = b * b - a * c
        if disc < 0:
            continue
        dt = c / (sqrt(disc) - b)
        out.append((dt, pair, disc / (b * b), c))
    out.sort(key=lambda item: item[0])
    return out


def next_collision(state: SystemState, tol=TOL) -> Optional[NextCollision]:
    """Earliest future collision, or None if every pair separates for ever.

    Raises TripleCollision when the two earliest collision times agree to a
    relative ``triple_tol``, and GrazingCollision when the discriminant of the
    selected root is within a relative ``grazing_tol`` of zero.
    """
    cands = _candidates(state)
    if not cands:
        return None
    dt, pair, rel_disc, _ = cands[0]
    if len(cands) > 1:
        dt2, pair2 = cands[1][0], cands[1][1]
        if dt2 - dt <= tol.triple_tol * dt2:
            raise TripleCollision(f"pairs {pair} and {pair2} collide within {float(dt2 - dt)!r}")
    if dt > 0 and rel_disc < tol.grazing_tol:
        raise GrazingCollision(f"pair {pair} grazes (relative discriminant {float(rel_disc)!r})")
    return NextCollision(dt, pair, state.t + dt)


def free_flight(state: SystemState, dt, tol=TOL) -> SystemState:
    if dt < 0:
        raise InvalidArgument(f"dt must be >= 0, got {dt!r}")
    if dt == 0:
        return state
    xs = tuple(axpy(dt, v, x) for x, v in zip(state.positions, state.velocities))
    for i, j in PAIRS:
        if norm(sub(xs[j], xs[i])) < 1 - tol.overlap_tol:
            raise FlightOverrun(f"free flight of {dt!r} makes spheres {i} and {j} overlap")
    return state.replace(positions=xs, t=state.t + dt)


def _collide(state: SystemState, pair, r, tol=TOL):
    i, j = pair
    dx = sub(state.positions[j], state.positions[i])
    dist = norm(dx)
    if abs(dist - 1) > tol.contact_tol:
        raise ContactError(f"pair {pair} is not in contact (distance {float(dist)!r})")
    omega = tuple(x / dist for x in dx)
    vi, vj = state.velocities[i], state.velocities[j]
    eta = dot(sub(vj, vi), omega)
    if not eta < 0:
        raise PreconditionError(f"pair {pair} is not approaching (eta = {float(eta)!r})")
    k = (1 + r) / 2 * eta
    vs = list(state.velocities)
    vs[i] = axpy(k, omega, vi)
    vs[j] = axpy(-k, omega, vj)
    new = state.replace(velocities=tuple(vs))
    eta_post = dot(sub(vs[j], vs[i]), omega)
    return new, eta, eta_post


def apply_collision(state: SystemState, pair, r) -> SystemState:
    """Collision rule v_i' = v_i - (1+r)/2 ((v_i - v_j).w) w, and symmetrically for j."""
    r = as_restitution(r).r
    pair = tuple(sorted(pair))
    if pair not in PAIRS:
        raise InvalidArgument(f"unknown pair {pair!r}")
    return _collide(state, pair, r)[0]


def run(state: SystemState, r, limits: Limits = Limits(), *, precision: Optional[int] = None,
        record_states: bool = True, tol=TOL) -> SimulationOutcome:
    """Alternate next_collision / free_flight / apply_collision until a limit is hit.

    With ``precision`` (bits) the whole run, including the returned states and
    events, uses mpfr numbers at that precision.
    """
    r = as_restitution(r).r
    if precision is None:
        return _run(state.as_float(), r, limits, record_states, tol, None)
    with gmpy2.context(gmpy2.get_context(), precision=int(precision)):
        return _run(state.as_mpfr(), gmpy2.mpfr(r), limits, record_states, tol, int(precision))


def _run(state, r, limits, record_states, tol, precision):
    state.validate(tol.overlap_tol)
    eps = 2.0 ** (1 - precision) if precision else 2.0 ** -52
    events: list[CollisionEvent] = []
    states = [state] if record_states else None
    taus = []
    termination, detail = "max-collisions", ""
    while True:
        if len(events) >= limits.max_collisions:
            termination = "max-collisions"
            break
        try:
            nc = next_collision(state, tol)
        except TripleCollision as exc:
            termination, detail = "triple-collision", str(exc)
            break
        except GrazingCollision as exc:
            termination, detail = "grazing", str(exc)
            break
        if nc is None:
            termination = "separation"
            break
        a, b, c = _pair_quadratic(state, *nc.pair)
        if c <= 16 * eps or not nc.time > state.t:
            termination = "precision-exhausted"
            detail = f"gap of pair {nc.pair} is below the working precision"
            break
        if limits.max_time is not None and nc.time > limits.max_time:
            termination = "max-time"
            break
        zeta = a * c / (b * b)
        try:
            moved = free_flight(state, nc.dt, tol)
            state, eta_pre, eta_post = _collide(moved, nc.pair, r, tol)
        except (FlightOverrun, ContactError, PreconditionError) as exc:
            termination, detail = "precision-exhausted", str(exc)
            break
        taus.append(nc.dt)
        events.append(CollisionEvent(len(events) + 1, state.t, nc.pair, eta_pre, eta_post, zeta, nc.dt))
        if record_states:
            states.append(state)
        if limits.collapse is not None and limits.collapse.check(taus):
            termination = "collapse-detected"
            break
    return SimulationOutcome(tuple(events), state, termination,
                             tuple(states) if record_states else None, detail, precision)


def energy_drop(r, eta):
    """Kinetic energy lost in one collision with normal relative velocity ``eta``."""
    return (1 - r * r) / 4 * eta * eta


__all__ = [
    "CollisionEvent", "CollapseCriteria", "Limits", "SimulationOutcome", "NextCollision", "TERMINATIONS",
    "TripleCollision", "GrazingCollision", "ContactError", "PreconditionError", "FlightOverrun",
    "kinetic_energy", "momentum", "next_collision", "apply_collision", "free_flight", "run", "pair_zeta",
    "energy_drop",
]
