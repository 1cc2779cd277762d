"""The single-collision map in the frame of the central particle.

A ``RelativeConfig`` holds particle 1 in contact with the central particle 0
(direction ``omega1``, relative velocity ``w1``) and particle 2 at distance
``1 + gap`` (direction ``omega2``, relative velocity ``w2``).  ``apply_map``
advances to the 0-2 collision and applies the collision rule; ``swap_roles``
relabels so the map can be applied again.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (TOL, CollapseLabError, RelativeConfig, as_restitution, axpy, dot, norm, norm2, scale,
                   sqrt)


class MapDomainError(CollapseLabError, ValueError):
    pass


class NoCollision(CollapseLabError, ValueError):
    pass


class UndefinedParameter(CollapseLabError, ValueError):
    pass


@dataclass(frozen=True)
class ZkParameter:
    zeta: object

    def __float__(self):
        return float(self.zeta)


@dataclass(frozen=True)
class MapStep:
    input: RelativeConfig
    tau: object
    zeta: object
    output: RelativeConfig  # omega1 at distance 1+gap', omega2 in contact
    eta1_post: object
    eta2_post: object
    cos_angle_post: object


def zk_parameter(cfg: RelativeConfig) -> ZkParameter:
    """zeta = gap (2 + gap) |W2|^2 / ((1 + gap)^2 eta2^2)."""
    eta2 = cfg.eta2
    if eta2 == 0:
        raise UndefinedParameter("eta2 = 0: the Zhou-Kadanoff parameter is undefined")
    g = cfg.gap
    return ZkParameter(g * (2 + g) * norm2(cfg.w2) / ((1 + g) ** 2 * eta2 * eta2))


def _tau(gap, eta2, zeta):
    # (1+g)(-eta2)/|W2|^2 * zeta / (1 + sqrt(1 - zeta)), with |W2|^2 cancelled
    return gap * (2 + gap) / ((1 + gap) * (-eta2) * (1 + sqrt(1 - zeta)))


def collision_time(cfg: RelativeConfig):
    """Time until particle 2 touches the central particle, in cancellation-free form."""
    eta2 = cfg.eta2
    if not eta2 < 0:
        raise NoCollision(f"eta2 = {float(eta2)!r} >= 0: particles 0 and 2 never meet")
    zeta = zk_parameter(cfg).zeta
    if not zeta < 1:
        raise NoCollision(f"zeta = {float(zeta)!r} >= 1: particles 0 and 2 miss each other")
    return _tau(cfg.gap, eta2, zeta)


def apply_map(cfg: RelativeConfig, r) -> MapStep:
    """One 0-2 collision with particle 1 as spectator."""
    r = as_restitution(r).r
    eta1, eta2 = cfg.eta1, cfg.eta2
    if not eta1 > 0:
        raise MapDomainError(f"eta1 = {float(eta1)!r} must be positive (0-1 pair post-collisional)")
    if not eta2 < 0:
        raise MapDomainError(f"eta2 = {float(eta2)!r} must be negative (0-2 pair approaching)")
    zeta = zk_parameter(cfg).zeta
    if not zeta < 1:
        raise MapDomainError(f"zeta = {float(zeta)!r} must be < 1")
    g = cfg.gap
    tau = _tau(g, eta2, zeta)
    w1, w2 = cfg.w1, cfg.w2

    omega2p = axpy(tau, w2, scale(1 + g, cfg.omega2))
    omega2p = scale(1 / norm(omega2p), omega2p)
    q = 2 * eta1 * tau + norm2(w1) * tau * tau
    gap_p = q / (1 + sqrt(1 + q))
    omega1p = scale(1 / (1 + gap_p), axpy(tau, w1, cfg.omega1))

    s = dot(w2, omega2p)
    w2p = axpy(-(1 + r) * s, omega2p, w2)
    w1p = axpy(-(1 + r) / 2 * s, omega2p, w1)
    out = RelativeConfig(cfg.dim, omega1p, w1p, gap_p, omega2p, w2p)
    return MapStep(cfg, tau, zeta, out, dot(w1p, omega1p), -r * s, dot(omega1p, omega2p))


def swap_roles(cfg: RelativeConfig) -> RelativeConfig:
    """Exchange the two outer particles: the pair in contact becomes (omega1, w1)."""
    return RelativeConfig(cfg.dim, cfg.omega2, cfg.w2, cfg.gap, cfg.omega1, cfg.w1)


def iterate_map(cfg: RelativeConfig, r, n_steps: int, min_gap: float = TOL.degenerate_gap):
    """Apply map then swap repeatedly.

    Returns ``(steps, outcome)`` where outcome is ``"completed"``,
    ``"degenerate-gap"`` (gap below ``min_gap``) or ``"map-domain"``.
    """
    steps = []
    for _ in range(n_steps):
        if cfg.gap < min_gap:
            return steps, "degenerate-gap"
        try:
            step = apply_map(cfg, r)
        except (MapDomainError, ValueError):
            return steps, "map-domain"
        steps.append(step)
        cfg = swap_roles(step.output)
    return steps, "completed"


def flat_surface_step(eta1, eta2, cos_theta_bar, r):
    """Two-line approximation of the normal components when gaps and flight times vanish."""
    r = as_restitution(r).r
    return eta1 - (1 + r) / 2 * cos_theta_bar * eta2, -r * eta2


__all__ = [
    "ZkParameter", "MapStep", "MapDomainError", "NoCollision", "UndefinedParameter", "zk_parameter",
    "collision_time", "apply_map", "swap_roles", "iterate_map", "flat_surface_step",
]
