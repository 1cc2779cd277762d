"""Vector algebra and shared domain types for three unit spheres.

Vectors are plain tuples so that the same code runs on Python floats and on
gmpy2 ``mpfr`` numbers (used for long collapse runs where doubles cannot
resolve the gaps between particles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import gmpy2

VecD = tuple
Scalar = object  # float or gmpy2.mpfr

_MPFR = type(gmpy2.mpfr(0))


@dataclass(frozen=True)
class Tolerances:
    overlap_tol: float = 1e-12
    unit_tol: float = 1e-12
    contact_tol: float = 1e-10
    triple_tol: float = 1e-13
    grazing_tol: float = 1e-13
    degenerate_gap: float = 1e-15


TOL = Tolerances()


class CollapseLabError(Exception):
    """Base class for every error raised by the library."""


class InvalidArgument(CollapseLabError, ValueError):
    pass


class InvalidState(CollapseLabError, ValueError):
    pass


class FrameError(CollapseLabError, ValueError):
    pass


# --------------------------------------------------------------------------
# scalar and vector helpers


def sqrt(x):
    if isinstance(x, _MPFR):
        return gmpy2.sqrt(x)
    return math.sqrt(x)


def is_mp(x) -> bool:
    return isinstance(x, _MPFR)


def vec(components: Iterable) -> VecD:
    return tuple(components)


def zeros(dim: int) -> VecD:
    return (0.0,) * dim


def add(a: VecD, b: VecD) -> VecD:
    return tuple(x + y for x, y in zip(a, b))


def sub(a: VecD, b: VecD) -> VecD:
    return tuple(x - y for x, y in zip(a, b))


def scale(s, a: VecD) -> VecD:
    return tuple(s * x for x in a)


def axpy(s, a: VecD, b: VecD) -> VecD:
    """Return ``s*a + b``."""
    return tuple(s * x + y for x, y in zip(a, b))


def dot(a: VecD, b: VecD):
    it = iter(zip(a, b))
    x, y = next(it)
    acc = x * y
    for x, y in it:
        acc += x * y
    return acc


def norm2(a: VecD):
    return dot(a, a)


def norm(a: VecD):
    return sqrt(dot(a, a))


def to_float(a: VecD) -> VecD:
    return tuple(float(x) for x in a)


def to_mpfr(a: VecD) -> VecD:
    return tuple(gmpy2.mpfr(x) for x in a)


def _check_unit(omega: VecD, what: str = "omega") -> None:
    if abs(norm(omega) - 1) > TOL.unit_tol:
        raise InvalidArgument(f"{what} is not a unit vector (|{what}| = {float(norm(omega))!r})")


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Restitution:
    """Restitution coefficient ``r`` in the open interval (0, 1)."""

    r: float

    def __post_init__(self):
        r = self.r
        if not (0 < r < 1):
            raise InvalidArgument(f"restitution must satisfy 0 < r < 1, got {r!r}")

    def __float__(self):
        return float(self.r)


def as_restitution(r) -> Restitution:
    return r if isinstance(r, Restitution) else Restitution(r)


@dataclass(frozen=True)
class SystemState:
    """Positions, velocities and clock of the three spheres (diameter 1, unit mass)."""

    dim: int
    x0: VecD
    x1: VecD
    x2: VecD
    v0: VecD
    v1: VecD
    v2: VecD
    t: Scalar = 0.0

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidArgument(f"dim must be >= 2, got {self.dim}")
        for name in ("x0", "x1", "x2", "v0", "v1", "v2"):
            value = tuple(getattr(self, name))
            if len(value) != self.dim:
                raise InvalidArgument(f"{name} has length {len(value)}, expected {self.dim}")
            object.__setattr__(self, name, value)

    @property
    def positions(self) -> tuple[VecD, VecD, VecD]:
        return (self.x0, self.x1, self.x2)

    @property
    def velocities(self) -> tuple[VecD, VecD, VecD]:
        return (self.v0, self.v1, self.v2)

    @classmethod
    def from_lists(cls, positions: Sequence[Sequence], velocities: Sequence[Sequence], t=0.0) -> "SystemState":
        xs = [tuple(p) for p in positions]
        vs = [tuple(v) for v in velocities]
        return cls(len(xs[0]), xs[0], xs[1], xs[2], vs[0], vs[1], vs[2], t)

    def replace(self, positions=None, velocities=None, t=None) -> "SystemState":
        xs = self.positions if positions is None else positions
        vs = self.velocities if velocities is None else velocities
        return SystemState(self.dim, *xs, *vs, self.t if t is None else t)

    def min_separation(self):
        xs = self.positions
        return min(norm(sub(xs[i], xs[j])) for i, j in PAIRS)

    def validate(self, tol: float = TOL.overlap_tol) -> None:
        """Raise InvalidState if two spheres overlap by more than ``tol``."""
        xs = self.positions
        for i, j in PAIRS:
            d = norm(sub(xs[j], xs[i]))
            if d < 1 - tol:
                raise InvalidState(f"spheres {i} and {j} overlap: distance {float(d)!r}")

    def as_float(self) -> "SystemState":
        return SystemState(self.dim, *(to_float(p) for p in self.positions),
                           *(to_float(v) for v in self.velocities), float(self.t))

    def as_mpfr(self) -> "SystemState":
        """Convert to mpfr at the precision of the current gmpy2 context."""
        return SystemState(self.dim, *(to_mpfr(p) for p in self.positions),
                           *(to_mpfr(v) for v in self.velocities), gmpy2.mpfr(self.t))


PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class RelativeConfig:
    """Central-particle frame: contact pair (omega1, w1), approaching pair at distance 1+gap."""

    dim: int
    omega1: VecD
    w1: VecD
    gap: Scalar
    omega2: VecD
    w2: VecD

    def __post_init__(self):
        for name in ("omega1", "w1", "omega2", "w2"):
            value = tuple(getattr(self, name))
            if len(value) != self.dim:
                raise InvalidArgument(f"{name} has length {len(value)}, expected {self.dim}")
            object.__setattr__(self, name, value)
        _check_unit(self.omega1, "omega1")
        _check_unit(self.omega2, "omega2")
        if not self.gap > 0:
            raise InvalidArgument(f"gap must be positive, got {self.gap!r}")

    @property
    def eta1(self):
        return dot(self.w1, self.omega1)

    @property
    def eta2(self):
        return dot(self.w2, self.omega2)

    def as_float(self) -> "RelativeConfig":
        return RelativeConfig(self.dim, to_float(self.omega1), to_float(self.w1), float(self.gap),
                              to_float(self.omega2), to_float(self.w2))


@dataclass(frozen=True)
class NormalTangential:
    eta: Scalar
    w_perp: VecD


def decompose(w: VecD, omega: VecD) -> NormalTangential:
    """Split ``w`` into its component along the unit vector ``omega`` and the rest."""
    _check_unit(omega)
    eta = dot(w, omega)
    return NormalTangential(eta, axpy(-eta, omega, w))


def to_relative_frame(state: SystemState, central: int, contact: int, approaching: int) -> RelativeConfig:
    """Express ``state`` in the frame of the ``central`` particle."""
    if sorted((central, contact, approaching)) != [0, 1, 2]:
        raise InvalidArgument("central, contact and approaching must be a permutation of 0, 1, 2")
    xs, vs = state.positions, state.velocities
    rc = sub(xs[contact], xs[central])
    ra = sub(xs[approaching], xs[central])
    dc = norm(rc)
    da = norm(ra)
    if min(dc, da, norm(sub(xs[contact], xs[approaching]))) < 1 - TOL.overlap_tol:
        raise InvalidState("overlapping spheres")
    if abs(dc - 1) > TOL.contact_tol:
        raise FrameError(f"contact pair ({central},{contact}) is at distance {float(dc)!r}, not 1")
    if not da > 1:
        raise FrameError(f"approaching pair ({central},{approaching}) is not separated")
    gap = da - 1
    return RelativeConfig(
        state.dim,
        scale(1 / dc, rc),
        sub(vs[contact], vs[central]),
        gap,
        scale(1 / da, ra),
        sub(vs[approaching], vs[central]),
    )


def from_relative_frame(cfg: RelativeConfig, central: int = 0, contact: int = 1, approaching: int = 2,
                        origin: VecD | None = None, velocity: VecD | None = None, t=0.0) -> SystemState:
    """Embed ``cfg`` as an absolute state; the central particle sits at ``origin`` with ``velocity``."""
    x_c = zeros(cfg.dim) if origin is None else tuple(origin)
    v_c = zeros(cfg.dim) if velocity is None else tuple(velocity)
    xs = [None, None, None]
    vs = [None, None, None]
    xs[central], vs[central] = x_c, v_c
    xs[contact] = add(x_c, cfg.omega1)
    vs[contact] = add(v_c, cfg.w1)
    xs[approaching] = axpy(1 + cfg.gap, cfg.omega2, x_c)
    vs[approaching] = add(v_c, cfg.w2)
    return SystemState(cfg.dim, *xs, *vs, t)
