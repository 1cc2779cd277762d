"""Linearised triangular collapse: one-period velocity matrix and its spectrum.

Relative velocities are stacked as (W1, W2), with W_i = v_i - v_0.  The three
collisions of a period are a = (0,1), b = (0,2), c = (1,2).  At the
equilateral limit geometry omega1 = e1, omega2 is omega1 turned by 60 degrees,
and omega3 = omega2 - omega1 points from particle 1 to particle 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from .core import InvalidArgument, RelativeConfig, as_restitution, dot, norm2
from .mapping import MapDomainError, apply_map, zk_parameter

SQ3 = math.sqrt(3.0)


@dataclass(frozen=True)
class CollisionMatrix:
    kind: str
    omega: np.ndarray
    r: float
    matrix: np.ndarray  # (2 dim) x (2 dim)

    def apply(self, w1, w2):
        dim = len(self.omega)
        out = self.matrix @ np.concatenate([np.asarray(w1, float), np.asarray(w2, float)])
        return out[:dim], out[dim:]


def collision_matrix(kind: str, omega, r: float) -> CollisionMatrix:
    """Block matrix of a single collision acting on (W1, W2)."""
    r = as_restitution(r).r
    w = np.asarray(omega, dtype=float)
    if w.ndim != 1 or abs(np.linalg.norm(w) - 1) > 1e-12:
        raise InvalidArgument("omega must be a unit vector")
    dim = len(w)
    eye = np.eye(dim)
    P = np.outer(w, w)
    h = (1 + r) / 2
    Z = np.zeros((dim, dim))
    if kind == "a":
        blocks = [[eye - (1 + r) * P, Z], [-h * P, eye]]
    elif kind == "b":
        blocks = [[eye, -h * P], [Z, eye - (1 + r) * P]]
    elif kind == "c":
        blocks = [[eye - h * P, h * P], [h * P, eye - h * P]]
    else:
        raise InvalidArgument(f"kind must be 'a', 'b' or 'c', got {kind!r}")
    return CollisionMatrix(kind, w, r, np.block(blocks))


def equilateral_frame(dim: int = 2):
    """omega1, omega1_perp, omega2, omega2_perp, omega3 embedded in the first coordinate plane."""
    if dim < 2:
        raise InvalidArgument("dim must be >= 2")

    def e(x, y):
        v = np.zeros(dim)
        v[0], v[1] = x, y
        return v

    o1, o2 = e(1.0, 0.0), e(0.5, SQ3 / 2)
    return o1, e(0.0, 1.0), o2, e(-SQ3 / 2, 0.5), o2 - o1


def limiting_matrix(r: float, dim: int = 2) -> np.ndarray:
    """A_c A_b A_a at the equilateral geometry."""
    o1, _, o2, _, o3 = equilateral_frame(dim)
    A = collision_matrix("a", o1, r).matrix
    B = collision_matrix("b", o2, r).matrix
    C = collision_matrix("c", o3, r).matrix
    return C @ B @ A


def _basis(dim: int) -> np.ndarray:
    o1, p1, o2, p2, _ = equilateral_frame(dim)
    z = np.zeros(dim)
    return np.column_stack([np.concatenate([o1, z]), np.concatenate([p1, z]),
                            np.concatenate([z, o2]), np.concatenate([z, p2])])


@dataclass(frozen=True)
class RestrictedLimitMatrix:
    r: float
    matrix: np.ndarray

    def __matmul__(self, x):
        return self.matrix @ np.asarray(x, dtype=float)


def restricted_matrix(r: float, dim: int = 2) -> RestrictedLimitMatrix:
    """The 4x4 restriction, assembled from the numeric product."""
    r = as_restitution(r).r
    B = _basis(dim)
    return RestrictedLimitMatrix(r, B.T @ limiting_matrix(r, dim) @ B)


def closed_form_restricted(r: float) -> np.ndarray:
    r = as_restitution(r).r
    r2, r3 = r * r, r ** 3
    return np.array([
        [(-r3 + 5 * r2 - 59 * r - 1) / 64, SQ3 * (r + 1) / 8, (r2 - 4 * r - 5) / 16, -SQ3 * (r + 1) / 8],
        [SQ3 * (r3 + 3 * r2 + 11 * r + 9) / 64, (5 - 3 * r) / 8, -SQ3 * (r2 + 4 * r + 3) / 16, (3 * r + 3) / 8],
        [(-r3 + 17 * r2 + 13 * r - 5) / 64, SQ3 * (r + 1) / 8, (r2 - 16 * r - 1) / 16, -SQ3 * (r + 1) / 8],
        [SQ3 * (-r3 + r2 + 13 * r + 11) / 64, (3 * r + 3) / 8, SQ3 * (r2 - 1) / 16, (5 - 3 * r) / 8],
    ])


def complement_action(r: float, dim: int) -> np.ndarray:
    """Limiting matrix restricted to vectors whose halves are orthogonal to the triangle plane."""
    if dim < 3:
        raise InvalidArgument("the complement is empty for dim < 3")
    M = limiting_matrix(r, dim)
    idx = [k for k in range(2 * dim) if k % dim >= 2]
    return M[np.ix_(idx, idx)]


# --------------------------------------------------------------------------
# characteristic polynomial and spectrum


@dataclass(frozen=True)
class CharPoly:
    chi: tuple  # monic quartic (lambda - 1) Q(lambda), highest power first
    q: tuple  # monic cubic Q, highest power first


def characteristic_polynomial(r: float) -> CharPoly:
    r = as_restitution(r).r
    r2, r3 = r * r, r ** 3
    a2 = (r3 - 9 * r2 + 171 * r - 11) / 64
    a1 = (-11 * r3 + 171 * r2 - 9 * r + 1) / 64
    a0 = r3
    q = (1.0, a2, a1, a0)
    chi = (1.0, a2 - 1, a1 - a2, a0 - a1, -a0)
    return CharPoly(chi, q)


def q_value(r: float, lam: float) -> float:
    return float(np.polyval(characteristic_polynomial(r).q, lam))


def numeric_characteristic_polynomial(M: np.ndarray) -> tuple:
    """Monic characteristic polynomial of a 4x4 matrix from principal-minor sums."""
    n = M.shape[0]
    coeffs = [1.0]
    for k in range(1, n + 1):
        s = sum(np.linalg.det(M[np.ix_(c, c)]) for c in combinations(range(n), k))
        coeffs.append((-1) ** k * s)
    return tuple(coeffs)


@dataclass(frozen=True)
class SpectrumReport:
    r: float
    lambda0: float
    lambda_plus: complex
    lambda_minus: complex
    bounds_ok: dict
    viete_residual: float
    q_residual: float

    @property
    def all_bounds_ok(self) -> bool:
        return all(self.bounds_ok.values())

    @property
    def eigenvalues(self) -> tuple:
        return (1.0, self.lambda0, self.lambda_plus, self.lambda_minus)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "lambda0": self.lambda0,
            "lambda_plus": [self.lambda_plus.real, self.lambda_plus.imag],
            "lambda_minus": [self.lambda_minus.real, self.lambda_minus.imag],
            "bounds_ok": dict(self.bounds_ok),
            "viete_residual": self.viete_residual,
            "q_residual": self.q_residual,
        }


def spectrum(r: float) -> SpectrumReport:
    """Roots of Q: the real root by bisection on (-r, -r^3), the pair by deflation."""
    r = as_restitution(r).r
    _, a2, a1, a0 = characteristic_polynomial(r).q

    def Q(x):
        return ((x + a2) * x + a1) * x + a0

    lam0 = bisect(Q, -r, -r ** 3, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)
    p = a2 + lam0
    q = a1 + lam0 * p
    disc = p * p - 4 * q
    s = complex(0, math.sqrt(-disc)) if disc < 0 else complex(math.sqrt(disc))
    lp, lm = (-p + s) / 2, (-p - s) / 2
    mod = abs(lp)
    bounds = {
        "minus1_lt_minus_r": -1 < -r,
        "minus_r_lt_lambda0": -r < lam0,
        "lambda0_lt_minus_r3": lam0 < -r ** 3,
        "minus_r3_lt_0": -r ** 3 < 0,
        "abs_lambda0_lt_abs_lambda_pm": abs(lam0) < mod,
        "abs_lambda_pm_lt_1": mod < 1,
        "complex_pair": disc < 0,
    }
    viete = abs(-lam0 * mod * mod - r ** 3)
    return SpectrumReport(r, lam0, lp, lm, bounds, viete, abs(Q(lam0)))


def critical_point(r: float) -> float:
    """The point where Q' is smallest."""
    r = as_restitution(r).r
    return (-r ** 3 + 9 * r * r - 171 * r + 11) / 192


def q_prime(r: float, lam: float) -> float:
    _, a2, a1, _ = characteristic_polynomial(r).q
    return 3 * lam * lam + 2 * a2 * lam + a1


# --------------------------------------------------------------------------
# cones and linear iteration


def cone_membership(x, y, z, t, r: float) -> tuple[bool, bool]:
    """Strict membership in C1 (x < 0, z < (1+r)/4 x) and C2 (C1 and y < t).

    The second condition of C2 is only claimed for small r; it is applied as is.
    """
    in_c1 = bool(x < 0 and z < (1 + r) / 4 * x)
    return in_c1, bool(in_c1 and y < t)


EIGEN_ONE = np.array([0.0, 1.0, 0.0, 1.0])


@dataclass(frozen=True)
class ConeIteration:
    orbit: np.ndarray  # (n+1) x 4
    exit_index: Optional[int]
    distances: np.ndarray  # distance of each iterate to span(0,1,0,1)
    rate: Optional[float]  # geometric-mean contraction of the distance over the tail


def iterate_cone_exit(x0, r: float, max_iter: int = 500) -> ConeIteration:
    M = restricted_matrix(r).matrix
    u = EIGEN_ONE / np.linalg.norm(EIGEN_ONE)
    x = np.asarray(x0, dtype=float)
    orbit = [x]
    exit_index = None
    if not cone_membership(*x, r)[1]:
        exit_index = 0
    for k in range(1, max_iter + 1):
        x = M @ x
        orbit.append(x)
        if exit_index is None and not cone_membership(*x, r)[1]:
            exit_index = k
    orbit = np.array(orbit)
    dist = np.linalg.norm(orbit - np.outer(orbit @ u, u), axis=1)
    rate = None
    # stop before the roundoff floor set by the O(1) eigenline component
    floor = 1e-13 * max(1.0, float(np.abs(orbit).max()))
    nz = dist[:np.argmax(dist <= floor)] if (dist <= floor).any() else dist
    if len(nz) >= 8:
        tail = nz[len(nz) // 3:]
        rate = float(np.exp(np.mean(np.diff(np.log(tail)))))
    return ConeIteration(orbit, exit_index, dist, rate)


# --------------------------------------------------------------------------
# collision-order sign identity


@dataclass(frozen=True)
class OrderIdentity:
    lhs: float
    rhs: float
    eta1_prime: float
    eta1_prime_formula: float


def order_sign_identity(cfg: RelativeConfig, r: float) -> OrderIdentity:
    """Both sides of (1+d) eta2 + tau |W2|^2 = (1+d) sqrt(1-zeta) eta2, and eta1 after the map."""
    r = as_restitution(r).r
    try:
        step = apply_map(cfg, r)
    except (ValueError, MapDomainError) as exc:
        raise MapDomainError(str(exc)) from exc
    d, e1, e2, tau = cfg.gap, cfg.eta1, cfg.eta2, step.tau
    zeta = zk_parameter(cfg).zeta
    lhs = (1 + d) * e2 + tau * norm2(cfg.w2)
    rhs = (1 + d) * math.sqrt(1 - zeta) * e2
    out = step.output
    d_p = out.gap
    cross = dot(out.omega1, out.omega2)
    formula = (e1 + tau * norm2(cfg.w1)) / (1 + d_p) - (1 + r) / 2 * lhs * cross
    return OrderIdentity(float(lhs), float(rhs), float(step.eta1_post), float(formula))


__all__ = [
    "CollisionMatrix", "collision_matrix", "equilateral_frame", "limiting_matrix", "RestrictedLimitMatrix",
    "restricted_matrix", "closed_form_restricted", "complement_action", "CharPoly", "characteristic_polynomial",
    "numeric_characteristic_polynomial", "q_value", "SpectrumReport", "spectrum", "critical_point", "q_prime",
    "cone_membership", "EIGEN_ONE", "ConeIteration", "iterate_cone_exit", "OrderIdentity", "order_sign_identity",
]
