import math

import numpy as np
import pytest

from collapse_lab.core import RelativeConfig, SystemState
from collapse_lab.nearlinear import build_construction, run_construction

ACCEPTANCE_LINES = []


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_unit(rng, dim):
    return unit(rng.standard_normal(dim))


def tangent(rng, omega):
    g = rng.standard_normal(len(omega))
    g -= g.dot(omega) * omega
    return unit(g)


def random_domain_config(rng, dim, *, cos_range=(-1.0, 0.0), gap_range=(1e-6, 1e-2), eta2_range=(-1.0, -0.2),
                         eta1_range=(0.01, 1.0), tangential=1.0):
    """A point of the map's domain: particle 1 in contact and receding, particle 2 approaching, zeta < 1."""
    while True:
        o1 = random_unit(rng, dim)
        c = rng.uniform(*cos_range)
        t = tangent(rng, o1)
        o2 = c * o1 + math.sqrt(max(0.0, 1 - c * c)) * t
        o2 = unit(o2)
        gap = math.exp(rng.uniform(math.log(gap_range[0]), math.log(gap_range[1])))
        if np.linalg.norm(o1 - (1 + gap) * o2) < 1.0:
            continue
        e1 = rng.uniform(*eta1_range)
        e2 = rng.uniform(*eta2_range)
        w1 = e1 * o1 + tangential * rng.uniform(0, 1) * tangent(rng, o1)
        w2 = e2 * o2 + tangential * rng.uniform(0, 1) * tangent(rng, o2)
        cfg = RelativeConfig(dim, tuple(o1), tuple(w1), gap, tuple(o2), tuple(w2))
        zeta = gap * (2 + gap) * w2.dot(w2) / ((1 + gap) ** 2 * e2 * e2)
        if zeta < 0.9:
            return cfg


def random_contact_state(rng, dim, pair=(0, 1)):
    """Three spheres with ``pair`` in contact and approaching; the third sphere far away."""
    i, j = pair
    k = 3 - i - j
    xs = [None] * 3
    xs[i] = rng.uniform(-1, 1, dim)
    omega = random_unit(rng, dim)
    xs[j] = xs[i] + omega
    xs[k] = xs[i] + 10 * random_unit(rng, dim)
    while min(np.linalg.norm(xs[k] - xs[i]), np.linalg.norm(xs[k] - xs[j])) < 2:
        xs[k] = xs[k] + 3 * random_unit(rng, dim)
    vs = [rng.standard_normal(dim) for _ in range(3)]
    eta = (vs[j] - vs[i]).dot(omega)
    if eta > -0.1:
        vs[j] = vs[j] - (eta + rng.uniform(0.1, 2.0)) * omega
    return SystemState.from_lists([tuple(x) for x in xs], [tuple(v) for v in vs])


@pytest.fixture(scope="session")
def zk_default():
    return build_construction(0.02, cos_theta0=-0.9, delta_theta=0.05)


@pytest.fixture(scope="session")
def zk_run(zk_default):
    return run_construction(zk_default, seed=1, n_collisions=500)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
