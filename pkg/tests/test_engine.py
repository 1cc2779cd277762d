import numpy as np
import pytest

from collapse_lab.core import TOL, SystemState
from collapse_lab.engine import (CollapseCriteria, ContactError, FlightOverrun, GrazingCollision, Limits,
                                 PreconditionError, TripleCollision, _run, apply_collision, energy_drop,
                                 free_flight, kinetic_energy, momentum, next_collision, run)

from conftest import random_contact_state


def test_head_on_time():
    st = SystemState.from_lists([(0, 0), (2, 0), (-5, 0)], [(0, 0), (-1, 0), (-1, 0)])
    nc = next_collision(st)
    assert nc.pair == (0, 1)
    assert nc.dt == pytest.approx(1.0, abs=1e-15)


def test_all_receding():
    st = SystemState.from_lists([(0, 0), (2, 0), (-3, 0)], [(0, 0), (1, 0), (-1, 0)])
    assert next_collision(st) is None
    out = run(st, 0.5)
    assert out.termination == "separation"
    assert out.events == ()


def test_next_collision_matches_time_stepping_seed11():
    rng = np.random.default_rng(11)
    st = SystemState.from_lists([(0, 0), (1.8, 0.3), (-0.4, 2.2)],
                                [(0, 0), tuple(rng.uniform(-1, -0.5, 1)) + (0.1,), (0.2, -0.9)])
    nc = next_collision(st)
    i, j = nc.pair

    def dist(t):
        xi = np.array(st.positions[i]) + t * np.array(st.velocities[i])
        xj = np.array(st.positions[j]) + t * np.array(st.velocities[j])
        return np.linalg.norm(xj - xi) - 1

    # coarse stepping, then bisection on the sign change
    h, t = 1e-3, 0.0
    while dist(t + h) > 0:
        t += h
    lo, hi = t, t + h
    while hi - lo > 1e-13:
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if dist(mid) > 0 else (lo, mid)
    assert abs(nc.dt - lo) < 1e-10


def test_triple_collision_detected():
    st = SystemState.from_lists([(0, 0), (2, 0), (-2, 0)], [(0, 0), (-1, 0), (1, 0)])
    with pytest.raises(TripleCollision):
        next_collision(st)
    assert run(st, 0.5).termination == "triple-collision"


def test_grazing_detected():
    # pair 0-2 just touches tangentially: impact parameter exactly 1
    st = SystemState.from_lists([(0, 0), (0, 50), (-3, 1)], [(0, 0), (0, 1), (1, 0)])
    with pytest.raises(GrazingCollision):
        next_collision(st)
    assert run(st, 0.5).termination == "grazing"


class TestApplyCollision:
    def test_head_on(self):
        r = 0.3
        st = SystemState.from_lists([(0, 0), (1, 0), (5, 5)], [(1, 0), (-1, 0), (0, 0)])
        new = apply_collision(st, (0, 1), r)
        rel = np.subtract(new.v1, new.v0)
        assert rel[0] == pytest.approx(2 * r, abs=1e-15)
        assert rel[1] == 0
        assert new.v2 == st.v2

    def test_tangential_bit_identical(self):
        st = SystemState.from_lists([(0, 0), (1, 0), (5, 5)], [(0, 0.0), (-1e-3, 37.5), (0, 0)])
        new = apply_collision(st, (0, 1), 0.4)
        assert new.v1[1] == st.v1[1] and new.v0[1] == st.v0[1]

    def test_energy_drop_seed3(self):
        rng = np.random.default_rng(3)
        st = random_contact_state(rng, 3, (0, 2))
        om = np.subtract(st.x2, st.x0)
        eta = np.subtract(st.v2, st.v0).dot(om)
        new = apply_collision(st, (0, 2), 0.05)
        drop = kinetic_energy(st) - kinetic_energy(new)
        assert drop == pytest.approx(energy_drop(0.05, eta), rel=1e-12)

    def test_not_in_contact(self):
        st = SystemState.from_lists([(0, 0), (1.5, 0), (5, 5)], [(1, 0), (-1, 0), (0, 0)])
        with pytest.raises(ContactError):
            apply_collision(st, (0, 1), 0.5)

    def test_not_approaching(self):
        st = SystemState.from_lists([(0, 0), (1, 0), (5, 5)], [(-1, 0), (1, 0), (0, 0)])
        with pytest.raises(PreconditionError):
            apply_collision(st, (0, 1), 0.5)

    def test_sign_flip(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            st = random_contact_state(rng, 2, (1, 2))
            om = np.subtract(st.x2, st.x1)
            new = apply_collision(st, (1, 2), rng.uniform(0.01, 0.99))
            assert np.subtract(new.v2, new.v1).dot(om) > 0


class TestFreeFlight:
    def test_zero(self):
        st = SystemState.from_lists([(0, 0), (3, 0), (0, 3)], [(1, 0), (0, 1), (1, 1)])
        assert free_flight(st, 0.0) is st

    def test_semigroup(self):
        st = SystemState.from_lists([(0, 0), (30, 0), (0, 30)], [(1, 0.5), (0, 1), (-1, 1)])
        a = free_flight(free_flight(st, 2.0), 3.0)
        b = free_flight(st, 5.0)
        for p, q in zip(a.positions, b.positions):
            assert np.allclose(p, q, atol=1e-14, rtol=0)
        assert a.t == b.t == 5.0

    def test_closed_form_seed5(self):
        rng = np.random.default_rng(5)
        xs = [(0.0, 0.0), (40.0, 0.0), (0.0, 40.0)]
        vs = [tuple(rng.uniform(-0.1, 0.1, 2)) for _ in range(3)]
        st = SystemState.from_lists(xs, vs)
        out = free_flight(st, 1.75)
        for x, v, y in zip(xs, vs, out.positions):
            assert y == tuple(1.75 * vi + xi for xi, vi in zip(x, v))

    def test_overrun(self):
        st = SystemState.from_lists([(0, 0), (2, 0), (0, 30)], [(0, 0), (-1, 0), (0, 0)])
        with pytest.raises(FlightOverrun):
            free_flight(st, 1.5)


def test_energy_momentum_basics():
    st = SystemState.from_lists([(0, 0), (3, 0), (0, 3)], [(0, 0)] * 3)
    assert kinetic_energy(st) == 0 and momentum(st) == (0, 0)
    u = (0.5, -2.0)
    st = st.replace(velocities=(u, u, u))
    assert kinetic_energy(st) == pytest.approx(1.5 * (0.25 + 4))
    assert momentum(st) == (1.5, -6.0)


def test_elastic_harness_energy_constant():
    # free spheres collide only a few times, so pool collisions over many short runs
    rng = np.random.default_rng(21)
    total = 0
    for _ in range(2000):
        if total >= 100:
            break
        st = random_contact_state(rng, 2, (0, 1))
        x2 = np.add(st.x0, np.subtract(st.x1, st.x0) @ [[0, 1], [-1, 0]] * 1.1)
        st = st.replace(positions=(st.x0, st.x1, tuple(x2)))
        # rewind so that the first collision lies ahead
        st = st.replace(positions=tuple(tuple(np.subtract(x, 0.3 * np.array(v)))
                                        for x, v in zip(st.positions, st.velocities)))
        if st.min_separation() < 1.01:
            continue
        e0 = kinetic_energy(st)
        out = _run(st, 1.0, Limits(max_collisions=50, collapse=None), True, TOL, None)
        total += len(out.events)
        for s in out.states:
            assert abs(kinetic_energy(s) - e0) <= 1e-11 * max(1.0, e0)
    assert total >= 100


def test_run_events_consistent(zk_run):
    out = zk_run.outcome
    r = 0.02
    times = [ev.time for ev in out.events]
    assert all(b > a for a, b in zip(times, times[1:]))
    for ev in out.events:
        assert ev.tau > 0
        assert abs(ev.eta_post + r * ev.eta_pre) <= 1e-12 * abs(ev.eta_pre)
    assert out.termination == "collapse-detected"
    assert len(out.events) >= 500
    assert [tuple(ev.pair) for ev in out.events] == [(0, 2), (0, 1)] * (len(out.events) // 2)
    taus = [ev.tau for ev in out.events][-101:]
    assert max(b / a for a, b in zip(taus, taus[1:])) < 1


def test_double_precision_runs_out_on_collapse_data(zk_default):
    from collapse_lab.nearlinear import sample_initial_configuration

    st = sample_initial_configuration(zk_default, 1).as_float()
    out = run(st, 0.02, Limits(max_collisions=500))
    assert out.termination == "precision-exhausted"
    assert len(out.events) < 100


def test_collapse_criteria():
    crit = CollapseCriteria(window=4, rho_max=0.9, horizon_eps=1e-3)
    geo = [0.5 ** k for k in range(12)]  # tail bound 0.5**11 < 1e-3
    assert crit.check(geo)
    assert not crit.check([1.0] * 10)
    assert not CollapseCriteria(window=4, min_events=20).check(geo)


def test_max_time():
    st = SystemState.from_lists([(0, 0), (3, 0), (0, 30)], [(0, 0), (-1, 0), (0, 0)])
    assert run(st, 0.5, Limits(max_time=1.0)).termination == "max-time"
    assert run(st, 0.5, Limits(max_collisions=0)).termination == "max-collisions"
