import numpy as np
import pytest

from collapse_lab.core import (TOL, FrameError, InvalidArgument, InvalidState, RelativeConfig, Restitution,
                               SystemState, decompose, from_relative_frame, to_relative_frame)

from conftest import random_unit


class TestRestitution:
    @pytest.mark.parametrize("r", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_closed_endpoints(self, r):
        with pytest.raises(InvalidArgument):
            Restitution(r)

    def test_accepts_interior(self):
        assert float(Restitution(0.3)) == 0.3


class TestDecompose:
    def test_parallel(self):
        om = (0.6, 0.8)
        nt = decompose(om, om)
        assert nt.eta == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(nt.w_perp, 0, atol=1e-15)

    def test_orthogonal(self):
        nt = decompose((0.0, 2.0), (1.0, 0.0))
        assert nt.eta == 0
        assert nt.w_perp == (0.0, 2.0)

    def test_reconstruction_dim3_seed42(self):
        rng = np.random.default_rng(42)
        w = tuple(rng.standard_normal(3))
        om = tuple(random_unit(rng, 3))
        nt = decompose(w, om)
        assert abs(np.dot(nt.w_perp, om)) < 1e-14
        assert np.allclose(np.array(om) * nt.eta + np.array(nt.w_perp), w, atol=1e-14, rtol=0)

    def test_non_unit_omega(self):
        with pytest.raises(InvalidArgument):
            decompose((1.0, 0.0), (1.0, 1.0))


class TestSystemState:
    def test_dimension_checked(self):
        with pytest.raises(InvalidArgument):
            SystemState.from_lists([(0, 0), (1, 0), (2, 0, 0)], [(0, 0)] * 3)

    def test_overlap_detected(self):
        st = SystemState.from_lists([(0, 0), (0.5, 0), (3, 0)], [(0, 0)] * 3)
        with pytest.raises(InvalidState):
            st.validate()

    def test_touching_allowed(self):
        SystemState.from_lists([(0, 0), (1 - 0.5 * TOL.overlap_tol, 0), (3, 0)], [(0, 0)] * 3).validate()


class TestRelativeFrame:
    def test_collinear(self):
        st = SystemState.from_lists([(0, 0), (1, 0), (2.5, 0)], [(0, 0)] * 3)
        cfg = to_relative_frame(st, 0, 1, 2)
        # gap is |x2 - x0| - 1; the 1-2 distance excess would be 0.5
        assert cfg.gap == pytest.approx(1.5)
        assert cfg.omega1 == (1.0, 0.0)
        assert cfg.omega2 == (1.0, 0.0)

    def test_galilean_shift(self):
        rng = np.random.default_rng(0)
        st = SystemState.from_lists([(0, 0), (0, 1), (1.7, -0.4)], [tuple(rng.standard_normal(2)) for _ in range(3)])
        u = np.array([3.0, -1.25])
        shifted = st.replace(velocities=tuple(tuple(np.array(v) + u) for v in st.velocities))
        a, b = to_relative_frame(st, 0, 1, 2), to_relative_frame(shifted, 0, 1, 2)
        assert np.allclose(a.w1, b.w1, atol=1e-13, rtol=0)
        assert np.allclose(a.w2, b.w2, atol=1e-13, rtol=0)

    def test_round_trip_seed7(self):
        rng = np.random.default_rng(7)
        x0 = rng.standard_normal(3)
        om1 = random_unit(rng, 3)
        om2 = random_unit(rng, 3)
        while np.linalg.norm(om1 - 1.4 * om2) < 1.05:
            om2 = random_unit(rng, 3)
        xs = [x0, x0 + om1, x0 + 1.4 * om2]
        vs = [rng.standard_normal(3) for _ in range(3)]
        st = SystemState.from_lists([tuple(x) for x in xs], [tuple(v) for v in vs])
        cfg = to_relative_frame(st, 0, 1, 2)
        back = from_relative_frame(cfg, origin=tuple(x0), velocity=tuple(vs[0]))
        for k in range(3):
            assert np.allclose(back.positions[k], xs[k], atol=1e-12, rtol=0)
            assert np.allclose(back.velocities[k], vs[k], atol=1e-12, rtol=0)

    def test_contact_required(self):
        st = SystemState.from_lists([(0, 0), (1.1, 0), (-2.5, 0)], [(0, 0)] * 3)
        with pytest.raises(FrameError):
            to_relative_frame(st, 0, 1, 2)

    def test_overlap_rejected(self):
        st = SystemState.from_lists([(0, 0), (1, 0), (0.2, 0.3)], [(0, 0)] * 3)
        with pytest.raises(InvalidState):
            to_relative_frame(st, 0, 1, 2)

    def test_relative_config_invariants(self):
        with pytest.raises(InvalidArgument):
            RelativeConfig(2, (1.0, 0.0), (0, 0), 0.0, (0.0, 1.0), (0, 0))
        with pytest.raises(InvalidArgument):
            RelativeConfig(2, (1.0, 0.1), (0, 0), 0.1, (0.0, 1.0), (0, 0))
