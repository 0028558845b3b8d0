"""Tests for the integrating-factor steppers."""

import numpy as np
import pytest

from bardina2d import basis
from bardina2d import dynamics as dyn
from bardina2d import integrate as ti
from bardina2d import operators as ops
from bardina2d.errors import ConfigurationError, DivergenceError


def forced_torus():
    plan = basis.build_plan(basis.torus(2 * np.pi), 6)
    c = np.zeros(plan.n_modes)
    c[basis.mode_slot(plan, (1, 0))] = 0.4
    c[basis.mode_slot(plan, (0, 1))] = -0.3
    params = dyn.ModelParams(nu=0.05, alpha=0.8, sigma=0.2, forcing=dyn.Forcing(c, np.array([0.1, -0.2])))
    return plan, params


def flat(state):
    return np.concatenate([state.psi, state.harmonic])


class TestSchemeConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ConfigurationError):
            ti.SchemeConfig(dt=0.0, t_end=1.0)
        with pytest.raises(ConfigurationError):
            ti.SchemeConfig(dt=-0.1, t_end=1.0)
        with pytest.raises(ConfigurationError):
            ti.SchemeConfig(dt=0.1, t_end=-1.0)
        with pytest.raises(ConfigurationError):
            ti.SchemeConfig(dt=0.1, t_end=1.0, method="rk45")
        with pytest.raises(ConfigurationError):
            ti.SchemeConfig(dt=0.1, t_end=1.0, stride=0)

    def test_rejects_incommensurate_horizon(self):
        plan, params = forced_torus()
        st = ops.zero_state(plan)
        with pytest.raises(ConfigurationError):
            ti.run(plan, st, params, ti.SchemeConfig(dt=0.3, t_end=1.0))


class TestExactDecay:
    def test_single_mode_decays_exactly(self):
        # B vanishes on one mode, so both schemes reduce to the exact factor
        plan = basis.build_plan(basis.sphere(), 8)
        params = dyn.ModelParams(nu=0.7, alpha=1.3, sigma=0.0, forcing=dyn.zero_forcing(plan))
        st = ops.state_from_mode(plan, (3, 1), 2.0)
        slot = basis.mode_slot(plan, (3, 1))
        exact = 2.0 * np.exp(-0.7 * 12.0 * 1.0)
        for method in (ti.IF_EULER, ti.IF_RK4):
            sch = ti.SchemeConfig(dt=0.01, t_end=1.0, method=method, stride=10**9)
            traj = ti.run(plan, st, params, sch)
            assert traj.final_state.psi[slot] == pytest.approx(exact, rel=1e-12)
            others = np.delete(traj.final_state.psi, slot)
            assert np.max(np.abs(others)) < 1e-13

    def test_step_matches_run(self):
        plan, params = forced_torus()
        st = ops.random_state(plan, seed=1)
        sch = ti.SchemeConfig(dt=0.02, t_end=0.02)
        one = ti.step(plan, st, params, sch)
        traj = ti.run(plan, st, params, sch)
        assert np.array_equal(one.psi, traj.final_state.psi)
        assert np.array_equal(one.harmonic, traj.final_state.harmonic)


class TestConvergenceOrder:
    def slopes(self, method, dts):
        plan, params = forced_torus()
        st0 = ops.random_state(plan, seed=11, e1=0.5, alpha=0.8)
        finals = []
        for dt in dts:
            sch = ti.SchemeConfig(dt=dt, t_end=0.5, method=method, stride=10**9)
            finals.append(flat(ti.run(plan, st0, params, sch).final_state))
        # consecutive-halving differences scale like dt^order
        errs = [np.linalg.norm(a - b) for a, b in zip(finals, finals[1:])]
        return np.polyfit(np.log2(dts[: len(errs)]), np.log2(errs), 1)[0]

    def test_rk4_is_fourth_order(self):
        dts = [0.5 / 8, 0.5 / 16, 0.5 / 32, 0.5 / 64]
        assert abs(self.slopes(ti.IF_RK4, dts) - 4.0) < 0.2

    def test_euler_is_first_order(self):
        dts = [0.5 / 64, 0.5 / 128, 0.5 / 256, 0.5 / 512]
        assert abs(self.slopes(ti.IF_EULER, dts) - 1.0) < 0.2


class TestBookkeeping:
    def test_sample_times_and_stride(self):
        plan, params = forced_torus()
        st = ops.random_state(plan, seed=2)
        sch = ti.SchemeConfig(dt=0.1, t_end=1.0, stride=3)
        traj = ti.run(plan, st, params, sch)
        times = [t for t, _ in traj.samples]
        # k = 0, 3, 6, 9 plus the final step
        assert times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
        assert traj.final_time == pytest.approx(1.0)

    def test_observers_called_at_samples(self):
        plan, params = forced_torus()
        st = ops.random_state(plan, seed=3)
        seen = []
        sch = ti.SchemeConfig(dt=0.1, t_end=0.4, stride=2)
        ti.run(plan, st, params, sch, observers=(lambda t, s: seen.append(t),))
        assert seen == pytest.approx([0.0, 0.2, 0.4])

    def test_resume_is_bitwise(self):
        plan, params = forced_torus()
        st0 = ops.random_state(plan, seed=11, e1=0.5, alpha=0.8)
        sch = ti.SchemeConfig(dt=0.5 / 64, t_end=0.5, stride=16)
        full = ti.run(plan, st0, params, sch)
        t_mid, st_mid = full.samples[2]
        tail = ti.run(plan, st_mid, params, sch, t_start=t_mid)
        assert np.array_equal(tail.final_state.psi, full.final_state.psi)
        assert np.array_equal(tail.final_state.harmonic, full.final_state.harmonic)

    def test_samples_are_snapshots_not_views(self):
        plan, params = forced_torus()
        st = ops.random_state(plan, seed=4)
        traj = ti.run(plan, st, params, ti.SchemeConfig(dt=0.1, t_end=0.3, stride=1))
        a = traj.samples[0][1].psi.copy()
        traj.samples[1][1].psi[:] = 0.0
        assert np.array_equal(traj.samples[0][1].psi, a)


class TestDivergenceGuard:
    def test_blowup_raises_with_time(self):
        plan = basis.build_plan(basis.torus(2 * np.pi), 8)
        big = ops.random_state(plan, seed=3, e1=1e8, alpha=1e-4)
        params = dyn.ModelParams(nu=1e-6, alpha=1e-4, sigma=1e-6, forcing=dyn.zero_forcing(plan))
        sch = ti.SchemeConfig(dt=10.0, t_end=1000.0, method=ti.IF_EULER)
        with pytest.raises(DivergenceError) as err:
            ti.run(plan, big, params, sch)
        assert err.value.t > 0.0
        assert err.value.t <= 1000.0


class TestPreparedRun:
    def test_ball_shrinks_from_outside(self):
        # outside the 2 rho ball the tendency is pure Stokes decay
        plan = basis.build_plan(basis.sphere(), 8)
        c = np.zeros(plan.n_modes)
        c[basis.mode_slot(plan, (1, 0))] = 1.0
        params = dyn.ModelParams(nu=1.0, alpha=1.0, sigma=0.0, forcing=dyn.Forcing(c, np.zeros(0)))
        v0 = ops.random_state(plan, seed=5, e1=100.0)
        rho = 0.05 * ops.norm_l2(plan, v0)
        sch = ti.SchemeConfig(dt=0.005, t_end=0.2, stride=4)
        traj = ti.run_prepared(plan, v0, params, rho, sch)
        norms = [ops.norm_l2(plan, s) for _, s in traj.samples]
        assert all(b < a for a, b in zip(norms, norms[1:]))

    def test_geometry_guard(self):
        plan, params = forced_torus()
        v = ops.random_state(plan, seed=6)
        from bardina2d.errors import UnsupportedGeometryError

        with pytest.raises(UnsupportedGeometryError):
            ti.run_prepared(plan, v, params, 1.0, ti.SchemeConfig(dt=0.1, t_end=0.2))


class TestSuggestedStep:
    def test_positive_and_capped(self):
        plan, params = forced_torus()
        st = ops.random_state(plan, seed=7)
        dt = ti.suggested_dt(plan, params, st)
        assert 0.0 < dt <= 0.05
        # stronger advection tightens the step
        hot = ops.random_state(plan, seed=7, e1=100.0)
        assert ti.suggested_dt(plan, params, hot) <= dt
