"""Exact catalog flows, the spectral solver and scalar transport."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import beltrami
from symplectic_fluid.convergence import helical_mixture_config, refined, refinement_study
from symplectic_fluid.dynamics import (
    CatalogError,
    CatalogSpec,
    SolverConfig,
    SpectralBox,
    advect_scalar,
    dynamics_residuals,
    initial_velocity,
    make_scene,
    pressure_from_velocity,
    sample_scene,
    scale_velocity,
    step_navier_stokes,
    with_advected_phi,
)
from symplectic_fluid.fluid import FluidScene, verify_prop1
from symplectic_fluid.geometry import AnalyticProvider, SpaceTimeGrid, expr as ex, uniform_times

T, X, Y, Z = (ex.var(i) for i in range(4))


class TestCatalog:
    def test_beltrami_solves_navier_stokes(self, beltrami32):
        r = dynamics_residuals(beltrami32)
        assert r.passed, r.summary_lines()

    def test_drift_scalar_is_advected(self, drift16):
        r = dynamics_residuals(drift16)
        assert r["advection"].passed
        assert r["advection"].residual_linf <= 1e-12

    def test_viscous_drift_scalar_is_advected(self):
        s = beltrami(nu=0.05, n=16, phi="drift", C=0.0)
        assert s.phi_advected
        assert dynamics_residuals(s)["advection"].residual_linf <= 1e-12

    def test_shear_is_steady_euler(self, shear16):
        r = dynamics_residuals(shear16)
        assert r.passed, r.summary_lines()

    def test_decay_factor(self):
        s = beltrami(nu=0.1, n=8)
        v = s.provider.values(s.velocity[0])
        # v_x = exp(-nu t)(sin z + cos y); compare the last slice to the first
        np.testing.assert_allclose(v[-1], v[0] * math.exp(-0.1 * 1.0), atol=1e-14)

    @pytest.mark.parametrize(
        "spec",
        [
            CatalogSpec("decaying_beltrami", {"lambda": 1.5}, nu=0.01, n_space=8),
            CatalogSpec("decaying_beltrami", {"lambda": 0}, nu=0.01, n_space=8),
            CatalogSpec("decaying_beltrami", {"C": 1.0}, n_space=8, phi="drift"),
            CatalogSpec("decaying_beltrami", {}, n_space=8, phi="sideways"),
            CatalogSpec("decaying_beltrami", {"direction": (0, 0, 0)}, n_space=8),
            CatalogSpec("shear_euler", {}, nu=0.1, n_space=8),
            CatalogSpec("shear_euler", {"profile": "sin(x)"}, n_space=8),
            CatalogSpec("shear_euler", {"profile": "sin(y)", "phi": "1"}, n_space=8),
        ],
    )
    def test_rejected_parameters(self, spec):
        with pytest.raises(CatalogError):
            make_scene(spec)

    def test_unknown_family(self):
        with pytest.raises(CatalogError):
            CatalogSpec("vortex_ring")

    def test_spec_round_trip(self):
        spec = CatalogSpec("decaying-beltrami", {"A": 2.0}, nu=0.02, n_space=8)
        assert spec.family == "decaying_beltrami"
        assert CatalogSpec.from_dict(spec.to_dict()) == spec

    def test_scaled_velocity_breaks_momentum(self, beltrami16):
        s = scale_velocity(beltrami16, 1.1)
        r = dynamics_residuals(s)
        assert not r["momentum"].passed
        assert r["momentum"].residual_linf >= 1e-2
        # divergence is linear in v, so it survives the scaling
        assert r["div_v"].passed
        assert s.provenance["velocity_scale"] == pytest.approx(1.1)


class TestSpectralBox:
    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=10, deadline=None)
    def test_projection_is_idempotent_and_solenoidal(self, seed):
        box = SpectralBox(8)
        rng = np.random.default_rng(seed)
        v_hat = box.fwd(rng.standard_normal((3, 8, 8, 8)))
        once = box.project(v_hat)
        np.testing.assert_allclose(box.project(once), once, atol=1e-12)
        assert float(np.max(np.abs(box.divergence(once)))) <= 1e-10

    def test_dealias_keeps_low_modes(self):
        box = SpectralBox(12)
        x = np.arange(12) * 2 * np.pi / 12
        low = np.broadcast_to(np.sin(2 * x).reshape(-1, 1, 1), (12, 12, 12))
        high = np.broadcast_to(np.cos(5 * x).reshape(1, 1, -1), (12, 12, 12))
        np.testing.assert_allclose(box.inv(box.dealias(box.fwd(low))), low, atol=1e-13)
        assert float(np.max(np.abs(box.inv(box.dealias(box.fwd(high)))))) <= 1e-13

    def test_curl_of_abc_field(self):
        cfg = SolverConfig(n_space=16)
        box = SpectralBox(16)
        v = initial_velocity(cfg)
        w = box.inv(box.curl(box.fwd(v)))
        np.testing.assert_allclose(w, v, atol=1e-12)

    def test_beltrami_pressure(self):
        box = SpectralBox(16)
        v = initial_velocity(SolverConfig(n_space=16))
        p = pressure_from_velocity(box, v)
        head = -0.5 * np.sum(v * v, axis=0)
        np.testing.assert_allclose(p, head - head.mean(), atol=1e-12)


class TestSolver:
    def test_abc_decays_exactly(self):
        cfg = SolverConfig(n_space=16, nu=0.01, dt=0.01, t_end=0.4)
        s = step_navier_stokes(cfg)
        v = s.provider.values(s.velocity[0])
        for i, t in enumerate(s.grid.times):
            np.testing.assert_allclose(v[i], v[0] * math.exp(-0.01 * t), atol=1e-6)

    def test_zero_state_stays_at_rest(self):
        s = step_navier_stokes(SolverConfig(n_space=8, initial_condition={"kind": "zero"}, t_end=0.04))
        assert all(float(np.max(np.abs(c))) == 0.0 for c in s.velocity)

    def test_inviscid_energy_error_converges(self):
        base = {"kind": "random", "seed": 3, "k_max": 2, "amplitude": 1.0}
        drift = []
        for dt in (0.04, 0.02):
            cfg = SolverConfig(n_space=16, nu=0.0, dt=dt, t_end=0.8, initial_condition=base, advect_phi=False)
            e = step_navier_stokes(cfg).provenance["energy"]
            drift.append(abs(e[-1] - e[0]))
        assert drift[1] < drift[0]
        assert math.log2(drift[0] / drift[1]) >= 3.5

    def test_cfl_violation(self):
        with pytest.raises(ValueError, match="CFL"):
            step_navier_stokes(SolverConfig(n_space=16, dt=0.5, t_end=2.0))

    def test_snapshot_times_must_be_on_steps(self):
        with pytest.raises(ValueError):
            step_navier_stokes(SolverConfig(n_space=8, dt=0.03, t_end=0.1, snapshot_times=(0.0, 0.05, 0.1)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(dt=0.0)
        with pytest.raises(ValueError):
            SolverConfig(integrator="euler")
        cfg = SolverConfig(n_space=8)
        assert SolverConfig.from_dict(cfg.to_dict()) == cfg

    def test_solver_scene_satisfies_structure(self):
        s = step_navier_stokes(helical_mixture_config())
        r = verify_prop1(s)
        assert r.passed, r.summary_lines()
        assert r.dynamics["momentum"]["verdict"] == "pass"


class TestTransport:
    def _scene(self, velocity, n=16, times=uniform_times(0.0, 0.4, 5)):
        p = AnalyticProvider(SpaceTimeGrid(n, times))
        return FluidScene(p, velocity, 0.0, 0.0, 0.0, {"name": "kinematic"})

    def test_steady_shear(self):
        s = self._scene((ex.sin(Y), 0.0, 0.0))
        res = advect_scalar(s, "sin(x)")
        exact = s.provider.values(ex.sin(X - T * ex.sin(Y)))
        np.testing.assert_allclose(res.values, exact, atol=1e-6)
        # the residual uses the three-point time stencil at the snapshot spacing
        assert res.residual <= 1e-2

    def test_uniform_translation(self):
        s = self._scene((1.0, 0.0, 0.5))
        res = advect_scalar(s, ex.cos(X + 2 * Z), max_dt=0.02)
        exact = s.provider.values(ex.cos(X - T + 2 * (Z - 0.5 * T)))
        np.testing.assert_allclose(res.values, exact, atol=1e-7)

    def test_with_advected_phi_on_sampled_beltrami(self):
        spec = CatalogSpec("decaying_beltrami", {}, nu=0.01, n_space=16, times=uniform_times(0.0, 0.1, 5), phi="periodic")
        s = with_advected_phi(make_scene(spec), "sin(x) + sin(y) + sin(z)")
        assert s.phi_advected and s.provider.mode == "numeric"
        assert s.provenance["phi_transport"]["residual"] <= 1e-2

    def test_sample_scene_rejects_linear_phi(self, beltrami16):
        with pytest.raises(ValueError, match="periodic"):
            sample_scene(beltrami16)


class TestRefinement:
    def test_refined_config(self):
        cfg = helical_mixture_config(n_space=16, dt=0.02, stride=2)
        fine = refined(cfg)
        assert fine.n_space == 32 and fine.dt == pytest.approx(0.01)
        centre = cfg.snapshot_times[2]
        np.testing.assert_allclose(
            np.asarray(fine.snapshot_times) - centre, (np.asarray(cfg.snapshot_times) - centre) / 2, atol=1e-15
        )

    def test_study_reports_second_order(self):
        report = refinement_study(helical_mixture_config())
        assert report.passed, report.summary_lines()
        ratios = [c.detail["ratio"] for c in report.checks if not c.detail["exempt"]]
        assert ratios and min(ratios) >= 3.0
