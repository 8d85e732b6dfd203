"""Canonical forms of a flow, the helicity budget and the structure suites."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import beltrami
from symplectic_fluid.dynamics import momentum_terms, scale_velocity
from symplectic_fluid.fluid import (
    CheckResult,
    ExcessiveMaskingError,
    FluidScene,
    VerificationReport,
    build_omega,
    build_theta,
    fit_exponential_rate,
    hamiltonian_closed_form,
    helicity_budget,
    helicity_current,
    helicity_current_closed_form,
    helicity_fields,
    random_smooth_function,
    suspension,
    suspension_one_form,
    verify_prop1,
    verify_prop2,
    verify_prop3,
    verify_prop4,
)
from symplectic_fluid.geometry import (
    AnalyticProvider,
    SpaceTimeGrid,
    d_scalar,
    exterior_derivative,
    expr as ex,
    form_norms,
    interior_product,
    norms,
    pfaffian_density,
    solve_hamiltonian,
    symplectic_divergence,
    uniform_times,
    vector_norms,
)

T, X, Y, Z = (ex.var(i) for i in range(4))


def random_scene(seed, nu, n=8):
    """Smooth fields that satisfy no equation of motion."""
    p = AnalyticProvider(SpaceTimeGrid(n, uniform_times(0.0, 0.3, 3)))
    fields = [random_smooth_function(seed + 7 * i, p, modes=2) for i in range(5)]
    return FluidScene(p, tuple(fields[:3]), fields[3], fields[4], nu, {"name": f"random{seed}"})


class TestCanonicalForms:
    def test_beltrami_vorticity_and_helicity(self, beltrami16):
        s = beltrami16
        p = s.provider
        v = p.values_many(list(s.velocity))
        w = p.values_many(list(s.vorticity))
        for a, b in zip(v, w):
            np.testing.assert_allclose(b, a, atol=1e-14)
        hf = helicity_fields(s)
        speed2 = sum(a * a for a in v)
        np.testing.assert_allclose(p.values(hf.H), 0.5 * speed2, atol=1e-14)
        np.testing.assert_allclose(p.values(hf.H_w), 0.5 * speed2, atol=1e-14)

    def test_theta_components(self, beltrami16):
        s = beltrami16
        p = s.provider
        th = build_theta(s)
        # p = -v^2/2 makes the time component -phi
        np.testing.assert_allclose(p.values(th[(0,)]), -p.values(s.phi), atol=1e-14)
        for i in (1, 2, 3):
            np.testing.assert_allclose(p.values(th[(i,)]), p.values(s.velocity[i - 1]), atol=0)

    def test_omega_components(self):
        s = random_scene(3, 0.1)
        p = s.provider
        om = build_omega(s)
        w = p.values_many(list(s.vorticity))
        assert np.array_equal(p.values(om[(2, 3)]), w[0])
        assert np.array_equal(p.values(om[(1, 3)]), -w[1])
        assert np.array_equal(p.values(om[(1, 2)]), w[2])
        v = p.values_many(list(s.velocity))
        cw = p.values_many(list(s.curl_vorticity))
        gphi = [p.values(p.diff(s.phi, a)) for a in (1, 2, 3)]
        vxw = [v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2], v[0] * w[1] - v[1] * w[0]]
        for i in range(3):
            expected = gphi[i] + vxw[i] - s.nu * cw[i]
            np.testing.assert_allclose(p.values(om[(0, i + 1)]), expected, rtol=1e-13, atol=1e-13)

    @given(seed=st.integers(0, 10_000), nu=st.floats(0.0, 0.5))
    @settings(max_examples=15, deadline=None)
    def test_pfaffian_density_identity(self, seed, nu):
        s = random_scene(seed, nu)
        p = s.provider
        om = build_omega(s)
        vel = s.velocity
        w = [
            p.values(p.diff(vel[2], 2)) - p.values(p.diff(vel[1], 3)),
            p.values(p.diff(vel[0], 3)) - p.values(p.diff(vel[2], 1)),
            p.values(p.diff(vel[1], 1)) - p.values(p.diff(vel[0], 2)),
        ]
        cw = p.values_many(list(s.curl_vorticity))
        gphi = [p.values(p.diff(s.phi, a)) for a in (1, 2, 3)]
        q = sum(a * b for a, b in zip(w, gphi))
        Hw = 0.5 * sum(a * b for a, b in zip(w, cw))
        rho = p.values(pfaffian_density(om))
        scale = max(float(np.max(np.abs(q))), float(np.max(np.abs(Hw))), 1.0)
        assert float(np.max(np.abs(rho + (q - 2 * nu * Hw)))) <= 1e-12 * scale

        # rho^2 = det of the coefficient matrix at sample points
        vals = om.values()
        for idx in [(0, 1, 2, 3), (2, 5, 0, 7)]:
            M = np.zeros((4, 4))
            for (a, b), arr in vals.items():
                M[a, b] = arr[idx]
                M[b, a] = -arr[idx]
            assert rho[idx] ** 2 == pytest.approx(np.linalg.det(M), rel=1e-9, abs=1e-9)

    def test_exactness_defect_is_momentum_defect(self, beltrami16):
        s = scale_velocity(beltrami16, 1.1)
        p = s.provider
        defect = exterior_derivative(build_theta(s)) - build_omega(s)
        terms = momentum_terms(s)
        total = [sum(p.values(terms[k][i]) for k in terms) for i in range(3)]
        assert norms(total)[0] > 1e-2
        for i in range(3):
            np.testing.assert_allclose(p.values(defect[(0, i + 1)]), total[i], atol=1e-12)
        # the spatial block is exact for any velocity
        for key in [(1, 2), (1, 3), (2, 3)]:
            assert float(np.max(np.abs(p.values(defect[key])))) <= 1e-13


class TestSuspension:
    def test_viscous_contraction_is_not_closed(self, beltrami16):
        res = suspension_one_form(beltrami16)
        assert not res.locally_hamiltonian
        assert res.closedness > 1e-3
        assert res.discrepancy <= 1e-13

    def test_inviscid_contraction_is_plus_dphi(self, drift16):
        s = drift16
        res = suspension_one_form(s)
        assert res.locally_hamiltonian
        dphi = d_scalar(s.phi, s.provider)
        assert form_norms(res.form - dphi, s.mask)[0] <= 1e-12 * form_norms(dphi, s.mask)[0]

    def test_resting_fluid_is_closed(self):
        p = AnalyticProvider(SpaceTimeGrid(8, uniform_times(0.0, 0.2, 3)))
        s = FluidScene(p, (0.0, 0.0, 0.0), 0.0, ex.sin(X), 0.0, {"name": "rest"})
        res = suspension_one_form(s)
        assert res.locally_hamiltonian
        assert vector_norms(suspension(s))[0] == 1.0


class TestHelicityBudget:
    def test_beltrami_decay_rate(self, beltrami32):
        b = helicity_budget(beltrami32)
        assert b.fitted_rate == pytest.approx(-0.02, rel=1e-6)
        assert float(np.max(np.abs(b.defect))) <= 1e-7 * float(np.max(np.abs(b.int_H)))

    def test_rate_scales_with_eigenvalue(self):
        s = beltrami(nu=0.05, n=16, **{"lambda": 2})
        b = helicity_budget(s)
        assert b.fitted_rate == pytest.approx(-2 * 0.05 * 4, rel=1e-6)

    def test_total_helicity_of_abc(self, beltrami16):
        # int v.w/2 = (A^2 + B^2 + C^2) lambda (2 pi)^3 / 2 at t = 0
        b = helicity_budget(beltrami16)
        assert b.int_H[0] == pytest.approx(3 * (2 * np.pi) ** 3 / 2, rel=1e-12)

    def test_stencil_tracks_exact_derivative(self, beltrami32):
        b = helicity_budget(beltrami32)
        np.testing.assert_allclose(b.dHdt_stencil[1:-1], b.dHdt[1:-1], rtol=1e-3)

    def test_fit_rejects_sign_change(self):
        assert np.isnan(fit_exponential_rate([0, 1, 2], [1.0, -1.0, 1.0]))
        assert fit_exponential_rate([0, 1, 2], np.exp([0.0, -0.5, -1.0])) == pytest.approx(-0.5)

    def test_density_residual_detects_broken_dynamics(self, beltrami16):
        s = scale_velocity(beltrami16, 1.1)
        r = s.provider.values(helicity_budget(s).residual)
        assert float(np.max(np.abs(r))) > 1e-2


class TestSuites:
    def test_prop1_passes_on_beltrami(self, beltrami32):
        r = verify_prop1(beltrami32)
        assert r.passed, r.summary_lines()
        assert r.dynamics["momentum"]["verdict"] == "pass"

    def test_prop2_passes(self, beltrami32, drift16):
        for s in (beltrami32, drift16):
            r = verify_prop2(s)
            assert r.passed, r.summary_lines()

    def test_prop3_passes(self, beltrami32):
        r = verify_prop3(beltrami32)
        assert r.passed, r.summary_lines()
        assert r.masked_fraction < 0.05

    def test_prop4_requires_inviscid_advected(self, beltrami16):
        with pytest.raises(ValueError):
            verify_prop4(beltrami16)

    def test_prop4_sign_corrected_checks(self, shear16, drift16):
        for s in (shear16, drift16):
            r = verify_prop4(s)
            for name in (
                "suspension_hamiltonian_minus_phi",
                "vorticity_hamiltonian",
                "closed_form_hamiltonian",
                "time_generator",
                "inviscid_current",
                "helicity_conservation",
                "total_helicity_constant",
            ):
                assert r[name].passed, (name, r.summary_lines())

    def test_current_closed_form_matches_dual(self, beltrami16):
        J = helicity_current(beltrami16)
        assert J.notes["closed_form_discrepancy"] <= 1e-12
        ref = helicity_current_closed_form(beltrami16)
        assert vector_norms(J - ref, beltrami16.mask)[0] <= 1e-12 * vector_norms(ref)[0]

    def test_closed_form_hamiltonian_matches_solve(self, beltrami16):
        s = beltrami16
        f = random_smooth_function(5, s.provider)
        solved = solve_hamiltonian(build_omega(s), f, mask=s.mask)
        ref = hamiltonian_closed_form(s, f)
        assert vector_norms(solved - ref, s.mask)[0] <= 1e-10 * vector_norms(ref, s.mask)[0]

    def test_perturbed_current_fails_contraction_keeps_divergence(self, beltrami16):
        """J + X_f is no longer a Liouville field but still has divergence 2."""
        s = beltrami16
        om = build_omega(s)
        Xf = solve_hamiltonian(om, random_smooth_function(9, s.provider), mask=s.mask)
        Jp = helicity_current(s) + Xf
        r = verify_prop3(s, current=Jp, with_dynamics=False)
        assert not r["liouville_contraction"].passed
        assert r["liouville_contraction"].residual_linf > 1e-2
        assert r["divergence"].passed
        div = s.provider.values(symplectic_divergence(om, Jp))
        assert float(np.max(np.abs(div[~s.mask] - 2.0))) <= 1e-7

    def test_suspension_is_not_a_dilation(self, beltrami16):
        s = beltrami16
        r = verify_prop3(s, current=suspension(s), with_dynamics=False)
        assert not r["liouville_contraction"].passed


class TestReport:
    def test_invalid_when_mostly_masked(self):
        c = CheckResult("x", "a", 0.0, 0.0, 1.0, masked_fraction=0.6)
        assert c.verdict == "invalid"
        assert not c.passed
        assert CheckResult("x", "a", float("nan"), 0.0, 1.0).verdict == "fail"

    def test_json_round_trip(self):
        import json

        r = VerificationReport("s", "scene", "analytic")
        r.add(CheckResult("x", "a", 1e-3, 1e-4, 1e-2, 0.01, {"inf": float("inf")}))
        data = json.loads(r.to_json())
        assert data["passed"] is True
        assert data["checks"][0]["detail"]["inf"] == "inf"

    def test_excessive_masking_is_refused(self):
        p = AnalyticProvider(SpaceTimeGrid(8, uniform_times(0.0, 0.2, 3)))
        s = FluidScene(p, (0.0, 0.0, 0.0), 0.0, ex.sin(X), 0.0, {"name": "rest"})
        with pytest.raises(ExcessiveMaskingError):
            helicity_current(s)

    def test_interior_product_of_suspension_time_block(self, beltrami16):
        # the contraction equals (grad phi - nu curl w) . (dx - v dt)
        res = suspension_one_form(beltrami16)
        assert form_norms(res.form - res.closed_form, beltrami16.mask)[0] <= 1e-12 * res.scale
        om = build_omega(beltrami16)
        assert form_norms(interior_product(suspension(beltrami16), om) - res.form)[0] == 0.0
