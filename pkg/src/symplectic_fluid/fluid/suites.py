"""Residual suites for the symplectic structure of a flow.

Dynamic identities (those that hold only when the flow solves its equations
of motion) use ``tol`` when given; otherwise 1e-8 class tolerances for the
analytic provider and ``NUMERIC_TOL`` for sampled fields, whose residuals are
judged by refinement studies instead.  Algebraic identities keep rounding-level
tolerances under both providers.  Norms are L-infinity over unmasked points.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..geometry import (
    KForm,
    SpaceTimeVector,
    d_scalar,
    exterior_derivative,
    expr as ex,
    field_norms,
    form_norms,
    interior_product,
    lie_derivative_form,
    norms,
    solve_hamiltonian,
    symplectic_divergence,
    vector_norms,
    wedge,
)
from ..geometry.forms import fadd, fdiv, fscale
from .objects import (
    build_omega,
    build_theta,
    hamiltonian_closed_form,
    helicity_budget,
    helicity_current,
    helicity_fields,
    suspension,
    theta_wedge_omega_closed_form,
)
from .report import CheckResult, VerificationReport
from .scene import FluidScene

NUMERIC_TOL = 1e-2
GAUGE_SHIFT = 1.0


def _dyn_tol(scene: FluidScene, analytic: float, tol: Optional[float]) -> float:
    if tol is not None:
        return tol
    return analytic if scene.provider.mode == "analytic" else NUMERIC_TOL


def _rel(res: tuple, scale: float) -> tuple:
    scale = max(scale, 1e-300)
    return res[0] / scale, res[1] / scale


def _check(name, anchor, res, tol, mask_frac, **detail) -> CheckResult:
    return CheckResult(name, anchor, float(res[0]), float(res[1]), float(tol), float(mask_frac), detail)


def _attach_dynamics(report: VerificationReport, scene: FluidScene, with_dynamics: bool):
    if not with_dynamics:
        return
    from ..dynamics.residuals import dynamics_residuals

    dyn = dynamics_residuals(scene)
    report.dynamics = {c.name: {"residual": c.residual_linf, "verdict": c.verdict} for c in dyn.checks}


def random_smooth_function(seed: int, provider, modes: int = 3, max_wavenumber: int = 2, time_dependent=True):
    """Seeded trigonometric polynomial in (t, x, y, z), periodic in space."""
    rng = np.random.default_rng(seed)
    t, x, y, z = (ex.var(i) for i in range(4))
    acc = ex.const(0.0)
    for _ in range(modes):
        k = rng.integers(-max_wavenumber, max_wavenumber + 1, size=3)
        if not np.any(k):
            k[0] = 1
        omega = float(rng.uniform(-1, 1)) if time_dependent else 0.0
        phase = float(rng.uniform(0, 2 * np.pi))
        amp = float(rng.uniform(0.5, 1.5))
        arg = float(k[0]) * x + float(k[1]) * y + float(k[2]) * z + omega * t + phase
        acc = acc + amp * ex.sin(arg)
    return provider.from_expr(acc)


# --------------------------------------------------------------------------
def verify_prop1(scene: FluidScene, tol: Optional[float] = None, with_dynamics: bool = True) -> VerificationReport:
    """Closedness, exactness and non-degeneracy of Omega."""
    from ..geometry import pfaffian_density

    report = VerificationReport("symplectic_structure", scene.name, scene.provider.mode)
    mask = scene.mask
    frac = scene.masked_fraction
    omega = build_omega(scene)
    theta = build_theta(scene)
    scale = form_norms(omega, mask)[0]
    t_dyn = _dyn_tol(scene, 1e-8, tol)
    report.add(
        _check("closedness", "d Omega = 0", _rel(form_norms(exterior_derivative(omega), mask), scale), t_dyn, frac)
    )
    report.add(
        _check(
            "exactness",
            "d theta = Omega",
            _rel(form_norms(exterior_derivative(theta) - omega, mask), scale),
            t_dyn,
            frac,
        )
    )
    density = scene.nondegeneracy_density
    rho = pfaffian_density(omega)
    p = scene.provider
    pf_res = field_norms(fadd(rho, density), p, mask)
    report.add(
        _check(
            "pfaffian",
            "Omega^Omega/2 = -(q - 2 nu H_w) dx^dy^dz^dt",
            _rel(pf_res, field_norms(density, p, mask)[0]),
            1e-10,
            frac,
        )
    )
    report.add(_check("masked_fraction", "q != 2 nu H_w", (frac, frac), 0.5, 0.0))
    _attach_dynamics(report, scene, with_dynamics)
    return report


# --------------------------------------------------------------------------
def four_form_identity(scene: FluidScene):
    """``d(theta ^ Omega) - Omega ^ Omega`` as its sorted (dt^dx^dy^dz) coefficient."""
    theta = build_theta(scene)
    omega = build_omega(scene)
    lhs = exterior_derivative(wedge(theta, omega))
    full = (0, 1, 2, 3)
    return (lhs - wedge(omega, omega)).components[full]


def verify_prop2(scene: FluidScene, tol: Optional[float] = None, with_dynamics: bool = True) -> VerificationReport:
    """``d(theta ^ Omega) = Omega ^ Omega`` two ways, and the three-form expansion."""
    report = VerificationReport("helicity_identity", scene.name, scene.provider.mode)
    p = scene.provider
    mask = scene.mask
    frac = scene.masked_fraction
    omega = build_omega(scene)
    theta = build_theta(scene)
    volume_scale = form_norms(wedge(omega, omega), mask)[0]
    t_dyn = _dyn_tol(scene, 1e-8, tol)

    pipeline = four_form_identity(scene)
    # -2 R dx^dy^dz^dt has sorted coefficient +2 R
    budget = fscale(helicity_budget(scene).residual, 2.0)
    vp, vb = p.values_many([pipeline, budget])
    r_pipe = _rel(norms([vp], mask), volume_scale)
    r_budget = _rel(norms([vb], mask), volume_scale)
    agree = _rel(norms([vp - vb], mask), volume_scale)
    report.add(_check("form_pipeline", "d(theta^Omega) - Omega^Omega = 0", r_pipe, t_dyn, frac))
    report.add(_check("density_budget", "helicity density budget", r_budget, t_dyn, frac))
    report.add(_check("agreement", "form pipeline = -2 R vol", agree, 1e-8 if tol is None else tol, frac))

    tw = wedge(theta, omega)
    expansion = _rel(form_norms(tw - theta_wedge_omega_closed_form(scene), mask), form_norms(tw, mask)[0])
    report.add(_check("three_form_expansion", "theta^Omega component expansion", expansion, 1e-10, frac))

    shifted = scene.replace(phi=fadd(scene.phi, GAUGE_SHIFT))
    gauge = p.values(four_form_identity(shifted))
    report.add(
        _check(
            "phi_gauge",
            "helicity flux independent of phi",
            _rel(norms([gauge - vp], mask), volume_scale),
            t_dyn,
            frac,
        )
    )
    _attach_dynamics(report, scene, with_dynamics)
    return report


# --------------------------------------------------------------------------
def verify_prop3(
    scene: FluidScene,
    tol: Optional[float] = None,
    current: Optional[SpaceTimeVector] = None,
    with_dynamics: bool = True,
) -> VerificationReport:
    """J is the Liouville field: ``i(J) Omega = theta``, ``L_J Omega = Omega``, ``div J = 2``."""
    report = VerificationReport("helicity_current", scene.name, scene.provider.mode)
    p = scene.provider
    mask = scene.mask
    frac = scene.masked_fraction
    omega = build_omega(scene)
    theta = build_theta(scene)
    J = helicity_current(scene) if current is None else current

    if "closed_form_discrepancy" in J.notes:
        d = J.notes["closed_form_discrepancy"]
        report.add(_check("dual_vs_closed_form", "dual of theta^Omega = closed-form current", (d, d), 1e-8, frac))
    contraction = _rel(form_norms(interior_product(J, omega) - theta, mask), form_norms(theta, mask)[0])
    report.add(_check("liouville_contraction", "i(J) Omega = theta", contraction, 1e-8, frac))

    lie = lie_derivative_form(J, omega) - omega
    report.add(
        _check(
            "dilation",
            "L_J Omega = Omega",
            _rel(form_norms(lie, mask), form_norms(omega, mask)[0]),
            _dyn_tol(scene, 1e-7, tol),
            frac,
        )
    )
    div = symplectic_divergence(omega, J)
    report.add(
        _check(
            "divergence",
            "div_Omega J = 2",
            field_norms(fadd(div, -2.0), p, mask),
            _dyn_tol(scene, 1e-7, tol),
            frac,
        )
    )
    _attach_dynamics(report, scene, with_dynamics)
    return report


# --------------------------------------------------------------------------
def inviscid_current_closed_form(scene: FluidScene) -> SpaceTimeVector:
    """``[2H (d/dt + v) + (phi + p - v^2/2) w + v x grad phi] / q``."""
    from .objects import bernoulli_like
    from .scene import cross, vadd, vscale

    hf = helicity_fields(scene)
    coef = fadd(scene.phi, bernoulli_like(scene, -1.0))
    two_H = fscale(hf.H, 2.0)
    spatial = vadd(
        vadd(vscale(scene.velocity, two_H), vscale(scene.vorticity, coef)),
        cross(scene.velocity, scene.grad_phi),
    )
    q = hf.q
    return SpaceTimeVector((fdiv(two_H, q), *(fdiv(c, q) for c in spatial)), scene.provider, scene.mask)


def vorticity_over_q(scene: FluidScene) -> SpaceTimeVector:
    q = helicity_fields(scene).q
    return SpaceTimeVector((0.0, *(fdiv(c, q) for c in scene.vorticity)), scene.provider, scene.mask)


def _vec_rel(a: SpaceTimeVector, b: SpaceTimeVector, mask) -> float:
    return vector_norms(a - b, mask)[0] / max(vector_norms(b, mask)[0], 1e-300)


def verify_prop4(
    scene: FluidScene,
    tol: Optional[float] = None,
    seeds: Sequence[int] = (11, 12),
    with_dynamics: bool = True,
) -> VerificationReport:
    """Inviscid flows with advected phi: the suspension and ``w/q`` are Hamiltonian."""
    if scene.nu != 0:
        raise ValueError("the inviscid suite needs nu = 0")
    if not scene.phi_advected:
        raise ValueError("the inviscid suite needs a scene whose phi is advected by the flow")
    report = VerificationReport("inviscid", scene.name, scene.provider.mode)
    p = scene.provider
    mask = scene.mask
    frac = scene.masked_fraction
    omega = build_omega(scene)
    t_dyn = _dyn_tol(scene, 1e-9, tol)

    dphi = d_scalar(scene.phi, p)
    dphi_scale = form_norms(dphi, mask)[0]
    contraction = interior_product(suspension(scene), omega)
    r_a = form_norms(contraction + dphi, mask)
    report.add(
        _check("suspension_hamiltonian", "i(d/dt + v) Omega_0 = -d phi", _rel(r_a, dphi_scale), t_dyn, frac)
    )
    # with i(X_f) Omega = -df the contraction comes out as +d phi, i.e. d/dt + v = X_{-phi}
    r_neg = form_norms(contraction - dphi, mask)
    report.add(
        _check(
            "suspension_hamiltonian_minus_phi",
            "i(d/dt + v) Omega_0 = +d phi",
            _rel(r_neg, dphi_scale),
            t_dyn,
            frac,
        )
    )
    Xt = vorticity_over_q(scene)
    dt_form = d_scalar(p.coordinate(0), p)
    r_b = form_norms(interior_product(Xt, omega) + dt_form, mask)
    report.add(_check("vorticity_hamiltonian", "i(w/q) Omega_0 = -dt", r_b, t_dyn, frac))

    worst = 0.0
    detail = {}
    samples = [("phi", scene.phi), ("t", p.coordinate(0))]
    samples += [(f"random{s}", random_smooth_function(s, p)) for s in seeds]
    for label, f in samples:
        solved = solve_hamiltonian(omega, f, mask=mask)
        rel = _vec_rel(solved, hamiltonian_closed_form(scene, f), mask)
        detail[label] = rel
        worst = max(worst, rel)
    X_phi = solve_hamiltonian(omega, scene.phi, mask=mask)
    detail["X_phi_minus_suspension"] = _vec_rel(X_phi, suspension(scene), mask)
    detail["X_phi_plus_suspension"] = _vec_rel(X_phi, suspension(scene).scale(-1.0), mask)
    report.add(_check("closed_form_hamiltonian", "X_f closed form = pointwise solve", (worst, worst), 1e-8, frac, **detail))
    rec = _vec_rel(solve_hamiltonian(omega, p.coordinate(0), mask=mask), Xt, mask)
    report.add(_check("time_generator", "X_t = w/q", (rec, rec), t_dyn, frac))

    J = helicity_current(scene)
    j0 = _vec_rel(J, inviscid_current_closed_form(scene), mask)
    report.add(_check("inviscid_current", "J_0 closed form", (j0, j0), 1e-8, frac))

    budget = helicity_budget(scene)
    vol_scale = form_norms(wedge(omega, omega), mask)[0]
    r_d = _rel(field_norms(fscale(budget.residual, 2.0), p, mask), vol_scale)
    report.add(_check("helicity_conservation", "dH/dt + div(flux) = 0", r_d, t_dyn, frac))
    drift = float(np.max(np.abs(budget.int_H - budget.int_H[0])))
    base = abs(float(budget.int_H[0]))
    rel_drift = drift / base if base > 1e-12 else drift
    report.add(
        _check(
            "total_helicity_constant",
            "int H constant in time",
            (rel_drift, rel_drift),
            t_dyn,
            0.0,
            absolute_drift=drift,
            int_H0=base,
        )
    )
    _attach_dynamics(report, scene, with_dynamics)
    return report
