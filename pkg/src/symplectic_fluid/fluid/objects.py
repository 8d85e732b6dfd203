"""The canonical one-form, the symplectic two-form and the helicity current of a flow.

Form conventions (no factor 2 in either shorthand)::

    a . dx ^ dt        = a_x dx^dt + a_y dy^dt + a_z dz^dt
    w . (dx ^ dx)      = w_x dy^dz + w_y dz^dx + w_z dx^dy

so that ``d(v . dx)`` has spatial part ``(curl v) . (dx ^ dx)`` and
``d theta = Omega`` is exactly the rotational momentum equation.  ``v^2``
always means ``|v|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import (
    KForm,
    SpaceTimeVector,
    d_scalar,
    exterior_derivative,
    form_norms,
    interior_product,
    masked_fraction,
    norms,
    solve_dual,
    symplectic_volume,
    vector_norms,
    wedge,
)
from ..geometry.forms import fadd, fdiv, fmul, fscale, fsub, fsum
from .scene import FluidScene, advective, cross, div, dot, grad, laplacian, vadd, vscale, vsub

MAX_MASKED_FRACTION = 0.5


class ExcessiveMaskingError(ValueError):
    pass


@dataclass
class HelicityFields:
    H: object
    H_w: object
    q: object
    w: tuple


def vorticity(scene: FluidScene) -> tuple:
    return scene.vorticity


def helicity_fields(scene: FluidScene) -> HelicityFields:
    """Helicity ``v.w/2``, vortical helicity ``w.curl(w)/2`` and potential vorticity ``w.grad(phi)``."""
    w = scene.vorticity
    return HelicityFields(
        H=fscale(dot(scene.velocity, w), 0.5),
        H_w=fscale(dot(w, scene.curl_vorticity), 0.5),
        q=dot(w, scene.grad_phi),
        w=w,
    )


def bernoulli_like(scene: FluidScene, sign: float):
    """``p + sign * v^2 / 2``."""
    return fadd(scene.pressure, fscale(scene.speed_squared, 0.5 * sign))


def spatial_one_form(a, scene: FluidScene) -> dict:
    return {(1,): a[0], (2,): a[1], (3,): a[2]}


def flux_two_form(a, w, scene: FluidScene) -> KForm:
    """``-a . dx^dt + w . (dx^dx)`` in sorted components."""
    return KForm(
        2,
        {
            (0, 1): a[0],
            (0, 2): a[1],
            (0, 3): a[2],
            (2, 3): w[0],
            (1, 3): fscale(w[1], -1.0),
            (1, 2): w[2],
        },
        scene.provider,
    )


def build_theta(scene: FluidScene) -> KForm:
    """``theta = -(phi + p + v^2/2) dt + v . dx``; viscosity does not enter."""
    energy = fadd(scene.phi, bernoulli_like(scene, +1.0))
    comps = {(0,): fscale(energy, -1.0)}
    comps.update(spatial_one_form(scene.velocity, scene))
    return KForm(1, comps, scene.provider)


def omega_time_block(scene: FluidScene) -> tuple:
    """``grad phi + v x w - nu curl w``."""
    vxw = cross(scene.velocity, scene.vorticity)
    return vadd(vadd(scene.grad_phi, vxw), vscale(scene.curl_vorticity, -scene.nu))


def build_omega(scene: FluidScene) -> KForm:
    """``Omega_nu = -(grad phi + v x w - nu curl w) . dx^dt + w . (dx^dx)``."""
    return flux_two_form(omega_time_block(scene), scene.vorticity, scene)


def suspension(scene: FluidScene) -> SpaceTimeVector:
    """The convective derivative ``d/dt + v . grad`` as a space-time vector field."""
    return SpaceTimeVector((1.0, *scene.velocity), scene.provider)


def vorticity_vector(scene: FluidScene) -> SpaceTimeVector:
    return SpaceTimeVector((0.0, *scene.vorticity), scene.provider)


@dataclass
class SuspensionResult:
    form: KForm
    closed_form: KForm
    discrepancy: float
    closedness: float
    scale: float
    locally_hamiltonian: bool


def suspension_one_form(scene: FluidScene, tol: float = 1e-8) -> SuspensionResult:
    """Contract Omega with the suspension and test whether the result is closed.

    The contraction always equals ``(grad phi - nu curl w) . (dx - v dt)``;
    a non-closed result rules out even a local Hamiltonian function.
    """
    omega = build_omega(scene)
    form = interior_product(suspension(scene), omega)
    B = scene.reduced_gradient
    closed = KForm(
        1,
        {(0,): fscale(dot(B, scene.velocity), -1.0), **spatial_one_form(B, scene)},
        scene.provider,
    )
    mask = scene.mask
    scale = max(form_norms(form, mask)[0], 1e-300)
    discrepancy = form_norms(form - closed, mask)[0] / scale
    closedness = form_norms(exterior_derivative(form), mask)[0] / scale
    return SuspensionResult(form, closed, discrepancy, closedness, scale, closedness <= tol)


def helicity_flux(scene: FluidScene) -> tuple:
    """``H v + (p - v^2/2) w / 2``."""
    hf = helicity_fields(scene)
    return vadd(vscale(scene.velocity, hf.H), vscale(scene.vorticity, fscale(bernoulli_like(scene, -1.0), 0.5)))


def helicity_density_residual(scene: FluidScene):
    """``dH/dt + div(H v + (p - v^2/2) w / 2) - (nu/2) v . lap(w) + nu H_w``."""
    p = scene.provider
    hf = helicity_fields(scene)
    lap_w = tuple(laplacian(c, p) for c in scene.vorticity)
    out = fadd(p.diff(hf.H, 0), div(helicity_flux(scene), p))
    out = fsub(out, fscale(dot(scene.velocity, lap_w), 0.5 * scene.nu))
    return fadd(out, fscale(hf.H_w, scene.nu))


def domain_integral(values: np.ndarray, scene: FluidScene) -> np.ndarray:
    """Per-time-slice integral over the periodic box (rectangle rule, spectrally exact for trig polynomials)."""
    return np.sum(values, axis=(1, 2, 3)) * scene.grid.cell_volume()


@dataclass
class HelicityBudget:
    residual: object
    times: np.ndarray
    int_H: np.ndarray
    int_Hw: np.ndarray
    dHdt: np.ndarray
    dHdt_stencil: np.ndarray
    minus_2nu_int_Hw: np.ndarray
    defect: np.ndarray
    fitted_rate: float

    def rows(self) -> list:
        cols = (
            self.times,
            self.int_H,
            self.int_Hw,
            self.dHdt_stencil,
            self.dHdt,
            self.minus_2nu_int_Hw,
            self.defect,
        )
        return [tuple(float(c[i]) for c in cols) for i in range(len(self.times))]


BUDGET_COLUMNS = ("t", "int_H", "int_Hw", "dHdt_stencil", "dHdt", "minus_2nu_int_Hw", "defect")


def fit_exponential_rate(times, series) -> float:
    """Least-squares slope of ``log |series|``; NaN when the series changes sign or vanishes."""
    series = np.asarray(series, dtype=float)
    if len(series) < 2 or np.any(series == 0) or not (np.all(series > 0) or np.all(series < 0)):
        return float("nan")
    scale = np.max(np.abs(series))
    if scale < 1e-300:
        return float("nan")
    slope, _ = np.polyfit(np.asarray(times, dtype=float), np.log(np.abs(series)), 1)
    return float(slope)


def helicity_budget(scene: FluidScene) -> HelicityBudget:
    """Pointwise helicity-density budget residual and the total-helicity time series.

    On the periodic box the flux integrates out and the viscous term
    ``(nu/2) v . lap(w)`` integrates to ``-nu int H_w``, so the total obeys
    ``d/dt int H = -2 nu int H_w``; ``defect`` is the departure from that.
    """
    p = scene.provider
    hf = helicity_fields(scene)
    times = np.asarray(scene.grid.times)
    H, Hw, dH = p.values_many([hf.H, hf.H_w, p.diff(hf.H, 0)])
    int_H = domain_integral(H, scene)
    int_Hw = domain_integral(Hw, scene)
    dHdt = domain_integral(dH, scene)
    if len(times) >= 3:
        stencil = np.gradient(int_H, scene.grid.dt, edge_order=2)
    else:
        stencil = np.full_like(int_H, np.nan)
    minus = -2.0 * scene.nu * int_Hw
    return HelicityBudget(
        residual=helicity_density_residual(scene),
        times=times,
        int_H=int_H,
        int_Hw=int_Hw,
        dHdt=dHdt,
        dHdt_stencil=stencil,
        minus_2nu_int_Hw=minus,
        defect=dHdt - minus,
        fitted_rate=fit_exponential_rate(times, int_H),
    )


def helicity_current_closed_form(scene: FluidScene) -> SpaceTimeVector:
    """``[2H (d/dt + v) + (phi + p - v^2/2) w + v x (grad phi - nu curl w)] / (q - 2 nu H_w)``."""
    hf = helicity_fields(scene)
    D = scene.nondegeneracy_density
    coef = fadd(scene.phi, bernoulli_like(scene, -1.0))
    two_H = fscale(hf.H, 2.0)
    spatial = vadd(
        vadd(vscale(scene.velocity, two_H), vscale(scene.vorticity, coef)),
        cross(scene.velocity, scene.reduced_gradient),
    )
    comps = (fdiv(two_H, D), *(fdiv(c, D) for c in spatial))
    return SpaceTimeVector(comps, scene.provider, scene.mask)


def hamiltonian_closed_form(scene: FluidScene, f) -> SpaceTimeVector:
    """``[-w(f) (d/dt + v) + (df/dt) w + (grad phi - nu curl w) x grad f] / (q - 2 nu H_w)``."""
    p = scene.provider
    D = scene.nondegeneracy_density
    gf = grad(f, p)
    wf = dot(scene.vorticity, gf)
    material = fadd(p.diff(f, 0), dot(scene.velocity, gf))
    spatial = vadd(
        vadd(vscale(scene.velocity, fscale(wf, -1.0)), vscale(scene.vorticity, material)),
        cross(scene.reduced_gradient, gf),
    )
    comps = (fdiv(fscale(wf, -1.0), D), *(fdiv(c, D) for c in spatial))
    return SpaceTimeVector(comps, p, scene.mask)


def theta_wedge_omega_closed_form(scene: FluidScene) -> KForm:
    """``2H dx^dy^dz - [(phi + p - v^2/2) w + 2H v + v x (grad phi - nu curl w)] . dx^dx^dt``.

    ``G . dx^dx^dt`` means ``G_x dy^dz^dt + G_y dz^dx^dt + G_z dx^dy^dt``.
    """
    hf = helicity_fields(scene)
    coef = fadd(scene.phi, bernoulli_like(scene, -1.0))
    G = vadd(
        vadd(vscale(scene.vorticity, coef), vscale(scene.velocity, fscale(hf.H, 2.0))),
        cross(scene.velocity, scene.reduced_gradient),
    )
    # dy^dz^dt = dt^dy^dz, dz^dx^dt = -dt^dx^dz, dx^dy^dt = dt^dx^dy
    return KForm(
        3,
        {
            (1, 2, 3): fscale(hf.H, 2.0),
            (0, 2, 3): fscale(G[0], -1.0),
            (0, 1, 3): G[1],
            (0, 1, 2): fscale(G[2], -1.0),
        },
        scene.provider,
    )


def helicity_current(scene: FluidScene) -> SpaceTimeVector:
    """Helicity current J: the dual of ``theta ^ Omega`` w.r.t. ``Omega^Omega/2``.

    The result carries the relative discrepancy to the closed form in
    ``notes["closed_form_discrepancy"]``.
    """
    mask = scene.mask
    frac = masked_fraction(mask)
    if frac > MAX_MASKED_FRACTION:
        raise ExcessiveMaskingError(f"{frac:.1%} of the grid is degenerate")
    theta = build_theta(scene)
    omega = build_omega(scene)
    J = solve_dual(symplectic_volume(omega), wedge(theta, omega), mask=mask)
    ref = helicity_current_closed_form(scene)
    scale = max(vector_norms(ref, mask)[0], 1e-300)
    J.notes["closed_form_discrepancy"] = vector_norms(J - ref, mask)[0] / scale
    return J
