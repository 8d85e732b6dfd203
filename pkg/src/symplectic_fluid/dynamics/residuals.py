"""Pointwise residuals of the equations of motion for a scene."""
from __future__ import annotations

from ..fluid.report import CheckResult, VerificationReport
from ..fluid.scene import FluidScene, advective, cross, curl, div, laplacian, vscale
from ..geometry import norms

TOL_ANALYTIC = 1e-10
TOL_NUMERIC = 1e-2


def _tol(scene: FluidScene, tol):
    if tol is not None:
        return tol
    return TOL_ANALYTIC if scene.provider.mode == "analytic" else TOL_NUMERIC


def momentum_terms(scene: FluidScene) -> dict:
    """Terms of ``dv/dt + (v . grad) v + grad p - nu lap v``, one 3-tuple each."""
    p = scene.provider
    v = scene.velocity
    return {
        "dvdt": tuple(p.diff(c, 0) for c in v),
        "advection": tuple(advective(v, c, p) for c in v),
        "pressure": tuple(p.diff(scene.pressure, a) for a in (1, 2, 3)),
        "viscous": vscale(tuple(laplacian(c, p) for c in v), -scene.nu),
    }


def vorticity_terms(scene: FluidScene) -> dict:
    """Terms of ``dw/dt - curl(v x w) - nu lap w``."""
    p = scene.provider
    w = scene.vorticity
    return {
        "dwdt": tuple(p.diff(c, 0) for c in w),
        "stretching": vscale(curl(cross(scene.velocity, w), p), -1.0),
        "viscous": vscale(tuple(laplacian(c, p) for c in w), -scene.nu),
    }


def _balance(scene: FluidScene, terms: dict, floor: float):
    """Residual norms of the summed terms relative to the largest single term."""
    p = scene.provider
    keys = list(terms)
    flat = [c for k in keys for c in terms[k]]
    vals = p.values_many(flat)
    per = {k: vals[3 * i: 3 * i + 3] for i, k in enumerate(keys)}
    total = [sum(per[k][a] for k in keys) for a in range(3)]
    scale = max([norms(per[k])[0] for k in keys] + [floor, 1e-300])
    linf, l2 = norms(total)
    return linf / scale, l2 / scale, scale


def dynamics_residuals(scene: FluidScene, tol=None) -> VerificationReport:
    """Momentum, vorticity, incompressibility and (when flagged) advection residuals.

    Momentum and vorticity residuals are relative to the largest term of the
    balance, floored by ``max|v|^2`` so that steady flows with vanishing
    terms are not divided by rounding noise.
    """
    p = scene.provider
    t = _tol(scene, tol)
    report = VerificationReport("dynamics", scene.name, p.mode)
    vel = p.values_many(list(scene.velocity))
    vmax = norms(vel)[0]
    w_vals = p.values_many(list(scene.vorticity))
    wmax = max(norms(w_vals)[0], 1e-300)

    if p.grid.nt >= 3 or p.mode == "analytic":
        linf, l2, _ = _balance(scene, momentum_terms(scene), vmax * vmax)
        report.add(CheckResult("momentum", "Navier-Stokes momentum balance", linf, l2, t))
        linf, l2, _ = _balance(scene, vorticity_terms(scene), wmax * max(vmax, 1.0))
        report.add(CheckResult("vorticity", "vorticity transport balance", linf, l2, t))

    grad_scale = max(wmax, 1e-300)
    dv = norms([p.values(div(scene.velocity, p))])
    report.add(CheckResult("div_v", "div v = 0", dv[0] / grad_scale, dv[1] / grad_scale, t))
    dw = norms([p.values(div(scene.vorticity, p))])
    report.add(CheckResult("div_w", "div w = 0", dw[0] / grad_scale, dw[1] / grad_scale, t))

    if scene.phi_advected and (p.grid.nt >= 3 or p.mode == "analytic"):
        dphi = p.values(p.diff(scene.phi, 0))
        adv = p.values(advective(scene.velocity, scene.phi, p))
        scale = max(norms([dphi])[0], norms([adv])[0], 1e-300)
        r = norms([dphi + adv])
        report.add(CheckResult("advection", "phi advected by v", r[0] / scale, r[1] / scale, t))
    return report
