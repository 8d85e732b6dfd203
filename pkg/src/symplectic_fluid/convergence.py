"""Refinement studies for sampled (solver) scenes.

A scene at ``(n, dt)`` is compared with one at ``(2n, dt/2)`` whose snapshots
sit at half the spacing around the same centre time, so the time-derivative
stencil is refined together with the integrator.  Every residual reported by
the structure suites should then fall by about 4x; residuals that are
already at rounding level on both grids carry no refinement information and
are exempted.
"""
from __future__ import annotations

import math
from dataclasses import replace

from .dynamics.residuals import dynamics_residuals
from .dynamics.solver import SolverConfig, step_navier_stokes
from .fluid.report import CheckResult, VerificationReport
from .fluid.suites import verify_prop1, verify_prop2, verify_prop3

ROUNDING_FLOOR = 1e-10
MIN_RATIO = 3.0

HELICAL_MIXTURE = {
    "kind": "expression",
    "vx": "sin(z) + 0.2*cos(y) + 0.05*(1.5*sin(2*z) + cos(2*y))",
    "vy": "0.2*sin(x) + cos(z) + 0.05*(sin(2*x) + 1.5*cos(2*z))",
    "vz": "0.2*sin(y) + 0.2*cos(x) + 0.05*(sin(2*y) + cos(2*x))",
}


def helical_mixture_config(
    n_space: int = 16,
    dt: float = 0.02,
    stride: int = 2,
    t_center: float = 0.2,
    nu: float = 0.05,
    phi_amplitude: float = 0.005,
) -> SolverConfig:
    """A dominant ABC mode plus a weak second shell, with a weak periodic phi.

    ``q - 2 nu H_w`` stays bounded away from zero, so no point is masked and
    the helicity current is smooth enough to differentiate spectrally.
    """
    times = tuple(t_center + (j - 2) * stride * dt for j in range(5))
    return SolverConfig(
        n_space=n_space,
        dt=dt,
        t_end=times[-1],
        nu=nu,
        initial_condition=dict(HELICAL_MIXTURE),
        phi0=f"{phi_amplitude}*(sin(x) + sin(y) + sin(z))",
        snapshot_times=times,
    )


def refined(config: SolverConfig) -> SolverConfig:
    """Double the resolution, halve dt and halve the snapshot spacing about its centre."""
    times = config.times()
    center = times[len(times) // 2]
    return replace(
        config,
        n_space=2 * config.n_space,
        dt=config.dt / 2,
        snapshot_times=tuple(center + (t - center) / 2 for t in times),
        t_end=center + (times[-1] - center) / 2,
    )


def _residuals(scene) -> dict:
    out = {}
    for rep in (verify_prop1(scene, with_dynamics=False), verify_prop2(scene, with_dynamics=False),
                verify_prop3(scene, with_dynamics=False)):
        for c in rep.checks:
            if c.name != "masked_fraction":
                out[f"{rep.suite}:{c.name}"] = (c.residual_linf, c.anchor)
    for c in dynamics_residuals(scene).checks:
        out[f"dynamics:{c.name}"] = (c.residual_linf, c.anchor)
    return out


def refinement_study(config: SolverConfig, min_ratio: float = MIN_RATIO) -> VerificationReport:
    """Run ``config`` and its refinement; one check per residual.

    The check value is ``fine / coarse`` with tolerance ``1 / min_ratio``;
    pairs where both residuals are below ``ROUNDING_FLOOR`` are reported with
    value 0 and ``detail["exempt"] = True``.
    """
    coarse = step_navier_stokes(config)
    fine = step_navier_stokes(refined(config))
    a, b = _residuals(coarse), _residuals(fine)
    report = VerificationReport("refinement", coarse.name, "numeric")
    report.extra.update({"coarse": coarse.provenance["name"], "fine": fine.provenance["name"]})
    for key, (ra, anchor) in a.items():
        rb = b[key][0]
        exempt = ra <= ROUNDING_FLOOR and rb <= ROUNDING_FLOOR
        ratio = ra / rb if rb > 0 else math.inf
        value = 0.0 if exempt else (rb / ra if ra > 0 else math.inf)
        detail = {"coarse": ra, "fine": rb, "ratio": ratio, "exempt": exempt}
        if not exempt and ratio > 0 and math.isfinite(ratio):
            detail["order"] = math.log2(ratio)
        report.add(CheckResult(key, anchor, value, value, 1.0 / min_ratio, max(coarse.masked_fraction, fine.masked_fraction), detail))
    return report
