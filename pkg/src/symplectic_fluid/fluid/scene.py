"""Flow fields on space-time and the vector calculus used to assemble them."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np

from ..geometry import (
    DEFAULT_MASK_EPS,
    KForm,
    Provider,
    SpaceTimeGrid,
    degeneracy_mask,
    masked_fraction,
    norms,
)
from ..geometry.forms import fadd, fmul, fscale, fsub, fsum

TOL_DIV_ANALYTIC = 1e-10
TOL_DIV_SOLVER = 1e-8


# -- spatial vector calculus over provider fields --------------------------
def grad(f, p: Provider) -> tuple:
    return tuple(p.diff(f, a) for a in (1, 2, 3))


def div(u, p: Provider):
    return fsum(p.diff(u[i], i + 1) for i in range(3))


def curl(u, p: Provider) -> tuple:
    d = p.diff
    return (
        fsub(d(u[2], 2), d(u[1], 3)),
        fsub(d(u[0], 3), d(u[2], 1)),
        fsub(d(u[1], 1), d(u[0], 2)),
    )


def dot(a, b):
    return fsum(fmul(x, y) for x, y in zip(a, b))


def cross(a, b) -> tuple:
    return (
        fsub(fmul(a[1], b[2]), fmul(a[2], b[1])),
        fsub(fmul(a[2], b[0]), fmul(a[0], b[2])),
        fsub(fmul(a[0], b[1]), fmul(a[1], b[0])),
    )


def laplacian(f, p: Provider):
    return fsum(p.diff(p.diff(f, a), a) for a in (1, 2, 3))


def vadd(a, b) -> tuple:
    return tuple(fadd(x, y) for x, y in zip(a, b))


def vsub(a, b) -> tuple:
    return tuple(fsub(x, y) for x, y in zip(a, b))


def vscale(a, s) -> tuple:
    if isinstance(s, (int, float)):
        return tuple(fscale(x, s) for x in a)
    return tuple(fmul(x, s) for x in a)


def advective(u, f, p: Provider):
    """``u . grad f``."""
    return dot(u, grad(f, p))


@dataclass
class FluidScene:
    """Velocity, pressure (per unit density), scalar phi and viscosity on a grid.

    Fields are represented according to ``provider``: closed-form
    expressions for the analytic provider, sampled arrays for the numeric
    one.  ``phi_advected`` records that phi is transported by the flow.
    """

    provider: Provider
    velocity: tuple
    pressure: object
    phi: object
    nu: float = 0.0
    provenance: dict = field(default_factory=dict)
    phi_advected: bool = False
    mask_eps: float = DEFAULT_MASK_EPS

    def __post_init__(self):
        if len(self.velocity) != 3:
            raise ValueError("velocity needs three components")
        if self.nu < 0:
            raise ValueError("viscosity must be non-negative")
        self.velocity = tuple(self.velocity)

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.provider.grid

    @property
    def name(self) -> str:
        return str(self.provenance.get("name", "scene"))

    def replace(self, **changes) -> "FluidScene":
        return replace(self, **changes)

    # cached derived fields; scenes are treated as immutable once built
    @cached_property
    def vorticity(self) -> tuple:
        return curl(self.velocity, self.provider)

    @cached_property
    def curl_vorticity(self) -> tuple:
        return curl(self.vorticity, self.provider)

    @cached_property
    def grad_phi(self) -> tuple:
        return grad(self.phi, self.provider)

    @cached_property
    def speed_squared(self):
        return dot(self.velocity, self.velocity)

    @cached_property
    def nondegeneracy_density(self):
        """``q - 2 nu H_w = w . (grad phi - nu curl w)``."""
        return dot(self.vorticity, self.reduced_gradient)

    @cached_property
    def reduced_gradient(self) -> tuple:
        """``grad phi - nu curl w``, the field that survives contraction with the suspension."""
        return vsub(self.grad_phi, vscale(self.curl_vorticity, self.nu))

    @cached_property
    def mask(self) -> np.ndarray:
        from .objects import build_omega
        from ..geometry import pfaffian_density

        rho = self.provider.values(pfaffian_density(build_omega(self)))
        return degeneracy_mask(rho, self.mask_eps)

    @property
    def masked_fraction(self) -> float:
        return masked_fraction(self.mask)

    def values(self, f) -> np.ndarray:
        return self.provider.values(f)

    def divergence_norm(self) -> float:
        return norms([self.values(div(self.velocity, self.provider))])[0]

    def advection_residual(self):
        p = self.provider
        return fadd(p.diff(self.phi, 0), advective(self.velocity, self.phi, p))

    def check_invariants(self, tol_div: Optional[float] = None) -> dict:
        """Divergence-free velocity and, when flagged, advected phi."""
        if tol_div is None:
            tol_div = TOL_DIV_ANALYTIC if self.provider.mode == "analytic" else TOL_DIV_SOLVER
        scale = max(norms(self.provider.values_many(list(self.velocity)))[0], 1.0)
        div_res = self.divergence_norm() / scale
        out = {"divergence": div_res, "divergence_ok": div_res <= tol_div}
        if div_res > tol_div:
            raise ValueError(f"velocity is not divergence free (relative residual {div_res:.3e})")
        return out
