"""Exact flows on the periodic box: decaying Beltrami (ABC) fields and steady shear."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..exprlang import parse_expression
from ..geometry import AnalyticProvider, SpaceTimeGrid, expr as ex, uniform_times
from ..geometry.symplectic import DEFAULT_MASK_EPS
from ..fluid.scene import FluidScene, dot

FAMILIES = ("decaying_beltrami", "shear_euler")
BELTRAMI_PHI = ("linear", "periodic", "drift")
DEFAULT_TIMES = uniform_times(0.0, 1.0, 5)


class CatalogError(ValueError):
    pass


@dataclass
class CatalogSpec:
    """Parameters of an exact solution.

    ``decaying_beltrami`` reads ``A, B, C, lambda`` and, for ``phi="linear"``,
    an optional ``direction`` (normalized).  ``shear_euler`` reads the
    expressions ``profile`` (U(y, z)) and ``phi`` (g(y, z)); its ``phi`` field
    here is ignored.
    """

    family: str
    parameters: dict = field(default_factory=dict)
    nu: float = 0.0
    n_space: int = 32
    times: tuple = DEFAULT_TIMES
    box_length: float = 2 * math.pi
    phi: str = "linear"
    mask_eps: float = DEFAULT_MASK_EPS

    def __post_init__(self):
        self.family = self.family.replace("-", "_")
        if self.family not in FAMILIES:
            raise CatalogError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        self.times = tuple(float(t) for t in self.times)

    def grid(self) -> SpaceTimeGrid:
        return SpaceTimeGrid(self.n_space, self.times, self.box_length)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CatalogSpec":
        return cls(**data)


def _coords():
    return tuple(ex.var(i) for i in range(4))


def abc_field(A: float, B: float, C: float, lam: float):
    """Steady ABC field; ``curl V = lam V``."""
    _, x, y, z = _coords()
    return (
        A * ex.sin(lam * z) + C * ex.cos(lam * y),
        B * ex.sin(lam * x) + A * ex.cos(lam * z),
        C * ex.sin(lam * y) + B * ex.cos(lam * x),
    )


def _beltrami_phi(spec: CatalogSpec, A, B, C, lam, nu):
    t, x, y, z = _coords()
    if spec.phi == "linear":
        a = np.asarray(spec.parameters.get("direction", (1.0, 0.0, 0.0)), dtype=float)
        norm = float(np.linalg.norm(a))
        if a.shape != (3,) or norm == 0:
            raise CatalogError("direction must be a nonzero 3-vector")
        a = a / norm
        return float(a[0]) * x + float(a[1]) * y + float(a[2]) * z, False
    if spec.phi == "periodic":
        return ex.sin(x) + ex.sin(y) + ex.sin(z), False
    if spec.phi == "drift":
        # y minus the displacement accumulated along y by the decaying field
        if C != 0:
            raise CatalogError("the drift scalar needs C = 0")
        rate = nu * lam * lam
        tau = t if rate == 0 else (1.0 - ex.exp(-rate * t)) * (1.0 / rate)
        K = B * ex.sin(lam * x) + A * ex.cos(lam * z)
        return y - tau * K, True
    raise CatalogError(f"unknown phi choice {spec.phi!r}; expected one of {BELTRAMI_PHI}")


def make_decaying_beltrami(spec: CatalogSpec) -> FluidScene:
    """``v = exp(-nu lam^2 t) V_ABC``, ``p = c - v^2/2``, exact for any nu."""
    prm = spec.parameters
    A, B, C = (float(prm.get(k, 1.0)) for k in ("A", "B", "C"))
    lam = float(prm.get("lambda", 1.0))
    c = float(prm.get("c", 0.0))
    if lam != int(lam) or lam == 0:
        raise CatalogError(f"non-periodic eigenvalue lambda={lam}: must be a nonzero integer")
    if spec.nu < 0:
        raise CatalogError("viscosity must be non-negative")
    provider = AnalyticProvider(spec.grid())
    t = ex.var(0)
    decay = ex.exp(-spec.nu * lam * lam * t) if spec.nu else ex.ONE
    velocity = tuple(decay * comp for comp in abc_field(A, B, C, lam))
    pressure = c - 0.5 * dot(velocity, velocity)
    phi, advected = _beltrami_phi(spec, A, B, C, lam, spec.nu)
    provenance = {
        "name": f"decaying_beltrami(lambda={lam:g}, nu={spec.nu:g}, phi={spec.phi})",
        "kind": "catalog",
        "catalog": spec.to_dict(),
    }
    return FluidScene(provider, velocity, pressure, phi, spec.nu, provenance, advected, spec.mask_eps)


def _profile(value, label: str) -> ex.Expr:
    node = parse_expression(value) if isinstance(value, str) else ex.as_expr(value)
    if node.free - {2, 3}:
        raise CatalogError(f"{label} may depend on y and z only")
    return node


def make_shear_euler(spec: CatalogSpec) -> FluidScene:
    """Steady inviscid shear ``v = (U(y, z), 0, 0)`` with constant pressure and ``phi = g(y, z)``."""
    if spec.nu != 0:
        raise CatalogError("shear_euler is an inviscid solution; nu must be 0")
    prm = spec.parameters
    U = _profile(prm.get("profile", "sin(y)"), "profile")
    g = _profile(prm.get("phi", "sin(z)"), "phi")
    provider = AnalyticProvider(spec.grid())
    q = U.diff(3) * g.diff(2) - U.diff(2) * g.diff(3)
    q_vals = provider.values(q)
    if not np.all(np.isfinite(q_vals)) or float(np.max(np.abs(q_vals))) < 1e-12:
        raise CatalogError("w . grad(phi) vanishes identically: Omega is fully degenerate")
    provenance = {
        "name": f"shear_euler(U={ex.to_string(U)}, phi={ex.to_string(g)})",
        "kind": "catalog",
        "catalog": spec.to_dict(),
    }
    return FluidScene(
        provider,
        (U, 0.0, 0.0),
        float(prm.get("c", 0.0)),
        g,
        0.0,
        provenance,
        True,
        spec.mask_eps,
    )


def make_scene(spec: CatalogSpec) -> FluidScene:
    if spec.family == "decaying_beltrami":
        return make_decaying_beltrami(spec)
    return make_shear_euler(spec)


def scale_velocity(scene: FluidScene, factor: float) -> FluidScene:
    """Multiply the velocity by ``factor`` and leave p, phi untouched (breaks the momentum equation)."""
    p = scene.provider
    velocity = tuple(c * factor if not isinstance(c, (int, float)) else float(c) * factor for c in scene.velocity)
    provenance = dict(scene.provenance)
    provenance["name"] = f"{scene.name} with velocity x{factor:g}"
    provenance["velocity_scale"] = factor * float(scene.provenance.get("velocity_scale", 1.0))
    return scene.replace(velocity=velocity, provenance=provenance, provider=p)
