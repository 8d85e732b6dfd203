"""Pointwise symplectic linear algebra on space-time.

Orientation is ``vol_o = dx^dy^dz^dt``, which is ``-dt^dx^dy^dz`` in the
sorted component layout; every density below is measured against ``vol_o``.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .forms import (
    AXES,
    DegreeError,
    KForm,
    SpaceTimeVector,
    d_scalar,
    exterior_derivative,
    fadd,
    fdiv,
    fmul,
    fscale,
    fsub,
    fsum,
    interior_product,
    wedge,
)

DEFAULT_MASK_EPS = 1e-6
FULL = (0, 1, 2, 3)
# sorted-layout coefficient of dx^dy^dz^dt
ORIENTATION_SIGN = -1.0


class DegeneracyError(ArithmeticError):
    pass


def degeneracy_mask(density: np.ndarray, eps: float = DEFAULT_MASK_EPS) -> np.ndarray:
    """True where ``|density| <= eps * median(|density|)``."""
    a = np.abs(np.asarray(density, dtype=float))
    finite = a[np.isfinite(a)]
    med = float(np.median(finite)) if finite.size else 0.0
    return ~np.isfinite(a) | (a <= eps * med)


def masked_fraction(mask: Optional[np.ndarray]) -> float:
    if mask is None:
        return 0.0
    return float(np.count_nonzero(mask)) / mask.size


def _matrix(omega: KForm):
    """Antisymmetric coefficient matrix ``M[a][b]`` with ``Omega = sum_{a<b} M_ab dx^a^dx^b``."""
    if omega.degree != 2:
        raise DegreeError("expected a 2-form")
    M = [[0.0] * 4 for _ in range(4)]
    for (a, b), f in omega.components.items():
        M[a][b] = f
        M[b][a] = fscale(f, -1.0)
    return M


def pfaffian(omega: KForm):
    """Pf(M) = M01 M23 - M02 M13 + M03 M12, the sorted-layout coefficient of Omega^Omega/2."""
    M = _matrix(omega)
    return fsum(
        [
            fmul(M[0][1], M[2][3]),
            fscale(fmul(M[0][2], M[1][3]), -1.0),
            fmul(M[0][3], M[1][2]),
        ]
    )


def pfaffian_density(omega: KForm):
    """Coefficient rho with ``Omega^Omega/2 = rho dx^dy^dz^dt``."""
    return fscale(pfaffian(omega), ORIENTATION_SIGN)


def symplectic_volume(omega: KForm) -> KForm:
    return wedge(omega, omega).scale(0.5)


def _check_unmasked(denominator, provider, mask, what: str):
    vals = provider.values(denominator)
    bad = (vals == 0) | ~np.isfinite(vals)
    if mask is not None:
        bad &= ~mask
    if np.any(bad):
        raise DegeneracyError(f"{what} vanishes at {int(np.count_nonzero(bad))} unmasked grid points")
    return vals


def _zero_fill(comps, provider, mask) -> tuple:
    """Sampled fields get 0 at masked points so that spectral derivatives stay finite."""
    if provider.mode != "numeric" or mask is None or not np.any(mask):
        return tuple(comps)
    with np.errstate(all="ignore"):
        vals = provider.values_many(list(comps))
    return tuple(np.where(mask, 0.0, v) for v in vals)


def solve_hamiltonian(
    omega: KForm,
    f,
    mask: Optional[np.ndarray] = None,
    mask_eps: float = DEFAULT_MASK_EPS,
) -> SpaceTimeVector:
    """Hamiltonian vector field X_f with ``i(X_f) Omega = -df``.

    Per grid point this is the 4x4 antisymmetric system ``M X = grad f``,
    solved through the Pfaffian adjugate ``M^{-1} = N / Pf(M)``.  Points with
    a degenerate Pfaffian are masked.
    """
    p = omega.provider
    if isinstance(f, KForm):
        f = f.components[()]
    M = _matrix(omega)
    pf = pfaffian(omega)
    if mask is None:
        mask = degeneracy_mask(p.values(pf), mask_eps)
    _check_unmasked(pf, p, mask, "Pfaffian")
    g = [p.diff(f, a) for a in AXES]
    N = [
        [0.0, fscale(M[2][3], -1.0), M[1][3], fscale(M[1][2], -1.0)],
        [M[2][3], 0.0, fscale(M[0][3], -1.0), M[0][2]],
        [fscale(M[1][3], -1.0), M[0][3], 0.0, fscale(M[0][1], -1.0)],
        [M[1][2], fscale(M[0][2], -1.0), M[0][1], 0.0],
    ]
    comps = tuple(fdiv(fsum(fmul(N[a][b], g[b]) for b in AXES), pf) for a in AXES)
    return SpaceTimeVector(_zero_fill(comps, p, mask), p, mask)


def solve_dual(
    vol: KForm,
    sigma: KForm,
    mask: Optional[np.ndarray] = None,
    mask_eps: float = DEFAULT_MASK_EPS,
) -> SpaceTimeVector:
    """Unique X with ``i(X) vol = sigma`` for a nonvanishing 4-form ``vol``.

    With first-slot contraction, ``sigma[FULL minus j] = (-1)^j V X^j`` where
    V is the sorted-layout coefficient of ``vol``.  For example
    ``vol = dx^dy^dz^dt`` and ``sigma = dx^dy^dz`` give ``X = -d/dt``.
    """
    if vol.degree != 4 or sigma.degree != 3:
        raise DegreeError("solve_dual expects a 4-form and a 3-form")
    p = vol.provider
    V = vol.components[FULL]
    if mask is None:
        mask = degeneracy_mask(p.values(V), mask_eps)
    _check_unmasked(V, p, mask, "volume coefficient")
    comps = []
    for j in AXES:
        rest = tuple(a for a in AXES if a != j)
        comps.append(fdiv(fscale(sigma.components[rest], -1.0 if j % 2 else 1.0), V))
    return SpaceTimeVector(_zero_fill(comps, p, mask), p, mask)


def symplectic_divergence(omega: KForm, X: SpaceTimeVector):
    """Scalar div with ``L_X(Omega^Omega/2) = div * Omega^Omega/2``."""
    vol = symplectic_volume(omega)
    flux = exterior_derivative(interior_product(X, vol))
    return fdiv(flux.components[FULL], vol.components[FULL])


def hamiltonian_residual(omega: KForm, X: SpaceTimeVector, h) -> KForm:
    """``i(X) Omega + dh``; vanishes iff X is Hamiltonian with function h."""
    return interior_product(X, omega) + d_scalar(h, omega.provider)


def evaluate_two_form(omega: KForm, X: SpaceTimeVector, Y: SpaceTimeVector):
    """``Omega(X, Y) = sum_{a<b} M_ab (X^a Y^b - X^b Y^a)``."""
    acc = 0.0
    for (a, b), f in omega.components.items():
        cross = fsub(fmul(X.components[a], Y.components[b]), fmul(X.components[b], Y.components[a]))
        acc = fadd(acc, fmul(f, cross))
    return acc
