"""Iterated brackets with the helicity current and the symmetries they generate.

Entries of the hierarchy are ``X_k = [J, X_{k-1}]`` starting from a
Hamiltonian field ``X_0 = X_f``.  Each ``X_k`` is Hamiltonian with the
alternating binomial combination ``sum_j (-1)^(k-j) C(k, j) J^j(f)``.

Entries grow like powers of ``1/(q - 2 nu H_w)``, so absolute residuals are
meaningless near the degenerate set.  Residuals here are pointwise
normwise backward errors: for a bilinear expression such as
``X^a d_a M + M d X`` the residual at a point is divided by the product of
the operand norms there (``|X| |dM| + 2 |M| |dX|``), plus a floor of
``1e-12`` times the largest such product.  A value near machine epsilon
means the terms cancel exactly; a value of order one means they do not.
Operand norms rather than term magnitudes keep the measure meaningful where
individual operands vanish identically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Optional, Sequence

import numpy as np
import scipy.fft

from .fluid.objects import (
    MAX_MASKED_FRACTION,
    ExcessiveMaskingError,
    bernoulli_like,
    build_omega,
    build_theta,
    helicity_current,
    suspension,
)
from .fluid.report import CheckResult, VerificationReport
from .fluid.scene import FluidScene
from .fluid.suites import random_smooth_function
from .geometry import AnalyticProvider, KForm, SpaceTimeVector, evaluate_two_form, lie_bracket, masked_fraction, norms, solve_hamiltonian
from .geometry.forms import AXES, fadd, fscale, fsub
from .geometry.providers import fft_workers

RATIO_FLOOR = 1e-12
LEVEL_TOL_FACTOR = 1e-6
DEFAULT_TOL = 1e-6


# -- cancellation ratios ---------------------------------------------------
@np.errstate(all="ignore")
def cancellation_ratio(totals: Sequence[np.ndarray], scales: Sequence[np.ndarray], mask=None) -> tuple:
    """(L-inf, RMS) over unmasked points and components of ``|total| / (scale + floor)``."""
    keep = None if mask is None else ~mask
    smax = 0.0
    for s in scales:
        vals = s if keep is None else s[np.broadcast_to(keep, s.shape)]
        if vals.size:
            smax = max(smax, float(np.nanmax(vals)))
    floor = RATIO_FLOOR * smax
    ratios = []
    for t, s in zip(totals, scales):
        num = np.abs(t)
        den = s + floor
        ratios.append(np.where(num == 0, 0.0, num / den))
    return norms(ratios, mask)


def _norm(vals: Sequence[np.ndarray]) -> np.ndarray:
    """Pointwise Euclidean norm of a list of component arrays."""
    return np.sqrt(sum(np.square(v) for v in vals))


def _flat(rows) -> list:
    return [v for row in rows for v in row]


def _values(provider, fields) -> list:
    with np.errstate(all="ignore"):
        return provider.values_many(list(fields))


def _matrix_values(omega: KForm) -> list:
    keys = list(omega.components)
    vals = _values(omega.provider, [omega.components[k] for k in keys])
    zero = np.zeros(omega.provider.grid.shape)
    M = [[zero] * 4 for _ in range(4)]
    for (a, b), v in zip(keys, vals):
        M[a][b] = v
        M[b][a] = -v
    return M


def _jacobian_fields(X: SpaceTimeVector) -> list:
    p = X.provider
    return [p.diff(X.components[a], c) for c in AXES for a in AXES]


class _Sampled:
    """Values of a vector field and (on demand) its first derivatives."""

    def __init__(self, X: SpaceTimeVector, with_jacobian: bool = True):
        p = X.provider
        fields = list(X.components)
        if with_jacobian:
            fields += _jacobian_fields(X)
        vals = _values(p, fields)
        self.X = vals[:4]
        # jac[c][a] = d_c X^a
        self.jac = [vals[4 + 4 * c: 8 + 4 * c] for c in AXES] if with_jacobian else None


@np.errstate(all="ignore")
def bracket_terms(x: _Sampled, y: _Sampled) -> tuple:
    """Values and operand scale of ``[X, Y]^k = X^a d_a Y^k - Y^a d_a X^k``."""
    totals = []
    for k in AXES:
        pos = [x.X[a] * y.jac[a][k] for a in AXES]
        neg = [y.X[a] * x.jac[a][k] for a in AXES]
        totals.append(sum(pos) - sum(neg))
    scale = _norm(x.X) * _norm(_flat(y.jac)) + _norm(y.X) * _norm(_flat(x.jac))
    return totals, [scale] * len(totals)


@np.errstate(all="ignore")
def hamiltonian_terms(M: list, x: Sequence[np.ndarray], dh: Sequence[np.ndarray]) -> tuple:
    """Values and operand scale of ``(i(X) Omega + dh)_b = X^a M_ab + d_b h``."""
    totals = []
    for b in AXES:
        terms = [x[a] * M[a][b] for a in AXES if a != b]
        totals.append(sum(terms) + dh[b])
    scale = _norm(x) * _norm(_flat(M)) + _norm(dh)
    return totals, [scale] * len(totals)


def _gradient_values(provider, h) -> list:
    return _values(provider, [provider.diff(h, a) for a in AXES])


def hamiltonian_ratio(omega: KForm, X: SpaceTimeVector, h, mask=None) -> tuple:
    """Cancellation ratio of ``i(X) Omega + dh``."""
    p = omega.provider
    xv = _values(p, X.components)
    return cancellation_ratio(*hamiltonian_terms(_matrix_values(omega), xv, _gradient_values(p, h)), mask)


@np.errstate(all="ignore")
def invariance_terms(omega: KForm, x: _Sampled) -> tuple:
    """``(L_X Omega)_cb = X^a d_a M_cb + M_ab d_c X^a + M_ca d_b X^a`` for c < b."""
    p = omega.provider
    M = _matrix_values(omega)
    keys = list(omega.components)
    dM = _values(p, [p.diff(omega.components[k], a) for k in keys for a in AXES])
    dM = {k: dM[4 * i: 4 * i + 4] for i, k in enumerate(keys)}
    totals = []
    for c, b in keys:
        terms = [x.X[a] * dM[(c, b)][a] for a in AXES]
        terms += [M[a][b] * x.jac[c][a] for a in AXES if a != b]
        terms += [M[c][a] * x.jac[b][a] for a in AXES if a != c]
        totals.append(sum(terms))
    scale = _norm(x.X) * _norm(_flat(dM.values())) + 2.0 * _norm(_flat(M)) * _norm(_flat(x.jac))
    return totals, [scale] * len(totals)


def check_invariance(scene: FluidScene, X: SpaceTimeVector, omega: Optional[KForm] = None, mask=None) -> float:
    """L-inf cancellation ratio of ``L_X Omega`` over unmasked points.

    About machine precision for symplectic automorphisms; of order one for a
    field such as the helicity current, whose Lie derivative is Omega itself.
    """
    omega = build_omega(scene) if omega is None else omega
    mask = _mask(scene, X, mask)
    return cancellation_ratio(*invariance_terms(omega, _Sampled(X)), mask)[0]


def _mask(scene, X=None, mask=None):
    if mask is not None:
        return mask
    m = scene.mask
    if X is not None and X.mask is not None:
        m = m | X.mask
    return m


def precise(scene: FluidScene) -> FluidScene:
    """The scene evaluated in long double when it is closed-form (no-op for sampled fields)."""
    p = scene.provider
    if p.mode != "analytic" or getattr(p, "extended", False):
        return scene
    return scene.replace(provider=AnalyticProvider(p.grid, extended=True))


# -- Poisson structure -----------------------------------------------------
def hamiltonian_field(scene: FluidScene, f, omega: Optional[KForm] = None) -> SpaceTimeVector:
    omega = build_omega(scene) if omega is None else omega
    return solve_hamiltonian(omega, f, mask=scene.mask)


def poisson_bracket(scene: FluidScene, f, g, omega: Optional[KForm] = None):
    """``{f, g} = Omega(X_f, X_g)``, which equals ``X_f(g)``; then ``[X_f, X_g] = X_{f,g}``."""
    omega = build_omega(scene) if omega is None else omega
    Xf = hamiltonian_field(scene, f, omega)
    Xg = hamiltonian_field(scene, g, omega)
    return evaluate_two_form(omega, Xf, Xg)


def bracket_compatibility(scene: FluidScene, f, g, omega: Optional[KForm] = None) -> tuple:
    """Cancellation ratio of ``[X_f, X_g] - X_{f,g}``."""
    omega = build_omega(scene) if omega is None else omega
    Xf = hamiltonian_field(scene, f, omega)
    Xg = hamiltonian_field(scene, g, omega)
    Xfg = hamiltonian_field(scene, evaluate_two_form(omega, Xf, Xg), omega)
    totals, scales = bracket_terms(_Sampled(Xf), _Sampled(Xg))
    target = _values(scene.provider, Xfg.components)
    totals = [t - v for t, v in zip(totals, target)]
    scales = [s + np.abs(v) for s, v in zip(scales, target)]
    return cancellation_ratio(totals, scales, scene.mask)


def jacobi_residual(scene: FluidScene, f, g, h, omega: Optional[KForm] = None) -> tuple:
    """Cancellation ratio of the cyclic sum ``{f,{g,h}} + {g,{h,f}} + {h,{f,g}}``."""
    omega = build_omega(scene) if omega is None else omega
    pb = lambda a, b: poisson_bracket(scene, a, b, omega)  # noqa: E731
    terms = _values(scene.provider, [pb(f, pb(g, h)), pb(g, pb(h, f)), pb(h, pb(f, g))])
    return cancellation_ratio([sum(terms)], [sum(np.abs(t) for t in terms)], scene.mask)


def pairing_identity(scene: FluidScene, f, current: Optional[SpaceTimeVector] = None) -> tuple:
    """Cancellation ratio of ``i(X_f) theta - J(f)``."""
    p = scene.provider
    omega = build_omega(scene)
    theta = build_theta(scene)
    J = helicity_current(scene) if current is None else current
    Xf = hamiltonian_field(scene, f, omega)
    xv = _values(p, Xf.components)
    th = _values(p, [theta.components[(a,)] for a in AXES])
    jv = _values(p, J.components)
    df = _gradient_values(p, f)
    # masked points carry non-finite values and are dropped by the ratio
    with np.errstate(invalid="ignore", over="ignore"):
        pos = [xv[a] * th[a] for a in AXES]
        neg = [jv[a] * df[a] for a in AXES]
        total = sum(pos) - sum(neg)
        scale = sum(np.abs(t) for t in pos) + sum(np.abs(t) for t in neg)
    return cancellation_ratio([total], [scale], _mask(scene, J))


# -- hierarchy -------------------------------------------------------------
def spectral_tail_fraction(values: Sequence[np.ndarray], mask=None) -> float:
    """Fraction of spatial spectral energy above 2/3 of the Nyquist wavenumber (masked points zeroed)."""
    total = 0.0
    tail = 0.0
    for v in values:
        v = np.array(v, dtype=float)
        bad = ~np.isfinite(v)
        if mask is not None:
            bad |= np.broadcast_to(mask, v.shape)
        v[bad] = 0.0
        n = v.shape[-1]
        spec = scipy.fft.fftn(v, axes=(1, 2, 3), workers=fft_workers())
        power = np.abs(spec) ** 2
        k = np.abs(scipy.fft.fftfreq(n, 1.0 / n))
        high = (k[:, None, None] > n / 3) | (k[None, :, None] > n / 3) | (k[None, None, :] > n / 3)
        total += float(np.sum(power))
        tail += float(np.sum(power[:, high]))
    return tail / total if total > 0 else 0.0


@dataclass
class HierarchyEntry:
    k: int
    field: SpaceTimeVector
    predicted_hamiltonian: object
    residual: tuple
    invariance: tuple
    effective_resolution: float
    masked_fraction: float
    conjecture: bool = False
    notes: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        return {
            "k": self.k,
            "hamiltonian_residual_linf": self.residual[0],
            "hamiltonian_residual_rms": self.residual[1],
            "invariance_residual_linf": self.invariance[0],
            "invariance_residual_rms": self.invariance[1],
            "spectral_tail_fraction": self.effective_resolution,
            "masked_fraction": self.masked_fraction,
            "conjecture": self.conjecture,
        }


HIERARCHY_COLUMNS = (
    "k",
    "hamiltonian_residual_linf",
    "hamiltonian_residual_rms",
    "invariance_residual_linf",
    "invariance_residual_rms",
    "spectral_tail_fraction",
    "masked_fraction",
    "conjecture",
)


def _widen(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    for axis in (1, 2, 3):
        out |= np.roll(mask, 1, axis=axis) | np.roll(mask, -1, axis=axis)
    return out


def binomial_hamiltonian(iterates: Sequence, k: int):
    """``sum_{j<=k} (-1)^(k-j) C(k, j) iterates[j]``."""
    acc = 0.0
    for j in range(k + 1):
        acc = fadd(acc, fscale(iterates[j], (-1.0) ** (k - j) * comb(k, j)))
    return acc


def generate_hierarchy(
    scene: FluidScene,
    f,
    k_max: int = 2,
    current: Optional[SpaceTimeVector] = None,
    extended: bool = True,
) -> list:
    """Entries ``k = 0..k_max`` of ``(L_J)^k X_f`` with their predicted Hamiltonians.

    Entries with ``k >= 3`` are flagged ``conjecture``: the binomial formula
    is tested there but only established for ``k <= 2``.  Under the numeric
    provider the mask grows by one cell per bracket.  Closed-form scenes are
    evaluated in long double unless ``extended`` is False.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if extended:
        scene = precise(scene)
    p = scene.provider
    omega = build_omega(scene)
    J = helicity_current(scene) if current is None else current
    mask = scene.mask | (J.mask if J.mask is not None else False)
    X = solve_hamiltonian(omega, f, mask=mask)
    iterates = [f]
    entries = []
    for k in range(k_max + 1):
        if k > 0:
            X = lie_bracket(J, X)
            iterates.append(J.apply(iterates[-1]))
            if p.mode == "numeric":
                mask = _widen(mask)
                X.mask = mask
        frac = masked_fraction(mask)
        if frac > MAX_MASKED_FRACTION:
            raise ExcessiveMaskingError(f"entry {k}: {frac:.1%} of the grid is masked")
        predicted = binomial_hamiltonian(iterates, k)
        sampled = _Sampled(X)
        M = _matrix_values(omega)
        res = cancellation_ratio(*hamiltonian_terms(M, sampled.X, _gradient_values(p, predicted)), mask)
        inv = cancellation_ratio(*invariance_terms(omega, sampled), mask)
        entries.append(
            HierarchyEntry(
                k=k,
                field=X,
                predicted_hamiltonian=predicted,
                residual=res,
                invariance=inv,
                effective_resolution=spectral_tail_fraction(sampled.X, mask),
                masked_fraction=frac,
                conjecture=k >= 3,
            )
        )
    return entries


# -- level-surface symmetry -------------------------------------------------
def level_function(scene: FluidScene):
    """``p - v^2/2``."""
    return bernoulli_like(scene, -1.0)


def _tangential(values: Sequence[np.ndarray], grad: Sequence[np.ndarray]) -> list:
    g2 = sum(g * g for g in grad)
    dot = sum(v * g for v, g in zip(values, grad))
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(g2 > 0, dot / np.where(g2 > 0, g2, 1.0), 0.0)
    return [v - coef * g for v, g in zip(values, grad)]


def verify_prop6(
    scene: FluidScene,
    tol: Optional[float] = None,
    level_tol_factor: float = LEVEL_TOL_FACTOR,
    extended: bool = True,
) -> VerificationReport:
    """Symmetries ``S_1 = [J_0, w/q]`` of the suspension on level sets of ``p - v^2/2``."""
    if scene.nu != 0:
        raise ValueError("the level-surface suite needs an inviscid scene (nu = 0)")
    tol = DEFAULT_TOL if tol is None else tol
    if extended:
        scene = precise(scene)
    p = scene.provider
    report = VerificationReport("level_symmetry", scene.name, p.mode)
    omega = build_omega(scene)
    J = helicity_current(scene)
    mask = scene.mask | (J.mask if J.mask is not None else False)
    frac = masked_fraction(mask)
    t = p.coordinate(0)
    h = level_function(scene)
    Xt = solve_hamiltonian(omega, t, mask=mask)
    susp = suspension(scene)
    S1 = lie_bracket(J, Xt)
    C = lie_bracket(J, susp)
    M = _matrix_values(omega)

    s1 = _Sampled(S1)
    sus = _Sampled(susp)
    res_s1 = cancellation_ratio(
        *hamiltonian_terms(M, s1.X, _gradient_values(p, fsub(J.apply(t), t))), mask
    )
    report.add(CheckResult("s1_hamiltonian", "[J_0, w/q] Hamiltonian with J_0(t) - t", *res_s1, tol, frac))

    tot_a, sc_a = bracket_terms(s1, sus)
    tot_b, sc_b = bracket_terms(_Sampled(Xt), _Sampled(C))
    res27 = cancellation_ratio([a + b for a, b in zip(tot_a, tot_b)], [a + b for a, b in zip(sc_a, sc_b)], mask)
    report.add(CheckResult("symmetry_identity", "L_S1(d/dt+v) + L_{w/q}[J_0, d/dt+v] = 0", *res27, tol, frac))

    cv = _values(p, C.components)
    dh = _gradient_values(p, h)
    lit = cancellation_ratio(*hamiltonian_terms(M, cv, dh), mask)
    report.add(CheckResult("suspension_bracket_hamiltonian", "[J_0, d/dt+v] Hamiltonian with p - v^2/2", *lit, 1e-8, frac))
    neg = cancellation_ratio(*hamiltonian_terms(M, cv, [-g for g in dh]), mask)
    report.add(
        CheckResult("suspension_bracket_hamiltonian_negated", "[J_0, d/dt+v] Hamiltonian with v^2/2 - p", *neg, 1e-8, frac)
    )
    jphi, phi_v, h_v = _values(p, [J.apply(scene.phi), scene.phi, h])
    res_j = cancellation_ratio([jphi - phi_v - h_v], [np.abs(jphi) + np.abs(phi_v) + np.abs(h_v)], mask)
    report.add(CheckResult("liouville_of_phi", "J_0(phi) - phi = p - v^2/2", *res_j, 1e-8, frac))

    # level set: points where {t, h} = X_t(h) is negligible against its terms
    xt = _values(p, Xt.components)
    with np.errstate(all="ignore"):
        parts = [xt[a] * dh[a] for a in AXES]
        F = sum(parts)
        F_scale = norms([sum(np.abs(q) for q in parts)], mask)[0]
    level = np.abs(F) <= level_tol_factor * F_scale
    off_level = np.abs(F) > 0.1 * norms([F], mask)[0]
    comm, comm_sc = bracket_terms(s1, sus)
    tangential = _tangential(comm, dh)
    on_mask = mask | ~level
    full = cancellation_ratio(comm, comm_sc, on_mask)
    tang = cancellation_ratio(tangential, comm_sc, on_mask)
    off = cancellation_ratio(comm, comm_sc, mask | ~off_level) if np.any(off_level & ~mask) else (0.0, 0.0)
    level_frac = float(np.count_nonzero(level & ~mask)) / level.size
    abs_comm = norms(comm, on_mask)[0]
    report.add(
        CheckResult(
            "level_commutator",
            "[S1, d/dt+v] = 0 where p - v^2/2 is constant",
            *full,
            tol,
            frac,
            {"level_fraction": level_frac, "absolute_linf": abs_comm, "off_level_ratio": off[0]},
        )
    )
    report.add(
        CheckResult(
            "level_commutator_tangential",
            "tangential part of [S1, d/dt+v] on level sets",
            *tang,
            tol,
            frac,
            {"level_fraction": level_frac},
        )
    )
    report.extra.update(
        {
            "poisson_t_level_linf": norms([F], mask)[0],
            "level_fraction": level_frac,
            "off_level_commutator_ratio": off[0],
            "s1_linf": norms(s1.X, mask)[0],
        }
    )
    return report


def hierarchy_report(scene: FluidScene, entries: Sequence[HierarchyEntry], tol: Optional[float] = None) -> VerificationReport:
    """Checks for each entry: Hamiltonian-function residual and Omega invariance."""
    tol = DEFAULT_TOL if tol is None else tol
    report = VerificationReport("hierarchy", scene.name, scene.provider.mode)
    for e in entries:
        tag = " (conjectured formula)" if e.conjecture else ""
        report.add(
            CheckResult(
                f"entry{e.k}_hamiltonian",
                f"(L_J)^{e.k} X_f Hamiltonian with binomial J-iterate sum{tag}",
                *e.residual,
                tol,
                e.masked_fraction,
                {"spectral_tail_fraction": e.effective_resolution},
            )
        )
        report.add(
            CheckResult(f"entry{e.k}_invariance", f"L_(entry {e.k}) Omega = 0", *e.invariance, tol, e.masked_fraction)
        )
    report.extra["entries"] = [e.to_row() for e in entries]
    return report


def random_functions(scene: FluidScene, count: int, seed: int = 0) -> list:
    return [random_smooth_function(seed + i, scene.provider) for i in range(count)]
