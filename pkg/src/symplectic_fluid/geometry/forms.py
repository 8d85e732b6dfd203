"""Differential forms and vector fields on space-time in coordinates (t, x, y, z).

Coordinates are indexed t=0, x=1, y=2, z=3.  A k-form stores one scalar
field per strictly increasing index tuple, e.g. ``(0, 2)`` is the
coefficient of ``dt^dy``.  Contraction is into the first slot:
``i(X)(dx^a1 ^ ... ^ dx^ak) = sum_j (-1)^j X^aj (... omit aj ...)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .providers import Provider, is_zero

AXES = (0, 1, 2, 3)


class GridMismatchError(ValueError):
    pass


class DegreeError(ValueError):
    pass


def form_keys(degree: int) -> list:
    return list(itertools.combinations(AXES, degree))


def permutation_sign(seq) -> int:
    seq = list(seq)
    inversions = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inversions % 2 else 1


# -- field arithmetic that keeps literal zeros cheap -----------------------
def fadd(a, b):
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return a + b


def fsub(a, b):
    if is_zero(b):
        return a
    if is_zero(a):
        return -b
    return a - b


def fmul(a, b):
    if is_zero(a) or is_zero(b):
        return 0.0
    return a * b


def fscale(a, s: float):
    if is_zero(a) or s == 0:
        return 0.0
    if s == 1:
        return a
    if s == -1:
        return -a
    return a * s


def fdiv(a, b):
    if is_zero(a):
        return 0.0
    return a / b


def fsum(items):
    acc = 0.0
    for it in items:
        acc = fadd(acc, it)
    return acc


def _check_same(p: Provider, q: Provider):
    if p is q:
        return
    if p.mode != q.mode or p.grid != q.grid:
        raise GridMismatchError("operands live on different grids or providers")


class KForm:
    """Degree-k form; ``components[key]`` is the coefficient field of ``dx^key``."""

    __slots__ = ("degree", "components", "provider")

    def __init__(self, degree: int, components: dict, provider: Provider):
        if not 0 <= degree <= 4:
            raise DegreeError(f"form degree must be in 0..4, got {degree}")
        keys = form_keys(degree)
        comps = {}
        for key, value in components.items():
            key = tuple(key)
            if key not in keys:
                raise KeyError(f"{key} is not a strictly increasing {degree}-index")
            comps[key] = value
        self.degree = degree
        self.components = {k: comps.get(k, 0.0) for k in keys}
        self.provider = provider

    @classmethod
    def zero(cls, degree: int, provider: Provider) -> "KForm":
        return cls(degree, {}, provider)

    @classmethod
    def scalar(cls, f, provider: Provider) -> "KForm":
        return cls(0, {(): f}, provider)

    def __getitem__(self, key):
        return self.components[tuple(key)]

    def _combine(self, other: "KForm", op) -> "KForm":
        _check_same(self.provider, other.provider)
        if other.degree != self.degree:
            raise DegreeError("cannot add forms of different degree")
        return KForm(
            self.degree,
            {k: op(self.components[k], other.components[k]) for k in self.components},
            self.provider,
        )

    def __add__(self, other):
        return self._combine(other, fadd)

    def __sub__(self, other):
        return self._combine(other, fsub)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, s) -> "KForm":
        if isinstance(s, (int, float)):
            return KForm(self.degree, {k: fscale(v, s) for k, v in self.components.items()}, self.provider)
        return KForm(self.degree, {k: fmul(v, s) for k, v in self.components.items()}, self.provider)

    def values(self) -> dict:
        keys = list(self.components)
        vals = self.provider.values_many([self.components[k] for k in keys])
        return dict(zip(keys, vals))

    def stack(self) -> np.ndarray:
        """Component-major array ``(n_components, nt, n, n, n)``."""
        vals = self.values()
        return np.stack([vals[k] for k in form_keys(self.degree)])

    def __repr__(self):
        return f"KForm(degree={self.degree}, provider={self.provider!r})"


@dataclass
class SpaceTimeVector:
    """Vector field ``X = X^t d/dt + X^x d/dx + X^y d/dy + X^z d/dz``.

    ``mask`` (True where unavailable) marks grid points where the field
    came out of a degenerate pointwise solve.
    """

    components: tuple
    provider: Provider
    mask: Optional[np.ndarray] = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.components) != 4:
            raise ValueError("a space-time vector has exactly four components")
        self.components = tuple(self.components)

    @classmethod
    def from_parts(cls, t_component, spatial, provider, mask=None) -> "SpaceTimeVector":
        return cls((t_component, *spatial), provider, mask)

    @property
    def t_component(self):
        return self.components[0]

    @property
    def spatial(self) -> tuple:
        return self.components[1:]

    def __getitem__(self, axis: int):
        return self.components[axis]

    def _merged_mask(self, other):
        if self.mask is None:
            return other.mask
        if other.mask is None:
            return self.mask
        return self.mask | other.mask

    def __add__(self, other: "SpaceTimeVector"):
        _check_same(self.provider, other.provider)
        return SpaceTimeVector(
            tuple(fadd(a, b) for a, b in zip(self.components, other.components)),
            self.provider,
            self._merged_mask(other),
        )

    def __sub__(self, other: "SpaceTimeVector"):
        _check_same(self.provider, other.provider)
        return SpaceTimeVector(
            tuple(fsub(a, b) for a, b in zip(self.components, other.components)),
            self.provider,
            self._merged_mask(other),
        )

    def scale(self, s) -> "SpaceTimeVector":
        op = (lambda c: fscale(c, s)) if isinstance(s, (int, float)) else (lambda c: fmul(c, s))
        return SpaceTimeVector(tuple(op(c) for c in self.components), self.provider, self.mask)

    def raw_values(self) -> list:
        return self.provider.values_many(list(self.components))

    def values(self) -> list:
        """Sampled components with NaN at masked points."""
        vals = self.raw_values()
        if self.mask is not None:
            for v in vals:
                v[self.mask] = np.nan
        return vals

    def apply(self, f):
        """Directional derivative ``X(f)`` of a scalar field."""
        p = self.provider
        return fsum(fmul(c, p.diff(f, a)) for a, c in enumerate(self.components))


def vector_of(components, provider, mask=None) -> SpaceTimeVector:
    return SpaceTimeVector(tuple(components), provider, mask)


# -- exterior algebra ------------------------------------------------------
def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product; the sign is the parity of the sorting permutation."""
    _check_same(a.provider, b.provider)
    degree = a.degree + b.degree
    if degree > 4:
        raise DegreeError(f"wedge of degrees {a.degree} and {b.degree} exceeds 4")
    terms: dict = {}
    for I, fa in a.components.items():
        if is_zero(fa):
            continue
        for J, fb in b.components.items():
            if is_zero(fb) or set(I) & set(J):
                continue
            joined = I + J
            key = tuple(sorted(joined))
            term = fscale(fmul(fa, fb), permutation_sign(joined))
            pair = tuple(sorted((I, J)))
            group = terms.setdefault(key, {})
            group[pair] = fadd(group.get(pair, 0.0), term)
    # each unordered index pair holds at most two commuting terms, and the
    # groups are summed in sorted order, so wedge(a, b) and wedge(b, a)
    # agree bit for bit up to sign
    acc = {key: fsum(group[k] for k in sorted(group)) for key, group in terms.items()}
    return KForm(degree, acc, a.provider)


def exterior_derivative(a: KForm) -> KForm:
    if a.degree > 3:
        raise DegreeError("the exterior derivative of a 4-form vanishes identically on 4D space-time")
    p = a.provider
    acc: dict = {}
    for I, f in a.components.items():
        if is_zero(f):
            continue
        for j in AXES:
            if j in I:
                continue
            key = tuple(sorted((j,) + I))
            sign = -1 if key.index(j) % 2 else 1
            acc[key] = fadd(acc.get(key, 0.0), fscale(p.diff(f, j), sign))
    return KForm(a.degree + 1, acc, p)


def interior_product(X: SpaceTimeVector, a: KForm) -> KForm:
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form is undefined")
    _check_same(X.provider, a.provider)
    acc: dict = {}
    for I, f in a.components.items():
        if is_zero(f):
            continue
        for pos, axis in enumerate(I):
            key = I[:pos] + I[pos + 1:]
            term = fscale(fmul(X.components[axis], f), -1 if pos % 2 else 1)
            acc[key] = fadd(acc.get(key, 0.0), term)
    return KForm(a.degree - 1, acc, a.provider)


def lie_derivative_form(X: SpaceTimeVector, a: KForm) -> KForm:
    """Cartan's formula ``L_X a = i(X) da + d i(X) a``."""
    _check_same(X.provider, a.provider)
    if a.degree == 0:
        return KForm.scalar(X.apply(a.components[()]), a.provider)
    out = exterior_derivative(interior_product(X, a))
    if a.degree < 4:
        out = out + interior_product(X, exterior_derivative(a))
    return out


def lie_bracket(X: SpaceTimeVector, Y: SpaceTimeVector) -> SpaceTimeVector:
    """``[X, Y]^k = X(Y^k) - Y(X^k)``."""
    _check_same(X.provider, Y.provider)
    comps = tuple(fsub(X.apply(Y.components[k]), Y.apply(X.components[k])) for k in AXES)
    return SpaceTimeVector(comps, X.provider, X._merged_mask(Y))


def d_scalar(f, provider: Provider) -> KForm:
    return exterior_derivative(KForm.scalar(f, provider))


# -- norms -----------------------------------------------------------------
def norms(arrays, mask: Optional[np.ndarray] = None) -> tuple:
    """(L-infinity, RMS) over unmasked points across a list of arrays."""
    linf = 0.0
    sq = 0.0
    count = 0
    for arr in arrays:
        arr = np.asarray(arr, dtype=float)
        if mask is not None:
            arr = arr[~np.broadcast_to(mask, arr.shape)]
        else:
            arr = arr.ravel()
        if arr.size == 0:
            continue
        linf = max(linf, float(np.max(np.abs(arr))))
        sq += float(np.sum(arr * arr))
        count = max(count, arr.size)
    l2 = float(np.sqrt(sq / count)) if count else 0.0
    return linf, l2


def form_norms(a: KForm, mask=None) -> tuple:
    return norms(list(a.values().values()), mask)


def vector_norms(X: SpaceTimeVector, mask=None) -> tuple:
    return norms(X.raw_values(), mask)


def field_norms(f, provider: Provider, mask=None) -> tuple:
    return norms([provider.values(f)], mask)
