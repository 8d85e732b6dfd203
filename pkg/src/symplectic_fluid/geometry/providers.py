"""Derivative providers.

A provider fixes how scalar fields are represented and differentiated:

* ``AnalyticProvider``: fields are closed-form :class:`~.expr.Expr` nodes,
  differentiated exactly and sampled on the grid on demand.
* ``NumericProvider``: fields are sampled arrays; Fourier spectral
  derivatives in x, y, z and second-order central differences in t
  (second-order one-sided at the first and last sample).

Plain Python floats are valid fields under both providers.
"""
from __future__ import annotations

import os
from typing import Sequence

import numpy as np
import scipy.fft

from . import expr as ex
from .grid import SpaceTimeGrid

THREADS_ENV = "SYMPLECTIC_FLUID_THREADS"


def fft_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def is_zero(f) -> bool:
    if isinstance(f, ex.Expr):
        return f.op == "const" and f.data == 0.0
    return isinstance(f, (int, float)) and f == 0


class Provider:
    mode: str = ""

    def __init__(self, grid: SpaceTimeGrid):
        self.grid = grid

    def diff(self, f, axis: int):
        raise NotImplementedError

    def values_many(self, fields: Sequence) -> list:
        raise NotImplementedError

    def values(self, f) -> np.ndarray:
        return self.values_many([f])[0]

    def from_expr(self, e):
        """Represent a closed-form expression as a field of this provider."""
        raise NotImplementedError

    def coordinate(self, axis: int):
        return self.from_expr(ex.var(axis))

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n_space}, nt={self.grid.nt})"


class AnalyticProvider(Provider):
    """Exact derivatives of closed-form fields.

    ``extended=True`` evaluates in long double before rounding the results
    to float64, which helps when deeply nested brackets cancel internally.
    """

    mode = "analytic"

    def __init__(self, grid: SpaceTimeGrid, extended: bool = False):
        super().__init__(grid)
        self.extended = extended

    def diff(self, f, axis: int):
        if isinstance(f, ex.Expr):
            return f.diff(axis)
        if isinstance(f, (int, float)):
            return 0.0
        raise TypeError(f"analytic provider cannot differentiate {type(f).__name__}")

    def values_many(self, fields):
        coords = self.grid.coordinates()
        if self.extended:
            coords = tuple(np.asarray(c, dtype=np.longdouble) for c in coords)
        shape = self.grid.shape
        raw = ex.evaluate_many([ex.as_expr(f) for f in fields], coords)
        return [np.broadcast_to(np.asarray(v, dtype=float), shape).copy() for v in raw]

    def from_expr(self, e):
        return ex.as_expr(e)


class NumericProvider(Provider):
    mode = "numeric"

    def __init__(self, grid: SpaceTimeGrid):
        super().__init__(grid)
        n = grid.n_space
        k = scipy.fft.rfftfreq(n, d=grid.spacing / (2 * np.pi))
        k[-1] = 0.0  # odd derivative of the Nyquist mode is dropped
        self._k = k

    def diff(self, f, axis: int):
        if isinstance(f, (int, float)):
            return 0.0
        f = np.asarray(f, dtype=float)
        if f.shape != self.grid.shape:
            f = np.broadcast_to(f, self.grid.shape)
        if axis == 0:
            if self.grid.nt < 3:
                raise ValueError("time differentiation needs at least 3 samples")
            return np.gradient(f, self.grid.dt, axis=0, edge_order=2)
        ax = axis
        shape = [1, 1, 1, 1]
        shape[ax] = -1
        ik = (1j * self._k).reshape(shape)
        w = fft_workers()
        spec = scipy.fft.rfft(f, axis=ax, workers=w)
        return scipy.fft.irfft(spec * ik, n=self.grid.n_space, axis=ax, workers=w)

    def values_many(self, fields):
        shape = self.grid.shape
        return [np.broadcast_to(np.asarray(f, dtype=float), shape).copy() for f in fields]

    def from_expr(self, e):
        node = ex.as_expr(e)
        if node.op == "const":
            return float(node.data)
        coords = self.grid.coordinates()
        L = self.grid.box_length
        (base,) = ex.evaluate_many([node], coords)
        for axis in (1, 2, 3):
            if axis not in node.free:
                continue
            shifted = list(coords)
            shifted[axis] = coords[axis] + L
            (moved,) = ex.evaluate_many([node], shifted)
            scale = max(float(np.max(np.abs(base))), 1.0)
            if float(np.max(np.abs(np.asarray(moved) - base))) > 1e-9 * scale:
                raise ValueError(
                    f"expression is not periodic in {ex.COORDINATE_NAMES[axis]}; "
                    "the numeric provider needs periodic fields"
                )
        return np.broadcast_to(np.asarray(base, dtype=float), self.grid.shape).copy()


def make_provider(mode: str, grid: SpaceTimeGrid) -> Provider:
    if mode == "analytic":
        return AnalyticProvider(grid)
    if mode == "numeric":
        return NumericProvider(grid)
    raise ValueError(f"unknown provider mode {mode!r}")
