"""Space-time sampling grid: periodic box in space, uniform samples in time."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Periodic cube of side ``box_length`` with ``n_space`` points per axis,
    sampled at uniformly spaced instants ``times``.

    Arrays on the grid have shape ``(len(times), n, n, n)`` in C order, so z
    varies fastest, then y, then x, then t.
    """

    n_space: int
    times: tuple
    box_length: float = 2 * math.pi

    def __post_init__(self):
        n = self.n_space
        if int(n) != n or n < 8 or n % 2:
            raise ValueError(f"n_space must be an even integer >= 8, got {n!r}")
        times = tuple(float(t) for t in np.atleast_1d(np.asarray(self.times, dtype=float)))
        if not times:
            raise ValueError("at least one time sample is required")
        object.__setattr__(self, "n_space", int(n))
        object.__setattr__(self, "times", times)
        if len(times) > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12 * steps[0]:
                raise ValueError("times must be uniformly spaced (1e-12 relative)")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            return float("nan")
        return (self.times[-1] - self.times[0]) / (len(self.times) - 1)

    @property
    def nt(self) -> int:
        return len(self.times)

    @property
    def shape(self) -> tuple:
        n = self.n_space
        return (self.nt, n, n, n)

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_space

    def axis_points(self) -> np.ndarray:
        return np.arange(self.n_space) * self.spacing

    def coordinates(self) -> tuple:
        """Broadcastable coordinate arrays ``(t, x, y, z)``."""
        s = self.axis_points()
        return (
            np.asarray(self.times).reshape(-1, 1, 1, 1),
            s.reshape(1, -1, 1, 1),
            s.reshape(1, 1, -1, 1),
            s.reshape(1, 1, 1, -1),
        )

    def cell_volume(self) -> float:
        return self.spacing ** 3

    def with_times(self, times) -> "SpaceTimeGrid":
        return SpaceTimeGrid(self.n_space, tuple(times), self.box_length)


def uniform_times(start: float, stop: float, count: int) -> tuple:
    return tuple(float(t) for t in np.linspace(start, stop, count))
