"""Uniform time grids and grid-sampled complex signals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

#: relative slack for "exact" alignment checks (representation round-off)
ALIGN_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i + j*dt, j = 0..n_steps."""

    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError(f"grid step must be positive, got dt={self.dt}")
        if self.n_steps < 1:
            raise ConfigurationError(f"grid needs at least one step, got {self.n_steps}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float) -> int:
        """Node index of a grid-aligned time; rejects off-grid times."""
        x = (t - self.t_start) / self.dt
        i = int(round(x))
        if abs(x - i) > ALIGN_RTOL * max(1.0, abs(x)) or not (0 <= i <= self.n_steps):
            raise ConfigurationError(f"time {t} is not a node of {self}")
        return i

    def aligned_steps(self, span: float) -> int:
        """Number of steps in a span that must be an exact multiple of dt."""
        m = span / self.dt
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > ALIGN_RTOL * m:
            raise ConfigurationError(
                f"span {span} is not an integer multiple of dt={self.dt}"
            )
        return mi

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t_start, self.dt / factor, self.n_steps * factor)

    def truncated(self, n_steps: int) -> "TimeGrid":
        if not 1 <= n_steps <= self.n_steps:
            raise ConfigurationError(f"cannot truncate {self} to {n_steps} steps")
        return TimeGrid(self.t_start, self.dt, n_steps)


@dataclass
class SampledSignal:
    """Complex samples on a TimeGrid, implicitly zero outside the grid.

    The zero extension encodes the convention that controls vanish before
    the start and after the declared end of a protocol.
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_steps + 1,):
            raise ConfigurationError(
                f"signal needs {self.grid.n_steps + 1} samples, got shape {v.shape}"
            )
        self.values = v

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "SampledSignal":
        return cls(grid, np.zeros(grid.n_steps + 1, dtype=complex))

    def downsample(self, factor: int) -> "SampledSignal":
        if self.grid.n_steps % factor:
            raise ConfigurationError("downsample factor must divide n_steps")
        coarse = TimeGrid(self.grid.t_start, self.grid.dt * factor,
                          self.grid.n_steps // factor)
        return SampledSignal(coarse, self.values[::factor].copy())

    def __len__(self) -> int:
        return len(self.values)


def cumulative_trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoid integral starting at zero, same length as input."""
    out = np.empty(len(values), dtype=np.result_type(values, float))
    out[0] = 0.0
    np.cumsum(0.5 * dt * (values[1:] + values[:-1]), out=out[1:])
    return out
