"""Sampled states and controls on uniform grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_j = j / n_x`` on [0, 1]."""

    n_x: int

    def __post_init__(self):
        if int(self.n_x) != self.n_x or self.n_x < 4:
            raise ValueError(f"n_x must be an integer >= 4, got {self.n_x!r}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_x

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_x + 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_x + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True, eq=False)
class State:
    """Samples of ``u`` on a grid; the last entry doubles as the boundary value u(1)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_x + 1,):
            raise ShapeMismatch(
                f"state has shape {v.shape}, grid needs ({self.grid.n_x + 1},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("state values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def boundary(self) -> float:
        return float(self.values[-1])

    @classmethod
    def zeros(cls, grid: Grid) -> "State":
        return cls(grid, np.zeros(grid.n_x + 1))

    @classmethod
    def from_function(cls, grid: Grid, fn, boundary: float | None = None) -> "State":
        """Sample ``fn`` on the grid; ``boundary`` overrides the value at x=1."""
        v = np.asarray(fn(grid.nodes), dtype=float) * np.ones(grid.n_x + 1)
        if boundary is not None:
            v[-1] = boundary
        return cls(grid, v)

    def __add__(self, other: "State") -> "State":
        _same_grid(self, other)
        return State(self.grid, self.values + other.values)

    def __sub__(self, other: "State") -> "State":
        _same_grid(self, other)
        return State(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "State":
        return State(self.grid, c * self.values)

    __rmul__ = __mul__


def _same_grid(p: State, q: State) -> None:
    if p.grid != q.grid:
        raise ShapeMismatch(f"grids differ: n_x={p.grid.n_x} vs n_x={q.grid.n_x}")


def time_grid(T: float, n_t: int) -> np.ndarray:
    if T <= 0:
        raise ValueError("horizon T must be positive")
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    return np.linspace(0.0, T, n_t + 1)


def trapezoid_time_weights(n_t: int, dt: float) -> np.ndarray:
    w = np.full(n_t + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


@dataclass(frozen=True, eq=False)
class Control:
    """Boundary control ``f`` sampled on a uniform time grid over [0, T]."""

    times: np.ndarray
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.samples, dtype=float)
        if t.ndim != 1 or t.shape != s.shape or t.size < 2:
            raise ShapeMismatch(f"times {t.shape} and samples {s.shape} disagree")
        if not (np.all(np.isfinite(s)) and np.all(np.diff(t) > 0)):
            raise ValueError("control needs finite samples on increasing times")
        dt = np.diff(t)
        if np.ptp(dt) > 1e-9 * dt.mean():
            raise ShapeMismatch("control times must be uniformly spaced")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "samples", s)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_t(self) -> int:
        return self.times.size - 1

    @classmethod
    def zeros(cls, T: float, n_t: int) -> "Control":
        return cls(time_grid(T, n_t), np.zeros(n_t + 1))

    @classmethod
    def from_function(cls, fn, T: float, n_t: int) -> "Control":
        t = time_grid(T, n_t)
        return cls(t, np.asarray(fn(t), dtype=float) * np.ones_like(t))

    def weights(self) -> np.ndarray:
        return trapezoid_time_weights(self.n_t, self.times[1] - self.times[0])

    def inner(self, other: "Control") -> float:
        if other.times.shape != self.times.shape:
            raise ShapeMismatch("controls sampled differently")
        return float(np.sum(self.weights() * self.samples * other.samples))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def resample(self, n_t: int) -> "Control":
        """Linear interpolation onto ``n_t`` uniform steps over the same horizon."""
        if n_t == self.n_t:
            return self
        t = time_grid(self.horizon, n_t)
        return Control(t, np.interp(t, self.times, self.samples))

    def __add__(self, other: "Control") -> "Control":
        return Control(self.times, self.samples + other.resample(self.n_t).samples)

    def __mul__(self, c: float) -> "Control":
        return Control(self.times, c * self.samples)

    __rmul__ = __mul__
