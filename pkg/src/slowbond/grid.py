"""Cell-centered grids on the unit interval / torus and the quadratures built on them.

Cell ``x`` covers ``[x/n, (x+1)/n)`` and carries one real value, read at the
cell center ``(x + 1/2)/n``.  Boundary values at ``u = 0`` and ``u = 1`` are
never stored; they are recovered by linear extrapolation from the two
outermost cells (see :func:`boundary_trace`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

TOPOLOGIES = ("torus", "interval")


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` cells of width ``1/n``."""

    n: int
    topology: str = "torus"

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise TypeError(f"n must be an integer, got {type(self.n).__name__}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    @property
    def bond_positions(self) -> np.ndarray:
        """Positions of the bonds returned by :func:`discrete_gradient`."""
        nb = self.n if self.topology == "torus" else self.n - 1
        return (np.arange(nb) + 1.0) / self.n

    def with_topology(self, topology: str) -> "Grid":
        return Grid(self.n, topology)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Field:
    """Real values on the cells of ``grid`` at a given time."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if not np.isfinite(self.time) or self.time < 0:
            raise ValueError(f"time must be finite and >= 0, got {self.time}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time", float(self.time))

    def mass(self) -> float:
        return self.grid.h * float(np.sum(self.values))

    def mean(self) -> float:
        return self.mass()

    def with_values(self, values, time: float | None = None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class Trajectory:
    """Frames ``values[k]`` at times ``k * dt`` on a common grid.

    Stored as a ``(K+1, n)`` array; :meth:`frame` and iteration hand out
    :class:`Field` views.
    """

    grid: Grid
    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 2 or vals.shape[1] != self.grid.n or vals.shape[0] < 1:
            raise ValueError(f"expected shape (K+1, {self.grid.n}), got {vals.shape}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("trajectory values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_frames(cls, frames: Sequence[Field], dt: float) -> "Trajectory":
        if not frames:
            raise ValueError("need at least one frame")
        grid = frames[0].grid
        for k, fr in enumerate(frames):
            if fr.grid != grid:
                raise ValueError("all frames must share the grid")
            if not np.isclose(fr.time, k * dt, rtol=1e-12, atol=1e-14):
                raise ValueError(f"frame {k} has time {fr.time}, expected {k * dt}")
        return cls(grid, dt, np.stack([fr.values for fr in frames]))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self) -> Iterator[Field]:
        return (self.frame(k) for k in range(len(self)))

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt

    @property
    def T(self) -> float:
        return (len(self) - 1) * self.dt

    def frame(self, k: int) -> Field:
        k = range(len(self))[k]
        return Field(self.grid, self.values[k], k * self.dt)

    @property
    def frames(self) -> list[Field]:
        return list(self)


def _evaluate(profile: Callable, u: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(profile(u), dtype=float)
        if out.shape != u.shape:
            out = np.broadcast_to(out, u.shape).astype(float)
    except (TypeError, ValueError):
        out = np.array([float(profile(float(x))) for x in u])
    return out


def project_profile(profile: Callable, grid: Grid, time: float = 0.0) -> Field:
    """Sample ``profile`` at the cell centers (midpoint rule)."""
    vals = _evaluate(profile, grid.centers)
    if not np.all(np.isfinite(vals)):
        bad = grid.centers[~np.isfinite(vals)][0]
        raise ValueError(f"profile is not finite at u={bad}")
    return Field(grid, vals, time)


def _check_same_grid(f: Field, g: Field):
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")


def l2_inner(f: Field, g: Field) -> float:
    _check_same_grid(f, g)
    return f.grid.h * float(np.dot(f.values, g.values))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(l2_inner(f, f)))


def boundary_trace(f: Field) -> tuple[float, float]:
    """Second-order extrapolated values ``(f(0+), f(1-))``."""
    v = f.values
    return 0.5 * (3.0 * v[0] - v[1]), 0.5 * (3.0 * v[-1] - v[-2])


def boundary_derivatives(f: Field) -> tuple[float, float]:
    """One-sided second-order derivatives at ``u = 0`` and ``u = 1``.

    Quadratic interpolation through the three outermost cell centers.
    """
    v = f.values
    if f.grid.n < 3:
        raise ValueError("one-sided derivatives need n >= 3")
    n = f.grid.n
    d0 = n * (-2.0 * v[0] + 3.0 * v[1] - v[2])
    d1 = n * (2.0 * v[-1] - 3.0 * v[-2] + v[-3])
    return d0, d1


def walpha_inner(f: Field, g: Field, alpha: float) -> float:
    """Inner product against Lebesgue measure plus an atom of mass 1/alpha at 0."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    _check_same_grid(f, g)
    if f.grid.topology != "torus":
        raise ValueError("walpha_inner needs a torus-topology grid")
    f0, _ = boundary_trace(f)
    g0, _ = boundary_trace(g)
    return l2_inner(f, g) + f0 * g0 / alpha


def discrete_gradient(f: Field) -> np.ndarray:
    """Bond values ``n (f(x+1) - f(x))``; the wrap bond only on a torus."""
    v = f.values
    n = f.grid.n
    if f.grid.topology == "torus":
        return n * (np.roll(v, -1) - v)
    return n * np.diff(v)


def divergence(bond_values: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell values ``n (b(x) - b(x-1))`` of a torus bond field.

    Minus the adjoint of :func:`discrete_gradient` for the ``h``-weighted sums.
    """
    b = np.asarray(bond_values, dtype=float)
    if grid.topology != "torus" or b.shape != (grid.n,):
        raise ValueError("divergence is defined for torus bond fields of length n")
    return grid.n * (b - np.roll(b, 1))


def trapezoid_weights(count: int) -> np.ndarray:
    w = np.ones(count)
    if count > 1:
        w[0] = w[-1] = 0.5
    else:
        w[0] = 0.0
    return w


def spacetime_l2_distance(a: Trajectory, b: Trajectory) -> float:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    if len(a) != len(b):
        raise ValueError(f"frame count mismatch: {len(a)} vs {len(b)}")
    if not np.isclose(a.dt, b.dt, rtol=1e-12, atol=0.0):
        raise ValueError(f"dt mismatch: {a.dt} vs {b.dt}")
    diff = a.values - b.values
    per_frame = a.grid.h * np.einsum("ij,ij->i", diff, diff)
    return float(np.sqrt(a.dt * np.dot(trapezoid_weights(len(a)), per_frame)))


def field_row(f: Field) -> list[str]:
    """CSV cells ``t, v0, ..., v{n-1}``, each the shortest string that round-trips."""
    return [repr(float(f.time))] + [repr(float(x)) for x in f.values]
