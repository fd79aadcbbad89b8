"""Explicit inverse of ``-d^2/du^2`` on zero-mean functions with Robin-coupled ends.

For ``alpha > 0`` the kernel

    G(u, r) = alpha/(alpha+1) * u * (1 - r) - (u - r) * 1{r <= u}

maps a zero-mean ``g`` to the function ``f = int G(., r) g(r) dr`` with
``-f'' = g``, ``f(0) = 0`` and ``f'(0) = f'(1) = alpha (f(0) - f(1))``.

Operator application never forms the kernel.  Expanding the integral gives

    f(u) = alpha/(alpha+1) * u * I1 - u * int_0^u g + int_0^u r g(r) dr,
    I1   = int_0^1 (1 - r) g(r) dr,

and every integral is accumulated cell by cell.  With ``g`` read as the
piecewise-constant function equal to the cell value on each cell, the
partial-cell integrals up to a cell center are exact, so the result equals
the kernel integral of that step function to rounding error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Field,
    Grid,
    Trajectory,
    boundary_derivatives,
    boundary_trace,
    l2_inner,
)

ZERO_MEAN_TOL = 1e-12


def _check_alpha(alpha):
    if not (alpha > 0 and np.isfinite(alpha)):
        raise ValueError(f"alpha must be > 0, got {alpha}")


def kernel_value(alpha, u, r):
    """Evaluate ``G(u, r)``; ``u`` and ``r`` may be arrays (broadcast together)."""
    _check_alpha(alpha)
    u_arr = np.asarray(u, dtype=float)
    r_arr = np.asarray(r, dtype=float)
    for name, arr in (("u", u_arr), ("r", r_arr)):
        if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError(f"{name} must lie in [0, 1]")
    val = alpha / (alpha + 1.0) * u_arr * (1.0 - r_arr) - (u_arr - r_arr) * (r_arr <= u_arr)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class ZeroMeanField:
    """A :class:`Field` whose discrete mean ``h * sum(values)`` is within 1e-12 of 0."""

    base: Field

    def __post_init__(self):
        m = self.base.mean()
        if abs(m) > ZERO_MEAN_TOL:
            raise ValueError(f"field mean {m:.3e} exceeds zero-mean tolerance {ZERO_MEAN_TOL}")

    @classmethod
    def normalized(cls, f: Field) -> "ZeroMeanField":
        """Subtract the mean explicitly and wrap the result."""
        return cls(f.with_values(f.values - f.mean()))

    @property
    def grid(self) -> Grid:
        return self.base.grid

    @property
    def values(self) -> np.ndarray:
        return self.base.values


def _as_zero_mean(g) -> ZeroMeanField:
    if isinstance(g, ZeroMeanField):
        return g
    if isinstance(g, Field):
        return ZeroMeanField(g)
    raise TypeError(f"expected ZeroMeanField or Field, got {type(g).__name__}")


def _partial_integrals(g: ZeroMeanField):
    """Return ``(u, I1, C0, C1)`` with ``C0[i] = int_0^{u_i} g`` and ``C1[i] = int_0^{u_i} r g``."""
    v = g.values
    n = v.size
    h = 1.0 / n
    u = (np.arange(n) + 0.5) * h
    # full-cell integrals of g and r*g over cell j
    full0 = h * v
    full1 = h * u * v
    before0 = np.concatenate(([0.0], np.cumsum(full0)[:-1]))
    before1 = np.concatenate(([0.0], np.cumsum(full1)[:-1]))
    # half cell [x/n, u_i]: length h/2, centroid u_i - h/4
    C0 = before0 + 0.5 * h * v
    C1 = before1 + 0.5 * h * (u - 0.25 * h) * v
    I1 = float(np.sum(full0) - np.sum(full1))
    return u, I1, C0, C1


def apply_inverse(g, alpha) -> Field:
    """``f = (-Delta)^{-1}_alpha g`` at the cell centers."""
    _check_alpha(alpha)
    g = _as_zero_mean(g)
    u, I1, C0, C1 = _partial_integrals(g)
    f = alpha / (alpha + 1.0) * u * I1 - u * C0 + C1
    return Field(g.grid, f, g.base.time)


def inverse_derivative(g, alpha) -> Field:
    """``f'(u) = alpha/(alpha+1) * I1 - int_0^u g`` at the cell centers."""
    _check_alpha(alpha)
    g = _as_zero_mean(g)
    _, I1, C0, _ = _partial_integrals(g)
    return Field(g.grid, alpha / (alpha + 1.0) * I1 - C0, g.base.time)


def endpoint_values(g, alpha) -> tuple[float, float, float, float]:
    """Exact ``(f(0), f(1), f'(0), f'(1))`` for the step-function reading of ``g``."""
    _check_alpha(alpha)
    g = _as_zero_mean(g)
    v = g.values
    h = g.grid.h
    u = g.grid.centers
    total0 = h * float(np.sum(v))
    total1 = h * float(np.sum(u * v))
    I1 = total0 - total1
    k = alpha / (alpha + 1.0)
    return 0.0, k * I1 - total0 + total1, k * I1, k * I1 - total0


def boundary_residuals(g, alpha, convention: str = "trace") -> tuple[float, float]:
    """Residuals of ``f'(0) = f'(1)`` and ``f'(0) = alpha (f(0) - f(1))``.

    ``convention="trace"`` reads boundary values and derivatives off the
    cell-centered output with the grid's extrapolation rules, so the
    residual measures the discretization error (second order for smooth
    ``g``).  ``convention="exact"`` uses :func:`endpoint_values`.
    """
    if convention == "exact":
        f0, f1, d0, d1 = endpoint_values(g, alpha)
    elif convention == "trace":
        f = apply_inverse(g, alpha)
        f0, f1 = boundary_trace(f)
        d0, d1 = boundary_derivatives(f)
    else:
        raise ValueError(f"convention must be 'trace' or 'exact', got {convention!r}")
    return abs(d0 - d1), abs(d0 - alpha * (f0 - f1))


def check_left_inverse(g, alpha) -> float:
    """Max over interior cells ``1..n-2`` of ``|-Delta_h f - g|`` with ``f = apply_inverse(g)``."""
    g = _as_zero_mean(g)
    f = apply_inverse(g, alpha).values
    n = f.size
    lap = n * n * (f[2:] - 2.0 * f[1:-1] + f[:-2])
    return float(np.max(np.abs(-lap - g.values[1:-1]))) if n > 2 else 0.0


def quadratic_form(g, alpha) -> float:
    g = _as_zero_mean(g)
    return l2_inner(g.base, apply_inverse(g, alpha))


class GreenOperator:
    """``(-Delta)^{-1}_alpha`` bound to a grid, usable as a callable on fields."""

    def __init__(self, alpha: float, grid: Grid):
        _check_alpha(alpha)
        self.alpha = float(alpha)
        self.grid = grid

    def __call__(self, g) -> Field:
        g = _as_zero_mean(g)
        if g.grid.n != self.grid.n:
            raise ValueError(f"grid mismatch: operator n={self.grid.n}, field n={g.grid.n}")
        return apply_inverse(g, self.alpha)

    def quadratic_form(self, g) -> float:
        return quadratic_form(g, self.alpha)

    def matrix(self) -> np.ndarray:
        """Dense kernel matrix from :func:`kernel_matrix`; O(n^2), for checks only."""
        return kernel_matrix(self.alpha, self.grid.n)


def kernel_matrix(alpha: float, n: int) -> np.ndarray:
    """``K[i, j] = int_{cell j} G(u_i, r) dr`` evaluated in closed form.

    Independent of the cumulative-sum path; ``K @ g`` is the kernel integral
    of the step function with cell values ``g``.
    """
    _check_alpha(alpha)
    h = 1.0 / n
    u = (np.arange(n) + 0.5) * h
    lo = np.arange(n) * h
    hi = lo + h
    k = alpha / (alpha + 1.0)
    # int_{lo}^{hi} (1 - r) dr
    first = k * u[:, None] * ((hi - lo) - 0.5 * (hi ** 2 - lo ** 2))[None, :]
    # int over [lo, min(hi, u)] of (u - r) dr for lo < u
    top = np.minimum(hi[None, :], u[:, None])
    active = lo[None, :] < u[:, None]
    a = lo[None, :]
    second = np.where(active, u[:, None] * (top - a) - 0.5 * (top ** 2 - a ** 2), 0.0)
    return first - second


def lyapunov_residual(traj: Trajectory, alpha: float, operator=None) -> float:
    """Max over frames of ``|Q(t) - Q(0) + 2 int_0^t <rho_bar, rho_bar> ds|``.

    ``rho_bar`` is the frame minus its mean and ``Q(t) = <rho_bar, A rho_bar>``.
    ``A`` defaults to :func:`apply_inverse`; a dense ``(n, n)`` matrix may be
    passed instead (used by the brute-force checks).  The time integral is a
    cumulative trapezoid over the stored frames.
    """
    _check_alpha(alpha)
    vals = traj.values
    h = traj.grid.h
    bar = vals - vals.mean(axis=1, keepdims=True)
    if operator is None:
        Af = np.stack([apply_inverse(Field(traj.grid, row), alpha).values for row in bar])
    else:
        A = np.asarray(operator, dtype=float)
        if A.shape != (traj.grid.n, traj.grid.n):
            raise ValueError(f"operator must be ({traj.grid.n}, {traj.grid.n}), got {A.shape}")
        Af = bar @ A.T
    Q = h * np.einsum("ij,ij->i", bar, Af)
    sq = h * np.einsum("ij,ij->i", bar, bar)
    integral = np.concatenate(([0.0], np.cumsum(0.5 * traj.dt * (sq[1:] + sq[:-1]))))
    return float(np.max(np.abs(Q - Q[0] + 2.0 * integral)))

