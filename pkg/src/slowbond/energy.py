"""Energy of a density trajectory against the measure ``W_alpha = du + delta_0 / alpha``.

The closed form used throughout is

    total = 1/(4 kappa) * int_0^T ( ||d_u rho_t||^2 + alpha (rho_t(0) - rho_t(1))^2 ) dt

with ``kappa = 2`` by default.  The second term is the atom of the weighted
derivative: at ``u = 0`` the ``W_alpha``-derivative of ``rho`` equals
``alpha (rho(0) - rho(1))`` and the atom has mass ``1/alpha``.

:func:`variational_energy` evaluates the dual description
``<rho, d_u H> - 2 <<H, H>>_alpha`` over a finite family of test fields,
which can only undershoot the closed form.  :func:`build_walpha_test_function`
constructs smooth fields obeying the Robin-type coupling ``H'(0) = H'(1) =
alpha (H(0) - H(1))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from .grid import (
    Field,
    Grid,
    Trajectory,
    boundary_derivatives,
    boundary_trace,
    l2_norm,
    trapezoid_weights,
)

DOMAIN_TOL = 1e-10


def _check_alpha(alpha):
    if not (alpha > 0 and np.isfinite(alpha)):
        raise ValueError(f"alpha must be > 0, got {alpha}")


def walpha_boundary_derivative(f: Field, alpha: float) -> float:
    """``alpha * (f(0+) - f(1-))``, the weighted derivative carried by the atom at 0."""
    _check_alpha(alpha)
    left, right = boundary_trace(f)
    return alpha * (left - right)


@dataclass(frozen=True)
class EnergyReport:
    alpha: float
    bulk: float
    atom: float
    total: float
    bound_check: float
    kappa: float = 2.0

    @property
    def within_bound(self) -> bool:
        return self.total <= self.bound_check * (1.0 + 1e-2)

    def row(self) -> list[str]:
        return [repr(float(x)) for x in (self.alpha, self.bulk, self.atom, self.total, self.bound_check)]


def _frame_integrands(values: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame ``||d_u rho||^2`` over the cut interval and ``alpha * jump^2`` from traces."""
    n = values.shape[1]
    d = n * np.diff(values, axis=1)
    bulk = np.sum(d * d, axis=1) / n
    left = 0.5 * (3.0 * values[:, 0] - values[:, 1])
    right = 0.5 * (3.0 * values[:, -1] - values[:, -2])
    atom = alpha * (left - right) ** 2
    return bulk, atom


def _report(alpha, bulk, atom, f0: np.ndarray, kappa) -> EnergyReport:
    norm2 = float(np.dot(f0, f0)) / f0.size
    return EnergyReport(float(alpha), float(bulk), float(atom),
                        float((bulk + atom) / (4.0 * kappa)), norm2 / (8.0 * kappa), float(kappa))


def energy_functional(traj: Trajectory, alpha: float, kappa: float = 2.0) -> EnergyReport:
    """Closed-form energy with midpoint time quadrature over the stored frames.

    Each interval between consecutive frames contributes ``dt`` times the
    integrand at the average of its two end states.  This is second order
    like the trapezoid rule, and for Crank-Nicolson output it reproduces the
    scheme's own dissipation identity, so stiff modes that flip sign from
    step to step (large ``alpha`` with coarse ``dt``) are not counted as
    energy.

    A torus trajectory is read as cut at ``u = 0``: the wrap bond is left
    out of the bulk term and the jump across it enters through the atom.
    ``bound_check`` is ``||rho_0||^2 / (8 kappa)``, the value the dissipation
    identity caps the total at.
    """
    _check_alpha(alpha)
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    vals = traj.values
    if len(traj) < 2:
        return _report(alpha, 0.0, 0.0, vals[0], kappa)
    bulk_k, atom_k = _frame_integrands(0.5 * (vals[1:] + vals[:-1]), alpha)
    return _report(alpha, traj.dt * np.sum(bulk_k), traj.dt * np.sum(atom_k), vals[0], kappa)


class EnergyAccumulator:
    """:func:`energy_functional` over a stream of state blocks (see :func:`slowbond.heat.stream`).

    Lets the time integral run at full step resolution without storing
    the trajectory.  The last state of each block is carried over so the
    interval spanning two blocks is counted once.
    """

    def __init__(self, alpha: float, dt: float, kappa: float = 2.0):
        _check_alpha(alpha)
        if not kappa > 0:
            raise ValueError(f"kappa must be > 0, got {kappa}")
        self.alpha = float(alpha)
        self.dt = float(dt)
        self.kappa = float(kappa)
        self._bulk = 0.0
        self._atom = 0.0
        self._prev = None
        self._f0 = None
        self.count = 0

    def update(self, block: np.ndarray) -> None:
        block = np.atleast_2d(block)
        if block.shape[0] == 0:
            return
        if self._f0 is None:
            self._f0 = np.array(block[0])
            states = block
        else:
            states = np.vstack((self._prev[None, :], block))
        if states.shape[0] > 1:
            b, a = _frame_integrands(0.5 * (states[1:] + states[:-1]), self.alpha)
            self._bulk += float(np.sum(b))
            self._atom += float(np.sum(a))
        self._prev = np.array(block[-1])
        self.count += block.shape[0]

    def report(self) -> EnergyReport:
        if self._f0 is None:
            raise ValueError("no states accumulated")
        return _report(self.alpha, self.dt * self._bulk, self.dt * self._atom, self._f0, self.kappa)


def _as_time_series(H, traj: Trajectory) -> np.ndarray:
    if isinstance(H, Field):
        if H.grid.n != traj.grid.n:
            raise ValueError("test field grid does not match the trajectory")
        return np.broadcast_to(H.values, traj.values.shape)
    if isinstance(H, Trajectory):
        if H.values.shape != traj.values.shape:
            raise ValueError("test trajectory shape does not match")
        return H.values
    arr = np.asarray(H, dtype=float)
    return np.broadcast_to(arr, traj.values.shape)


def variational_value(traj: Trajectory, alpha: float, H) -> float:
    """``int_0^T <rho, d_u H> - 2 <<H, H>>_alpha dt`` for one test field.

    ``H`` is a torus field (constant in time), a trajectory on the same
    frames, or an array broadcastable to the trajectory values.  Inside the
    interval ``d_u H`` lives on bonds and ``rho`` is averaged onto them.  The
    wrap bond is split into its two half cells, each integrated against the
    one-sided value of ``rho``, because ``rho`` may jump at ``u = 0`` while
    ``H`` may have a kink there; averaging across the cut would cost a
    first-order error.
    """
    _check_alpha(alpha)
    hv = _as_time_series(H, traj)
    rho = traj.values
    n = traj.grid.n
    rho_bond = 0.5 * (rho[:, 1:] + rho[:, :-1])
    pair = np.sum(rho_bond * np.diff(hv, axis=1), axis=1)
    # H(0) from the two one-sided extrapolations, rho at the quarter-cell points
    h_cut = 0.25 * (3.0 * hv[:, 0] - hv[:, 1] + 3.0 * hv[:, -1] - hv[:, -2])
    rho_left = 0.25 * (5.0 * rho[:, 0] - rho[:, 1])
    rho_right = 0.25 * (5.0 * rho[:, -1] - rho[:, -2])
    pair += rho_left * (hv[:, 0] - h_cut) + rho_right * (h_cut - hv[:, -1])
    trace0 = 0.5 * (3.0 * hv[:, 0] - hv[:, 1])
    norm = np.sum(hv * hv, axis=1) / n + trace0 ** 2 / alpha
    w = traj.dt * trapezoid_weights(len(traj))
    return float(np.dot(w, pair - 2.0 * norm))


def variational_energy(traj: Trajectory, alpha: float, family: Iterable) -> float:
    """Largest :func:`variational_value` over a finite family of test fields."""
    vals = [variational_value(traj, alpha, H) for H in family]
    if not vals:
        raise ValueError("test family is empty")
    return max(vals)


def optimizer_field(traj: Trajectory) -> Trajectory:
    """``-d_u rho / 4`` at the cell centers, frame by frame.

    Second-order differences: central in the interior, one-sided three-point
    in the two outer cells (so the jump across ``u = 0`` is never
    differenced).
    """
    v = traj.values
    n = traj.grid.n
    d = np.empty_like(v)
    d[:, 1:-1] = 0.5 * n * (v[:, 2:] - v[:, :-2])
    d[:, 0] = 0.5 * n * (-3.0 * v[:, 0] + 4.0 * v[:, 1] - v[:, 2])
    d[:, -1] = 0.5 * n * (3.0 * v[:, -1] - 4.0 * v[:, -2] + v[:, -3])
    return Trajectory(traj.grid.with_topology("torus"), traj.dt, -0.25 * d)


def scaled_optimizer_family(traj: Trajectory, scales: Sequence[float] = (0.5, 0.9, 1.0, 1.1, 1.5)) -> list[Trajectory]:
    base = optimizer_field(traj)
    return [Trajectory(base.grid, base.dt, s * base.values) for s in scales]


# --- test functions in the W_alpha domain -------------------------------------

@dataclass(frozen=True)
class WalphaTestFn:
    """``H(u) = a + b u + int_0^u (u - w) h(w) dw`` realized at the cell centers.

    ``mean_residual`` is ``|int_0^1 h|`` and ``domain_residual`` is
    ``|b (1 + 1/alpha) + int_0^1 (1 - w) h(w) dw|``.
    """

    a_tilde: float
    b_tilde: float
    h: Callable
    alpha: float
    field: Field
    mean_residual: float
    domain_residual: float

    def exact(self, u) -> np.ndarray:
        return np.array([_H_value(self, float(x)) for x in np.atleast_1d(u)])

    def bc_residual(self) -> float:
        """``max(|H'(0) - H'(1)|, |H'(0) - alpha (H(0) - H(1))|)`` read off the grid field."""
        f0, f1 = boundary_trace(self.field)
        d0, d1 = boundary_derivatives(self.field)
        return max(abs(d0 - d1), abs(d0 - self.alpha * (f0 - f1)))


def _H_value(fn: WalphaTestFn, u: float) -> float:
    inner = integrate.quad(lambda w: (u - w) * fn.h(w), 0.0, u, epsabs=1e-14, epsrel=1e-13)[0] if u > 0 else 0.0
    return fn.a_tilde + fn.b_tilde * u + inner


def build_walpha_test_function(a_tilde: float, b_tilde, h: Callable, alpha: float,
                               grid: Grid) -> WalphaTestFn:
    """Build ``H`` from ``(a, b, h)`` and validate both domain conditions.

    Conditions: ``int_0^1 h = 0`` and ``b (1 + 1/alpha) + int_0^1 (1-w) h(w) dw = 0``.
    With ``b_tilde=None`` the second condition is solved for ``b``; an explicit
    ``b_tilde`` that violates it raises ``ValueError`` with the residual.
    """
    _check_alpha(alpha)
    quad = dict(epsabs=1e-13, epsrel=1e-13, limit=200)
    mean_h = integrate.quad(h, 0.0, 1.0, **quad)[0]
    if abs(mean_h) > DOMAIN_TOL:
        raise ValueError(f"h must have zero mean; int_0^1 h = {mean_h:.3e}")
    i_1w = integrate.quad(lambda w: (1.0 - w) * h(w), 0.0, 1.0, **quad)[0]
    slope = 1.0 + 1.0 / alpha
    if b_tilde is None:
        b_tilde = -i_1w / slope
    resid = b_tilde * slope + i_1w
    if abs(resid) > DOMAIN_TOL:
        raise ValueError(f"b_tilde violates the W_alpha domain condition; residual {resid:.3e}")
    proto = WalphaTestFn(float(a_tilde), float(b_tilde), h, float(alpha),
                         Field(grid, np.zeros(grid.n)), abs(mean_h), abs(resid))
    values = np.array([_H_value(proto, float(u)) for u in grid.centers])
    return WalphaTestFn(proto.a_tilde, proto.b_tilde, h, proto.alpha, Field(grid, values),
                        proto.mean_residual, proto.domain_residual)


def compact_support_bump(grid: Grid, lo: float = 0.25, hi: float = 0.75) -> Field:
    """Smooth bump supported in ``[lo, hi]``, zero near ``u = 0``."""
    u = grid.centers
    s = np.clip((u - lo) / (hi - lo), 0.0, 1.0)
    return Field(grid.with_topology("torus"), np.sin(np.pi * s) ** 4)


def l2_bound(f0: Field, kappa: float = 2.0) -> float:
    return l2_norm(f0) ** 2 / (8.0 * kappa)


__all__ = [
    "EnergyAccumulator",
    "EnergyReport",
    "WalphaTestFn",
    "build_walpha_test_function",
    "compact_support_bump",
    "energy_functional",
    "l2_bound",
    "optimizer_field",
    "scaled_optimizer_family",
    "variational_energy",
    "variational_value",
    "walpha_boundary_derivative",
]
