"""Finite-volume heat equation on the torus with one tunable bond.

All three boundary regimes come from a single conservative operator

    (L f)(x) = n^2 [ c(x-1) (f(x-1) - f(x)) + c(x) (f(x+1) - f(x)) ]

where ``c(x)`` is the conductance of bond ``{x, x+1 mod n}``.  Setting the
wrap bond ``{n-1, 0}`` to ``alpha / n`` gives Robin coupling between the two
ends of ``[0, 1]``; a conductance of 1 gives the periodic problem and 0 the
Neumann problem.  Time stepping is the theta scheme with a direct
cyclic-tridiagonal solve (Sherman-Morrison on the two corner entries).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numba
import numpy as np

from .grid import (
    Field,
    Grid,
    Trajectory,
    boundary_derivatives,
    boundary_trace,
    project_profile,
)


@dataclass(frozen=True)
class BondRates:
    """Per-bond conductances; ``conductance[x]`` belongs to bond ``{x, x+1 mod n}``.

    ``alpha``/``beta`` are kept for bookkeeping and may be ``None`` for
    hand-built conductance vectors.
    """

    n: int
    alpha: float | None
    beta: float | None
    conductance: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.conductance, dtype=float)
        if c.shape != (self.n,):
            raise ValueError(f"conductance must have length {self.n}, got {c.shape}")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise ValueError("conductances must be finite and >= 0")
        c.setflags(write=False)
        object.__setattr__(self, "conductance", c)

    @property
    def slow(self) -> float:
        return float(self.conductance[-1])


def build_conductances(n: int, alpha: float, beta: float) -> BondRates:
    """Rate 1 on every bond except ``{n-1, 0}``, which gets ``alpha * n**-beta``.

    ``beta = math.inf`` blocks the bond exactly.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if math.isnan(beta) or beta < 0:
        raise ValueError(f"beta must be in [0, inf], got {beta}")
    c = np.ones(int(n))
    c[-1] = 0.0 if math.isinf(beta) else alpha * float(n) ** (-beta)
    return BondRates(int(n), float(alpha), float(beta), c)


def periodic_rates(n: int) -> BondRates:
    return build_conductances(n, 1.0, 0.0)


def neumann_rates(n: int) -> BondRates:
    return build_conductances(n, 1.0, math.inf)


def laplacian_matrix(rates: BondRates) -> np.ndarray:
    """Dense matrix of the conductance Laplacian (for oracles and small n)."""
    n = rates.n
    c = rates.conductance
    L = np.zeros((n, n))
    for x in range(n):
        y = (x + 1) % n
        w = n * n * c[x]
        L[x, y] += w
        L[y, x] += w
        L[x, x] -= w
        L[y, y] -= w
    return L


def semidiscrete_rhs(f: Field, rates: BondRates) -> Field:
    if f.grid.n != rates.n:
        raise ValueError(f"dimension mismatch: field n={f.grid.n}, rates n={rates.n}")
    v = f.values
    n = rates.n
    flux = rates.conductance * (np.roll(v, -1) - v)
    return Field(f.grid, n * n * (flux - np.roll(flux, 1)), f.time)


@dataclass(frozen=True)
class SolverSpec:
    dt: float
    T: float
    theta: float = 0.5
    snapshot_stride: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be > 0, got {self.T}")
        if self.dt > self.T * (1 + 1e-12):
            raise ValueError(f"dt must be <= T, got dt={self.dt}, T={self.T}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if isinstance(self.snapshot_stride, bool) or int(self.snapshot_stride) != self.snapshot_stride \
                or self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be a positive integer, got {self.snapshot_stride}")
        if self.nsteps % self.snapshot_stride:
            raise ValueError(
                f"snapshot_stride={self.snapshot_stride} must divide the step count {self.nsteps}")

    @property
    def nsteps(self) -> int:
        k = round(self.T / self.dt)
        if abs(k * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")
        return k


# --- cyclic tridiagonal elimination -----------------------------------------

@numba.njit(cache=True, nogil=True)
def _thomas(cp, den, a, d, out):
    # forward sweep with precomputed pivots, then back substitution
    n = d.size
    out[0] = d[0] / den[0]
    for i in range(1, n):
        out[i] = (d[i] - a[i] * out[i - 1]) / den[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]


@numba.njit(cache=True, nogil=True)
def _cyclic_solve(cp, den, a, z, corner, denom, d, out):
    _thomas(cp, den, a, d, out)
    n = d.size
    fac = (out[0] + corner * out[n - 1]) / denom
    for i in range(n):
        out[i] -= fac * z[i]


class CyclicTridiagonal:
    """Factorization of ``A x = d`` with ``A`` tridiagonal plus corners.

    Row ``i`` reads ``a[i] x[i-1] + b[i] x[i] + c[i] x[i+1]`` with indices
    taken mod ``n``; ``a[0]`` and ``c[n-1]`` are the corner entries.
    The corners are removed by a rank-one Sherman-Morrison correction, so
    each solve costs two O(n) sweeps.
    """

    def __init__(self, a, b, c):
        a = np.ascontiguousarray(a, dtype=float)
        b = np.ascontiguousarray(b, dtype=float)
        c = np.ascontiguousarray(c, dtype=float)
        n = b.size
        if n < 2 or a.shape != (n,) or c.shape != (n,):
            raise ValueError("a, b, c must be vectors of the same length >= 2")
        gamma = -b[0]
        if gamma == 0.0:
            raise np.linalg.LinAlgError("zero leading diagonal entry")
        bb = b.copy()
        bb[0] = b[0] - gamma
        bb[-1] = b[-1] - a[0] * c[-1] / gamma
        cp = np.empty(n)
        den = np.empty(n)
        den[0] = bb[0]
        for i in range(n):
            if i > 0:
                den[i] = bb[i] - a[i] * cp[i - 1]
            if den[i] == 0.0 or not np.isfinite(den[i]):
                raise np.linalg.LinAlgError(f"singular pivot at row {i}")
            cp[i] = c[i] / den[i] if i < n - 1 else 0.0
        self.n = n
        self._a = a
        self._cp = cp
        self._den = den
        u = np.zeros(n)
        u[0] = gamma
        u[-1] += c[-1]
        z = np.empty(n)
        _thomas(cp, den, a, u, z)
        self._z = z
        self._corner = a[0] / gamma
        self._denom = 1.0 + z[0] + self._corner * z[-1]
        if self._denom == 0.0 or not np.isfinite(self._denom):
            raise np.linalg.LinAlgError("singular cyclic system")

    def solve(self, d) -> np.ndarray:
        d = np.ascontiguousarray(d, dtype=float)
        if d.shape != (self.n,):
            raise ValueError(f"right-hand side must have length {self.n}")
        out = np.empty(self.n)
        _cyclic_solve(self._cp, self._den, self._a, self._z, self._corner, self._denom, d, out)
        return out


def _theta_system(rates: BondRates, dt: float, theta: float) -> CyclicTridiagonal:
    n = rates.n
    c = rates.conductance
    w = theta * dt * n * n
    lower = -w * np.roll(c, 1)
    upper = -w * c
    diag = 1.0 + w * (c + np.roll(c, 1))
    return CyclicTridiagonal(lower, diag, upper)


@numba.njit(cache=True, nogil=True)
def _advance(f, cond, expl, cp, den, a, z, corner, denom, nsteps, out):
    # out[k] receives the field after step k+1
    n = f.size
    rhs = np.empty(n)
    cur = f.copy()
    nxt = np.empty(n)
    for k in range(nsteps):
        for x in range(n):
            xl = x - 1 if x > 0 else n - 1
            xr = x + 1 if x < n - 1 else 0
            rhs[x] = cur[x] + expl * (cond[x] * (cur[xr] - cur[x]) - cond[xl] * (cur[x] - cur[xl]))
        _cyclic_solve(cp, den, a, z, corner, denom, rhs, nxt)
        for x in range(n):
            cur[x] = nxt[x]
            out[k, x] = nxt[x]


class ThetaStepper:
    """Reusable theta-scheme stepper for fixed rates and time step."""

    def __init__(self, rates: BondRates, dt: float, theta: float = 0.5):
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        if not 0.0 <= theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {theta}")
        self.rates = rates
        self.dt = float(dt)
        self.theta = float(theta)
        self.system = _theta_system(rates, dt, theta)
        self._cond = np.ascontiguousarray(rates.conductance)
        self._expl = (1.0 - theta) * dt * rates.n * rates.n

    def advance(self, values: np.ndarray, nsteps: int) -> np.ndarray:
        """Return the ``(nsteps, n)`` array of states after each step."""
        s = self.system
        out = np.empty((nsteps, self.rates.n))
        _advance(np.ascontiguousarray(values, dtype=float), self._cond, self._expl,
                 s._cp, s._den, s._a, s._z, s._corner, s._denom, nsteps, out)
        return out


def step_theta(f: Field, rates: BondRates, dt: float, theta: float = 0.5) -> Field:
    """One step of ``(I - theta dt L) f_new = (I + (1 - theta) dt L) f``."""
    if f.grid.n != rates.n:
        raise ValueError(f"dimension mismatch: field n={f.grid.n}, rates n={rates.n}")
    new = ThetaStepper(rates, dt, theta).advance(f.values, 1)[0]
    return Field(f.grid, new, f.time + dt)


def initial_field(profile, grid: Grid) -> Field:
    if isinstance(profile, Field):
        if profile.grid.n != grid.n:
            raise ValueError("initial field does not match the grid")
        return Field(grid, profile.values, 0.0)
    if callable(profile):
        return project_profile(profile, grid)
    return Field(grid, profile, 0.0)


def stream(profile, rates: BondRates, spec: SolverSpec, block: int = 2048
           ) -> Iterator[np.ndarray]:
    """Yield consecutive blocks of states covering every time step.

    The first block starts with the initial field, so concatenating all
    blocks gives the states at ``k * dt`` for ``k = 0..nsteps``.
    """
    grid = Grid(rates.n, "torus")
    f0 = initial_field(profile, grid)
    stepper = ThetaStepper(rates, spec.dt, spec.theta)
    yield f0.values[None, :].copy()
    cur = np.array(f0.values)
    left = spec.nsteps
    while left > 0:
        m = min(block, left)
        out = stepper.advance(cur, m)
        cur = out[-1]
        left -= m
        yield out


def solve(profile, rates: BondRates, spec: SolverSpec) -> Trajectory:
    """Integrate to ``spec.T`` keeping every ``snapshot_stride``-th state.

    ``profile`` is a callable on ``[0, 1]`` (sampled at cell centers), a
    :class:`Field`, or an array of initial cell values.
    """
    grid = Grid(rates.n, "torus")
    f0 = initial_field(profile, grid)
    stepper = ThetaStepper(rates, spec.dt, spec.theta)
    stride = int(spec.snapshot_stride)
    nframes = spec.nsteps // stride
    frames = np.empty((nframes + 1, rates.n))
    frames[0] = f0.values
    cur = np.array(f0.values)
    for k in range(nframes):
        cur = stepper.advance(cur, stride)[-1]
        frames[k + 1] = cur
    return Trajectory(grid, spec.dt * stride, frames)


def mass_drift(traj: Trajectory) -> float:
    """Largest ``|mass(t) - mass(0)|`` relative to the L1 size of frame 0."""
    h = traj.grid.h
    m = h * traj.values.sum(axis=1)
    scale = max(h * float(np.abs(traj.values[0]).sum()), np.finfo(float).tiny)
    return float(np.max(np.abs(m - m[0])) / scale)


# --- spectral oracles --------------------------------------------------------

@dataclass(frozen=True)
class FourierCoeffs:
    """``mean + sum_k cos[k-1] cos(2 pi k u) + sin[k-1] sin(2 pi k u)``."""

    mean: float = 0.0
    cos: Sequence[float] = ()
    sin: Sequence[float] = ()


@dataclass(frozen=True)
class CosineCoeffs:
    """``sum_k coeffs[k] cos(pi k u)`` for ``k = 0, 1, ...``."""

    coeffs: Sequence[float] = (0.0,)


def fourier_coefficients(profile: Callable, kmax: int, quad_points: int = 8192) -> FourierCoeffs:
    u = (np.arange(quad_points) + 0.5) / quad_points
    v = np.asarray(profile(u), dtype=float)
    ks = np.arange(1, kmax + 1)[:, None]
    cos = 2.0 * np.mean(v * np.cos(2 * np.pi * ks * u), axis=1)
    sin = 2.0 * np.mean(v * np.sin(2 * np.pi * ks * u), axis=1)
    return FourierCoeffs(float(np.mean(v)), tuple(cos), tuple(sin))


def cosine_coefficients(profile: Callable, kmax: int, quad_points: int = 8192) -> CosineCoeffs:
    u = (np.arange(quad_points) + 0.5) / quad_points
    v = np.asarray(profile(u), dtype=float)
    ks = np.arange(0, kmax + 1)[:, None]
    a = 2.0 * np.mean(v * np.cos(np.pi * ks * u), axis=1)
    a[0] *= 0.5
    return CosineCoeffs(tuple(a))


def spectral_periodic(coeffs: FourierCoeffs, t: float, grid: Grid) -> Field:
    """Exact periodic heat flow of a finite Fourier series, at cell centers."""
    u = grid.centers
    vals = np.full(grid.n, float(coeffs.mean))
    for k, a in enumerate(coeffs.cos, start=1):
        vals += a * math.exp(-4 * k * k * math.pi ** 2 * t) * np.cos(2 * math.pi * k * u)
    for k, b in enumerate(coeffs.sin, start=1):
        vals += b * math.exp(-4 * k * k * math.pi ** 2 * t) * np.sin(2 * math.pi * k * u)
    return Field(grid, vals, t)


def spectral_neumann(coeffs: CosineCoeffs, t: float, grid: Grid) -> Field:
    """Exact Neumann heat flow of a finite cosine series, at cell centers."""
    u = grid.centers
    vals = np.zeros(grid.n)
    for k, a in enumerate(coeffs.coeffs):
        vals += a * math.exp(-k * k * math.pi ** 2 * t) * np.cos(math.pi * k * u)
    return Field(grid, vals, t)


def robin_bc_residual(traj: Trajectory, alpha: float) -> np.ndarray:
    """Per-frame ``(r0, r1)`` with ``r = d_u rho - alpha (rho(0) - rho(1))`` at each end."""
    out = np.empty((len(traj), 2))
    for k, fr in enumerate(traj):
        left, right = boundary_trace(fr)
        d0, d1 = boundary_derivatives(fr)
        jump = alpha * (left - right)
        out[k] = d0 - jump, d1 - jump
    return out
