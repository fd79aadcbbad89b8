"""Event-driven symmetric exclusion on the discrete torus with one slow bond.

Every bond ``{x, x+1 mod n}`` carries an exponential clock of rate
``conductance[x]``; when it rings the occupations at the two ends are
exchanged (a no-op when both are equal).  The chain is simulated exactly:
waiting times are ``Exp(R)`` with ``R`` the summed rate and the ringing bond
is drawn from a Walker/Vose alias table.  Macroscopic time is microscopic
time divided by ``n**2``.

Random streams
--------------
Each replica owns two PCG64 streams seeded by
``SeedSequence(entropy=seed, spawn_key=(replica, purpose))`` with purpose 0
for the initial configuration and 1 for the dynamics.  Replica results are
independent of scheduling, so ensemble statistics are a fold in replica
order and bit-reproducible for any number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .heat import BondRates, build_conductances

PRNG_NAME = "PCG64/SeedSequence(entropy=seed,spawn_key=(replica,purpose))"
PURPOSE_INIT = 0
PURPOSE_DYNAMICS = 1


def replica_generator(seed: int, replica: int, purpose: int) -> np.random.Generator:
    if not 0 <= int(seed) < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class LatticeConfig:
    n: int
    eta: np.ndarray = field(repr=False)

    def __post_init__(self):
        eta = np.array(self.eta, dtype=np.uint8)
        if eta.shape != (self.n,):
            raise ValueError(f"eta must have length {self.n}, got {eta.shape}")
        if np.any(eta > 1):
            raise ValueError("occupations must be 0 or 1")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @property
    def particles(self) -> int:
        return int(self.eta.sum(dtype=np.int64))


@dataclass(frozen=True)
class SimSpec:
    n: int
    alpha: float
    beta: float
    T_macro: float
    snapshot_times: Sequence[float]
    seed: int = 0
    replicas: int = 1

    def __post_init__(self):
        times = np.array(self.snapshot_times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("snapshot_times must be a non-empty sequence")
        if not self.T_macro > 0 or not math.isfinite(self.T_macro):
            raise ValueError(f"T_macro must be > 0, got {self.T_macro}")
        if np.any(np.diff(times) < 0):
            raise ValueError("snapshot_times must be sorted")
        if times[0] < 0 or times[-1] > self.T_macro:
            raise ValueError(f"snapshot_times must lie in [0, T_macro={self.T_macro}]")
        if isinstance(self.replicas, bool) or int(self.replicas) != self.replicas or self.replicas < 1:
            raise ValueError(f"replicas must be an integer >= 1, got {self.replicas}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in times))
        build_conductances(self.n, self.alpha, self.beta)

    @property
    def rates(self) -> BondRates:
        return build_conductances(self.n, self.alpha, self.beta)


@dataclass
class SimResult:
    """One chain: snapshots ``(K, n)`` plus per-bond counters.

    ``rings[x]`` counts clock rings on bond ``x``; ``swaps[x]`` only those
    that moved a particle.
    """

    times: tuple
    snapshots: np.ndarray
    rings: np.ndarray
    swaps: np.ndarray
    events: int


@dataclass
class EnsembleStats:
    times: tuple
    mean: np.ndarray
    stderr: np.ndarray
    replicas: int
    particle_counts: np.ndarray
    slow_swaps: np.ndarray
    conserved: bool
    replica_snapshots: list | None = None

    def rows(self):
        """Aggregated long-form rows ``(t, x, mean, stderr)``."""
        for k, t in enumerate(self.times):
            for x in range(self.mean.shape[1]):
                yield t, x, self.mean[k, x], self.stderr[k, x]


# --- alias table ------------------------------------------------------------

def alias_table(weights) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table ``(prob, alias)`` for nonnegative ``weights``.

    Zero-weight entries get ``prob = 0`` so they can never be drawn.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a finite nonnegative vector")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must not all be zero")
    m = w.size
    scaled = w * (m / total)
    prob = np.zeros(m)
    alias = np.arange(m, dtype=np.int64)
    small = [i for i in range(m) if scaled[i] < 1.0]
    large = [i for i in range(m) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] + scaled[s] - 1.0
        (small if scaled[l] < 1.0 else large).append(l)
    heavy = int(np.argmax(w))
    for i in large + small:
        # leftovers are 1 up to rounding; a zero-weight leftover must stay unreachable
        if w[i] > 0:
            prob[i] = 1.0
        else:
            prob[i] = 0.0
            alias[i] = heavy
    return prob, alias


@numba.njit(cache=True, nogil=True)
def _run_chain(eta, prob, alias, total_rate, micro_times, rng, snaps, rings, swaps):
    n = eta.size
    m = prob.size
    K = micro_times.size
    t = 0.0
    k = 0
    events = 0
    t_end = micro_times[K - 1]
    while True:
        t += rng.standard_exponential() / total_rate
        while k < K and micro_times[k] < t:
            for x in range(n):
                snaps[k, x] = eta[x]
            k += 1
        if k == K or t > t_end:
            break
        v = rng.random() * m
        b = int(v)
        if b >= m:
            b = m - 1
        if v - b >= prob[b]:
            b = alias[b]
        rings[b] += 1
        y = b + 1 if b < n - 1 else 0
        if eta[b] != eta[y]:
            tmp = eta[b]
            eta[b] = eta[y]
            eta[y] = tmp
            swaps[b] += 1
        events += 1
    while k < K:
        for x in range(n):
            snaps[k, x] = eta[x]
        k += 1
    return events


def _check_profile_values(vals: np.ndarray):
    if not np.all(np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0):
        raise ValueError("profile values must lie in [0, 1]")


def init_bernoulli(profile: Callable, n: int, seed: int, replica: int = 0) -> LatticeConfig:
    """Independent ``Bernoulli(profile(x/n))`` occupations."""
    u = np.arange(n) / n
    vals = np.asarray(profile(u), dtype=float) * np.ones(n)
    _check_profile_values(vals)
    rng = replica_generator(seed, replica, PURPOSE_INIT)
    return LatticeConfig(n, (rng.random(n) < vals).astype(np.uint8))


def simulate(config: LatticeConfig, spec: SimSpec, replica: int = 0) -> SimResult:
    """Run one chain from ``config`` and record it at ``spec.snapshot_times``."""
    if config.n != spec.n:
        raise ValueError(f"config has n={config.n}, spec has n={spec.n}")
    rates = spec.rates
    prob, alias = alias_table(rates.conductance)
    total = float(rates.conductance.sum())
    micro = np.asarray(spec.snapshot_times, dtype=float) * float(spec.n) ** 2
    snaps = np.empty((micro.size, spec.n), dtype=np.uint8)
    rings = np.zeros(spec.n, dtype=np.int64)
    swaps = np.zeros(spec.n, dtype=np.int64)
    eta = np.array(config.eta, dtype=np.uint8)
    rng = replica_generator(spec.seed, replica, PURPOSE_DYNAMICS)
    events = _run_chain(eta, prob, alias, total, micro, rng, snaps, rings, swaps)
    return SimResult(spec.snapshot_times, snaps, rings, swaps, int(events))


def empirical_pairing(config, H: Callable) -> float:
    """``(1/n) sum_x H(x/n) eta(x)``; ``config`` may be a LatticeConfig or 0/1 array."""
    eta = config.eta if isinstance(config, LatticeConfig) else np.asarray(config)
    n = eta.shape[-1]
    h = np.asarray(H(np.arange(n) / n), dtype=float) * np.ones(n)
    return (eta @ h) / n if eta.ndim > 1 else float(np.dot(h, eta) / n)


def boxcar_averages(config, epsilon: float = 0.05) -> tuple[float, float]:
    """Window averages on both sides of the slow bond.

    ``left = (1/(eps n)) sum_{y=1}^{floor(eps n)} eta(y)`` and ``right`` over
    ``y = floor(n - eps n) .. n-1`` with the same normalization.
    """
    eta = config.eta if isinstance(config, LatticeConfig) else np.asarray(config)
    n = eta.size
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must be in (0, 1/2), got {epsilon}")
    en = epsilon * n
    if en < 1:
        raise ValueError(f"epsilon * n must be >= 1, got {en}")
    m = int(math.floor(en + 1e-9))
    start = int(math.floor(n - en + 1e-9))
    left = float(eta[1:m + 1].sum()) / en
    right = float(eta[start:n].sum()) / en
    return left, right


def _one_replica(spec: SimSpec, profile: Callable, replica: int):
    cfg = init_bernoulli(profile, spec.n, spec.seed, replica)
    res = simulate(cfg, spec, replica)
    counts = res.snapshots.sum(axis=1, dtype=np.int64)
    return res.snapshots, cfg.particles, counts, int(res.swaps[-1])


def ensemble_run(spec: SimSpec, profile: Callable, workers: int = 1,
                 keep_snapshots: bool = False) -> EnsembleStats:
    """Independent replicas folded in replica order into site-wise mean and stderr.

    With ``keep_snapshots`` the per-replica ``(K, n)`` snapshot arrays are
    returned as well (memory grows with ``replicas * K * n``).
    """
    if isinstance(workers, bool) or int(workers) < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    R = int(spec.replicas)
    K = len(spec.snapshot_times)
    occupied = np.zeros((K, spec.n), dtype=np.int64)
    particles = np.zeros(R, dtype=np.int64)
    slow = np.zeros(R, dtype=np.int64)
    conserved = True
    kept = [] if keep_snapshots else None

    def fold(r, out):
        nonlocal conserved
        snaps, p0, counts, s = out
        if kept is not None:
            kept.append(snaps)
        np.add(occupied, snaps, out=occupied)
        particles[r] = p0
        slow[r] = s
        conserved = conserved and bool(np.all(counts == p0))

    if workers == 1:
        for r in range(R):
            fold(r, _one_replica(spec, profile, r))
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            for r, out in enumerate(pool.map(lambda i: _one_replica(spec, profile, i), range(R))):
                fold(r, out)
    mean = occupied / R
    if R > 1:
        # occupations are 0/1 so the sum of squares equals the sum
        var = (occupied - occupied.astype(float) ** 2 / R) / (R - 1)
        stderr = np.sqrt(np.maximum(var, 0.0) / R)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleStats(spec.snapshot_times, mean, stderr, R, particles, slow, conserved, kept)
