"""Named initial profiles on [0, 1].

Names are ``name`` or ``name:param``; only ``constant`` takes a parameter.

>>> get_profile("constant:0.3")(0.7)
0.3
"""
from __future__ import annotations

from functools import partial
from typing import Callable

import numpy as np


def constant(u, c: float = 0.5):
    u = np.asarray(u, dtype=float)
    out = np.full(u.shape, float(c))
    return float(out) if out.ndim == 0 else out


def halfcos(u):
    """``(1 + cos(pi u)) / 2``: 1 at the left end, 0 at the right end."""
    return 0.5 * (1.0 + np.cos(np.pi * np.asarray(u, dtype=float)))


def cos2pi(u):
    return np.cos(2.0 * np.pi * np.asarray(u, dtype=float))


def step(u):
    return (np.asarray(u, dtype=float) < 0.5).astype(float)


def linear_saw(u):
    return np.asarray(u, dtype=float) * 1.0


PROFILES: dict[str, Callable] = {
    "constant": constant,
    "halfcos": halfcos,
    "cos2pi": cos2pi,
    "step": step,
    "linear-saw": linear_saw,
}


def get_profile(spec: str) -> Callable:
    name, _, param = spec.partition(":")
    name = name.strip()
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    if name == "constant":
        c = float(param) if param else 0.5
        if not np.isfinite(c):
            raise ValueError(f"constant profile value must be finite, got {param!r}")
        return partial(constant, c=c)
    if param:
        raise ValueError(f"profile {name!r} takes no parameter")
    return PROFILES[name]


def in_unit_range(spec: str) -> bool:
    """True if the profile only takes values in [0, 1] (usable as particle densities)."""
    u = (np.arange(4096) + 0.5) / 4096
    v = np.asarray(get_profile(spec)(u), dtype=float)
    return bool(np.all((v >= 0.0) & (v <= 1.0)))
