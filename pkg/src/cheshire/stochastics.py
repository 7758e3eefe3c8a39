"""Counting statistics, first-order error propagation and run aggregation."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from math import sqrt
from typing import Callable, NamedTuple, Sequence

import numpy as np


class Quantity(NamedTuple):
    """A value with an independent Gaussian 1-sigma uncertainty."""

    value: float
    sigma: float = 0.0


def as_quantity(x) -> Quantity:
    if isinstance(x, Quantity):
        return x
    if isinstance(x, (tuple, list)):
        return Quantity(float(x[0]), float(x[1]))
    return Quantity(float(x), 0.0)


@dataclass(frozen=True)
class CountSample:
    counts: int
    dwell: float

    def __post_init__(self):
        if self.dwell <= 0:
            raise ValueError(f"dwell must be positive, got {self.dwell!r}")
        if self.counts < 0:
            raise ValueError(f"counts must be non-negative, got {self.counts!r}")

    @property
    def rate(self) -> float:
        return self.counts / self.dwell

    @property
    def sigma_rate(self) -> float:
        # sqrt(N) with a floor of one count, so empty bins keep finite weight
        return sqrt(max(self.counts, 1)) / self.dwell


def make_stream(seed: int, name: str) -> np.random.Generator:
    """Independent PCG64 stream keyed by ``(seed, name)``.

    The name is hashed with SHA-256, so the mapping does not depend on
    Python's per-process string hashing.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *words])))


def draw_poisson(mean: float, stream: np.random.Generator) -> int:
    mean = float(mean)
    if not np.isfinite(mean) or mean < 0:
        raise ValueError(f"Poisson mean must be finite and non-negative, got {mean!r}")
    if mean == 0:
        return 0
    return int(stream.poisson(mean))


def propagate(f: Callable[..., float], inputs: Sequence) -> Quantity:
    """First-order Gaussian propagation through ``f`` for independent inputs.

    Partial derivatives come from central differences with step
    ``max(1e-6, 1e-6 * |x_i|)``. Inputs with zero sigma are not perturbed.
    """
    qs = [as_quantity(q) for q in inputs]
    x = [q.value for q in qs]
    value = float(f(*x))
    var = 0.0
    for i, q in enumerate(qs):
        if q.sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if q.sigma == 0:
            continue
        h = max(1e-6, 1e-6 * abs(q.value))
        up = list(x)
        dn = list(x)
        up[i] += h
        dn[i] -= h
        deriv = (float(f(*up)) - float(f(*dn))) / (2 * h)
        var += (deriv * q.sigma) ** 2
    return Quantity(value, sqrt(var))


class RunSet(list):
    """Estimates of one weak value from independent repetitions."""

    def __init__(self, runs=()):
        super().__init__(runs)
        if not self:
            raise ValueError("RunSet must not be empty")
        keys = {(r.method, r.path) for r in self}
        if len(keys) != 1:
            raise ValueError(f"RunSet mixes methods/paths: {sorted(map(str, keys))}")


def aggregate(runs):
    """Inverse-variance weighted mean of repeated estimates.

    Returns an estimate of the same type as the inputs with ``value`` and
    ``sigma`` replaced.
    """
    runs = runs if isinstance(runs, RunSet) else RunSet(runs)
    sig = np.array([r.sigma for r in runs], dtype=float)
    if np.any(sig <= 0):
        raise ValueError("aggregate needs strictly positive sigmas")
    w = sig**-2
    vals = np.array([r.value for r in runs], dtype=float)
    mean = float(np.sum(w * vals) / np.sum(w))
    return dataclasses.replace(runs[0], value=mean, sigma=float(np.sum(w) ** -0.5))
