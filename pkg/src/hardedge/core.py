"""Random streams, Brownian paths, the Skorokhod map and bridge crossing helpers.

Everything here is driven by a (master_seed, stream_index) pair: two streams
built from the same pair produce bit-identical output, and distinct stream
indices under one master seed are statistically independent.  All samplers are
pure functions of the stream state, so replicas can run concurrently as long
as no single stream object is shared between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RandomStream",
    "TimeGrid",
    "BrownianPath",
    "ReflectedSegment",
    "sample_chi",
    "sample_brownian",
    "skorokhod_reflect",
    "bridge_upcross_prob",
    "mix64",
    "stream_noise_key",
    "correction_keys",
    "counter_uniform",
    "counter_exponential",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Exponential draws used for boundary corrections are capped at this value;
# the truncated mass exp(-46) ~ 1e-20 per step is far below any Monte Carlo
# resolution reachable here.
EXP_DRAW_CAP = 46.0


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mix with good avalanche."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stream_noise_key(master_seed: int, stream_index: int) -> int:
    """Base key for the counter-addressed correction draws of one replica."""
    return mix64((mix64(master_seed & _MASK64) + stream_index) & _MASK64)


def correction_keys(noise_key: int) -> tuple[int, int]:
    """(thinning key, reflection key) derived from a path's noise key."""
    return mix64((noise_key + 1) & _MASK64), mix64((noise_key + 2) & _MASK64)


def counter_uniform(key: int, k: int) -> float:
    """Uniform in (0, 1] addressed by (key, counter); random access, no state.

    Used for within-step corrections (boundary-crossing thinning, reflection
    bridge maxima).  Addressing draws by step index is what keeps the whole
    family of diffusions coupled to one source of randomness: every run that
    looks at step k sees the same value regardless of evaluation order.
    """
    z = mix64((key + ((k + 1) * _GOLDEN)) & _MASK64)
    return ((z >> 11) + 1) * (1.0 / 9007199254740992.0)


def counter_exponential(key: int, k: int) -> float:
    """Exp(1) draw addressed by (key, counter), capped at EXP_DRAW_CAP."""
    return min(-math.log(counter_uniform(key, k)), EXP_DRAW_CAP)


@dataclass(frozen=True)
class RandomStream:
    """One reproducible random stream: replica `stream_index` under a master seed."""

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator for this (seed, index) pair; bit-reproducible."""
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))

    def noise_key(self) -> int:
        return stream_noise_key(self.master_seed, self.stream_index)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = t_start + k*dt, k = 0..n_steps."""

    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ValueError(f"n_steps must be >= 0, got {self.n_steps}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.n_steps * self.dt

    def times(self) -> np.ndarray:
        # t_k built from the stored fields, never by repeated addition
        return self.t_start + self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class BrownianPath:
    """A discretized driving Brownian motion shared by all coupled diffusions.

    `values` holds W(t_0..t_n) with W(t_0) = 0, accumulated from `increments`
    in extended precision so the cumulative rounding drift stays below 1e-12
    even over 1e7 steps.  `noise_key` addresses the correction draws
    (crossing thinning, reflection maxima) that belong to this path, so a
    path carries *all* the randomness the coupled family r_mu consumes.
    """

    grid: TimeGrid
    values: np.ndarray
    increments: np.ndarray = field(repr=False)
    noise_key: int = 0

    @property
    def thin_key(self) -> int:
        return correction_keys(self.noise_key)[0]

    @property
    def refl_key(self) -> int:
        return correction_keys(self.noise_key)[1]


@dataclass(frozen=True)
class ReflectedSegment:
    """Skorokhod decomposition of a discrete path: x = y + push, x >= 0."""

    start_index: int
    x: np.ndarray
    push: np.ndarray


def sample_chi(stream: RandomStream | np.random.Generator, r: float, size=None):
    """Draw chi_r variates, i.e. sqrt of Gamma(shape r/2, scale 2).

    Valid for every r > 0 including tiny shapes (rejection sampling with the
    shape-boost transformation underneath handles shape < 1).
    """
    if not (r > 0):
        raise ValueError(f"chi parameter r must be positive, got {r}")
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    return np.sqrt(2.0 * rng.standard_gamma(0.5 * r, size=size))


def sample_brownian(stream: RandomStream, grid: TimeGrid) -> BrownianPath:
    """Sample a Brownian path on `grid` with its attached correction draws.

    Draw order per stream is fixed (one block of standard normals), so the
    same (master_seed, stream_index, grid) always yields the same path.
    """
    rng = stream.generator()
    inc = rng.standard_normal(grid.n_steps) * math.sqrt(grid.dt)
    values = np.empty(grid.n_steps + 1)
    values[0] = 0.0
    # extended-precision accumulation keeps long-horizon drift ~1e-13
    values[1:] = np.cumsum(inc.astype(np.longdouble)).astype(np.float64)
    return BrownianPath(
        grid=grid, values=values, increments=inc, noise_key=stream.noise_key()
    )


def skorokhod_reflect(y, start_index: int = 0) -> ReflectedSegment:
    """Solve the discrete Skorokhod problem for a path with y[0] >= 0.

    Returns x[k] = y[k] + max(0, max_{j<=k}(-y[j])) and the non-decreasing
    pushing term push = x - y, which increases only where x hits 0.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("cannot reflect an empty path")
    if y[0] < 0:
        raise ValueError(f"reflection requires y[0] >= 0, got {y[0]}")
    push = np.maximum.accumulate(np.maximum(-y, 0.0))
    x = y + push
    return ReflectedSegment(start_index=start_index, x=x, push=push)


def bridge_upcross_prob(x1: float, x2: float, c1: float, c2: float, dt: float) -> float:
    """Probability that a Brownian bridge from x1 to x2 over dt crosses the
    straight boundary segment running from c1 to c2.

    Equals exp(-2 (c1-x1)(c2-x2) / dt) when both endpoints sit below the
    boundary; an endpoint at or above the boundary makes the crossing certain.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    g1 = c1 - x1
    g2 = c2 - x2
    if g1 <= 0.0 or g2 <= 0.0:
        return 1.0
    return math.exp(-2.0 * g1 * g2 / dt)
