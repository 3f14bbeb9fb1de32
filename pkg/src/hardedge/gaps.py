"""The exponential-gap construction of the limit point process.

Points are built from independent gaps g_j ~ Exp(rate j(j+a)/2): the k-th
largest point is the tail sum sum_{j>=k} g_j.  Truncating the sum at J and
adding the deterministic tail mean leaves a bias-free estimator whose omitted
randomness has standard deviation below sqrt(4/(3 J^3)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._parallel import map_shards
from .core import RandomStream

__all__ = [
    "GapSpec",
    "GapSample",
    "sample_hat_process",
    "sample_hat_points",
    "hat_mu_mean",
    "tail_mean",
    "tail_std_bound",
]


@dataclass(frozen=True)
class GapSpec:
    a: float
    truncation_J: int = 10**4
    compensate_tail: bool = True

    def __post_init__(self):
        if self.a <= -1:
            raise ValueError(f"requires a > -1, got {self.a}")
        if self.truncation_J < 1:
            raise ValueError(f"truncation_J must be >= 1, got {self.truncation_J}")


@dataclass(frozen=True)
class GapSample:
    """Decreasing positive points mu_hat(1) >= ... >= mu_hat(k_max)."""

    points: np.ndarray


def tail_mean(a: float, k: int) -> float:
    """sum_{j>=k} 2/(j(j+a)), the mean of the k-th point, in closed form."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if a == 0:
        return float(2.0 * special.polygamma(1, k))
    return float(2.0 * (special.digamma(k + a) - special.digamma(k)) / a)


def tail_std_bound(J: int) -> float:
    """Upper bound sqrt(4/(3 J^3)) on the std of the omitted tail beyond J."""
    return math.sqrt(4.0 / (3.0 * J**3))


def hat_mu_mean(a: float, k: int, J: int | None = 10**4) -> float:
    """Mean of the k-th point: partial sum to J plus the exact tail remainder.

    The digamma/trigamma closed form makes the remainder exact for every a
    (for positive integer a it telescopes to the same rational value), so the
    result does not depend on J; the split mirrors how sampling truncates.
    """
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if J is None:
        return tail_mean(a, k)
    j = np.arange(k, J + 1, dtype=float)
    partial = float(np.sum(2.0 / (j * (j + a)))) if j.size else 0.0
    return partial + tail_mean(a, J + 1)


def _draw_points(rng, a, J, k_max, compensate):
    rates_inv = 2.0 / (np.arange(1.0, J + 1.0) * (np.arange(1.0, J + 1.0) + a))
    g = rng.standard_exponential(J) * rates_inv
    total = float(np.sum(g))
    pts = np.empty(k_max)
    pts[0] = total
    if k_max > 1:
        pts[1:] = total - np.cumsum(g[: k_max - 1])
    if compensate:
        pts += tail_mean(a, J + 1)
    return pts


def sample_hat_process(
    spec: GapSpec, k_max: int, stream: RandomStream | np.random.Generator
) -> GapSample:
    """Draw one realization of the top k_max points.

    Gaps are consumed in a single pass so all tail sums mu_hat(k) come from
    one vector of draws; with compensate_tail the deterministic mean of the
    omitted gaps beyond J is added to every point.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if k_max > spec.truncation_J:
        raise ValueError(f"k_max={k_max} exceeds truncation_J={spec.truncation_J}")
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    pts = _draw_points(rng, spec.a, spec.truncation_J, k_max, spec.compensate_tail)
    return GapSample(points=pts)


def _points_shard(lo, hi, seed, a, J, k_max, compensate):
    out = np.empty((hi - lo, k_max))
    for r in range(lo, hi):
        rng = RandomStream(seed, r).generator()
        out[r - lo] = _draw_points(rng, a, J, k_max, compensate)
    return out


def sample_hat_points(
    a: float,
    n_replicas: int,
    seed: int = 0,
    k_max: int = 1,
    truncation_J: int = 10**4,
    compensate_tail: bool = True,
    n_jobs: int | None = None,
) -> np.ndarray:
    """(n_replicas, k_max) array of points, one replica stream per row."""
    spec = GapSpec(a, truncation_J, compensate_tail)  # validates
    if k_max < 1 or k_max > spec.truncation_J:
        raise ValueError("need 1 <= k_max <= truncation_J")
    shards = map_shards(
        _points_shard,
        n_replicas,
        (seed, a, truncation_J, k_max, compensate_tail),
        n_jobs=n_jobs,
    )
    return np.vstack(shards) if shards else np.empty((0, k_max))
