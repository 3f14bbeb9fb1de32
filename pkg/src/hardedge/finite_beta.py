"""Rescaled finite-temperature diffusions with explosion cycling.

The diffusion alternates between a minus regime (drift base -a) and a plus
regime (base a+1); between the floor at 0 and the line mu + t/4 it behaves
like the corresponding reflected Brownian motion, and each arrival at the
line triggers a blow-up, a restart from below, and a regime toggle.  The
explosion-count distribution converges, as beta decreases, to the cycle-count
distribution of the zero-temperature construction in `diffusion`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from ._parallel import map_shards
from .core import RandomStream

__all__ = [
    "ExplosionKind",
    "FiniteBetaRun",
    "StiffSolverOpts",
    "CountDistribution",
    "run_q_beta",
    "explosion_count_distribution",
    "exponential_drift_terms",
]

MAX_EXPLOSIONS = 64


class ExplosionKind(Enum):
    MINUS = "minus"
    PLUS = "plus"


@dataclass(frozen=True)
class StiffSolverOpts:
    """Step and threshold policy for the stiff exponential drifts.

    Near either boundary (within 5 beta ln(1/beta)) the step is
    dt_base * beta**beta_scaling, relaxed to dt_base * beta elsewhere.
    An explosion is declared at q > c(t) + q_ceiling*beta*ln(1/beta) and the
    restart point is the mirror image below 0.  drift_clamp caps the
    exponential drift terms of the plain-Euler integrator; the default is
    large enough to be effectively disabled, and it plays no role in the
    default splitting integrator, whose exact substep flows need no clamp.
    """

    dt_base: float = 0.1
    beta_scaling: float = 2.0
    q_ceiling: float = 10.0
    drift_clamp: float = 1e12
    splitting: bool = True

    def __post_init__(self):
        if not (self.dt_base > 0 and self.q_ceiling > 0 and self.drift_clamp > 0):
            raise ValueError("dt_base, q_ceiling and drift_clamp must be positive")


DEFAULT_STIFF_OPTS = StiffSolverOpts()


@dataclass(frozen=True)
class FiniteBetaRun:
    beta: float
    a: float
    mu: float
    explosions: tuple[tuple[float, ExplosionKind], ...]
    count: int  # number of plus explosions

    @property
    def n_explosions(self) -> int:
        return len(self.explosions)


@dataclass(frozen=True)
class CountDistribution:
    """Explosion-count histogram over independent runs."""

    hist: np.ndarray
    n_runs: int

    def probs(self) -> np.ndarray:
        return self.hist / self.n_runs

    def stderr(self) -> np.ndarray:
        p = self.probs()
        return np.sqrt(p * (1.0 - p) / self.n_runs)


def _validate(beta, a, mu):
    if not (0 < beta <= 0.5):
        raise ValueError(f"beta must lie in (0, 0.5], got {beta}")
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    if not (mu > 0):
        raise ValueError(f"mu must be positive, got {mu}")


def _run_core(rng, beta, a, mu, horizon, opts):
    """Drive the kernel over refillable normal blocks; returns (times, kinds)."""
    dt_fine = opts.dt_base * beta**opts.beta_scaling
    dt_coarse = opts.dt_base * beta
    band = 5.0 * beta * math.log(1.0 / beta)
    off = opts.q_ceiling * beta * math.log(1.0 / beta)
    expl_times = np.empty(MAX_EXPLOSIONS)
    expl_kinds = np.empty(MAX_EXPLOSIONS, dtype=np.int64)
    t, q, phase, n_expl = 0.0, -off, 0, 0
    block = 1 << 15
    while True:
        normals = rng.standard_normal(block)
        used, t, q, phase, n_expl, status = _kernels.run_q_beta_segment(
            normals,
            t,
            q,
            phase,
            beta,
            a,
            mu,
            horizon,
            dt_fine,
            dt_coarse,
            band,
            off,
            -off,
            opts.drift_clamp,
            opts.splitting,
            expl_times,
            expl_kinds,
            n_expl,
        )
        if status == -1:
            raise RuntimeError(
                f"explosion record overflow (> {MAX_EXPLOSIONS}) at beta={beta}"
            )
        if status == 1:
            return expl_times[:n_expl].copy(), expl_kinds[:n_expl].copy()
        block = min(block * 2, 1 << 20)


def run_q_beta(
    stream: RandomStream,
    beta: float,
    a: float,
    mu: float,
    horizon: float,
    opts: StiffSolverOpts = DEFAULT_STIFF_OPTS,
) -> FiniteBetaRun:
    """Simulate one finite-temperature trajectory and record its explosions.

    Explosion kinds alternate starting with MINUS; `count` is the number of
    PLUS explosions, i.e. the number of completed minus/plus cycles.
    """
    _validate(beta, a, mu)
    if not (horizon > 0):
        raise ValueError(f"horizon must be positive, got {horizon}")
    times, kinds = _run_core(stream.generator(), beta, a, mu, horizon, opts)
    explosions = tuple(
        (float(t), ExplosionKind.MINUS if k == 0 else ExplosionKind.PLUS)
        for t, k in zip(times, kinds)
    )
    return FiniteBetaRun(
        beta=beta,
        a=a,
        mu=mu,
        explosions=explosions,
        count=int(np.sum(kinds == 1)),
    )


def _counts_shard(lo, hi, seed, beta, a, mu, horizon, opts_tuple, cap):
    opts = StiffSolverOpts(*opts_tuple)
    hist = np.zeros(cap + 1, dtype=np.int64)
    for r in range(lo, hi):
        rng = RandomStream(seed, r).generator()
        _, kinds = _run_core(rng, beta, a, mu, horizon, opts)
        hist[min(int(np.sum(kinds == 1)), cap)] += 1
    return hist


def explosion_count_distribution(
    beta: float,
    a: float,
    mu: float,
    n_runs: int,
    seed: int = 0,
    horizon: float | None = None,
    opts: StiffSolverOpts = DEFAULT_STIFF_OPTS,
    n_jobs: int | None = None,
) -> CountDistribution:
    """Histogram of plus-explosion counts over independent runs (one stream
    per run index, so the result is deterministic under the master seed)."""
    _validate(beta, a, mu)
    if n_runs < 1:
        raise ValueError(f"need n_runs >= 1, got {n_runs}")
    if horizon is None:
        horizon = max(100.0, 40.0 * mu)
    cap = MAX_EXPLOSIONS // 2
    opts_tuple = (
        opts.dt_base,
        opts.beta_scaling,
        opts.q_ceiling,
        opts.drift_clamp,
        opts.splitting,
    )
    shards = map_shards(
        _counts_shard,
        n_runs,
        (seed, beta, a, mu, horizon, opts_tuple, cap),
        n_jobs=n_jobs,
    )
    hist = np.zeros(cap + 1, dtype=np.int64)
    for s in shards:
        hist += s
    return CountDistribution(hist=hist, n_runs=n_runs)


def exponential_drift_terms(beta: float, mu: float, q: float, t: float) -> float:
    """The state-dependent part of the drift, (e^{-q/beta} + e^{-(c(t)-q)/beta})/4.

    Inside the strip [beta^(1/4), c(t) - beta^(1/4)] this is below
    exp(-beta^(-3/4))/2, which is the sense in which the diffusion matches a
    constant-drift reflected Brownian motion away from the boundaries.
    """
    c = mu + 0.25 * t
    return 0.25 * (math.exp(-q / beta) + math.exp(-(c - q) / beta))
