"""The coupled family of reflected diffusions behind the limit point process.

A trajectory starts at 0, runs as a reflected Brownian motion with drift
-a/4 (minus phase) until it hits the critical line mu + t/4, jumps back to 0,
continues with drift (a+1)/4 (plus phase), and alternates after every hit.
All intercepts mu share one driving path and one set of correction draws, so
for a fixed path the number of hits can only go down as mu goes up; the whole
point process is read off a single path by locating where counts drop.

Counting convention at a finite horizon: for a >= 0 a cycle whose minus phase
hit the line is counted as complete even if the closing plus phase was still
running at the horizon (its completion is certain and merely heavy-tailed in
time, so requiring it would bias every estimate at reachable horizons); for
a in (-1, 0) the plus phase genuinely may never hit and a cycle counts only
once its plus hit is observed.  `DiffusionRun.completed_plus` always reports
the literal number of observed plus hits.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import _kernels
from ._parallel import map_shards
from .core import BrownianPath, RandomStream, TimeGrid, correction_keys, stream_noise_key

__all__ = [
    "CriticalLine",
    "PhaseKind",
    "CycleRecord",
    "DiffusionRun",
    "PointSample",
    "SimOpts",
    "ExceedanceEstimate",
    "default_horizon",
    "grid_for",
    "effective_count",
    "run_r_mu",
    "cycle_count_profile",
    "extract_points",
    "sample_hit_levels",
    "sample_crossing_levels",
    "estimate_exceedance",
    "exceedance_profile",
    "count_histogram",
    "count_monotonicity_violations",
]

LINE_SLOPE = 0.25
MAX_HITS = 64


@dataclass(frozen=True)
class CriticalLine:
    """The affine boundary mu + t/4; the slope is fixed by the construction."""

    mu: float
    slope: float = LINE_SLOPE

    def __post_init__(self):
        if not (self.mu > 0):
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.slope != LINE_SLOPE:
            raise ValueError("the critical line slope is 1/4 exactly")

    def value(self, t: float) -> float:
        return self.mu + self.slope * t


class PhaseKind(Enum):
    MINUS = "minus"  # drift -a/4
    PLUS = "plus"  # drift (a+1)/4


@dataclass(frozen=True)
class CycleRecord:
    """Hitting times of one cycle; math.inf marks a phase cut off by the horizon.

    The residual bounds are upper estimates of the probability that the
    truncated phase would still have completed beyond the horizon (1.0 when
    the phase drift makes completion certain), 0.0 for phases that finished.
    """

    xi_minus: float
    xi_plus: float
    residual_bound_minus: float = 0.0
    residual_bound_plus: float = 0.0


@dataclass(frozen=True)
class DiffusionRun:
    a: float
    mu: float
    cycles: tuple[CycleRecord, ...]
    count: int  # completed-cycle estimate under the a-dependent rule
    completed_plus: int  # literal number of observed plus hits
    n_hits: int
    horizon: float


@dataclass(frozen=True)
class PointSample:
    """Decreasing point locations extracted from one driving path."""

    a: float
    points: np.ndarray
    tol_mu: float


@dataclass(frozen=True)
class SimOpts:
    """Discretization and detection options shared by all simulators.

    exact_reflection samples the within-step pushing from the bridge-maximum
    law; switching it off reproduces the plain one-sided Euler reflection,
    whose O(sqrt(dt)) downward bias is visible in distribution matching at
    the default dt.
    """

    dt: float = 1e-3
    horizon: float | None = None  # None -> max(100, 40*mu)
    exact_reflection: bool = True
    max_hits: int = MAX_HITS

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")


DEFAULT_OPTS = SimOpts()

ExceedanceEstimate = namedtuple(
    "ExceedanceEstimate", ["estimate", "stderr", "n_paths", "a", "mu", "k"]
)


def default_horizon(mu: float) -> float:
    return max(100.0, 40.0 * mu)


def grid_for(mu: float, opts: SimOpts = DEFAULT_OPTS) -> TimeGrid:
    horizon = opts.horizon if opts.horizon is not None else default_horizon(mu)
    return TimeGrid(0.0, opts.dt, int(math.ceil(horizon / opts.dt)))


def effective_count(n_hits: int, a: float) -> int:
    """Completed-cycle count from the raw number of alternating line hits."""
    return (n_hits + 1) // 2 if a >= 0 else n_hits // 2


def _validate(a: float, path: BrownianPath):
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    if path.grid.n_steps < 1:
        raise ValueError("degenerate grid: need at least one step")
    if path.grid.t_start != 0.0:
        raise ValueError("the construction starts at time 0")


def _phase_residual(delta: float, slope: float, gap_end: float, intercept_end: float):
    """Upper bound on the chance a truncated phase still hits after the horizon.

    Brownian-from-terminal-state plus fresh-reflected-restart decomposition;
    for drift >= slope the hit is certain and the bound is 1.
    """
    if delta >= slope:
        return 1.0
    rate = 2.0 * (slope - delta)
    val = math.exp(-rate * max(gap_end, 0.0)) + (2.0 - delta / slope) * math.exp(
        -rate * intercept_end
    )
    return min(1.0, val)


def run_r_mu(
    path: BrownianPath, a: float, line: CriticalLine, opts: SimOpts = DEFAULT_OPTS
) -> DiffusionRun:
    """Run one r_mu trajectory along `path` and record its cycle structure."""
    _validate(a, path)
    h = path.grid.dt
    hit_idx = np.empty(opts.max_hits, dtype=np.int64)
    n_hits, x_end, phase_end = _kernels.run_cycles(
        path.increments,
        h,
        0.0,
        a,
        line.mu,
        line.slope,
        np.uint64(path.thin_key),
        np.uint64(path.refl_key),
        opts.exact_reflection,
        hit_idx,
    )
    if n_hits > opts.max_hits:
        raise RuntimeError(
            f"hit record overflow ({n_hits} > {opts.max_hits}); raise SimOpts.max_hits"
        )
    horizon = path.grid.t_end
    times = hit_idx[:n_hits] * h
    c_end = line.value(horizon)
    gap_end = c_end - x_end
    delta_minus = -a / 4.0
    delta_plus = (a + 1.0) / 4.0

    cycles = []
    for i in range(0, n_hits - 1, 2):
        cycles.append(CycleRecord(xi_minus=times[i], xi_plus=times[i + 1]))
    if n_hits % 2 == 1:
        # horizon fell mid plus-phase
        res_p = _phase_residual(delta_plus, line.slope, gap_end, c_end)
        cycles.append(
            CycleRecord(
                xi_minus=times[-1],
                xi_plus=math.inf,
                residual_bound_plus=res_p,
            )
        )
    else:
        # horizon fell mid minus-phase; completing a further cycle would also
        # need the subsequent plus phase
        res_m = _phase_residual(delta_minus, line.slope, gap_end, c_end)
        res_p = res_m * _phase_residual(delta_plus, line.slope, c_end, c_end)
        cycles.append(
            CycleRecord(
                xi_minus=math.inf,
                xi_plus=math.inf,
                residual_bound_minus=res_m,
                residual_bound_plus=res_p,
            )
        )
    return DiffusionRun(
        a=a,
        mu=line.mu,
        cycles=tuple(cycles),
        count=effective_count(n_hits, a),
        completed_plus=n_hits // 2,
        n_hits=n_hits,
        horizon=horizon,
    )


def cycle_count_profile(
    path: BrownianPath, a: float, mu_grid, opts: SimOpts = DEFAULT_OPTS
) -> np.ndarray:
    """Counts of run_r_mu over an increasing mu grid, reusing the same path.

    The shared driving noise makes the returned sequence non-increasing,
    pathwise, with no exceptions.
    """
    _validate(a, path)
    mu_grid = np.asarray(mu_grid, dtype=float)
    if mu_grid.ndim != 1 or mu_grid.size == 0:
        raise ValueError("mu_grid must be a non-empty 1-d sequence")
    if np.any(mu_grid <= 0) or np.any(np.diff(mu_grid) <= 0):
        raise ValueError("mu_grid must be positive and strictly increasing")
    return _kernels.count_profile(
        path.increments,
        path.grid.dt,
        0.0,
        a,
        mu_grid,
        LINE_SLOPE,
        np.uint64(path.thin_key),
        np.uint64(path.refl_key),
        opts.exact_reflection,
        1 if a >= 0 else 0,
    )


def _count_at(path, a, mu, opts):
    hit_idx = np.empty(opts.max_hits, dtype=np.int64)
    n_hits, _, _ = _kernels.run_cycles(
        path.increments,
        path.grid.dt,
        0.0,
        a,
        mu,
        LINE_SLOPE,
        np.uint64(path.thin_key),
        np.uint64(path.refl_key),
        opts.exact_reflection,
        hit_idx,
    )
    return effective_count(n_hits, a)


def extract_points(
    path: BrownianPath,
    a: float,
    mu_min: float = 1e-3,
    tol_mu: float = 1e-3,
    opts: SimOpts = DEFAULT_OPTS,
) -> PointSample:
    """Locate the decreasing point levels mu(k) = sup{mu : count(mu) >= k}.

    For a >= 0 the first level is read directly off the never-reset minus
    phase (the running maximum of detected hit levels); deeper levels, whose
    reset times depend on mu, are located by bisection down to tol_mu.  The
    bracketing property count(p - tol) >= k > count(p + tol) holds on the
    same path by monotone coupling.
    """
    _validate(a, path)
    if not (mu_min > 0 and tol_mu > 0):
        raise ValueError("mu_min and tol_mu must be positive")
    m1 = _kernels.scan_hit_levels(
        path.increments,
        path.grid.dt,
        0.0,
        -a / 4.0,
        LINE_SLOPE,
        np.uint64(path.thin_key),
        np.uint64(path.refl_key),
        opts.exact_reflection,
    )
    points: list[float] = []
    if a >= 0:
        if m1 > mu_min:
            points.append(m1)
    else:
        p1 = _bisect_level(path, a, 1, mu_min, m1 + tol_mu, tol_mu, opts)
        if p1 is not None:
            points.append(p1)
    k = 2
    while points:
        hi = points[-1] + tol_mu
        p = _bisect_level(path, a, k, mu_min, hi, tol_mu, opts)
        if p is None:
            break
        points.append(p)
        k += 1
    return PointSample(a=a, points=np.asarray(points), tol_mu=tol_mu)


def _bisect_level(path, a, k, mu_min, hi, tol_mu, opts):
    """sup{mu : count(mu) >= k} within [mu_min, hi], or None if below mu_min."""
    if _count_at(path, a, mu_min, opts) < k:
        return None
    lo = mu_min
    while _count_at(path, a, hi, opts) >= k:
        lo = hi
        hi *= 2.0
    while hi - lo > tol_mu:
        mid = 0.5 * (lo + hi)
        if _count_at(path, a, mid, opts) >= k:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# replica-parallel batch estimators
# ---------------------------------------------------------------------------


def _replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    return RandomStream(master_seed, replica).generator()


def _levels_shard(lo, hi, master_seed, n_steps, dt, drift, slope, exact_refl):
    sqh = math.sqrt(dt)
    out = np.empty(hi - lo)
    for r in range(lo, hi):
        rng = _replica_rng(master_seed, r)
        dw = rng.standard_normal(n_steps) * sqh
        tk, rk = correction_keys(stream_noise_key(master_seed, r))
        out[r - lo] = _kernels.scan_hit_levels(
            dw, dt, 0.0, drift, slope, np.uint64(tk), np.uint64(rk), exact_refl
        )
    return out


def _hist_shard(lo, hi, master_seed, n_steps, dt, a, mu_tuple, exact_refl, a_rule, cap):
    sqh = math.sqrt(dt)
    mu_grid = np.asarray(mu_tuple, dtype=float)
    hist = np.zeros((mu_grid.size, cap + 1), dtype=np.int64)
    for r in range(lo, hi):
        rng = _replica_rng(master_seed, r)
        dw = rng.standard_normal(n_steps) * sqh
        tk, rk = correction_keys(stream_noise_key(master_seed, r))
        counts = _kernels.count_profile(
            dw,
            dt,
            0.0,
            a,
            mu_grid,
            LINE_SLOPE,
            np.uint64(tk),
            np.uint64(rk),
            exact_refl,
            a_rule,
        )
        for i in range(mu_grid.size):
            hist[i, min(counts[i], cap)] += 1
    return hist


def sample_crossing_levels(
    drift: float,
    slope: float,
    n_paths: int,
    seed: int,
    dt: float = 1e-3,
    horizon: float = 240.0,
    exact_reflection: bool = True,
    n_jobs: int | None = None,
) -> np.ndarray:
    """Detected sup of intercepts hit by a reflected BM with the given drift
    against the line mu + slope*t, one level per replica path.

    P(level > mu) estimates the probability that the reflected motion ever
    reaches mu + slope*t (within the horizon).
    """
    if not (slope > 0 and dt > 0 and horizon > 0):
        raise ValueError("slope, dt and horizon must be positive")
    n_steps = int(math.ceil(horizon / dt))
    shards = map_shards(
        _levels_shard,
        n_paths,
        (seed, n_steps, dt, drift, slope, exact_reflection),
        n_jobs=n_jobs,
    )
    return np.concatenate(shards) if shards else np.empty(0)


def sample_hit_levels(
    a: float,
    n_paths: int,
    seed: int,
    opts: SimOpts = DEFAULT_OPTS,
    horizon: float = 240.0,
    n_jobs: int | None = None,
) -> np.ndarray:
    """Largest-point samples mu(1) for a >= 0: the detected hit level of the
    first (never reset) minus phase, one sample per driving path."""
    if a < 0:
        raise ValueError("the first-phase level equals the largest point only for a >= 0")
    return sample_crossing_levels(
        -a / 4.0,
        LINE_SLOPE,
        n_paths,
        seed,
        dt=opts.dt,
        horizon=opts.horizon if opts.horizon is not None else horizon,
        exact_reflection=opts.exact_reflection,
        n_jobs=n_jobs,
    )


def exceedance_profile(
    a: float,
    mu_grid,
    n_paths: int,
    seed: int,
    opts: SimOpts = DEFAULT_OPTS,
    rule: str = "effective",
    n_jobs: int | None = None,
):
    """Histograms of the cycle count at every mu of a grid, sharing paths.

    Returns (mu_grid, hist) where hist[i, c] counts replicas whose run at
    mu_grid[i] produced count c (top bin aggregates the overflow).  Shared
    paths make the per-mu estimates coupled, which only tightens monotone
    comparisons across mu; each column is still an exact binomial sample.
    """
    mu_grid = np.asarray(mu_grid, dtype=float)
    if np.any(mu_grid <= 0) or np.any(np.diff(mu_grid) <= 0):
        raise ValueError("mu_grid must be positive and strictly increasing")
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    if rule not in ("effective", "nu"):
        raise ValueError(f"unknown counting rule {rule!r}")
    a_rule = (1 if a >= 0 else 0) if rule == "effective" else 0
    horizon = opts.horizon if opts.horizon is not None else default_horizon(mu_grid[-1])
    n_steps = int(math.ceil(horizon / opts.dt))
    cap = opts.max_hits // 2
    shards = map_shards(
        _hist_shard,
        n_paths,
        (seed, n_steps, opts.dt, a, tuple(mu_grid), opts.exact_reflection, a_rule, cap),
        n_jobs=n_jobs,
    )
    hist = np.zeros((mu_grid.size, cap + 1), dtype=np.int64)
    for s in shards:
        hist += s
    return mu_grid, hist


def _violations_shard(lo, hi, master_seed, n_steps, dt, a, mu_tuple, exact_refl, a_rule):
    sqh = math.sqrt(dt)
    mu_grid = np.asarray(mu_tuple, dtype=float)
    viol = 0
    for r in range(lo, hi):
        rng = _replica_rng(master_seed, r)
        dw = rng.standard_normal(n_steps) * sqh
        tk, rk = correction_keys(stream_noise_key(master_seed, r))
        counts = _kernels.count_profile(
            dw,
            dt,
            0.0,
            a,
            mu_grid,
            LINE_SLOPE,
            np.uint64(tk),
            np.uint64(rk),
            exact_refl,
            a_rule,
        )
        if np.any(np.diff(counts) > 0):
            viol += 1
    return viol


def count_monotonicity_violations(
    a: float,
    mu_grid,
    n_paths: int,
    seed: int = 0,
    opts: SimOpts = DEFAULT_OPTS,
    n_jobs: int | None = None,
) -> int:
    """Number of paths whose count profile over mu_grid ever increases.

    The shared-noise coupling makes this zero by construction; the function
    exists to verify that claim at scale.
    """
    mu_grid = np.asarray(mu_grid, dtype=float)
    horizon = opts.horizon if opts.horizon is not None else default_horizon(mu_grid[-1])
    n_steps = int(math.ceil(horizon / opts.dt))
    shards = map_shards(
        _violations_shard,
        n_paths,
        (seed, n_steps, opts.dt, a, tuple(mu_grid), opts.exact_reflection, 1 if a >= 0 else 0),
        n_jobs=n_jobs,
    )
    return int(sum(shards))


def count_histogram(
    a: float,
    mu: float,
    n_runs: int,
    seed: int,
    opts: SimOpts = DEFAULT_OPTS,
    rule: str = "effective",
    n_jobs: int | None = None,
) -> np.ndarray:
    """Histogram of the cycle count at a single mu over n_runs paths."""
    _, hist = exceedance_profile(a, [mu], n_runs, seed, opts, rule=rule, n_jobs=n_jobs)
    return hist[0]


def estimate_exceedance(
    a: float,
    mu: float,
    k: int,
    n_paths: int,
    seed: int = 0,
    opts: SimOpts = DEFAULT_OPTS,
    n_jobs: int | None = None,
) -> ExceedanceEstimate:
    """Monte Carlo estimate of P(at least k points above mu) with its
    binomial standard error; deterministic under a fixed master seed."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n_paths < 100:
        raise ValueError(f"need n_paths >= 100, got {n_paths}")
    if not (mu > 0):
        raise ValueError(f"mu must be positive, got {mu}")
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    horizon = opts.horizon if opts.horizon is not None else default_horizon(mu)
    if k == 1 and a >= 0:
        levels = sample_hit_levels(
            a, n_paths, seed, opts=replace(opts, horizon=horizon), n_jobs=n_jobs
        )
        n_hit = int(np.sum(levels > mu))
    else:
        hist = count_histogram(
            a, mu, n_paths, seed, opts=replace(opts, horizon=horizon), n_jobs=n_jobs
        )
        n_hit = int(hist[k:].sum())
    p = n_hit / n_paths
    stderr = math.sqrt(p * (1.0 - p) / n_paths)
    return ExceedanceEstimate(p, stderr, n_paths, a, mu, k)
