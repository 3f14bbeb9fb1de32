"""Empirical distributions, KS distances, tail regression, Poisson diagnostics."""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EmpiricalCDF",
    "ks_distance",
    "tail_slope",
    "SlopeFit",
    "poisson_ratio_from_counts",
    "poisson_ratio",
    "PoissonRatio",
]


@dataclass(frozen=True)
class EmpiricalCDF:
    sorted_samples: np.ndarray
    n: int

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalCDF":
        s = np.sort(np.asarray(samples, dtype=float))
        if s.size == 0:
            raise ValueError("empty sample")
        return cls(sorted_samples=s, n=s.size)

    def __call__(self, x):
        return np.searchsorted(self.sorted_samples, x, side="right") / self.n


def ks_distance(A: EmpiricalCDF, F) -> float:
    """Sup-norm distance between an eCDF and either a cdf function or a
    second eCDF (two-sample variant, symmetric)."""
    if isinstance(F, EmpiricalCDF):
        grid = np.concatenate([A.sorted_samples, F.sorted_samples])
        return float(np.max(np.abs(A(grid) - F(grid))))
    x = A.sorted_samples
    fx = np.asarray(F(x), dtype=float)
    i = np.arange(1, A.n + 1)
    d_plus = np.max(i / A.n - fx)
    d_minus = np.max(fx - (i - 1) / A.n)
    return float(max(d_plus, d_minus, 0.0))


SlopeFit = namedtuple("SlopeFit", ["slope", "stderr", "intercept"])


def tail_slope(mu_values, log_probs, weights) -> SlopeFit:
    """Weighted least-squares slope of log-probability against mu.

    Weights should be inverse variances of the log-probabilities (for
    binomial estimates, n*p/(1-p) by the delta method); the reported stderr
    is the usual WLS standard error under that reading.
    """
    x = np.asarray(mu_values, dtype=float)
    y = np.asarray(log_probs, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 points for a slope")
    if np.any(np.diff(x) <= 0):
        raise ValueError("mu_values must be strictly increasing")
    if not np.all(np.isfinite(y)):
        raise ValueError(
            "non-finite log-probability (a zero-probability entry?): "
            "increase n_paths until every point has hits"
        )
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    sw = np.sum(w)
    xbar = np.sum(w * x) / sw
    ybar = np.sum(w * y) / sw
    sxx = np.sum(w * (x - xbar) ** 2)
    if sxx <= 0:
        raise ValueError("degenerate abscissae")
    slope = np.sum(w * (x - xbar) * (y - ybar)) / sxx
    stderr = math.sqrt(1.0 / sxx)
    intercept = ybar - slope * xbar
    return SlopeFit(float(slope), float(stderr), float(intercept))


PoissonRatio = namedtuple(
    "PoissonRatio", ["ratio", "stderr", "p1", "p2", "n_paths", "is_upper_bound"]
)


def poisson_ratio_from_counts(n1: int, n2: int, n: int) -> PoissonRatio:
    """Plug-in P(>=2)/P(>=1)^2 with a delta-method error.

    The two indicator events are nested, so cov(p1_hat, p2_hat) = p2(1-p1)/n.
    With a zero numerator the rule-of-three upper bound 3/n replaces p2 and
    the result is flagged as an upper confidence bound.
    """
    if not (0 <= n2 <= n1 <= n):
        raise ValueError("need 0 <= n2 <= n1 <= n")
    if n1 == 0:
        raise ValueError("no exceedance events at all; increase n_paths")
    p1 = n1 / n
    if n2 == 0:
        p2_ub = 3.0 / n
        return PoissonRatio(p2_ub / p1**2, math.nan, p1, 0.0, n, True)
    p2 = n2 / n
    ratio = p2 / p1**2
    g1 = -2.0 * p2 / p1**3
    g2 = 1.0 / p1**2
    var = (
        g1 * g1 * p1 * (1 - p1) + g2 * g2 * p2 * (1 - p2) + 2 * g1 * g2 * p2 * (1 - p1)
    ) / n
    return PoissonRatio(ratio, math.sqrt(max(var, 0.0)), p1, p2, n, False)


def poisson_ratio(
    a: float,
    mu: float,
    n_paths: int,
    seed: int = 0,
    opts=None,
    n_jobs: int | None = None,
) -> PoissonRatio:
    """Monte Carlo P(>=2)/P(>=1)^2 for the limit point process at level mu.

    A Poisson point process would give 1/2 in the large-mu limit; the
    interaction with the hard edge drives this ratio to 0 instead.
    """
    from .diffusion import DEFAULT_OPTS, count_histogram

    hist = count_histogram(
        a, mu, n_paths, seed, opts=opts or DEFAULT_OPTS, n_jobs=n_jobs
    )
    n1 = int(hist[1:].sum())
    n2 = int(hist[2:].sum())
    return poisson_ratio_from_counts(n1, n2, n_paths)
