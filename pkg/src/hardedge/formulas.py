"""Closed-form series for the hard-edge limit point process.

Covers the hitting-probability series of a reflected Brownian motion against
an affine line, the density/tail of the largest point, the Laplace transform
of the exponential-gap construction, large-deviation rate functions, and the
exact cost recursion for multiple line hits with its closed forms.

Every truncated alternating series reports an error bound equal to the first
omitted term, valid once the terms decrease in magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "SeriesAccuracy",
    "SeriesValue",
    "SeriesTruncationError",
    "tail_prob_a0",
    "largest_density",
    "largest_tail",
    "conjectured_hit_prob",
    "laplace_hat_mu1",
    "laplace_a0_closed",
    "RateParams",
    "rate_function",
    "cost_sequence",
    "closed_cost",
    "exceedance_exponent",
    "MINUS_TERMINAL",
    "PLUS_TERMINAL",
]

MINUS_TERMINAL = "minus_terminal"
PLUS_TERMINAL = "plus_terminal"


class SeriesTruncationError(RuntimeError):
    """Raised when a series fails to meet abs_tol within max_terms."""


@dataclass(frozen=True)
class SeriesAccuracy:
    """Truncation policy: stop when the next term drops below abs_tol."""

    abs_tol: float = 1e-12
    max_terms: int = 10**5

    def __post_init__(self):
        if not (self.abs_tol > 0) or self.max_terms < 1:
            raise ValueError("need abs_tol > 0 and max_terms >= 1")


DEFAULT_ACCURACY = SeriesAccuracy()


@dataclass(frozen=True)
class SeriesValue:
    """A truncated series value with its remainder bound.

    `conjecture` marks values coming from an unproven formula; downstream
    comparisons must treat those as hypotheses, never as ground truth.
    """

    value: float
    error_bound: float
    terms_used: int
    conjecture: bool = False

    def __float__(self) -> float:
        return self.value


def _alternating_sum(term_magnitude, acc: SeriesAccuracy, start: int = 1):
    """Sum sum_j (-1)^(j-1) m_j for m_j = term_magnitude(j) >= 0.

    Stops at the first j whose term is below abs_tol *and* no larger than its
    predecessor (so the alternating remainder bound applies); that omitted
    term is the returned bound.
    """
    total = 0.0
    prev = math.inf
    sign = 1.0
    j = start
    for _ in range(acc.max_terms):
        m = term_magnitude(j)
        if j > start and m < acc.abs_tol and m <= prev:
            return total, m, j - start
        total += sign * m
        sign = -sign
        prev = m
        j += 1
    raise SeriesTruncationError(
        f"series did not reach abs_tol={acc.abs_tol} within {acc.max_terms} terms"
    )


def _clamp_prob(v: float) -> float:
    return min(1.0, max(0.0, v))


def tail_prob_a0(mu: float, acc: SeriesAccuracy = DEFAULT_ACCURACY) -> SeriesValue:
    """P(a reflected driftless Brownian motion ever reaches mu + t/4).

    Evaluates 2 * sum_{k>=1} (-1)^(k-1) exp(-mu k^2 / 2).  Also the tail
    probability of the largest point of the limit process at a = 0.
    """
    if not (mu > 0):
        raise ValueError(f"mu must be positive (limit at 0+ is 1), got {mu}")
    val, bound, terms = _alternating_sum(
        lambda k: 2.0 * math.exp(-0.5 * mu * k * k), acc
    )
    return SeriesValue(_clamp_prob(val), bound, terms)


def _gen_binom(x: float, j: int) -> float:
    """Generalized binomial coefficient C(x, j) for real x, integer j >= 0."""
    if j == 0:
        return 1.0
    sign = special.gammasgn(x + 1) * special.gammasgn(x - j + 1)
    logv = special.gammaln(x + 1) - special.gammaln(j + 1) - special.gammaln(x - j + 1)
    return float(sign * np.exp(logv))


def largest_density(
    a: float, x: float, acc: SeriesAccuracy = DEFAULT_ACCURACY
) -> SeriesValue:
    """Density of the largest point of the limit process for a >= 0.

    sum_{j>=1} (-1)^(j-1) * (j(2j+a)/2) * C(j+a, j) * exp(-j(j+a)x/2).
    """
    if a < 0:
        raise ValueError(f"density requires a >= 0, got {a}")
    if not (x > 0):
        raise ValueError(f"x must be positive, got {x}")

    def mag(j):
        return 0.5 * j * (2 * j + a) * _gen_binom(j + a, j) * math.exp(
            -0.5 * j * (j + a) * x
        )

    val, bound, terms = _alternating_sum(mag, acc)
    return SeriesValue(max(val, 0.0), bound, terms)


def largest_tail(
    a: float, mu: float, acc: SeriesAccuracy = DEFAULT_ACCURACY
) -> SeriesValue:
    """Tail P(largest point >= mu) for a >= 0, term-by-term integral of the density.

    sum_{j>=1} (-1)^(j-1) * ((2j+a)/(j+a)) * C(j+a, j) * exp(-j(j+a)mu/2).
    Coincides termwise with tail_prob_a0 at a = 0.
    """
    if a < 0:
        raise ValueError(f"tail requires a >= 0, got {a}")
    if not (mu > 0):
        raise ValueError(f"mu must be positive, got {mu}")

    def mag(j):
        return ((2 * j + a) / (j + a)) * _gen_binom(j + a, j) * math.exp(
            -0.5 * j * (j + a) * mu
        )

    val, bound, terms = _alternating_sum(mag, acc)
    return SeriesValue(_clamp_prob(val), bound, terms)


def conjectured_hit_prob(
    a: float, b: float, mu: float, acc: SeriesAccuracy = DEFAULT_ACCURACY
) -> SeriesValue:
    """CONJECTURE: P(a reflected BM with drift -a ever reaches mu + b t).

    sum_{j>=1} (-1)^(j-1) [C(j+a/b, j) + C(j+a/b-1, j-1)] exp(-2 mu j (jb+a)).
    The result carries conjecture=True; it is an unproven formula kept as a
    testable hypothesis and must never be used as a reference value.
    At a = 0, b = 1/4 it reduces termwise to tail_prob_a0.
    """
    if a < 0:
        raise ValueError(f"requires a >= 0, got {a}")
    if not (b > 0) or not (mu > 0):
        raise ValueError(f"need b > 0 and mu > 0, got b={b}, mu={mu}")
    r = a / b

    def mag(j):
        return (_gen_binom(j + r, j) + _gen_binom(j + r - 1, j - 1)) * math.exp(
            -2.0 * mu * j * (j * b + a)
        )

    val, bound, terms = _alternating_sum(mag, acc)
    return SeriesValue(_clamp_prob(val), bound, terms, conjecture=True)


def laplace_a0_closed(theta: float) -> float:
    """Closed form of the a = 0 Laplace transform: pi sqrt(2 theta) / sinh(pi sqrt(2 theta))."""
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    if theta == 0:
        return 1.0
    z = math.pi * math.sqrt(2.0 * theta)
    return z / math.sinh(z)


def laplace_hat_mu1(
    a: float, theta: float, acc: SeriesAccuracy = DEFAULT_ACCURACY
) -> SeriesValue:
    """Laplace transform E[exp(-theta * largest point)] of the gap construction.

    Infinite product prod_{j>=1} 1/(1 + 2 theta / (j(j+a))), accumulated in
    log space with a first-order analytic tail for the truncated factors.
    """
    if a < 0:
        raise ValueError(f"requires a >= 0, got {a}")
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    if theta == 0.0:
        return SeriesValue(1.0, 0.0, 0)
    # accumulate factors until the error of first-order tail compensation,
    # sum_{j>J} (log1p(e_j) - e_j) with |.| <= e_j^2/2 <= (2 theta)^2/(6 J^3),
    # drops below abs_tol (the factors themselves decay only like 1/j^2)
    log_sum = 0.0
    J = 0
    for j in range(1, acc.max_terms + 1):
        eps = 2.0 * theta / (j * (j + a))
        log_sum += math.log1p(eps)
        J = j
        if eps < 0.25 and (2.0 * theta) ** 2 / (6.0 * j**3) < acc.abs_tol:
            break
    else:
        raise SeriesTruncationError(
            f"product did not converge within {acc.max_terms} factors"
        )
    # exact first-order tail: sum_{j>J} e_j via digamma/trigamma closed forms
    if a == 0:
        inv_tail = float(special.polygamma(1, J + 1))
    else:
        inv_tail = float((special.digamma(J + 1 + a) - special.digamma(J + 1)) / a)
    log_sum += 2.0 * theta * inv_tail
    second_order = (2.0 * theta) ** 2 / (6.0 * J**3)
    value = math.exp(-log_sum)
    bound = value * (second_order + acc.abs_tol)
    return SeriesValue(value, bound, J)


@dataclass(frozen=True)
class RateParams:
    """Large-deviation parameters of one phase.

    Phase 1 carries drift a1 = -a/4, phase 2 drift a2 = (a+1)/4; the optimal
    relative hitting time is t_star = 1/|a_i - 1/4| (infinite in the marginal
    case a_i = 1/4).
    """

    a: float
    phase_index: int

    def __post_init__(self):
        if self.a <= -1:
            raise ValueError(f"requires a > -1, got {self.a}")
        if self.phase_index not in (1, 2):
            raise ValueError(f"phase_index must be 1 or 2, got {self.phase_index}")

    @property
    def a_i(self) -> float:
        return -self.a / 4.0 if self.phase_index == 1 else (self.a + 1.0) / 4.0

    @property
    def t_star(self) -> float:
        gap = abs(self.a_i - 0.25)
        return math.inf if gap == 0.0 else 1.0 / gap


def rate_function(params: RateParams, t: float) -> float:
    """Cost per unit intercept of hitting the line in relative time t:
    I_i(t) = (1 + (1/4 - a_i) t)^2 / (2t)."""
    if not (t > 0):
        raise ValueError(f"t must be positive, got {t}")
    u = 1.0 + (0.25 - params.a_i) * t
    return u * u / (2.0 * t)


def _phase_drift_param(a: float, n: int, parity: str) -> float:
    minus_odd = parity == MINUS_TERMINAL
    if (n % 2 == 1) == minus_odd:
        return -a / 4.0
    return (a + 1.0) / 4.0


def cost_sequence(a: float, n_max: int, parity: str = MINUS_TERMINAL) -> np.ndarray:
    """Cumulative optimal exponents C_0..C_n for n consecutive line hits.

    C_0 = 0 and C_n = (1/4 - a_n) + C_{n-1} + sqrt((1/4 - a_n)^2 + C_{n-1}/2),
    where a_n alternates between -a/4 and (a+1)/4.  With minus_terminal the
    last (n-th counted) phase has drift -a/4; plus_terminal shifts the parity
    so the sequence ends on the (a+1)/4 phase.
    """
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if parity not in (MINUS_TERMINAL, PLUS_TERMINAL):
        raise ValueError(f"unknown parity {parity!r}")
    out = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        g = 0.25 - _phase_drift_param(a, n, parity)
        prev = out[n - 1]
        out[n] = g + prev + math.sqrt(g * g + 0.5 * prev)
    return out


def closed_cost(a: float, n: int, parity: str = MINUS_TERMINAL) -> float:
    """Exact closed form of the cost C_n.

    minus_terminal: C_{2k-1} = k(a+k)/2 and C_{2k} = k(a+k+1)/2.
    plus_terminal:  C_{2k}   = k(k+|a|)/2 (even indices only).
    """
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return 0.0
    if parity == MINUS_TERMINAL:
        if n % 2 == 1:
            k = (n + 1) // 2
            return 0.5 * k * (a + k)
        k = n // 2
        return 0.5 * k * (a + k + 1)
    if parity == PLUS_TERMINAL:
        if n % 2 == 1:
            raise ValueError(
                "no closed form is available for odd indices of the "
                "plus-terminal cost sequence; use cost_sequence"
            )
        k = n // 2
        return 0.5 * k * (k + abs(a))
    raise ValueError(f"unknown parity {parity!r}")


def exceedance_exponent(a: float, k: int) -> float:
    """Decay exponent of P(at least k points above mu) as mu grows: k(|a|+k)/2."""
    if a <= -1:
        raise ValueError(f"requires a > -1, got {a}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 0.5 * k * (abs(a) + k)
