import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from hardedge.formulas import (
    MINUS_TERMINAL,
    PLUS_TERMINAL,
    RateParams,
    SeriesAccuracy,
    SeriesTruncationError,
    closed_cost,
    conjectured_hit_prob,
    cost_sequence,
    exceedance_exponent,
    laplace_a0_closed,
    laplace_hat_mu1,
    largest_density,
    largest_tail,
    rate_function,
    tail_prob_a0,
)

mpmath.mp.dps = 40


def mp_tail_a0(mu):
    return float(2 * mpmath.nsum(lambda k: (-1) ** (k - 1) * mpmath.exp(-mu * k**2 / 2), [1, mpmath.inf]))


def mp_largest_tail(a, mu):
    def term(j):
        return (
            (-1) ** (j - 1)
            * (2 * j + a)
            / (j + a)
            * mpmath.binomial(j + a, j)
            * mpmath.exp(-j * (j + a) * mu / 2)
        )

    return float(mpmath.nsum(term, [1, mpmath.inf]))


def mp_largest_density(a, x):
    def term(j):
        return (
            (-1) ** (j - 1)
            * j
            * (2 * j + a)
            / 2
            * mpmath.binomial(j + a, j)
            * mpmath.exp(-j * (j + a) * x / 2)
        )

    return float(mpmath.nsum(term, [1, mpmath.inf]))


class TestTailA0:
    def test_domain(self):
        with pytest.raises(ValueError):
            tail_prob_a0(0.0)

    @pytest.mark.parametrize("mu", [0.1, 0.5, 1.0, 2.0, 5.0])
    def test_against_mpmath(self, mu):
        tight = SeriesAccuracy(abs_tol=1e-15)
        assert tail_prob_a0(mu, tight).value == pytest.approx(mp_tail_a0(mu), abs=1e-13)

    def test_frozen_values(self):
        assert tail_prob_a0(1.0).value == pytest.approx(0.963945, abs=1e-6)
        assert tail_prob_a0(2.0).value == pytest.approx(0.699374, abs=1e-6)

    def test_large_mu_leading_term(self):
        v = tail_prob_a0(20.0).value
        assert v == pytest.approx(2 * math.exp(-10.0), rel=1e-4)
        assert v == pytest.approx(9.0800e-5, rel=1e-3)

    def test_small_mu_limit(self):
        assert tail_prob_a0(1e-5).value == pytest.approx(1.0, abs=1e-4)

    def test_error_bound_brackets_refinement(self):
        coarse = tail_prob_a0(0.8, SeriesAccuracy(abs_tol=1e-4, max_terms=10**5))
        fine = tail_prob_a0(0.8, SeriesAccuracy(abs_tol=1e-15, max_terms=2 * 10**5))
        assert abs(fine.value - coarse.value) <= coarse.error_bound

    def test_truncation_error(self):
        with pytest.raises(SeriesTruncationError):
            tail_prob_a0(1e-6, SeriesAccuracy(abs_tol=1e-12, max_terms=10))


class TestLargestDensityAndTail:
    def test_a0_density_reduces(self):
        for x in (0.5, 1.0, 2.0):
            direct = sum(
                (-1) ** (k - 1) * k * k * math.exp(-k * k * x / 2) for k in range(1, 60)
            )
            assert largest_density(0.0, x).value == pytest.approx(direct, abs=1e-12)

    @pytest.mark.parametrize("a", [0.0, 1.0, 3.0, 0.7])
    def test_density_against_mpmath(self, a):
        for x in (0.3, 1.0, 2.5):
            assert largest_density(a, x, SeriesAccuracy(abs_tol=1e-15)).value == pytest.approx(
                mp_largest_density(a, x), abs=1e-11
            )

    @pytest.mark.parametrize("a", [0.0, 1.0, 3.0])
    def test_normalization(self, a):
        cut = 12.0
        body, err = integrate.quad(
            lambda x: largest_density(a, x).value, 0.0, cut, limit=200
        )
        total = body + largest_tail(a, cut).value
        assert abs(total - 1.0) < 1e-6

    def test_a0_tail_coincides(self):
        for mu in (0.5, 1.0, 2.0):
            assert largest_tail(0.0, mu).value == pytest.approx(
                tail_prob_a0(mu).value, abs=1e-14
            )

    def test_tail_against_mpmath(self):
        for a in (0.0, 1.0, 3.0):
            for mu in (0.5, 1.0, 2.0):
                assert largest_tail(a, mu, SeriesAccuracy(abs_tol=1e-15)).value == pytest.approx(
                    mp_largest_tail(a, mu), abs=1e-12
                )

    def test_tail_asymptote(self):
        a = 1.0
        mu = 30.0
        lead = (2 + a) * math.exp(-(1 + a) * mu / 2)
        assert largest_tail(a, mu).value == pytest.approx(lead, rel=1e-4)

    def test_tail_density_duality(self):
        h = 1e-4
        for a in (0.0, 1.0, 3.0):
            for mu in (0.5, 1.0, 2.0):
                acc = SeriesAccuracy(abs_tol=1e-15)
                num = (
                    largest_tail(a, mu - h, acc).value - largest_tail(a, mu + h, acc).value
                ) / (2 * h)
                den = largest_density(a, mu, acc).value
                assert num == pytest.approx(den, rel=1e-6)

    def test_exponent_asymptote(self):
        # the prefactor 2 shifts the finite-mu rate by ln(2)/mu, i.e. 3.5%
        # relative at mu=40, so 2% is only reachable beyond mu ~ 70
        rate40 = -math.log(tail_prob_a0(40.0).value) / 40.0
        assert abs(rate40 - 0.5) / 0.5 < 0.04
        rate80 = -math.log(tail_prob_a0(80.0).value) / 80.0
        assert abs(rate80 - 0.5) / 0.5 < 0.02


class TestConjecture:
    def test_reduction_to_a0(self):
        for mu in (0.5, 1.0, 2.0):
            c = conjectured_hit_prob(0.0, 0.25, mu)
            assert c.value == pytest.approx(tail_prob_a0(mu).value, abs=1e-12)
            assert c.conjecture is True

    def test_flagged(self):
        assert conjectured_hit_prob(1.0, 0.25, 1.0).conjecture is True
        assert tail_prob_a0(1.0).conjecture is False

    def test_small_mu_approaches_one(self):
        vals = [conjectured_hit_prob(1.0, 0.25, mu).value for mu in (0.5, 0.2, 0.05)]
        assert vals[0] < vals[1] < vals[2] <= 1.0
        assert vals[2] > 0.99

    def test_against_mpmath(self):
        a, b, mu = 1.0, 0.25, 1.0

        def term(j):
            r = a / b
            return (
                (-1) ** (j - 1)
                * (mpmath.binomial(j + r, j) + mpmath.binomial(j + r - 1, j - 1))
                * mpmath.exp(-2 * mu * j * (j * b + a))
            )

        ref = float(mpmath.nsum(term, [1, mpmath.inf]))
        tight = SeriesAccuracy(abs_tol=1e-15)
        assert conjectured_hit_prob(a, b, mu, tight).value == pytest.approx(ref, abs=1e-13)


class TestLaplace:
    def test_theta_zero(self):
        assert laplace_hat_mu1(1.0, 0.0).value == 1.0

    def test_a0_closed_form_value(self):
        assert laplace_a0_closed(0.5) == pytest.approx(math.pi / math.sinh(math.pi), rel=1e-15)
        assert laplace_a0_closed(0.5) == pytest.approx(0.272029, abs=1e-6)

    @pytest.mark.parametrize("theta", [0.1, 0.5, 2.0])
    def test_product_matches_closed_form(self, theta):
        v = laplace_hat_mu1(0.0, theta)
        assert v.value == pytest.approx(laplace_a0_closed(theta), rel=1e-8)
        # the plain product truncated at 1e5 factors is itself 1e-5 close
        prod = float(
            np.exp(-np.sum(np.log1p(2 * theta / (np.arange(1.0, 1e5 + 1) ** 2))))
        )
        assert abs(prod - laplace_a0_closed(theta)) < 1e-5

    def test_general_a_against_mpmath(self):
        a, theta = 1.5, 0.7
        ref = float(
            mpmath.nprod(lambda j: 1 / (1 + 2 * theta / (j * (j + a))), [1, mpmath.inf])
        )
        assert laplace_hat_mu1(a, theta).value == pytest.approx(ref, rel=1e-9)


class TestRates:
    def test_params(self):
        p1 = RateParams(1.0, 1)
        p2 = RateParams(1.0, 2)
        assert p1.a_i == -0.25 and p2.a_i == 0.5
        assert p1.a_i + p2.a_i == pytest.approx(0.25)
        assert p1.t_star == pytest.approx(1 / abs(-0.25 - 0.25))
        assert RateParams(0.0, 2).t_star == math.inf

    def test_minimum_value(self):
        for a in (0.0, 1.0, 2.5):
            p = RateParams(a, 1)
            assert rate_function(p, p.t_star) == pytest.approx(2 * (0.25 - p.a_i))
            assert rate_function(p, p.t_star) == pytest.approx((1 + a) / 2)

    def test_free_phase_zero_cost(self):
        p = RateParams(1.0, 2)  # drift 1/2 > 1/4
        assert rate_function(p, p.t_star) == pytest.approx(0.0, abs=1e-15)
        assert p.t_star == pytest.approx(4.0 / 1.0)

    def test_convexity(self):
        t = np.linspace(0.05, 12.0, 400)
        for a in (-0.5, 0.0, 1.0):
            for i in (1, 2):
                p = RateParams(a, i)
                v = np.array([rate_function(p, tt) for tt in t])
                assert np.all(np.diff(v, 2) > -1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            rate_function(RateParams(0.0, 1), 0.0)


class TestCosts:
    def test_c1(self):
        for a in (-0.5, 0.0, 1.0, 2.5):
            assert cost_sequence(a, 1)[1] == pytest.approx((a + 1) / 2)
        assert cost_sequence(1.0, 1)[1] == pytest.approx(1.0)

    def test_c3_a0(self):
        assert cost_sequence(0.0, 3)[3] == pytest.approx(2.0)
        assert closed_cost(0.0, 3) == 2.0

    def test_plus_parity_example(self):
        assert closed_cost(-0.5, 2, PLUS_TERMINAL) == pytest.approx(0.75)
        assert cost_sequence(-0.5, 2, PLUS_TERMINAL)[2] == pytest.approx(0.75)

    @pytest.mark.parametrize("a", [-0.5, 0.0, 1.0, 2.5])
    def test_recursion_vs_closed_minus(self, a):
        seq = cost_sequence(a, 40, MINUS_TERMINAL)
        for n in range(1, 41):
            assert abs(seq[n] - closed_cost(a, n, MINUS_TERMINAL)) < 1e-10

    @pytest.mark.parametrize("a", [-0.5, 0.0, 1.0, 2.5])
    def test_recursion_vs_closed_plus_even(self, a):
        seq = cost_sequence(a, 40, PLUS_TERMINAL)
        for n in range(2, 41, 2):
            assert abs(seq[n] - closed_cost(a, n, PLUS_TERMINAL)) < 1e-10

    def test_plus_odd_has_no_closed_form(self):
        with pytest.raises(ValueError):
            closed_cost(1.0, 3, PLUS_TERMINAL)

    def test_exponent(self):
        assert exceedance_exponent(0.0, 1) == 0.5
        assert exceedance_exponent(1.0, 2) == 3.0
        assert exceedance_exponent(-0.5, 2) == pytest.approx(2.5)
        # matches the odd minus-terminal cost for a >= 0
        for a in (0.0, 1.0):
            for k in (1, 2, 3):
                assert exceedance_exponent(a, k) == closed_cost(a, 2 * k - 1)
