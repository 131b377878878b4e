import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from meandev import DomainError, Empirical, Exponential, Pareto, Uniform, UnboundedError


class TestSurvival:
    def test_uniform_value(self):
        assert Uniform(0, 10).survival(4.0) == pytest.approx(0.6)

    def test_exponential_at_zero(self):
        assert Exponential(0.1).survival(0.0) == 1.0

    def test_pareto_tail_one(self):
        # heavy tail is allowed for survival evaluation even without a mean
        assert Pareto(1.0, 1.0).survival(1.0) == pytest.approx(0.5)

    def test_negative_argument_rejected(self):
        with pytest.raises(DomainError):
            Uniform(0, 10).survival(-0.5)

    @pytest.mark.parametrize("x", [0.0, 1.0, 5.0, 20.0])
    def test_bounds_and_monotonicity(self, analytic_kinds, x):
        for X in analytic_kinds:
            s = X.survival(x)
            assert 0.0 <= s <= 1.0
            assert X.survival(x + 1.0) <= s + 1e-15


class TestQuantile:
    def test_uniform(self):
        assert Uniform(0, 10).quantile(0.9) == pytest.approx(9.0)

    def test_exponential_closed_form_vs_bisection(self):
        X = Exponential(0.1)
        got = X.quantile(0.5)
        assert got == pytest.approx(6.931471805599453, abs=1e-12)
        # independent oracle: bisection on the survival function
        lo, hi = 0.0, 200.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if X.survival(mid) > 0.5:
                lo = mid
            else:
                hi = mid
        assert got == pytest.approx(0.5 * (lo + hi), abs=1e-9)

    def test_empirical_order_statistic(self):
        assert Empirical((1.0, 2.0, 3.0)).quantile(0.5) == 2.0

    def test_p_one_finite_support(self):
        assert Uniform(0, 10).quantile(1.0) == 10.0
        assert Empirical((1.0, 2.0, 3.0)).quantile(1.0) == 3.0

    def test_p_one_unbounded_raises(self):
        with pytest.raises(UnboundedError):
            Exponential(1.0).quantile(1.0)

    @pytest.mark.parametrize("p", [-0.1, 0.0, 1.5])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            Uniform(0, 10).quantile(p)

    def test_round_trip_200_points(self, analytic_kinds, rng):
        for X in analytic_kinds:
            for p in rng.uniform(0.001, 0.999, size=200):
                x = X.quantile(float(p))
                assert X.survival(x) == pytest.approx(1.0 - p, abs=1e-7)

    @settings(max_examples=60, deadline=None)
    @given(p=st.floats(0.001, 0.999))
    def test_round_trip_property(self, p):
        for X in (Uniform(0, 10), Exponential(0.25), Pareto(2.5, 1.5)):
            assert X.survival(X.quantile(p)) == pytest.approx(1.0 - p, abs=1e-9)


class TestMean:
    def test_closed_forms(self):
        assert Uniform(0, 8).mean() == 4.0
        assert Exponential(0.1).mean() == pytest.approx(10.0)
        assert Empirical((1.0, 2.0, 3.0)).mean() == 2.0
        assert Pareto(3.0, 2.0).mean() == pytest.approx(1.0)

    def test_pareto_infinite_mean_raises(self):
        with pytest.raises(DomainError):
            Pareto(1.0, 1.0).mean()

    def test_mean_is_integral_of_survival(self, analytic_kinds):
        for X in analytic_kinds:
            val, _ = quad(X.survival, 0.0, X.upper_limit(), limit=200)
            assert X.mean() == pytest.approx(val, rel=1e-8)


class TestStopLoss:
    def test_exponential_at_zero_is_mean(self):
        assert Exponential(0.1).stop_loss(0.0) == pytest.approx(10.0)

    def test_uniform_at_support_end(self):
        assert Uniform(0, 10).stop_loss(10.0) == 0.0

    def test_uniform_interior(self):
        # oracle: quadrature of the survival function over [5, 10]
        X = Uniform(0, 10)
        val, _ = quad(X.survival, 5.0, 10.0)
        assert val == pytest.approx(1.25, abs=1e-10)
        assert X.stop_loss(5.0) == pytest.approx(1.25, abs=1e-12)

    def test_matches_quadrature(self, analytic_kinds):
        for X in analytic_kinds:
            upper = X.upper_limit()
            for d in (0.0, 0.7, 2.5, 6.0):
                val, _ = quad(X.survival, d, upper, limit=200)
                assert X.stop_loss(d) == pytest.approx(val, rel=1e-8)

    def test_convex_and_decreasing(self, analytic_kinds):
        for X in analytic_kinds:
            grid = np.linspace(0.0, min(X.upper_limit(), 40.0), 100)
            vals = np.array([X.stop_loss(float(d)) for d in grid])
            first = np.diff(vals)
            second = np.diff(vals, 2)
            assert np.all(first <= 1e-12)
            assert np.all(second >= -1e-10)

    def test_empirical_exact_sum(self):
        X = Empirical((1.0, 2.0, 4.0, 9.0))
        assert X.stop_loss(3.0) == pytest.approx((1.0 + 6.0) / 4.0)


class TestTruncatedMoments:
    def test_at_zero(self, analytic_kinds):
        for X in analytic_kinds:
            assert X.truncated_moments(0.0) == (0.0, 0.0)

    def test_uniform_closed_forms(self):
        # w1(x) = (2bx - x^2) / (2b), w2(x) = x^2 (3b - 2x) / (3b) on [0, b]
        b = 10.0
        X = Uniform(0, b)
        for x in (1.0, 4.0, 7.5):
            w1, w2 = X.truncated_moments(x)
            assert w1 == pytest.approx((2 * b * x - x * x) / (2 * b), abs=1e-12)
            assert w2 == pytest.approx(x * x * (3 * b - 2 * x) / (3 * b), abs=1e-12)

    def test_exponential_closed_form(self):
        lam = 0.1
        X = Exponential(lam)
        for x in (0.5, 3.0, 12.0):
            w1, _ = X.truncated_moments(x)
            assert w1 == pytest.approx((1 - math.exp(-lam * x)) / lam, abs=1e-12)

    def test_matches_quadrature(self, analytic_kinds):
        for X in analytic_kinds:
            for d in (0.9, 3.3, 8.0):
                w1, w2 = X.truncated_moments(d)
                o1, _ = quad(X.survival, 0.0, d, limit=200)
                o2, _ = quad(lambda x: 2.0 * x * X.survival(x), 0.0, d, limit=200)
                assert w1 == pytest.approx(o1, rel=1e-9, abs=1e-12)
                assert w2 == pytest.approx(o2, rel=1e-9, abs=1e-12)

    def test_variance_non_negative_and_monotone(self, analytic_kinds):
        for X in analytic_kinds:
            prev = (0.0, 0.0)
            for d in np.linspace(0.1, 15.0, 40):
                w1, w2 = X.truncated_moments(float(d))
                assert w2 - w1 * w1 >= -1e-12
                assert w1 >= prev[0] - 1e-12 and w2 >= prev[1] - 1e-12
                prev = (w1, w2)

    def test_variance_matches_monte_carlo(self, rng):
        # w2 - w1^2 is the variance of X ^ d: check within 3 standard errors
        X = Uniform(0, 10)
        d = 6.0
        sample = np.minimum(rng.uniform(0.0, 10.0, size=1_000_000), d)
        w1, w2 = X.truncated_moments(d)
        var = w2 - w1 * w1
        mc = sample.var()
        se = sample.var() * math.sqrt(2.0 / (sample.size - 1))  # SE of a variance estimate
        assert abs(var - mc) <= 3.0 * se


class TestConstruction:
    def test_uniform_invalid(self):
        with pytest.raises(DomainError):
            Uniform(5.0, 5.0)
        with pytest.raises(DomainError):
            Uniform(-1.0, 5.0)

    def test_exponential_invalid(self):
        with pytest.raises(DomainError):
            Exponential(0.0)

    def test_pareto_invalid(self):
        with pytest.raises(DomainError):
            Pareto(0.0, 1.0)
        with pytest.raises(DomainError):
            Pareto(2.0, -1.0)

    def test_empirical_invalid(self):
        with pytest.raises(DomainError):
            Empirical(())
        with pytest.raises(DomainError):
            Empirical((1.0, -2.0))

    def test_empirical_sorts(self):
        assert Empirical((3.0, 1.0, 2.0)).values == (1.0, 2.0, 3.0)
