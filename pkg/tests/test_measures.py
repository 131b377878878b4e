import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from meandev import (
    ChoquetDeviation,
    DomainError,
    Empirical,
    Exponential,
    LinearQuadratic,
    LogPenalty,
    NumericError,
    Pareto,
    StandardDeviationMeasure,
    Uniform,
    check_monotonicity_constraint,
    choquet,
    choquet_quantile_form,
    custom_distortion,
    es,
    es_deviation,
    es_premium,
    full_range,
    gini,
    inter_es_range,
    md_g,
    mean_absolute,
    standard_deviation,
    validate_distortion,
    validate_penalty,
    var,
    var_premium,
)
from meandev.measures import EndpointClass

ALL_DEVIATIONS = [gini(), mean_absolute(), inter_es_range(0.9), es_deviation(0.9)]


class TestDistortionInvariants:
    @pytest.mark.parametrize("h", ALL_DEVIATIONS + [full_range()])
    def test_deviation_class_grid(self, h):
        validate_distortion(h)

    @pytest.mark.parametrize("h", [es_premium(0.8), var_premium(0.8)])
    def test_premium_class_grid(self, h):
        validate_distortion(h)

    def test_custom_rejects_bad_endpoint(self):
        with pytest.raises(DomainError):
            custom_distortion(
                lambda t: t,  # h(1) = 1 is not a deviation distortion
                endpoint_class=EndpointClass.DEVIATION,
                second_derivative_at_zero=0.0,
            )

    def test_custom_rejects_convex(self):
        with pytest.raises(DomainError):
            custom_distortion(
                lambda t: t**2 - t,
                endpoint_class=EndpointClass.DEVIATION,
                second_derivative_at_zero=2.0,
            )

    def test_second_derivative_metadata(self):
        assert gini().second_derivative_at_zero == -2.0
        assert mean_absolute().second_derivative_at_zero == 0.0
        assert es_deviation(0.9).second_derivative_at_zero == 0.0


class TestChoquet:
    def test_gini_uniform(self, uniform10):
        # (b - a) / 6
        assert choquet(gini(), uniform10) == pytest.approx(10.0 / 6.0, abs=1e-9)

    def test_gini_exponential(self, exp01):
        # 1 / (2 lambda)
        assert choquet(gini(), exp01) == pytest.approx(5.0, abs=1e-6)

    def test_constant_sample_is_zero(self):
        X = Empirical((3.0, 3.0, 3.0))
        for h in ALL_DEVIATIONS:
            assert choquet(h, X) == 0.0

    def test_range_uniform(self):
        assert choquet(full_range(), Uniform(2, 7)) == pytest.approx(5.0, abs=1e-9)

    def test_range_unbounded_raises(self, exp01):
        with pytest.raises(NumericError):
            choquet(full_range(), exp01)

    def test_dual_form_equivalence(self, analytic_kinds):
        for X in analytic_kinds:
            for h in ALL_DEVIATIONS + [es_premium(0.85)]:
                direct = choquet(h, X)
                dual = choquet_quantile_form(h, X)
                assert direct == pytest.approx(dual, abs=1e-6), (type(X).__name__, h.name)

    def test_dual_form_range_bounded(self):
        X = Uniform(1.0, 9.0)
        assert choquet_quantile_form(full_range(), X) == pytest.approx(8.0, abs=1e-9)

    def test_var_premium_is_quantile(self, uniform10):
        assert choquet(var_premium(0.9), uniform10) == pytest.approx(9.0)

    def test_mean_absolute_identity_monte_carlo(self, rng):
        # E|X - E[X]| within 3 standard errors; the identity with the
        # tent distortion requires a symmetric law (mean = median), since
        # the integral is the absolute deviation around the median
        X = Uniform(0, 10)
        sample = rng.uniform(0.0, 10.0, size=1_000_000)
        dev = np.abs(sample - 5.0)
        se = dev.std(ddof=1) / math.sqrt(dev.size)
        assert abs(choquet(mean_absolute(), X) - dev.mean()) <= 3.0 * se

    def test_mean_absolute_is_median_deviation_when_skewed(self, rng):
        # on an asymmetric law the tent distortion measures E|X - median|
        lam = 0.25
        X = Exponential(lam)
        sample = rng.exponential(1.0 / lam, size=1_000_000)
        dev = np.abs(sample - math.log(2.0) / lam)
        se = dev.std(ddof=1) / math.sqrt(dev.size)
        got = choquet(mean_absolute(), X)
        assert got == pytest.approx(math.log(2.0) / lam, abs=1e-9)
        assert abs(got - dev.mean()) <= 3.0 * se

    def test_gini_pair_identity_monte_carlo(self, rng):
        # E|X1 - X2| / 2 within 3 standard errors
        X = Uniform(0, 10)
        x1 = rng.uniform(0, 10, size=1_000_000)
        x2 = rng.uniform(0, 10, size=1_000_000)
        pair = 0.5 * np.abs(x1 - x2)
        se = pair.std(ddof=1) / math.sqrt(pair.size)
        assert abs(choquet(gini(), X) - pair.mean()) <= 3.0 * se

    def test_inter_es_range_identity(self, analytic_kinds):
        # ES_a(X) - lower-ES_a(X), with the lower tail integrated directly
        alpha = 0.9
        for X in analytic_kinds:
            upper_es = es(X, alpha)
            lower, _ = quad(X.quantile, 1e-12, 1.0 - alpha, limit=200)
            lower_es = lower / (1.0 - alpha)
            got = choquet(inter_es_range(alpha), X)
            assert got == pytest.approx(upper_es - lower_es, abs=1e-6)

    def test_es_deviation_identity(self, analytic_kinds):
        alpha = 0.9
        for X in analytic_kinds:
            got = choquet(es_deviation(alpha), X)
            assert got == pytest.approx(es(X, alpha) - X.mean(), abs=1e-7)


def random_empirical(rng, n=10_000) -> Empirical:
    kind = rng.integers(0, 3)
    if kind == 0:
        sample = rng.uniform(0.0, 10.0, size=n)
    elif kind == 1:
        sample = rng.exponential(5.0, size=n)
    else:
        sample = rng.gamma(2.0, 2.5, size=n)
    return Empirical(tuple(sample))


class TestDeviationAxioms:
    """D1-D4 on signed Choquet integrals over empirical fixtures (exact sums)."""

    @pytest.mark.parametrize("h", ALL_DEVIATIONS)
    def test_translation_invariance(self, h, rng):
        for _ in range(5):
            X = random_empirical(rng, 2000)
            shifted = Empirical(tuple(np.asarray(X.values) + 3.7))
            assert choquet(h, shifted) == pytest.approx(choquet(h, X), abs=1e-8)

    @pytest.mark.parametrize("h", ALL_DEVIATIONS)
    def test_positive_homogeneity(self, h, rng):
        for lam in (0.0, 0.5, 2.0):
            X = random_empirical(rng, 2000)
            scaled = Empirical(tuple(np.asarray(X.values) * lam))
            assert choquet(h, scaled) == pytest.approx(lam * choquet(h, X), abs=1e-8)

    @pytest.mark.parametrize("h", ALL_DEVIATIONS)
    def test_non_negative(self, h, rng):
        for _ in range(5):
            assert choquet(h, random_empirical(rng, 2000)) >= 0.0

    @pytest.mark.parametrize("h", ALL_DEVIATIONS)
    def test_subadditive_comonotone_pairs(self, h, rng):
        # comonotone coupling: both coordinates increasing in the same sample
        for _ in range(3):
            base = np.sort(rng.uniform(0.0, 10.0, size=2000))
            y = np.sqrt(base) * 2.0
            dx = choquet(h, Empirical(tuple(base)))
            dy = choquet(h, Empirical(tuple(y)))
            dxy = choquet(h, Empirical(tuple(base + y)))
            assert dxy <= dx + dy + 1e-8
            # comonotonic additivity is exact for signed Choquet integrals
            assert dxy == pytest.approx(dx + dy, abs=1e-8)

    @pytest.mark.parametrize("h", ALL_DEVIATIONS)
    def test_subadditive_independent_pairs(self, h, rng):
        # independent discretized coupling: all n*m equally weighted sums
        x = rng.uniform(0.0, 10.0, size=100)
        y = rng.exponential(4.0, size=100)
        sums = (x[:, None] + y[None, :]).ravel()
        dx = choquet(h, Empirical(tuple(x)))
        dy = choquet(h, Empirical(tuple(y)))
        dxy = choquet(h, Empirical(tuple(sums)))
        assert dxy <= dx + dy + 1e-8


class TestStandardDeviation:
    def test_uniform_closed_form(self):
        assert standard_deviation(Uniform(0, 12)) == pytest.approx(3.4641016151377544, abs=1e-9)

    def test_uniform_matches_monte_carlo(self, rng):
        sample = rng.uniform(0, 12, size=1_000_000)
        assert standard_deviation(Uniform(0, 12)) == pytest.approx(sample.std(), abs=0.01)

    def test_exponential(self):
        assert standard_deviation(Exponential(0.1)) == pytest.approx(10.0)

    def test_empirical(self):
        assert standard_deviation(Empirical((0.0, 2.0))) == 1.0

    def test_pareto_heavy_tail_raises(self):
        with pytest.raises(DomainError):
            standard_deviation(Pareto(2.0, 1.0))


class TestVarEs:
    def test_var_uniform(self, uniform10):
        assert var(uniform10, 0.8) == pytest.approx(8.0)

    def test_es_exponential_closed_form(self):
        # (1 - ln(1 - p)) / lambda
        assert es(Exponential(1.0), 0.5) == pytest.approx(1.6931471805599454, abs=1e-12)

    def test_es_matches_quadrature(self, analytic_kinds):
        for X in analytic_kinds:
            for p in (0.3, 0.8):
                oracle, _ = quad(X.quantile, p, 1.0 - 1e-12, limit=300)
                assert es(X, p) == pytest.approx(oracle / (1.0 - p), rel=1e-7)

    def test_es_dominates_var(self, analytic_kinds, rng):
        for _ in range(25):
            for X in analytic_kinds:
                p = float(rng.uniform(0.05, 0.95))
                assert es(X, p) >= var(X, p) - 1e-12

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2])
    def test_domain(self, p, uniform10):
        with pytest.raises(DomainError):
            var(uniform10, p)
        with pytest.raises(DomainError):
            es(uniform10, p)


class TestMdG:
    def test_constant_sample(self):
        X = Empirical((4.0, 4.0, 4.0, 4.0))
        assert md_g(LinearQuadratic(1.0, 0.5), ChoquetDeviation(gini()), X) == pytest.approx(4.0)

    def test_linear_gini_uniform(self, uniform10):
        got = md_g(LinearQuadratic(1.0, 0.0), ChoquetDeviation(gini()), uniform10)
        assert got == pytest.approx(10.0 / 6.0 + 5.0, abs=1e-8)

    def test_log_penalty_gini_exponential(self, exp01):
        # rho - log(1 + rho) + E[X] with rho = 5
        got = md_g(LogPenalty(), ChoquetDeviation(gini()), exp01)
        assert got == pytest.approx(5.0 - math.log(6.0) + 10.0, abs=1e-6)

    def test_sd_measure(self, uniform10):
        got = md_g(LinearQuadratic(0.0, 1.0), StandardDeviationMeasure(), uniform10)
        assert got == pytest.approx(100.0 / 12.0 + 5.0, abs=1e-9)


class TestMonotonicityCheck:
    def test_violated(self, uniform10):
        g = LinearQuadratic(0.5, 0.2)
        assert check_monotonicity_constraint(g, ChoquetDeviation(gini()), uniform10) is False

    def test_boundary_holds(self):
        g = LinearQuadratic(1.0, 0.0)
        X = Uniform(0, 10)
        assert check_monotonicity_constraint(g, ChoquetDeviation(gini()), X) is True

    def test_interior_holds(self):
        g = LinearQuadratic(0.0, 0.3)
        X = Uniform(0, 6)  # Gini deviation = 1
        assert check_monotonicity_constraint(g, ChoquetDeviation(gini()), X) is True

    def test_requires_linear_quadratic(self, uniform10):
        with pytest.raises(DomainError):
            check_monotonicity_constraint(LogPenalty(), ChoquetDeviation(gini()), uniform10)


class TestPenalties:
    def test_linear_quadratic_validation(self):
        with pytest.raises(DomainError):
            LinearQuadratic(0.0, 0.0)
        with pytest.raises(DomainError):
            LinearQuadratic(-0.1, 0.2)

    @settings(max_examples=40, deadline=None)
    @given(alpha=st.floats(0.0, 2.0), beta=st.floats(0.0, 2.0), x=st.floats(0.0, 50.0))
    def test_linear_quadratic_derivative(self, alpha, beta, x):
        if alpha == 0.0 and beta == 0.0:
            return
        g = LinearQuadratic(alpha, beta)
        eps = 1e-6 * (1.0 + x)
        fd = (g(x + eps) - g(x)) / eps
        assert g.derivative(x) == pytest.approx(fd, rel=1e-4, abs=1e-5)

    def test_grid_validators(self):
        validate_penalty(LinearQuadratic(0.3, 0.1))
        validate_penalty(LogPenalty())

    def test_choquet_deviation_requires_deviation_class(self):
        with pytest.raises(DomainError):
            ChoquetDeviation(es_premium(0.9))
