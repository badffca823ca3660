import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from repairable.errors import DomainError, ModelValidityError, SingularityError
from repairable.lifetime import (
    BathtubProfile,
    Constant,
    DecreasingPower,
    Exponential,
    Gamma,
    IncreasingPower,
    Lognormal,
    Weibull,
    bathtub_reliability,
    cdf_at,
    hazard_at,
    make_distribution,
    mttf,
    pdf_at,
    quantile,
    reliability_at,
    sample_ttf,
)
from repairable.rng import RandomStream

ALL = [Exponential(0.7), Weibull(2.0, 3.0), Weibull(0.6, 1.5), Gamma(2.5, 1.2), Lognormal(0.3, 0.8)]

positive = st.floats(0.2, 5.0)
distributions = st.one_of(
    st.builds(Exponential, positive),
    st.builds(Weibull, st.floats(0.3, 6.0), positive),
    st.builds(Gamma, st.floats(0.3, 8.0), positive),
    st.builds(Lognormal, st.floats(-1.0, 1.0), st.floats(0.2, 1.5)),
)

# scipy's implementations act as the independent reference
SCIPY = {
    "exponential": lambda d: stats.expon(scale=1 / d.rate),
    "weibull": lambda d: stats.weibull_min(d.shape, scale=d.scale),
    "gamma": lambda d: stats.gamma(d.shape, scale=1 / d.rate),
    "lognormal": lambda d: stats.lognorm(d.sigma, scale=math.exp(d.mu)),
}


class TestReliability:
    def test_exponential_survival_matches_integrated_density(self):
        d = Exponential(0.1)
        tail, _ = integrate.quad(lambda x: 0.1 * math.exp(-0.1 * x), 10, np.inf)
        assert reliability_at(d, 10.0) == pytest.approx(math.exp(-1), rel=1e-15)
        assert reliability_at(d, 10.0) == pytest.approx(tail, rel=1e-10)

    @pytest.mark.parametrize("d", ALL, ids=lambda d: d.family)
    def test_survival_at_zero_is_one(self, d):
        assert reliability_at(d, 0.0) == 1.0
        assert cdf_at(d, 0.0) == 0.0

    def test_shape_one_weibull_is_exponential(self):
        assert reliability_at(Weibull(1.0, 10.0), 10.0) == reliability_at(Exponential(0.1), 10.0)

    @pytest.mark.parametrize("d", ALL, ids=lambda d: d.family)
    def test_against_scipy(self, d):
        ref = SCIPY[d.family](d)
        t = np.array([0.05, 0.5, 1.0, 2.0, 5.0])
        np.testing.assert_allclose(reliability_at(d, t), ref.sf(t), rtol=1e-12)
        np.testing.assert_allclose(pdf_at(d, t), ref.pdf(t), rtol=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            reliability_at(Exponential(1.0), -1.0)

    def test_array_in_array_out(self):
        out = reliability_at(Weibull(2, 1), [0.0, 1.0])
        assert isinstance(out, np.ndarray) and out.shape == (2,)
        assert isinstance(reliability_at(Weibull(2, 1), 1.0), float)

    @given(distributions, st.lists(st.floats(0.0, 50.0), min_size=2, max_size=20))
    def test_survival_bounded_and_monotone(self, d, ts):
        t = np.sort(np.array(ts))
        r = reliability_at(d, t)
        assert np.all((r >= 0) & (r <= 1))
        assert np.all(np.diff(r) <= 0)

    @given(distributions, st.floats(0.0, 80.0))
    def test_cdf_plus_survival_is_exactly_one(self, d, t):
        assert cdf_at(d, t) + reliability_at(d, t) == 1.0


class TestHazard:
    def test_exponential_hazard_constant(self):
        t = np.linspace(0, 30, 31)
        np.testing.assert_allclose(hazard_at(Exponential(0.5), t), 0.5, rtol=1e-14)

    def test_weibull_hazard_increasing_and_analytic(self):
        t = np.linspace(0.01, 3, 50)
        h = hazard_at(Weibull(2.0, 1.0), t)
        assert np.all(np.diff(h) > 0)
        np.testing.assert_allclose(h, 2 * t, rtol=1e-12)

    def test_singular_where_survival_vanishes(self):
        with pytest.raises(SingularityError):
            hazard_at(Exponential(1.0), 800.0)


class TestConditionalDensity:
    @pytest.mark.parametrize("d", ALL, ids=lambda d: d.family)
    def test_matches_ratio(self, d):
        ref = SCIPY[d.family](d)
        v = np.array([0.0, 0.3, 1.0, 2.5])
        x = np.array([0.7, 0.1, 2.0, 0.4])
        np.testing.assert_allclose(d.log_conditional_pdf(v, x), ref.logpdf(v + x) - ref.logsf(v), rtol=1e-11)

    def test_exponential_ignores_age(self):
        assert Exponential(0.5).log_conditional_pdf(1e12, 2.0) == math.log(0.5) - 1.0

    def test_weibull_old_age_keeps_precision(self):
        # z(v + x) - z(v) = 2 v x + x**2 for shape 2, scale 1
        v, x = 1e7, 1e-3
        expected = math.log(2.0 * (v + x)) - (2 * v * x + x * x)
        assert Weibull(2.0, 1.0).log_conditional_pdf(v, x) == pytest.approx(expected, rel=1e-12)


class TestQuantile:
    def test_exponential_median(self):
        assert quantile(Exponential(0.5), 0.5) == pytest.approx(math.log(2) / 0.5, rel=1e-15)

    @pytest.mark.parametrize("d", ALL, ids=lambda d: d.family)
    def test_zero_probability(self, d):
        assert quantile(d, 0.0) == 0.0

    @pytest.mark.parametrize("p", [-0.1, 1.0, 1.5, float("nan")])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            quantile(Gamma(2, 1), p)

    @pytest.mark.parametrize("d", ALL, ids=lambda d: d.family)
    def test_monotone_in_p(self, d):
        q = quantile(d, np.linspace(0, 0.999, 200))
        assert np.all(np.diff(q) > 0)

    @given(distributions, st.floats(1e-6, 1 - 1e-6))
    def test_cdf_of_quantile(self, d, p):
        assert cdf_at(d, quantile(d, p)) == pytest.approx(p, rel=1e-8, abs=0)

    @given(distributions, st.floats(0.01, 0.999))
    def test_quantile_of_cdf_round_trip(self, d, u):
        # pick t through scipy so the probe covers the bulk of each law
        t = float(SCIPY[d.family](d).ppf(u))
        assert quantile(d, cdf_at(d, t)) == pytest.approx(t, rel=1e-8)


class TestSampling:
    def test_exponential_mean(self):
        x = sample_ttf(Exponential(2.0), RandomStream(7), 100_000)
        se = 0.5 / math.sqrt(x.size)
        assert abs(x.mean() - 0.5) < 3 * se

    def test_weibull_mean(self):
        x = sample_ttf(Weibull(2.0, 1.0), RandomStream(8), 100_000)
        mean = math.gamma(1.5)
        sd = math.sqrt(math.gamma(2.0) - mean**2)
        assert abs(x.mean() - 0.886227) < 3 * sd / math.sqrt(x.size)

    def test_same_seed_same_draws(self):
        a = sample_ttf(Gamma(2, 1), RandomStream(3, stream=5), 50)
        b = sample_ttf(Gamma(2, 1), RandomStream(3, stream=5), 50)
        assert np.array_equal(a, b)
        single = RandomStream(3, stream=5)
        assert [sample_ttf(Gamma(2, 1), single) for _ in range(50)] == a.tolist()

    @pytest.mark.parametrize("d", ALL, ids=lambda d: d.family)
    def test_ks_against_cdf(self, d):
        x = sample_ttf(d, RandomStream(11), 100_000)
        assert stats.kstest(x, lambda t: cdf_at(d, t)).pvalue > 0.01


class TestMttf:
    def test_closed_forms(self):
        assert mttf(Exponential(0.1)) == pytest.approx(10.0, rel=1e-15)
        assert mttf(Gamma(2.0, 1.0)) == pytest.approx(2.0, rel=1e-15)
        assert mttf(Lognormal(0.0, 0.5)) == pytest.approx(1.133148, abs=1e-6)

    @pytest.mark.parametrize("d", ALL, ids=lambda d: d.family)
    def test_matches_integrated_survival(self, d):
        area, _ = integrate.quad(lambda t: reliability_at(d, t), 0, np.inf, epsrel=1e-10)
        assert mttf(d) == pytest.approx(area, rel=1e-7)


class TestValidation:
    @pytest.mark.parametrize("factory", [
        lambda: Exponential(0), lambda: Weibull(-1, 1), lambda: Weibull(1, 0),
        lambda: Gamma(1, -2), lambda: Lognormal(0, 0), lambda: Lognormal(float("inf"), 1),
    ])
    def test_bad_parameters(self, factory):
        with pytest.raises(ModelValidityError):
            factory()

    def test_make_distribution(self):
        assert make_distribution("Weibull", shape=2, scale=1) == Weibull(2.0, 1.0)
        with pytest.raises(ModelValidityError):
            make_distribution("cauchy", loc=0)
        with pytest.raises(ModelValidityError):
            make_distribution("gamma", shape=2)


def three_phase():
    return BathtubProfile([
        (0.0, DecreasingPower(0.5, -1.5)),
        (2.0, Constant(0.05)),
        (10.0, IncreasingPower(0.01, 2.0)),
    ])


class TestBathtub:
    def test_constant_segment_is_exponential(self):
        t = np.linspace(0, 40, 401)
        np.testing.assert_allclose(
            bathtub_reliability(BathtubProfile([(0.0, Constant(0.3))]), t),
            reliability_at(Exponential(0.3), t), rtol=1e-12, atol=0,
        )

    def test_starts_at_one(self):
        assert bathtub_reliability(three_phase(), 0.0) == 1.0

    @pytest.mark.parametrize("b", [2.0, 10.0])
    def test_continuous_at_boundaries(self, b):
        p = three_phase()
        left, right = bathtub_reliability(p, [b - 1e-12, b + 1e-12])
        assert left == pytest.approx(right, rel=1e-10)

    @pytest.mark.parametrize("t", [0.5, 2.0, 7.0, 10.0, 12.5])
    def test_piecewise_integral_matches_quadrature(self, t):
        p = three_phase()
        edges = [e for e in (0.0, 2.0, 10.0) if e < t] + [t]
        h = sum(
            integrate.quad(lambda u: float(p.hazard(u)), a, b, epsabs=0, epsrel=1e-12)[0]
            for a, b in zip(edges[:-1], edges[1:])
        )
        assert float(p.cumulative_hazard(t)) == pytest.approx(h, rel=1e-8)

    def test_hazard_jump_allowed_and_shape(self):
        p = three_phase()
        h = p.hazard(np.array([0.0, 1.0, 1.99, 2.0, 5.0, 11.0, 15.0]))
        assert np.all(h >= 0) and np.all(np.isfinite(h))
        assert h[0] > h[1] > h[2]
        assert h[3] == h[4] == 0.05
        assert h[6] > h[5]

    @given(st.lists(st.floats(0.0, 30.0), min_size=2, max_size=30))
    def test_non_increasing(self, ts):
        r = bathtub_reliability(three_phase(), np.sort(ts))
        assert np.all(np.diff(r) <= 0)

    def test_bad_profiles(self):
        with pytest.raises(ModelValidityError):
            BathtubProfile([(1.0, Constant(1))])
        with pytest.raises(ModelValidityError):
            BathtubProfile([(0.0, Constant(1)), (0.0, Constant(2))])
        with pytest.raises(ModelValidityError):
            DecreasingPower(1.0, 0.5)

    def test_mean_of_constant_profile(self):
        assert mttf(BathtubProfile([(0.0, Constant(0.25))])) == pytest.approx(4.0, rel=1e-8)
