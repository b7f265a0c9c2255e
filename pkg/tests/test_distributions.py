"""Sampler moment checks against analytic values, and special-function
checks against a high-precision mpmath oracle."""

import time

import mpmath
import numpy as np
import pytest

from gamselect import distributions as dist
from gamselect.errors import InvalidParameterError

N_BIG = 1_000_000


def rng(seed=1, stream=0):
    return dist.make_rng(seed, stream)


def three_se_of_mean(x):
    return 3.0 * np.std(x) / np.sqrt(x.size)


def three_se_of_var(x):
    # SE of the plug-in variance estimator from the sample's 4th moment.
    c = (x - x.mean()) ** 2
    return 3.0 * np.std(c) / np.sqrt(x.size)


class TestInverseGamma:
    def test_mean_matches_rate_over_shape_minus_one(self):
        x = dist.sample_inverse_gamma(3.0, 4.0, rng(10), size=N_BIG)
        assert abs(x.mean() - 2.0) < three_se_of_mean(x)

    def test_strictly_positive_for_small_shape(self):
        x = dist.sample_inverse_gamma(0.5, 1.0, rng(11), size=N_BIG)
        assert np.all(x > 0.0)

    def test_reciprocal_is_gamma_with_same_rate(self):
        kappa, lam = 2.5, 3.0
        x = dist.sample_inverse_gamma(kappa, lam, rng(12), size=N_BIG)
        recip = 1.0 / x
        # Gamma(kappa, rate lam): mean kappa/lam, variance kappa/lam^2.
        assert abs(recip.mean() - kappa / lam) < three_se_of_mean(recip)
        assert abs(recip.var() - kappa / lam**2) < three_se_of_var(recip)

    @pytest.mark.parametrize("kappa,lam", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_invalid_parameters_raise(self, kappa, lam):
        with pytest.raises(InvalidParameterError):
            dist.sample_inverse_gamma(kappa, lam, rng())


class TestInverseGaussian:
    def test_moments(self):
        x = dist.sample_inverse_gaussian(2.0, 1.0, rng(20), size=N_BIG)
        assert abs(x.mean() - 2.0) < three_se_of_mean(x)
        assert abs(x.var() - 8.0) < three_se_of_var(x)

    def test_concentrates_for_large_shape(self):
        x = dist.sample_inverse_gaussian(1.0, 1e6, rng(21), size=200_000)
        assert x.var() < 1e-3
        assert abs(x.mean() - 1.0) < 1e-2

    def test_all_positive(self):
        x = dist.sample_inverse_gaussian(0.3, 0.2, rng(22), size=N_BIG)
        assert np.all(x > 0.0)

    def test_huge_mean_stays_positive_finite(self):
        # The fitters clamp the conditional mean at 1e12; draws must not
        # overflow or go nonpositive there.
        x = dist.sample_inverse_gaussian(1e12, 1.0, rng(23), size=10_000)
        assert np.all(np.isfinite(x)) and np.all(x > 0.0)

    def test_vector_mu(self):
        mu = np.array([0.5, 1.0, 5.0])
        x = dist.sample_inverse_gaussian(mu, 1.0, rng(24))
        assert x.shape == (3,) and np.all(x > 0.0)

    def test_invalid_parameters_raise(self):
        with pytest.raises(InvalidParameterError):
            dist.sample_inverse_gaussian(-1.0, 1.0, rng())
        with pytest.raises(InvalidParameterError):
            dist.sample_inverse_gaussian(1.0, 0.0, rng())


class TestTruncatedNormalPlus:
    def test_half_normal_mean(self):
        x = dist.sample_truncated_normal_plus(0.0, rng(30), size=N_BIG)
        assert abs(x.mean() - np.sqrt(2.0 / np.pi)) < three_se_of_mean(x)

    def test_general_mean_matches_mills_identity(self):
        # E[N(mu,1) | >0] = mu + zeta'(mu).
        for mu in (-5.0, -1.0, 0.7, 3.0):
            x = dist.sample_truncated_normal_plus(mu, rng(31, int(10 * mu + 100)), size=400_000)
            assert abs(x.mean() - (mu + dist.zeta_prime(mu))) < three_se_of_mean(x)

    def test_far_negative_location_bounded_time(self):
        t0 = time.perf_counter()
        x = dist.sample_truncated_normal_plus(np.full(1000, -30.0), rng(32))
        elapsed = time.perf_counter() - t0
        assert np.all(np.isfinite(x)) and np.all(x > 0.0)
        assert elapsed / 1000 < 1e-3  # < 1 ms per draw

    def test_all_positive(self):
        mu = rng(33).uniform(-8, 8, size=100_000)
        x = dist.sample_truncated_normal_plus(mu, rng(34))
        assert np.all(x > 0.0)


def _mpmath_zeta_prime(x):
    mpmath.mp.dps = 60
    x = mpmath.mpf(x)
    return float(mpmath.npdf(x) / mpmath.ncdf(x))


class TestZetaPrime:
    @pytest.fixture
    def oracle(self):
        return _mpmath_zeta_prime

    def test_zero(self):
        assert dist.zeta_prime(0.0) == pytest.approx(np.sqrt(2.0 / np.pi), rel=1e-14)

    def test_relative_error_below_1e_minus_10(self, oracle):
        xs = np.concatenate(
            [
                -np.logspace(-3, 8, 120),
                np.logspace(-3, np.log10(37.0), 60),
                np.linspace(-25.0, -15.0, 41),  # straddle the crossover
                np.linspace(-5.0, 5.0, 41),
            ]
        )
        for x in xs:
            got = dist.zeta_prime(float(x))
            want = oracle(float(x))
            assert got == pytest.approx(want, rel=1e-10), f"x={x}"

    def test_large_positive_tail(self):
        v = dist.zeta_prime(40.0)
        assert 0.0 <= v < 1e-300

    def test_no_nan_or_overflow_anywhere(self):
        xs = np.array([-1e308, -1e100, -1e8, -50.0, 0.0, 50.0, 1e8, 1e100, 1e308])
        v = dist.zeta_prime(xs)
        assert np.all(np.isfinite(v)) and np.all(v >= 0.0)

    def test_strictly_decreasing_and_mills_bound(self):
        xs = np.linspace(-60.0, 30.0, 2001)
        v = dist.zeta_prime(xs)
        assert np.all(v > 0.0)
        assert np.all(np.diff(v) < 0.0)
        neg = xs < -1.0
        assert np.all(v[neg] < -xs[neg] + 1.0)


class TestLogitExpit:
    def test_basics(self):
        assert dist.expit(0.0) == 0.5
        assert dist.logit(0.5) == 0.0
        assert dist.expit(dist.logit(0.3)) == pytest.approx(0.3, abs=1e-12)

    def test_endpoints_extended_reals(self):
        assert dist.logit(0.0) == -np.inf
        assert dist.logit(1.0) == np.inf
        assert dist.expit(-np.inf) == 0.0
        assert dist.expit(np.inf) == 1.0

    def test_domain_errors(self):
        with pytest.raises(InvalidParameterError):
            dist.logit(-0.1)
        with pytest.raises(InvalidParameterError):
            dist.logit(1.0001)


class TestBernoulliAndNormalVec:
    def test_degenerate_probabilities(self):
        r = rng(40)
        assert np.all(dist.sample_bernoulli(np.zeros(1000), r) == 0)
        assert np.all(dist.sample_bernoulli(np.ones(1000), r) == 1)

    def test_quarter_probability_mean(self):
        x = dist.sample_bernoulli(0.25, rng(41), size=N_BIG)
        assert abs(x.mean() - 0.25) < 3.0 * np.sqrt(0.1875 / N_BIG)

    def test_probability_domain(self):
        with pytest.raises(InvalidParameterError):
            dist.sample_bernoulli(1.5, rng())

    def test_std_normal_vec_moments(self):
        z = dist.sample_std_normal_vec(N_BIG, rng(42))
        assert abs(z.mean()) < three_se_of_mean(z)
        assert abs(z.var() - 1.0) < three_se_of_var(z)


class TestDeterminism:
    def test_fixed_stream_fixes_all_sequences(self):
        a, b = rng(7, 3), rng(7, 3)
        assert np.array_equal(
            dist.sample_inverse_gamma(2.0, 3.0, a, size=50), dist.sample_inverse_gamma(2.0, 3.0, b, size=50)
        )
        assert np.array_equal(
            dist.sample_inverse_gaussian(1.0, 2.0, a, size=50), dist.sample_inverse_gaussian(1.0, 2.0, b, size=50)
        )
        assert np.array_equal(
            dist.sample_truncated_normal_plus(np.full(50, -3.0), a),
            dist.sample_truncated_normal_plus(np.full(50, -3.0), b),
        )

    def test_distinct_streams_differ(self):
        a = rng(7, 0).standard_normal(8)
        b = rng(7, 1).standard_normal(8)
        assert not np.allclose(a, b)

    def test_rngstream_dataclass(self):
        s = dist.RngStream(seed=5, stream_id=2)
        assert np.array_equal(s.generator().standard_normal(4), dist.make_rng(5, 2).standard_normal(4))
