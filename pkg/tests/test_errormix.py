"""Weibull mixture error law: stick-breaking, calculus, truncation bound."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from transmix.errormix import (
    WeibullMixture,
    mixture_cdf,
    mixture_log_survival,
    mixture_logpdf,
    mixture_survival,
    stick_breaking_weights,
    stick_fractions_from_weights,
    truncation_error_bound,
    weibull_logpdf,
)
from transmix.exceptions import ValidationError


def random_mixture(rng, L=None):
    L = L or int(rng.integers(2, 13))
    v = rng.uniform(0.05, 0.95, size=L - 1)
    return WeibullMixture(
        p=stick_breaking_weights(v),
        psi=rng.uniform(0.3, 5.0, size=L),
        nu=rng.uniform(0.5, 6.0, size=L),
    )


class TestStickBreaking:
    def test_half_half(self):
        p = stick_breaking_weights(np.array([0.5, 0.5]))
        assert np.allclose(p, [0.5, 0.25, 0.25], atol=1e-15)

    def test_absorbing_first_stick(self):
        eps = 1e-12
        p = stick_breaking_weights(np.array([1.0 - eps]))
        assert p[0] > 1.0 - 1e-11
        assert p[1] < 1e-11

    def test_sums_to_one(self, rng):
        for _ in range(100):
            v = rng.uniform(1e-4, 1 - 1e-4, size=11)
            p = stick_breaking_weights(v)
            assert abs(p.sum() - 1.0) < 1e-15
            assert np.all(p > 0.0)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            stick_breaking_weights(np.array([0.5, 1.0]))
        with pytest.raises(ValidationError):
            stick_breaking_weights(np.array([0.0, 0.5]))

    def test_inversion_round_trip(self, rng):
        for _ in range(100):
            v = 1.0 / (1.0 + np.exp(-rng.normal(0, 4, size=11)))
            p = stick_breaking_weights(v)
            if np.any(p <= 0.0):
                continue
            p2 = stick_breaking_weights(stick_fractions_from_weights(p))
            assert np.max(np.abs(p2 - p)) < 1e-13

    def test_inversion_batch_matches_rows(self, rng):
        P = np.stack([
            stick_breaking_weights(rng.uniform(0.1, 0.9, size=7))
            for _ in range(25)
        ])
        batch = stick_fractions_from_weights(P)
        rows = np.stack([stick_fractions_from_weights(row) for row in P])
        assert np.array_equal(batch, rows)


class TestMixtureCalculus:
    def test_unit_exponential_cdf(self):
        m = WeibullMixture(p=np.array([1.0]), psi=np.array([1.0]), nu=np.array([1.0]))
        assert abs(mixture_cdf(m, 1.0) - (1.0 - math.exp(-1.0))) < 1e-15

    def test_cdf_zero_at_origin(self, rng):
        for _ in range(20):
            assert mixture_cdf(random_mixture(rng), 0.0) == 0.0

    def test_two_component_brute_force(self, rng):
        m = random_mixture(rng, L=2)
        for x in rng.uniform(0.01, 8.0, size=20):
            direct = sum(
                m.p[l] * (1.0 - math.exp(-((x / m.psi[l]) ** m.nu[l])))
                for l in range(2)
            )
            assert abs(mixture_cdf(m, x) - direct) < 1e-14

    def test_unit_exponential_logpdf(self):
        m = WeibullMixture(p=np.array([1.0]), psi=np.array([1.0]), nu=np.array([1.0]))
        assert abs(mixture_logpdf(m, 1.0) - (-1.0)) < 1e-15

    def test_logpdf_brute_force(self, rng):
        for _ in range(50):
            m = random_mixture(rng)
            x = float(rng.uniform(0.1, 4.0))
            direct = 0.0
            for l in range(m.n_components):
                direct += m.p[l] * math.exp(weibull_logpdf(x, m.psi[l], m.nu[l]))
            got = math.exp(mixture_logpdf(m, x))
            assert abs(got - direct) <= 1e-12 * direct

    def test_extreme_tail_no_overflow(self):
        # single sharp component far in its tail: the analytic log-density
        # is -(x/psi)^nu + log nu + (nu-1) log x at psi=1
        m = WeibullMixture(p=np.array([1.0]), psi=np.array([1.0]), nu=np.array([20.0]))
        got = mixture_logpdf(m, 5.0)
        want = -(5.0**20) + math.log(20.0) + 19.0 * math.log(5.0)
        assert np.isfinite(got)
        assert abs(got - want) <= 1e-10 * abs(want)

    def test_survival_complement(self, rng):
        m = random_mixture(rng)
        x = rng.uniform(0.01, 10.0, size=50)
        assert np.max(np.abs(mixture_survival(m, x) + mixture_cdf(m, x) - 1.0)) < 1e-14

    def test_log_survival_consistent(self, rng):
        m = random_mixture(rng)
        x = rng.uniform(0.1, 6.0, size=20)
        assert np.max(np.abs(
            np.exp(mixture_log_survival(m, x)) - mixture_survival(m, x)
        )) < 1e-14

    def test_cdf_nondecreasing_many_mixtures(self, rng):
        grid = np.linspace(0.0, 12.0, 100)
        for _ in range(200):
            m = random_mixture(rng)
            c = mixture_cdf(m, grid)
            assert np.all(np.diff(c) >= -1e-15)
            assert np.all((c >= 0.0) & (c <= 1.0))

    def test_pdf_integrates_to_cdf(self, rng):
        m = random_mixture(rng, L=3)
        X = 9.0
        area, _ = quad(lambda x: math.exp(mixture_logpdf(m, x)), 0.0, X, limit=300)
        assert abs(area - mixture_cdf(m, X)) < 1e-4

    def test_negative_x_rejected(self, rng):
        m = random_mixture(rng)
        with pytest.raises(ValidationError):
            mixture_cdf(m, -0.5)
        with pytest.raises(ValidationError):
            mixture_logpdf(m, 0.0)

    def test_invalid_mixture_rejected(self):
        with pytest.raises(ValidationError):
            WeibullMixture(p=np.array([0.7, 0.7]), psi=np.ones(2), nu=np.ones(2))
        with pytest.raises(ValidationError):
            WeibullMixture(p=np.array([1.0]), psi=np.array([-1.0]), nu=np.array([1.0]))


class TestTruncationBound:
    def test_printed_value(self):
        assert truncation_error_bound(600, 12, 1.0) == 2400.0 * math.exp(-11.0)

    def test_monotone_in_truncation_level(self):
        vals = [truncation_error_bound(200, L, 1.0) for L in range(1, 30)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-9

    def test_single_component(self):
        assert truncation_error_bound(77, 1, 1.0) == 4.0 * 77

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            truncation_error_bound(0, 12, 1.0)
        with pytest.raises(ValidationError):
            truncation_error_bound(10, 12, 0.0)
