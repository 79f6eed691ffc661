"""Monotone basis: squashing transform, knot selection, spline calculus."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from transmix.basis import (
    BasisSpec,
    build_basis,
    covariate_ranges,
    empirical_quantile,
    eval_H,
    eval_H_prime,
    expand_additive_basis,
    interpolate_knots_censored,
    select_quantile_knots,
    tau_sigmoid,
    tau_sigmoid_derivative,
    tau_sigmoid_inverse,
)
from transmix.exceptions import ValidationError


class TestTauSigmoid:
    def test_midpoint(self):
        assert tau_sigmoid(0.0, 5.0) == 2.5

    def test_known_value(self):
        assert abs(tau_sigmoid(math.log(3.0), 4.0) - 3.0) < 1e-15

    def test_saturation(self):
        v = tau_sigmoid(10.0, 5.0)
        assert 4.999 < v < 5.0

    def test_inverse_midpoint(self):
        assert tau_sigmoid_inverse(2.5, 5.0) == 0.0

    def test_inverse_known_value(self):
        assert abs(tau_sigmoid_inverse(3.0, 4.0) - math.log(3.0)) < 1e-14

    def test_round_trip(self, rng):
        t = rng.uniform(0.01, 4.99, size=100)
        back = tau_sigmoid(tau_sigmoid_inverse(t, 5.0), 5.0)
        assert np.max(np.abs(back - t)) < 1e-12

    def test_strictly_increasing(self, rng):
        y = np.sort(rng.normal(0, 3, size=50))
        assert np.all(np.diff(tau_sigmoid(y, 5.0)) > 0)

    def test_derivative_matches_finite_difference(self, rng):
        y = rng.normal(0, 2, size=20)
        h = 1e-6
        fd = (tau_sigmoid(y + h, 5.0) - tau_sigmoid(y - h, 5.0)) / (2 * h)
        assert np.max(np.abs(fd - tau_sigmoid_derivative(y, 5.0))) < 1e-7

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            tau_sigmoid(np.nan, 5.0)
        with pytest.raises(ValidationError):
            tau_sigmoid(0.0, -1.0)
        with pytest.raises(ValidationError):
            tau_sigmoid_inverse(5.0, 5.0)
        with pytest.raises(ValidationError):
            tau_sigmoid_inverse(0.0, 5.0)


class TestQuantileKnots:
    def test_hand_case_dedups(self):
        # quantile ladder of (1,2,3,4) at levels 0,.25,.5,.75 hits 1,1,2,3;
        # the duplicate collapses with a warning
        with pytest.warns(UserWarning):
            knots = select_quantile_knots(np.array([1.0, 2.0, 3.0, 4.0]), 4)
        assert np.array_equal(knots, [1.0, 2.0, 3.0])

    def test_uniform_sample_levels(self):
        y = np.random.default_rng(0).uniform(0.0, 5.0, size=1000)
        knots = select_quantile_knots(y, 4)
        assert knots.size == 4
        assert abs(knots[0] - y.min()) < 1e-12
        for got, want in zip(knots[1:], (1.25, 2.5, 3.75)):
            assert abs(got - want) < 0.15

    def test_constant_data_degenerate(self):
        with pytest.raises(ValidationError):
            select_quantile_knots(np.full(50, 2.0), 4)

    def test_zeroth_quantile_is_minimum(self, rng):
        y = rng.uniform(0.5, 4.5, size=37)
        assert empirical_quantile(y, 0.0) == y.min()
        knots = select_quantile_knots(y, 4)
        assert knots[0] == y.min()


class TestCensoredKnotInterpolation:
    def test_no_censoring_identity(self, rng):
        y = rng.uniform(0.2, 4.8, size=200)
        base = select_quantile_knots(y, 4)
        out = interpolate_knots_censored(y, y, 4)
        assert np.array_equal(out, base)

    def test_small_gap_identity(self, rng):
        # censored points stacked above the uncensored maximum keep every
        # CDF gap at the initial knots under the threshold
        y_unc = rng.uniform(0.2, 3.0, size=950)
        y_cen = np.full(50, 4.5)
        y_all = np.concatenate([y_unc, y_cen])
        base = select_quantile_knots(y_unc, 4)

        def ecdf(sample, x):
            return np.mean(sample <= x)

        gaps = [abs(ecdf(y_all, s) - ecdf(y_unc, s)) for s in base]
        assert max(gaps) < 0.05
        out = interpolate_knots_censored(y_all, y_unc, 4)
        assert np.array_equal(out, base)

    def test_wide_gap_inserts_knot(self, rng):
        # censored mass concentrated below the uncensored values drags the
        # all-sample CDF far above the uncensored CDF at the initial knots
        y_unc = rng.uniform(2.0, 4.5, size=300)
        y_cen = rng.uniform(0.3, 1.5, size=300)
        y_all = np.concatenate([y_unc, y_cen])
        base = select_quantile_knots(y_unc, 4)
        out = interpolate_knots_censored(y_all, y_unc, 4)
        assert set(base).issubset(set(out))
        assert base.size < out.size <= base.size + 4

    def test_superset_invariant(self, rng):
        for _ in range(20):
            y_unc = rng.uniform(0.5, 4.0, size=80)
            y_cen = rng.uniform(0.2, 4.5, size=rng.integers(10, 120))
            y_all = np.concatenate([y_unc, y_cen])
            base = select_quantile_knots(y_unc, 4)
            out = interpolate_knots_censored(y_all, y_unc, 4)
            assert set(base).issubset(set(out))
            assert out.size <= base.size + 4
            assert np.all(np.diff(out) > 0)

    def test_empty_uncensored_errors(self):
        with pytest.raises(ValidationError):
            interpolate_knots_censored(np.array([1.0, 2.0]), np.array([]), 4)


class TestBasisEvaluation:
    def setup_method(self):
        self.spec = build_basis(np.array([1.0, 2.0, 3.0, 4.0]), 4, 5.0)

    def test_k_equals_knots_plus_order(self):
        assert self.spec.K == 4 + 4

    def test_left_boundary_zero(self):
        assert np.all(self.spec.evaluate(0.0) == 0.0)

    def test_right_boundary_one(self):
        assert np.max(np.abs(self.spec.evaluate(5.0) - 1.0)) < 1e-12

    def test_values_in_unit_interval(self, rng):
        s = rng.uniform(0.0, 5.0, size=200)
        B = self.spec.evaluate(s)
        assert np.all(B >= -1e-14)
        assert np.all(B <= 1.0 + 1e-12)

    def test_each_function_nondecreasing(self):
        grid = np.linspace(0.0, 5.0, 400)
        B = self.spec.evaluate(grid)
        assert np.all(np.diff(B, axis=0) >= -1e-12)

    def test_quadrature_oracle(self):
        # integral of each derivative from 0 to s reproduces the basis value
        grid = np.linspace(0.1, 4.9, 50)
        for j in range(self.spec.K):
            f = lambda x: self.spec.derivative(x)[j]
            for s in grid[::7]:
                integral, _ = quad(f, 0.0, s, limit=200)
                assert abs(integral - self.spec.evaluate(s)[j]) < 1e-6

    def test_invalid_knots_rejected(self):
        with pytest.raises(ValidationError):
            build_basis(np.array([2.0, 1.0]), 4, 5.0)
        with pytest.raises(ValidationError):
            build_basis(np.array([1.0, 6.0]), 4, 5.0)

    def test_serialization_round_trip(self):
        spec2 = BasisSpec.from_dict(self.spec.to_dict())
        assert np.array_equal(spec2.interior_knots, self.spec.interior_knots)
        assert spec2.order == self.spec.order
        assert spec2.tau == self.spec.tau
        s = np.linspace(0.0, 5.0, 17)
        assert np.array_equal(spec2.evaluate(s), self.spec.evaluate(s))


class TestTransformEvaluation:
    def setup_method(self):
        self.spec = build_basis(np.array([0.8, 2.1, 3.3, 4.2]), 4, 5.0)

    def test_zero_at_origin(self, rng):
        alpha = rng.exponential(1.0, size=self.spec.K) + 0.01
        assert eval_H(alpha, self.spec, 0.0) == 0.0

    def test_total_weight_at_tau(self, rng):
        alpha = rng.exponential(1.0, size=self.spec.K) + 0.01
        assert abs(eval_H(alpha, self.spec, 5.0) - alpha.sum()) < 1e-12 * alpha.sum()

    def test_monotone_in_s(self, rng):
        for _ in range(50):
            alpha = rng.exponential(1.0, size=self.spec.K) + 1e-6
            s1, s2 = np.sort(rng.uniform(0.0, 5.0, size=2))
            assert eval_H(alpha, self.spec, s1) <= eval_H(alpha, self.spec, s2) + 1e-12

    def test_derivative_finite_difference(self, rng):
        alpha = rng.exponential(1.0, size=self.spec.K) + 0.01
        h = 1e-6
        for s in rng.uniform(0.1, 4.9, size=50):
            fd = (eval_H(alpha, self.spec, s + h) - eval_H(alpha, self.spec, s - h)) / (2 * h)
            hp = eval_H_prime(alpha, self.spec, s)
            assert abs(fd - hp) <= 1e-5 * max(1.0, abs(hp))

    def test_nonpositive_alpha_rejected(self, rng):
        alpha = rng.exponential(1.0, size=self.spec.K) + 0.01
        alpha[2] = 0.0
        with pytest.raises(ValidationError):
            eval_H(alpha, self.spec, 2.0)

    def test_out_of_domain_rejected(self, rng):
        alpha = rng.exponential(1.0, size=self.spec.K) + 0.01
        with pytest.raises(ValidationError):
            eval_H(alpha, self.spec, 5.5)


class TestAdditiveExpansion:
    def test_fourier_column_count(self, rng):
        z = rng.uniform(-2.0, 2.0, size=(40, 2))
        out = expand_additive_basis(z, family="fourier", k_per_covariate=8)
        assert out.shape == (40, 16)

    def test_bspline_five_interior_knots(self, rng):
        # a clamped cubic with 5 interior knots spans 9 functions
        z = rng.uniform(-2.0, 2.0, size=(60, 2))
        out = expand_additive_basis(z, family="bspline", k_per_covariate=9)
        assert out.shape == (60, 18)

    def test_row_count_preserved(self, rng):
        z = rng.normal(size=(33, 3))
        out = expand_additive_basis(z, family="fourier", k_per_covariate=4)
        assert out.shape[0] == 33

    def test_too_few_columns_rejected(self, rng):
        z = rng.normal(size=(10, 1))
        with pytest.raises(ValidationError):
            expand_additive_basis(z, family="fourier", k_per_covariate=1)

    def test_stored_ranges_reused(self, rng):
        z = rng.uniform(-2.0, 2.0, size=(50, 2))
        ranges = covariate_ranges(z)
        a = expand_additive_basis(z[:10], family="bspline", k_per_covariate=9,
                                  ranges=ranges)
        b = expand_additive_basis(z[:10], family="bspline", k_per_covariate=9,
                                  ranges=ranges)
        assert np.array_equal(a, b)
