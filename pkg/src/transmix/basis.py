"""Bounded response transform and monotone spline basis.

The response is first squashed into a bounded interval (0, tau) by a scaled
logistic map.  On that interval an increasing transform is represented as a
nonnegative combination of integrated splines: each basis function rises from
0 at the left boundary to exactly 1 at tau, so any coefficient vector with
positive entries yields a strictly increasing function through the origin.
Knots are placed at empirical quantiles of the transformed responses, with an
interpolation step that inserts extra knots where censoring distorts the
uncensored-only quantiles.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import expit

from .exceptions import DegenerateKnotsError, ValidationError

__all__ = [
    "tau_sigmoid",
    "tau_sigmoid_inverse",
    "tau_sigmoid_derivative",
    "empirical_cdf",
    "empirical_quantile",
    "select_quantile_knots",
    "interpolate_knots_censored",
    "BasisSpec",
    "build_basis",
    "eval_H",
    "eval_H_prime",
    "covariate_ranges",
    "expand_additive_basis",
]


def _as_finite_array(x, name, ndim=None):
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _check_tau(tau):
    tau = float(tau)
    if not np.isfinite(tau) or tau <= 0.0:
        raise ValidationError(f"tau must be a positive finite number, got {tau}")
    return tau


def tau_sigmoid(y, tau=5.0):
    """Map real responses into (0, tau) by the scaled logistic function.

    Strictly increasing; stable in both tails (no overflow for any finite
    input).  Returns a scalar for scalar input.
    """
    tau = _check_tau(tau)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValidationError("responses must be finite")
    out = tau * expit(y)
    return float(out) if np.isscalar(y) or out.ndim == 0 else out


def tau_sigmoid_inverse(t, tau=5.0):
    """Inverse of :func:`tau_sigmoid`; domain is the open interval (0, tau)."""
    tau = _check_tau(tau)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t <= 0.0) or np.any(t >= tau):
        raise ValidationError("values must lie strictly inside (0, tau)")
    out = np.log(t) - np.log(tau - t)
    return float(out) if out.ndim == 0 else out


def tau_sigmoid_derivative(y, tau=5.0):
    """Derivative of :func:`tau_sigmoid` with respect to the raw response.

    Equals v * (tau - v) / tau where v is the transformed value; vanishes in
    both tails.
    """
    tau = _check_tau(tau)
    v = tau_sigmoid(y, tau)
    out = np.asarray(v) * (tau - np.asarray(v)) / tau
    return float(out) if out.ndim == 0 else out


def empirical_cdf(sample, x):
    """Right-continuous empirical distribution function P(sample <= x)."""
    sample = np.sort(_as_finite_array(sample, "sample", ndim=1))
    x = np.asarray(x, dtype=float)
    out = np.searchsorted(sample, x, side="right") / sample.size
    return float(out) if out.ndim == 0 else out


def empirical_quantile(sample, q):
    """Generalized-inverse empirical quantile: the smallest sample value s
    with q <= fraction of observations at or below s.

    The 0th quantile is the sample minimum (rather than -infinity).
    """
    sample = _as_finite_array(sample, "sample", ndim=1)
    q = np.asarray(q, dtype=float)
    if np.any(q < 0.0) or np.any(q > 1.0):
        raise ValidationError("quantile levels must lie in [0, 1]")
    out = np.quantile(sample, q, method="inverted_cdf")
    return float(out) if out.ndim == 0 else np.asarray(out, dtype=float)


def select_quantile_knots(y_tilde, n_knots=4):
    """Place interior knots at the 0, 1/N, ..., (N-1)/N empirical quantiles
    of the transformed responses, collapsing duplicates with a warning.

    Returns the sorted, strictly increasing knot vector.
    """
    y = _as_finite_array(y_tilde, "y_tilde", ndim=1)
    n_knots = int(n_knots)
    if n_knots < 2:
        raise ValidationError(f"n_knots must be at least 2, got {n_knots}")
    n_distinct = np.unique(y).size
    if n_distinct < n_knots:
        raise DegenerateKnotsError(
            f"requested {n_knots} knots but the sample has only {n_distinct} distinct values"
        )
    levels = np.arange(n_knots) / n_knots
    raw = empirical_quantile(y, levels)
    knots = np.unique(raw)
    if knots.size < raw.size:
        warnings.warn(
            f"collapsed {raw.size - knots.size} duplicate quantile knot(s)",
            UserWarning,
            stacklevel=2,
        )
    return knots


# Empirical CDF gaps are ratios of integers; this slack only absorbs binary
# rounding of their difference, never a statistically meaningful margin.
_GAP_ROUNDING_SLACK = 1e-12


def interpolate_knots_censored(y_all, y_uncensored, n_knots=4, gap_threshold=0.05):
    """Knot placement for censored samples.

    Starts from the quantile knots of the uncensored transformed responses.
    Wherever the all-observation empirical CDF and the uncensored-only
    empirical CDF disagree by at least ``gap_threshold`` at an initial knot,
    the corresponding quantile of the full sample is inserted as an extra
    knot.  Returns the sorted union; with no censoring the output equals the
    uncensored-only knots.
    """
    y_all = _as_finite_array(y_all, "y_all", ndim=1)
    y_unc = _as_finite_array(y_uncensored, "y_uncensored", ndim=1)
    if not np.all(np.isin(y_unc, y_all)):
        raise ValidationError("y_uncensored must be a subset of y_all")
    gap_threshold = float(gap_threshold)
    if not (0.0 < gap_threshold < 1.0):
        raise ValidationError("gap_threshold must lie in (0, 1)")

    n_knots = int(n_knots)
    initial = select_quantile_knots(y_unc, n_knots)
    levels = np.arange(n_knots) / n_knots
    ladder = empirical_quantile(y_unc, levels)

    extras = []
    gaps = np.abs(
        np.asarray(empirical_cdf(y_all, ladder)) - np.asarray(empirical_cdf(y_unc, ladder))
    )
    for level, gap in zip(levels, gaps):
        if gap >= gap_threshold - _GAP_ROUNDING_SLACK:
            extras.append(empirical_quantile(y_all, level))
    return np.unique(np.concatenate([initial, np.asarray(extras, dtype=float)]))


class BasisSpec:
    """Integrated spline basis of a given order over (0, tau).

    Holds J strictly increasing interior knots; the basis has K = J + order
    functions.  ``evaluate`` returns the integrated (increasing) basis values
    in [0, 1]; ``derivative`` returns the corresponding density-like basis,
    which is nonnegative and integrates to one per function.
    """

    def __init__(self, interior_knots, order=4, tau=5.0):
        tau = _check_tau(tau)
        knots = _as_finite_array(interior_knots, "interior_knots", ndim=1).copy()
        order = int(order)
        if order < 2:
            raise ValidationError(f"order must be at least 2, got {order}")
        if np.any(np.diff(knots) <= 0.0):
            raise ValidationError("interior knots must be strictly increasing")
        if knots[0] <= 0.0 or knots[-1] >= tau:
            raise ValidationError("interior knots must lie strictly inside (0, tau)")
        self.interior_knots = knots
        self.order = order
        self.tau = tau
        self.K = knots.size + order

        t = np.concatenate([np.zeros(order), knots, np.full(order, tau)])
        self._t = t
        self._bspl = BSpline(t, np.eye(self.K), order - 1, extrapolate=False)
        self._ibspl = self._bspl.antiderivative()
        # per-function normalization turning B-splines into unit-integral splines
        self._norm = order / (t[order : order + self.K] - t[: self.K])
        self._i0 = self._ibspl(0.0)

    def _prep(self, s):
        s_arr = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s_arr)):
            raise ValidationError("evaluation points must be finite")
        if np.any(s_arr < 0.0) or np.any(s_arr > self.tau):
            raise ValidationError("evaluation points must lie in [0, tau]")
        return s_arr

    def evaluate(self, s):
        """Integrated basis values at s; shape ``s.shape + (K,)``.

        Each column rises monotonically from exactly 0 at s = 0 to exactly 1
        at s = tau.
        """
        s_arr = self._prep(s)
        vals = (self._ibspl(s_arr) - self._i0) * self._norm
        np.clip(vals, 0.0, 1.0, out=vals)
        vals[np.asarray(s_arr == 0.0)] = 0.0
        vals[np.asarray(s_arr == self.tau)] = 1.0
        return vals

    def derivative(self, s):
        """Density-like basis values (derivative of ``evaluate``) at s."""
        s_arr = self._prep(s)
        vals = self._bspl(s_arr) * self._norm
        np.clip(vals, 0.0, None, out=vals)
        return vals

    def to_dict(self):
        return {
            "interior_knots": self.interior_knots.tolist(),
            "order": self.order,
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["interior_knots"], dtype=float), d["order"], d["tau"])

    def __repr__(self):
        kn = np.array2string(self.interior_knots, precision=4)
        return f"BasisSpec(J={self.interior_knots.size}, order={self.order}, tau={self.tau}, knots={kn})"


def build_basis(knots, order=4, tau=5.0):
    """Construct a :class:`BasisSpec` from an interior knot vector."""
    return BasisSpec(knots, order=order, tau=tau)


def _check_alpha(alpha, spec):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (spec.K,):
        raise ValidationError(f"alpha must have shape ({spec.K},), got {alpha.shape}")
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
        raise ValidationError("alpha entries must be positive and finite")
    return alpha


def eval_H(alpha, spec, s):
    """Increasing transform value sum_j alpha_j * basis_j(s).

    Zero at s = 0 and sum(alpha) at s = tau, strictly increasing in between
    for positive coefficients.
    """
    alpha = _check_alpha(alpha, spec)
    out = spec.evaluate(s) @ alpha
    return float(out) if out.ndim == 0 else out


def eval_H_prime(alpha, spec, s):
    """Derivative of :func:`eval_H` with respect to s."""
    alpha = _check_alpha(alpha, spec)
    out = spec.derivative(s) @ alpha
    return float(out) if out.ndim == 0 else out


def covariate_ranges(z):
    """Per-column (min, max) of a covariate matrix, for reuse at prediction
    time by :func:`expand_additive_basis`."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    ranges = []
    for j in range(z.shape[1]):
        lo, hi = float(np.min(z[:, j])), float(np.max(z[:, j]))
        if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
            raise ValidationError(f"covariate column {j} has a degenerate range [{lo}, {hi}]")
        ranges.append((lo, hi))
    return ranges


def expand_additive_basis(z, family="bspline", k_per_covariate=9, ranges=None):
    """Expand each covariate column into ``k_per_covariate`` basis columns.

    family "fourier": alternating sin/cos of increasing frequency on the
    min/max-rescaled covariate.  family "bspline": clamped cubic spline
    columns with equally spaced interior knots (k - 4 of them for k >= 4).
    Pass ``ranges`` (from :func:`covariate_ranges` on the training matrix) to
    reuse training-time scaling on new data; new values are clipped into the
    training range.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.size == 0:
        raise ValidationError(f"z must be a nonempty 2-d matrix, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValidationError("z contains non-finite values")
    k = int(k_per_covariate)
    if k < 2:
        raise ValidationError(f"k_per_covariate must be at least 2, got {k}")
    if family not in ("fourier", "bspline"):
        raise ValidationError(f"unknown expansion family {family!r}")
    if ranges is None:
        ranges = covariate_ranges(z)
    if len(ranges) != z.shape[1]:
        raise ValidationError("ranges must have one (min, max) pair per covariate column")

    blocks = []
    for j in range(z.shape[1]):
        lo, hi = ranges[j]
        if hi <= lo:
            raise ValidationError(f"range for column {j} is degenerate")
        x = np.clip((z[:, j] - lo) / (hi - lo), 0.0, 1.0)
        if family == "fourier":
            cols = np.empty((x.size, k))
            for idx in range(k):
                m = idx // 2 + 1
                cols[:, idx] = np.sin(2 * np.pi * m * x) if idx % 2 == 0 else np.cos(2 * np.pi * m * x)
        else:
            degree = min(3, k - 1)
            n_interior = k - (degree + 1)
            interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
            t = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
            cols = BSpline(t, np.eye(k), degree, extrapolate=False)(x)
        blocks.append(cols)
    return np.hstack(blocks)
