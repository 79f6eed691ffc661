"""Stick-breaking mixture of Weibull distributions for the multiplicative
error term.

A truncated stick-breaking construction turns L-1 fractions in (0, 1) into L
mixture weights that sum to one by telescoping.  Component densities are
Weibull with scale psi and shape nu; all tail computations go through the
log-parameterized power exp(nu * (log x - log psi)) so that extreme shapes
stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .exceptions import ValidationError

__all__ = [
    "WeibullMixture",
    "stick_breaking_weights",
    "stick_fractions_from_weights",
    "weibull_logpdf",
    "mixture_logpdf",
    "mixture_cdf",
    "mixture_survival",
    "mixture_log_survival",
    "truncation_error_bound",
]

# Cap on nu * (log x - log psi) before exponentiation.  exp(690) ~ 1e299:
# far into the rejection region yet finite even when summed over 1e4 terms.
POWER_EXPONENT_CAP = 690.0

_SIMPLEX_TOL = 1e-12


def stick_breaking_weights(v):
    """Mixture weights from stick-breaking fractions.

    With remaining stick C_1 = 1 and C_{l+1} = C_l * (1 - v_l), weight l is
    C_l - C_{l+1} (equivalently v_l * C_l) and the last weight is the
    remaining stick, so the weights sum to one by telescoping.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValidationError(f"v must be a vector, got shape {v.shape}")
    if v.size == 0:
        return np.array([1.0])
    if not np.all(np.isfinite(v)) or np.any(v <= 0.0) or np.any(v >= 1.0):
        raise ValidationError("stick fractions must lie strictly inside (0, 1)")
    stick = np.concatenate([[1.0], np.cumprod(1.0 - v)])
    p = np.empty(v.size + 1)
    p[:-1] = stick[:-1] - stick[1:]
    p[-1] = stick[-1]
    return p


def stick_fractions_from_weights(p):
    """Inverse of :func:`stick_breaking_weights` for strictly positive weights.

    Accepts a single weight vector or a batch of them (one per row). The
    stick remaining at component l is taken as the suffix sum of the
    weights, which adds positive terms instead of cancelling a prefix
    against 1 and so stays accurate for small trailing weights.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim not in (1, 2) or p.shape[-1] < 2:
        raise ValidationError("p must hold at least two weights per vector")
    rows = np.atleast_2d(p)
    if np.any(rows <= 0.0) or np.max(np.abs(rows.sum(axis=1) - 1.0)) > 1e-8:
        raise ValidationError("p must be strictly positive probability vectors")
    remaining = np.cumsum(rows[:, ::-1], axis=1)[:, ::-1]
    v = np.clip(rows[:, :-1] / remaining[:, :-1], 1e-300, 1.0 - 1e-16)
    return v[0] if p.ndim == 1 else v


@dataclass(frozen=True)
class WeibullMixture:
    """Finite Weibull mixture with weights p, scales psi, shapes nu."""

    p: np.ndarray
    psi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        if not (p.ndim == psi.ndim == nu.ndim == 1) or not (p.size == psi.size == nu.size):
            raise ValidationError("p, psi, nu must be vectors of a common length")
        if p.size == 0:
            raise ValidationError("mixture must have at least one component")
        if not np.all(np.isfinite(p)) or np.any(p < 0.0):
            raise ValidationError("weights must be finite and nonnegative")
        if abs(p.sum() - 1.0) > _SIMPLEX_TOL:
            raise ValidationError(f"weights must sum to 1 within {_SIMPLEX_TOL}, got {p.sum()!r}")
        for name, arr in (("psi", psi), ("nu", nu)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
                raise ValidationError(f"{name} entries must be positive and finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "nu", nu)

    @property
    def n_components(self):
        return self.p.size


def _log_power(x, psi, nu):
    """nu * (log x - log psi), capped; broadcasts x against (psi, nu)."""
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    e = nu * (logx - np.log(psi))
    return np.minimum(e, POWER_EXPONENT_CAP)


def weibull_logpdf(x, psi, nu):
    """Log density of the Weibull distribution, stable for extreme shapes.

    log nu - nu log psi + (nu - 1) log x - exp(nu (log x - log psi)), written
    so that tail arguments produce large negative values instead of overflow.
    Defined for x > 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValidationError("the log density requires strictly positive arguments")
    e = _log_power(x, psi, nu)
    return np.log(nu) - nu * np.log(psi) + (nu - 1.0) * np.log(x) - np.exp(e)


def _bcast(m, x):
    """Broadcast sample points against mixture components: returns (x1, shape)
    with x1 shaped (..., 1) for reduction over the trailing component axis."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValidationError("mixture support is [0, infinity)")
    return x[..., None]


def mixture_logpdf(m, x):
    """Log density of the mixture at x > 0 (log-sum-exp stabilized)."""
    x1 = _bcast(m, x)
    if np.any(x1 <= 0.0):
        raise ValidationError("the log density requires strictly positive arguments")
    with np.errstate(divide="ignore"):
        comp = weibull_logpdf(x1, m.psi, m.nu) + np.log(m.p)
    out = logsumexp(comp, axis=-1)
    return float(out) if out.ndim == 0 else out


def mixture_cdf(m, x):
    """Mixture distribution function sum_l p_l (1 - exp(-(x/psi_l)^nu_l))."""
    x1 = _bcast(m, x)
    lam = np.exp(_log_power(x1, m.psi, m.nu))
    out = np.sum(m.p * -np.expm1(-lam), axis=-1)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def mixture_survival(m, x):
    """Mixture survival function sum_l p_l exp(-(x/psi_l)^nu_l).

    Computed as a direct sum of positive terms, so it agrees with
    1 - mixture_cdf to the simplex tolerance but never cancels to a negative
    value.
    """
    x1 = _bcast(m, x)
    lam = np.exp(_log_power(x1, m.psi, m.nu))
    out = np.sum(m.p * np.exp(-lam), axis=-1)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def mixture_log_survival(m, x):
    """Log of :func:`mixture_survival`, log-sum-exp stabilized."""
    x1 = _bcast(m, x)
    lam = np.exp(_log_power(x1, m.psi, m.nu))
    with np.errstate(divide="ignore"):
        out = logsumexp(np.log(m.p) - lam, axis=-1)
    return float(out) if out.ndim == 0 else out


def truncation_error_bound(n, n_components, concentration):
    """Upper bound on the total-variation style error, over n observations,
    of truncating the infinite stick-breaking mixture at a finite number of
    components: 4 n exp(-(L - 1) / c)."""
    n = int(n)
    L = int(n_components)
    c = float(concentration)
    if n < 1 or L < 1 or not np.isfinite(c) or c <= 0.0:
        raise ValidationError("need n >= 1, n_components >= 1, concentration > 0")
    return 4.0 * n * np.exp(-(L - 1.0) / c)
