"""Observation model and posterior.

The working model: an increasing spline transform H of the bounded response
equals a multiplicative regression effect exp(beta' z) times an error drawn
from a Weibull mixture.  Uncensored observations contribute the error density
times the transform derivative; right-censored ones contribute the error
survival function.  Priors are exponential on every positive parameter block,
stick-breaking Beta on the mixture fractions, and flat (optionally diffuse
normal) on the regression coefficients.

Sampling happens on an unconstrained vector [log alpha | logit v | log psi |
log nu | beta]; the posterior there includes the usual change-of-variables
terms, and its gradient is computed analytically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logit, logsumexp

from . import _kernels
from . import basis as _basis
from .errormix import (
    POWER_EXPONENT_CAP,
    WeibullMixture,
    mixture_log_survival,
    stick_breaking_weights,
)
from .exceptions import (
    RankDeficiencyError,
    SaturatedResponseError,
    ValidationError,
)

__all__ = [
    "Dataset",
    "make_dataset",
    "Hyperparams",
    "ParamPoint",
    "to_unconstrained",
    "from_unconstrained",
    "loglik",
    "logprior",
    "logposterior_unconstrained",
    "grad_logposterior_unconstrained",
    "Posterior",
    "conditional_cumulative_hazard",
]

_SATURATION_TOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Immutable regression sample: raw responses y, event indicators delta
    (True = observed, False = right-censored), covariate matrix z, and the
    bounded transform y_tilde of the responses."""

    y: np.ndarray
    delta: np.ndarray
    z: np.ndarray
    domain: str
    tau: float
    y_tilde: np.ndarray

    @property
    def n(self):
        return self.y.size

    @property
    def n_covariates(self):
        return self.z.shape[1]

    @property
    def n_events(self):
        return int(self.delta.sum())


def make_dataset(y, z, delta=None, domain="real", tau=5.0, tie_jitter=1e-9,
                 check_rank=True):
    """Validate raw inputs and build a :class:`Dataset`.

    Tied responses are perturbed deterministically by ``tie_jitter`` relative
    steps (the model assumes a continuous response law).  Responses whose
    bounded transform lands within 1e-12 of either end of (0, tau) are
    rejected; a larger tau fixes that.  The covariate matrix must have full
    column rank on the uncensored rows, which identify the regression scale;
    pass ``check_rank=False`` for holdout sets that will only be predicted,
    never fit.
    """
    y = np.asarray(y, dtype=float).copy()
    if y.ndim != 1 or y.size == 0:
        raise ValidationError("y must be a nonempty vector")
    if not np.all(np.isfinite(y)):
        raise ValidationError("y contains non-finite values")
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] != y.size:
        raise ValidationError(f"z must be a matrix with {y.size} rows, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValidationError("z contains non-finite values")
    if delta is None:
        delta = np.ones(y.size, dtype=bool)
    else:
        delta = np.asarray(delta)
        if delta.shape != y.shape:
            raise ValidationError("delta must match y in length")
        if delta.dtype != bool:
            vals = np.unique(delta)
            if not np.all(np.isin(vals, [0, 1])):
                raise ValidationError("delta entries must be 0/1 or booleans")
            delta = delta.astype(bool)
    if domain not in ("real", "positive"):
        raise ValidationError(f"domain must be 'real' or 'positive', got {domain!r}")
    if domain == "positive" and np.any(y <= 0.0):
        raise ValidationError("positive-domain responses must be strictly positive")
    tau = float(tau)
    if not np.isfinite(tau) or tau <= 0.0:
        raise ValidationError("tau must be positive and finite")

    tie_jitter = float(tie_jitter)
    order = np.argsort(y, kind="stable")
    ys = y[order]
    dup = np.concatenate([[False], np.diff(ys) == 0.0])
    if dup.any():
        # k-th duplicate of a value moves by k relative steps; deterministic
        run = np.zeros(y.size)
        k = 0
        for i in range(1, y.size):
            k = k + 1 if dup[i] else 0
            run[i] = k
        ys = ys + run * tie_jitter * np.maximum(1.0, np.abs(ys))
        y = y.copy()
        y[order] = ys
        warnings.warn(
            f"perturbed {int(dup.sum())} tied response(s) by relative steps of {tie_jitter}",
            UserWarning,
            stacklevel=2,
        )

    y_tilde = np.asarray(_basis.tau_sigmoid(y, tau))
    bad = (y_tilde <= _SATURATION_TOL) | (y_tilde >= tau - _SATURATION_TOL)
    if np.any(bad):
        raise SaturatedResponseError(
            f"{int(bad.sum())} response(s) saturate the bounded transform within "
            f"{_SATURATION_TOL} of its range; increase tau"
        )

    if check_rank:
        n_events = int(delta.sum())
        if n_events < z.shape[1]:
            raise RankDeficiencyError(
                f"need at least {z.shape[1]} uncensored rows to identify {z.shape[1]} "
                f"coefficients, got {n_events}"
            )
        if np.linalg.matrix_rank(z[delta]) < z.shape[1]:
            raise RankDeficiencyError("covariate matrix is rank deficient on the uncensored rows")

    return Dataset(y=y, delta=delta, z=z, domain=domain, tau=tau, y_tilde=y_tilde)


def basis_for_dataset(data, n_knots=4, order=4, gap_threshold=0.05):
    """Quantile-ladder basis spec for a dataset.

    Uncensored responses set the knot ladder.  With censoring present, any
    ladder level where the overall and uncensored distribution functions
    disagree by gap_threshold or more contributes the overall-sample quantile
    as an extra knot.
    """
    y_unc = data.y_tilde[data.delta]
    if data.n_events == data.n:
        knots = _basis.select_quantile_knots(y_unc, n_knots)
    else:
        knots = _basis.interpolate_knots_censored(
            data.y_tilde, y_unc, n_knots, gap_threshold=gap_threshold
        )
    return _basis.BasisSpec(knots, order=order, tau=data.tau)


@dataclass(frozen=True)
class Hyperparams:
    """Prior and structural settings.

    rate_alpha, rate_psi, rate_nu: exponential prior rates for the transform
    weights, mixture scales, and mixture shapes.  concentration: stick-breaking
    Beta(1, c) parameter.  n_components: mixture truncation level.  n_knots:
    quantile ladder size for knot placement.  order: spline order.  tau: range
    of the bounded response transform.  beta_prior_sd: None for the flat
    improper coefficient prior, or a positive sd for a diffuse normal.
    """

    rate_alpha: float = 0.01
    rate_psi: float = 0.25
    rate_nu: float = 1.0
    concentration: float = 1.0
    n_components: int = 12
    n_knots: int = 4
    order: int = 4
    tau: float = 5.0
    beta_prior_sd: float | None = None

    def __post_init__(self):
        for name in ("rate_alpha", "rate_psi", "rate_nu", "concentration", "tau"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val <= 0.0:
                raise ValidationError(f"{name} must be positive and finite, got {val}")
            object.__setattr__(self, name, val)
        for name, lo in (("n_components", 1), ("n_knots", 2), ("order", 2)):
            val = int(getattr(self, name))
            if val < lo:
                raise ValidationError(f"{name} must be at least {lo}, got {val}")
            object.__setattr__(self, name, val)
        if self.beta_prior_sd is not None:
            sd = float(self.beta_prior_sd)
            if not np.isfinite(sd) or sd <= 0.0:
                raise ValidationError("beta_prior_sd must be positive when given")
            object.__setattr__(self, "beta_prior_sd", sd)


@dataclass(frozen=True)
class ParamPoint:
    """One point in parameter space: transform weights alpha (positive),
    stick fractions v in (0,1), mixture scales psi and shapes nu (positive),
    regression coefficients beta (unrestricted)."""

    alpha: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    nu: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float)) if np.size(self.v) else np.empty(0)
        psi = np.atleast_1d(np.asarray(self.psi, dtype=float))
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if psi.size != nu.size or psi.size != v.size + 1:
            raise ValidationError(
                "need len(psi) == len(nu) == len(v) + 1 mixture components, got "
                f"{psi.size}, {nu.size}, {v.size + 1}"
            )
        for name, arr in (("alpha", alpha), ("psi", psi), ("nu", nu)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
                raise ValidationError(f"{name} entries must be positive and finite")
        if v.size and (not np.all(np.isfinite(v)) or np.any(v <= 0.0) or np.any(v >= 1.0)):
            raise ValidationError("v entries must lie strictly inside (0, 1)")
        if not np.all(np.isfinite(beta)):
            raise ValidationError("beta entries must be finite")
        for name, arr in (("alpha", alpha), ("v", v), ("psi", psi), ("nu", nu), ("beta", beta)):
            object.__setattr__(self, name, arr)

    @property
    def mixture(self):
        return WeibullMixture(stick_breaking_weights(self.v), self.psi, self.nu)

    @property
    def dims(self):
        return self.alpha.size, self.psi.size, self.beta.size


def unconstrained_dim(n_basis, n_components, n_covariates):
    """Length of the unconstrained vector for the given block sizes."""
    return n_basis + 3 * n_components - 1 + n_covariates


def to_unconstrained(point):
    """Pack a :class:`ParamPoint` into the unconstrained sampling vector
    [log alpha | logit v | log psi | log nu | beta]."""
    return np.concatenate(
        [np.log(point.alpha), logit(point.v), np.log(point.psi), np.log(point.nu), point.beta]
    )


def from_unconstrained(u, n_basis, n_components, n_covariates):
    """Inverse of :func:`to_unconstrained` for the given block sizes."""
    u = np.asarray(u, dtype=float)
    want = unconstrained_dim(n_basis, n_components, n_covariates)
    if u.shape != (want,):
        raise ValidationError(f"expected a vector of length {want}, got shape {u.shape}")
    K, L, p = n_basis, n_components, n_covariates
    a, w, s, t = u[:K], u[K : K + L - 1], u[K + L - 1 : K + 2 * L - 1], u[K + 2 * L - 1 : K + 3 * L - 1]
    beta = u[K + 3 * L - 1 :]
    return ParamPoint(
        alpha=np.exp(a), v=expit(w), psi=np.exp(s), nu=np.exp(t), beta=beta.copy()
    )


def _log_weights_from_logits(w):
    """log of stick-breaking weights straight from logits, in log space."""
    log_v = log_expit(w)
    log_1mv = log_expit(-w)
    cums = np.concatenate([[0.0], np.cumsum(log_1mv)])
    return cums + np.concatenate([log_v, [0.0]])


class Posterior:
    """Unconstrained-space log posterior with cached design matrices.

    Bundles a dataset, a spline basis, and hyperparameters; evaluates the log
    posterior and its analytic gradient at unconstrained vectors.  Instances
    are picklable, so chains can run in separate processes.  The likelihood
    core runs compiled when numba is importable (``accelerate=False`` forces
    the vectorized reference implementation; both produce the same numbers).
    """

    def __init__(self, data, spec, hp, accelerate=True):
        if abs(spec.tau - data.tau) > 0.0:
            raise ValidationError(
                f"basis range tau={spec.tau} does not match the dataset's tau={data.tau}"
            )
        self.data = data
        self.spec = spec
        self.hp = hp
        self.accelerate = bool(accelerate)
        self.n_basis = spec.K
        self.n_components = int(hp.n_components)
        self.n_covariates = data.n_covariates
        self._B = np.ascontiguousarray(spec.evaluate(data.y_tilde))
        self._M = np.ascontiguousarray(spec.derivative(data.y_tilde))
        self._Z = np.ascontiguousarray(data.z)
        self._delta = data.delta.copy()

    @property
    def _core(self):
        # resolved per call so instances unpickle cleanly in worker processes
        return _kernels.default_core() if self.accelerate else _kernels.core_numpy

    @property
    def dim(self):
        return unconstrained_dim(self.n_basis, self.n_components, self.n_covariates)

    def _unpack(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValidationError(f"expected a vector of length {self.dim}, got shape {u.shape}")
        K, L = self.n_basis, self.n_components
        return (
            u[:K],
            u[K : K + L - 1],
            u[K + L - 1 : K + 2 * L - 1],
            u[K + 2 * L - 1 : K + 3 * L - 1],
            u[K + 3 * L - 1 :],
        )

    def logpdf(self, u):
        return self.value_and_grad(u, want_grad=False)[0]

    def value_and_grad(self, u, want_grad=True):
        """Log posterior (with change-of-variables terms) and its gradient.

        Returns (-inf, nan-vector) whenever any intermediate quantity leaves
        the float range, so callers can treat such points as rejectable.
        """
        a, w, s, t, beta = self._unpack(u)
        bad = (np.inf, np.full(self.dim, np.nan) if want_grad else None)
        if not np.all(np.isfinite(u)):
            return -bad[0], bad[1]
        # exp would overflow past ~709; such points are pure rejection regions
        if max(a.max(initial=-np.inf), s.max(initial=-np.inf), t.max(initial=-np.inf)) > 690.0:
            return -bad[0], bad[1]

        hp = self.hp
        K, L, p = self.n_basis, self.n_components, self.n_covariates
        alpha, psi, nu = np.exp(a), np.exp(s), np.exp(t)
        v = expit(w)
        logp_comp = _log_weights_from_logits(w)

        loglik, g_alpha, g_beta, g_logpsi, g_lognu, S, ok = self._core(
            self._B, self._M, self._Z, self._delta,
            alpha, s, nu, t, logp_comp, beta, POWER_EXPONENT_CAP,
        )
        if not ok:
            return -bad[0], bad[1]

        logprior_val = (
            K * np.log(hp.rate_alpha)
            - hp.rate_alpha * alpha.sum()
            + L * np.log(hp.rate_psi)
            - hp.rate_psi * psi.sum()
            + L * np.log(hp.rate_nu)
            - hp.rate_nu * nu.sum()
            + (L - 1) * np.log(hp.concentration)
            + (hp.concentration - 1.0) * log_expit(-w).sum()
        )
        if hp.beta_prior_sd is not None:
            sd = hp.beta_prior_sd
            logprior_val += -0.5 * np.sum((beta / sd) ** 2) - p * (
                0.5 * np.log(2.0 * np.pi) + np.log(sd)
            )
        log_jac = a.sum() + s.sum() + t.sum() + (log_expit(w) + log_expit(-w)).sum()

        value = loglik + logprior_val + log_jac
        if not np.isfinite(value):
            return -bad[0], bad[1]
        if not want_grad:
            return value, None

        # stick-breaking chain rule: raising fraction l moves mass into
        # component l and out of every later component
        tail = np.concatenate([np.cumsum(S[::-1])[::-1][1:], [0.0]])
        g_w = S[: L - 1] * (1.0 - v) - v * tail[: L - 1]

        g = np.empty(self.dim)
        g[:K] = alpha * (g_alpha - hp.rate_alpha) + 1.0
        g[K : K + L - 1] = g_w - (hp.concentration - 1.0) * v + (1.0 - 2.0 * v)
        g[K + L - 1 : K + 2 * L - 1] = g_logpsi - hp.rate_psi * psi + 1.0
        g[K + 2 * L - 1 : K + 3 * L - 1] = g_lognu - hp.rate_nu * nu + 1.0
        g[K + 3 * L - 1 :] = g_beta
        if hp.beta_prior_sd is not None:
            g[K + 3 * L - 1 :] -= beta / hp.beta_prior_sd**2
        if not np.all(np.isfinite(g)):
            return -bad[0], bad[1]
        return value, g


def loglik(point, data, spec):
    """Log likelihood of a parameter point.

    Uncensored rows contribute the mixture log density of the scaled
    transform value plus the log transform derivative minus the regression
    term; censored rows contribute the mixture log survival.  Returns -inf
    if the transform collapses numerically at some observation.
    """
    alpha = np.asarray(point.alpha, dtype=float)
    if alpha.shape != (spec.K,):
        raise ValidationError(f"alpha must have shape ({spec.K},), got {alpha.shape}")
    mix = point.mixture
    B = spec.evaluate(data.y_tilde)
    M = spec.derivative(data.y_tilde)
    H = B @ alpha
    Hp = M @ alpha
    b = data.z @ point.beta
    d1 = data.delta
    with np.errstate(divide="ignore"):
        logu = np.log(H) - b
        logHp = np.log(Hp)
    if not np.all(np.isfinite(logu)) or not np.all(np.isfinite(logHp[d1])):
        return -np.inf
    E = logu[:, None] * mix.nu[None, :] - mix.nu[None, :] * np.log(mix.psi)[None, :]
    lam = np.exp(np.minimum(E, POWER_EXPONENT_CAP))
    with np.errstate(divide="ignore"):
        logp = np.log(mix.p)
        R = logp[None, :] + np.log(mix.nu)[None, :] + E[d1] - logu[d1, None] - lam[d1]
        C = logp[None, :] - lam[~d1]
    total = (
        logsumexp(R, axis=1).sum()
        + logHp[d1].sum()
        - b[d1].sum()
        + logsumexp(C, axis=1).sum()
    )
    return float(total) if np.isfinite(total) else -np.inf


def logprior(point, hp):
    """Log prior density of a parameter point in constrained space
    (exponential blocks, stick-breaking Beta fractions, flat or diffuse
    normal coefficients)."""
    K = point.alpha.size
    L = point.psi.size
    if L != hp.n_components:
        raise ValidationError(f"point has {L} components but hyperparams say {hp.n_components}")
    val = (
        K * np.log(hp.rate_alpha)
        - hp.rate_alpha * point.alpha.sum()
        + L * np.log(hp.rate_psi)
        - hp.rate_psi * point.psi.sum()
        + L * np.log(hp.rate_nu)
        - hp.rate_nu * point.nu.sum()
    )
    if point.v.size:
        val += (L - 1) * np.log(hp.concentration) + (hp.concentration - 1.0) * np.sum(
            np.log1p(-point.v)
        )
    if hp.beta_prior_sd is not None:
        sd = hp.beta_prior_sd
        val += -0.5 * np.sum((point.beta / sd) ** 2) - point.beta.size * (
            0.5 * np.log(2.0 * np.pi) + np.log(sd)
        )
    return float(val)


def logposterior_unconstrained(u, data, spec, hp):
    """Log posterior on the unconstrained space, including the
    change-of-variables terms for the log and logit blocks."""
    return Posterior(data, spec, hp).logpdf(u)


def grad_logposterior_unconstrained(u, data, spec, hp):
    """Analytic gradient of :func:`logposterior_unconstrained`."""
    return Posterior(data, spec, hp).value_and_grad(u)[1]


def conditional_cumulative_hazard(point, spec, s, z):
    """Cumulative hazard at bounded-scale points s for covariate row z:
    minus the log mixture survival of H(s) exp(-beta' z).  Nonnegative and
    nondecreasing in s."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != point.beta.size:
        raise ValidationError(f"z must have {point.beta.size} entries, got {z.size}")
    H = _basis.eval_H(point.alpha, spec, s)
    arg = np.asarray(H) * np.exp(-float(point.beta @ z))
    out = -mixture_log_survival(point.mixture, arg)
    return float(out) if np.ndim(out) == 0 else out
