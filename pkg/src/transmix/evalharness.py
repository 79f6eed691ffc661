"""Synthetic benchmark data generators and prediction-quality metrics.

Eight data settings cover a real-valued response with a signed power
transform (four error laws), a right-censored positive response with a
log-composite transform (two error laws with two censoring schemes), and a
nonlinear additive-covariate variant.  Every generator exposes the true
conditional law through a handle so density-recovery error can be measured
exactly.  The metrics section has the usual suspects: root integrated mean
squared error, mean absolute error, Harrell's concordance index, the
inverse-probability-of-censoring-weighted integrated Brier score, and
interval coverage.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, ndtr

from .exceptions import UndefinedMetricError, ValidationError
from .model import Dataset, make_dataset

__all__ = [
    "SETTINGS",
    "SimSpec",
    "TruthHandle",
    "signed_power_transform",
    "inverse_signed_power_transform",
    "generate",
    "rimse",
    "mae",
    "c_index",
    "ibs",
    "coverage_probability",
]

SETTINGS = ("a1", "a2", "a3", "a4", "b1", "b2", "c1", "c2")

_UNIT3 = np.full(3, math.sqrt(3.0) / 3.0)


@dataclass(frozen=True)
class SimSpec:
    """One benchmark configuration: which setting, sizes, and the seed."""

    setting: str
    n: int = 200
    n_test: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValidationError(
                f"unknown setting {self.setting!r}; choose one of {', '.join(SETTINGS)}"
            )
        if int(self.n) < 10:
            raise ValidationError(f"n must be at least 10, got {self.n}")
        if int(self.n_test) < 1:
            raise ValidationError(f"n_test must be at least 1, got {self.n_test}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "n_test", int(self.n_test))
        object.__setattr__(self, "seed", int(self.seed))


# ---------------------------------------------------------------------------
# transforms

def signed_power_transform(t, power_param=0.5):
    """Signed power map g(t) = (sign(t) |t|^p - 1) / p.

    This is the classic variance-stabilizing power transform extended to the
    whole real line by odd reflection; p = 0.5 gives a signed square root.
    """
    p = float(power_param)
    if p <= 0.0:
        raise ValidationError(f"power parameter must be positive, got {p}")
    t = np.asarray(t, dtype=float)
    out = (np.sign(t) * np.abs(t) ** p - 1.0) / p
    return float(out) if out.ndim == 0 else out


def inverse_signed_power_transform(x, power_param=0.5):
    """Inverse of :func:`signed_power_transform`:
    sign(p*x + 1) |p*x + 1|^(1/p)."""
    p = float(power_param)
    if p <= 0.0:
        raise ValidationError(f"power parameter must be positive, got {p}")
    x = np.asarray(x, dtype=float)
    u = p * x + 1.0
    out = np.sign(u) * np.abs(u) ** (1.0 / p)
    return float(out) if out.ndim == 0 else out


def _real_transform(s):
    """True monotone transform for the real-response settings (the inverse
    signed square-root map) and its derivative."""
    s = np.asarray(s, dtype=float)
    u = 0.5 * s + 1.0
    return np.sign(u) * u * u, np.abs(u)


# log-composite transform for the positive-response settings
_PHI_SD = 0.3
_C0 = -(0.5 * ndtr(-1.0 / _PHI_SD) + 0.5 * ndtr(-3.0 / _PHI_SD))


def _positive_transform(t):
    """True transform on (0, inf) for the censored settings, plus derivative.

    log of the product of a shifted root-linear term and a two-bump normal
    CDF mixture anchored to vanish at zero, so the transform runs from -inf
    at 0+ to +inf.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValidationError("positive-domain transform needs t > 0")
    root = np.sqrt(t)
    a = 0.8 * t + root + 0.825
    da = 0.8 + 0.5 / root
    b = 0.5 * ndtr((t - 1.0) / _PHI_SD) + 0.5 * ndtr((t - 3.0) / _PHI_SD) + _C0
    db = 0.5 * _norm_pdf((t - 1.0) / _PHI_SD) / _PHI_SD + 0.5 * _norm_pdf(
        (t - 3.0) / _PHI_SD
    ) / _PHI_SD
    return np.log(a) + np.log(b), da / a + db / b


def _invert_positive_transform(w):
    """Solve the positive-domain transform for its argument, elementwise."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    out = np.empty_like(w)
    f = lambda t, target: _positive_transform(t)[0] - target
    for i, target in enumerate(w):
        lo, hi = 1e-8, 4.0
        while f(lo, target) > 0.0:
            lo *= 1e-4
            if lo < 1e-250:
                raise ValidationError(f"transform inversion bracket failed at {target}")
        while f(hi, target) < 0.0:
            hi *= 4.0
            if hi > 1e12:
                raise ValidationError(f"transform inversion bracket failed at {target}")
        out[i] = brentq(f, lo, hi, args=(target,), xtol=1e-13, rtol=4 * np.finfo(float).eps)
    return out


# ---------------------------------------------------------------------------
# error laws

def _norm_pdf(x):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / math.sqrt(2.0 * math.pi)


class _ErrorLaw:
    """Sampling plus exact pdf/cdf for one model-error distribution."""

    def __init__(self, name, sample, pdf, cdf):
        self.name = name
        self.sample = sample
        self.pdf = pdf
        self.cdf = cdf


def _mixture_pdf(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * _norm_pdf((x + 0.5) / 0.5) / 0.5 + 0.5 * _norm_pdf(x - 1.5)


def _mixture_cdf(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * ndtr((x + 0.5) / 0.5) + 0.5 * ndtr(x - 1.5)


def _sample_mixture(rng, n):
    lower = rng.random(n) < 0.5
    mu = np.where(lower, -0.5, 1.5)
    sd = np.where(lower, 0.5, 1.0)
    return mu + sd * rng.standard_normal(n)


# far-tail exp() overflow collapses to the correct 0/1 limits
def _gumbel_max_pdf(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(-x - np.exp(-x))


def _gumbel_max_cdf(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(-x))


def _ev_min_pdf(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(x - np.exp(x))


def _ev_min_cdf(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return -np.expm1(-np.exp(x))


_ERROR_LAWS = {
    "normal": _ErrorLaw(
        "normal",
        lambda rng, n: rng.standard_normal(n),
        _norm_pdf,
        lambda x: ndtr(np.asarray(x, dtype=float)),
    ),
    # bimodal, asymmetric, non-central
    "normal_mixture": _ErrorLaw(
        "normal_mixture", _sample_mixture, _mixture_pdf, _mixture_cdf
    ),
    "gumbel_max": _ErrorLaw(
        "gumbel_max",
        lambda rng, n: rng.gumbel(0.0, 1.0, n),
        lambda x: _gumbel_max_pdf(x),
        lambda x: _gumbel_max_cdf(x),
    ),
    "logistic": _ErrorLaw(
        "logistic",
        lambda rng, n: rng.logistic(0.0, 1.0, n),
        lambda x: expit(np.asarray(x, float)) * expit(-np.asarray(x, float)),
        lambda x: expit(np.asarray(x, float)),
    ),
    # minimum extreme value: the proportional-hazards error law
    "extreme_value_min": _ErrorLaw(
        "extreme_value_min",
        lambda rng, n: -rng.gumbel(0.0, 1.0, n),
        lambda x: _ev_min_pdf(x),
        lambda x: _ev_min_cdf(x),
    ),
}

_SETTING_ERROR = {
    "a1": "normal",
    "a2": "normal_mixture",
    "a3": "gumbel_max",
    "a4": "logistic",
    "b1": "extreme_value_min",
    "b2": "normal_mixture",
    "c1": "normal",
    "c2": "normal_mixture",
}


def _additive_f1(x):
    x = np.asarray(x, dtype=float)
    return -x + math.pi * np.sin(math.pi * x)


def _additive_f2(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * x + 15.0 * _norm_pdf(2.0 * (x - 0.2)) - _norm_pdf(x + 0.4)


# ---------------------------------------------------------------------------
# truth handles

@dataclass(frozen=True)
class TruthHandle:
    """Exact conditional law of the response given covariates for one
    setting.

    ``pdf``/``cdf``/``survival`` evaluate the true conditional density,
    distribution, and survival functions at response points s (any shape)
    for a single covariate row z.
    """

    setting: str
    beta: np.ndarray | None

    def _location(self, z):
        z = np.asarray(z, dtype=float).reshape(-1)
        if self.setting.startswith("c"):
            if z.size != 2:
                raise ValidationError(f"setting {self.setting} uses 2 covariates")
            return float(_additive_f1(z[0]) + _additive_f2(z[1]))
        if z.size != self.beta.size:
            raise ValidationError(f"expected {self.beta.size} covariates, got {z.size}")
        return float(z @ self.beta)

    def _law(self):
        return _ERROR_LAWS[_SETTING_ERROR[self.setting]]

    def _transformed(self, s):
        s = np.asarray(s, dtype=float)
        if self.setting.startswith("b"):
            return _positive_transform(s)
        return _real_transform(s)

    def pdf(self, s, z):
        value, slope = self._transformed(s)
        out = self._law().pdf(value - self._location(z)) * slope
        return float(out) if out.ndim == 0 else out

    def cdf(self, s, z):
        value, _ = self._transformed(s)
        out = self._law().cdf(value - self._location(z))
        return float(out) if out.ndim == 0 else out

    def survival(self, s, z):
        out = 1.0 - np.asarray(self.cdf(s, z))
        return float(out) if out.ndim == 0 else out

    def location(self, z):
        """True regression surface value (the model's linear or additive
        predictor) at one covariate row."""
        return self._location(z)


# ---------------------------------------------------------------------------
# generation

def _ar_covariance(size, corr=0.75):
    idx = np.arange(size)
    return corr ** np.abs(idx[:, None] - idx[None, :])


def _draw_setting(setting, n, rng):
    """One sample of (z, y, delta) from a setting's generative model."""
    law = _ERROR_LAWS[_SETTING_ERROR[setting]]
    eps = law.sample(rng, n)

    if setting.startswith("a"):
        chol = np.linalg.cholesky(_ar_covariance(3))
        z = rng.standard_normal((n, 3)) @ chol.T
        y = signed_power_transform(z @ _UNIT3 + eps)
        return z, y, None

    if setting.startswith("c"):
        z = rng.uniform(-2.0, 2.0, size=(n, 2))
        loc = _additive_f1(z[:, 0]) + _additive_f2(z[:, 1])
        y = signed_power_transform(loc + eps)
        return z, y, None

    # censored positive-response settings
    z1 = rng.binomial(1, 0.5, size=n).astype(float)
    chol = np.linalg.cholesky(_ar_covariance(2))
    z23 = rng.standard_normal((n, 2)) @ chol.T
    z = np.column_stack([z1, z23])
    event = _invert_positive_transform(z @ _UNIT3 + eps)
    if setting == "b1":
        censor = np.minimum(rng.exponential(1.0, size=n), 1.5)
    else:
        censor = rng.uniform(1.0, 3.5, size=n)
    y = np.minimum(event, censor)
    delta = (event <= censor).astype(np.int64)
    return z, y, delta


def generate(sim):
    """Draw the training and test sets of one benchmark configuration.

    Training and test use independent child streams of the configuration
    seed, so the pair is jointly reproducible and the test set does not
    shift when only n changes.  Returns (train, test, truth) where truth is
    a :class:`TruthHandle` for the exact conditional law.
    """
    if not isinstance(sim, SimSpec):
        sim = SimSpec(**sim) if isinstance(sim, dict) else SimSpec(*sim)
    train_seq, test_seq = np.random.SeedSequence(sim.seed).spawn(2)

    domain = "positive" if sim.setting.startswith("b") else "real"
    z, y, delta = _draw_setting(sim.setting, sim.n, np.random.default_rng(train_seq))
    train = make_dataset(y, z, delta=delta, domain=domain)
    z, y, delta = _draw_setting(
        sim.setting, sim.n_test, np.random.default_rng(test_seq)
    )
    test = make_dataset(y, z, delta=delta, domain=domain, check_rank=False)

    beta = None if sim.setting.startswith("c") else _UNIT3.copy()
    return train, test, TruthHandle(setting=sim.setting, beta=beta)


# ---------------------------------------------------------------------------
# metrics

def _metric_vec(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d vector")
    return x


def rimse(f_hat, f_true, grid):
    """Root integrated squared error between two densities on a shared grid
    (trapezoidal quadrature)."""
    f_hat = _metric_vec(f_hat, "f_hat")
    f_true = _metric_vec(f_true, "f_true")
    grid = _metric_vec(grid, "grid")
    if not (f_hat.size == f_true.size == grid.size):
        raise ValidationError(
            f"length mismatch: {f_hat.size}, {f_true.size}, {grid.size}"
        )
    if np.any(np.diff(grid) <= 0.0):
        raise ValidationError("grid must be strictly increasing")
    return float(np.sqrt(np.trapezoid((f_hat - f_true) ** 2, grid)))


def mae(pred, truth):
    """Mean absolute prediction error."""
    pred = _metric_vec(pred, "pred")
    truth = _metric_vec(truth, "truth")
    if pred.size != truth.size:
        raise ValidationError(f"length mismatch: {pred.size} vs {truth.size}")
    return float(np.mean(np.abs(pred - truth)))


def c_index(pred_scores, times, delta=None):
    """Harrell's concordance index.

    A pair (i, j) is comparable when t_i < t_j and subject i had the event;
    it is concordant when the predicted score (a predicted time: larger
    means later) orders the pair the same way.  Score ties count one half.
    """
    scores = _metric_vec(pred_scores, "pred_scores")
    times = _metric_vec(times, "times")
    if delta is None:
        delta = np.ones(times.size)
    delta = _metric_vec(delta, "delta")
    if not (scores.size == times.size == delta.size):
        raise ValidationError("pred_scores, times, delta must share a length")

    concordant = 0.0
    comparable = 0
    for i in range(times.size):
        if delta[i] != 1:
            continue
        later = times > times[i]
        comparable += int(np.sum(later))
        concordant += np.sum(scores[later] > scores[i]) + 0.5 * np.sum(
            scores[later] == scores[i]
        )
    if comparable == 0:
        raise UndefinedMetricError("no comparable pairs for the concordance index")
    return float(concordant / comparable)


def _censoring_survival_km(times, delta):
    """Kaplan-Meier estimate of the censoring survival function, returned as
    step-function knots (t_k, G(t_k)) with G left-continuous lookups done by
    the caller."""
    order = np.argsort(times, kind="stable")
    t = times[order]
    censored = delta[order] == 0
    uniq = np.unique(t)
    g = 1.0
    steps_t, steps_g = [], []
    for tk in uniq:
        at_risk = np.sum(t >= tk)
        d = np.sum(censored & (t == tk))
        if d > 0:
            g *= 1.0 - d / at_risk
            steps_t.append(tk)
            steps_g.append(g)
    return np.asarray(steps_t), np.asarray(steps_g)


def _km_eval(steps_t, steps_g, x, left=False):
    """Step-function lookup; ``left`` gives the left limit G(x-)."""
    x = np.asarray(x, dtype=float)
    if steps_t.size == 0:
        return np.ones_like(x)
    side = "left" if left else "right"
    idx = np.searchsorted(steps_t, x, side=side)
    return np.where(idx == 0, 1.0, steps_g[np.maximum(idx - 1, 0)])


def ibs(surv_curves, grid, times, delta, horizon):
    """Integrated Brier score with inverse-probability-of-censoring weights.

    surv_curves is an (n_subjects, n_grid) array of predicted survival
    probabilities on ``grid``.  Each time point's Brier score weights
    subjects with an observed earlier event by the inverse censoring
    survival at their event time, and still-at-risk subjects by the inverse
    censoring survival at the evaluation time (the standard reweighting
    that makes the score unbiased under independent censoring).  The score
    is averaged over [0, horizon].  If the censoring estimate hits zero
    before the horizon the integral is truncated there, with a warning.
    """
    surv = np.asarray(surv_curves, dtype=float)
    grid = _metric_vec(grid, "grid")
    times = _metric_vec(times, "times")
    if delta is None:
        delta = np.ones(times.size)
    delta = _metric_vec(delta, "delta")
    horizon = float(horizon)
    if surv.ndim != 2 or surv.shape != (times.size, grid.size):
        raise ValidationError(
            f"surv_curves must have shape ({times.size}, {grid.size}), got {surv.shape}"
        )
    if np.any(np.diff(grid) <= 0.0):
        raise ValidationError("grid must be strictly increasing")
    if grid[0] > 0.0 or grid[-1] < horizon:
        raise ValidationError("grid must span [0, horizon]")

    keep = grid <= horizon
    eval_t = grid[keep]
    curves = surv[:, keep]

    steps_t, steps_g = _censoring_survival_km(times, delta)
    g_at_event = _km_eval(steps_t, steps_g, times, left=True)
    g_at_t = _km_eval(steps_t, steps_g, eval_t)

    valid = g_at_t > 0.0
    if not np.all(valid):
        cut = eval_t[~valid][0]
        warnings.warn(
            f"censoring survival reaches 0 at t={cut:g}; Brier integral truncated there",
            UserWarning,
            stacklevel=2,
        )
        eval_t = eval_t[valid]
        curves = curves[:, valid]
        g_at_t = g_at_t[valid]
        if eval_t.size < 2:
            raise ValidationError("too little usable grid before censoring collapse")

    event_before = (times[:, None] <= eval_t[None, :]) & (delta[:, None] == 1)
    at_risk = times[:, None] > eval_t[None, :]

    with np.errstate(divide="ignore"):
        w_event = np.where(g_at_event > 0.0, 1.0 / g_at_event, 0.0)[:, None]
    brier_terms = (
        event_before * (curves**2) * w_event
        + at_risk * ((1.0 - curves) ** 2) / g_at_t[None, :]
    )
    bs = brier_terms.mean(axis=0)
    return float(np.trapezoid(bs, eval_t) / eval_t[-1])


def coverage_probability(intervals, truths):
    """Fraction of true values falling inside their intervals (inclusive)."""
    arr = np.asarray(intervals, dtype=float)
    truths = _metric_vec(truths, "truths")
    if arr.ndim != 2 or arr.shape != (truths.size, 2):
        raise ValidationError(
            f"intervals must have shape ({truths.size}, 2), got {arr.shape}"
        )
    lo, hi = arr[:, 0], arr[:, 1]
    if np.any(hi < lo):
        raise ValidationError("interval upper bounds must not fall below lower bounds")
    return float(np.mean((truths >= lo) & (truths <= hi)))
