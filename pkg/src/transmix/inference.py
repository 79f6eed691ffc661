"""Posterior predictive curves, point predictions, intervals, survival
summaries, and coefficient projection.

The predictive distribution at a new covariate row is the average over all
stored posterior draws of the draw's conditional response CDF.  Curves are
evaluated on an explicit response grid; point predictions and intervals
invert the averaged CDF by monotone linear interpolation.  The regression
coefficients, unidentified in scale, are summarized after metric projection
onto the unit sphere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec, tau_sigmoid, tau_sigmoid_derivative
from .errormix import POWER_EXPONENT_CAP
from .exceptions import ExtrapolationError, ValidationError

__all__ = [
    "PPDResult",
    "ppd_cdf",
    "ppd_pdf",
    "predicted_value",
    "prediction_interval",
    "conditional_survival",
    "conditional_cumulative_hazard_curve",
    "ProjectedBeta",
    "project_beta",
    "default_grid",
]

_DRAW_BLOCK = 256
_SATURATION_BOUND = 36.7  # |s| beyond this saturates the bounded transform


@dataclass(frozen=True)
class PPDResult:
    """Averaged predictive curves on a response grid."""

    grid: np.ndarray
    cdf: np.ndarray | None = None
    pdf: np.ndarray | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValidationError("grid must be a 1-d vector with at least 2 points")
        if np.any(np.diff(grid) <= 0.0):
            raise ValidationError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)


def _spec_from_chains(chains, spec):
    if spec is not None:
        return spec
    if chains.knots is None or chains.n_basis is None or chains.tau is None:
        raise ValidationError("chains carry no basis metadata; pass spec explicitly")
    order = int(chains.n_basis) - int(np.asarray(chains.knots).size)
    return BasisSpec(chains.knots, order=order, tau=chains.tau)


def _unpack(chains):
    """Constrained parameter blocks for every stored draw."""
    if chains.n_basis is None or chains.n_components is None:
        raise ValidationError("chains carry no model block layout")
    alpha = chains.alpha_draws()
    p, psi, nu = chains.mixture_draws()
    return alpha, p, psi, nu, chains.beta_draws()


def _squash_grid(grid, tau):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("grid must be a nonempty 1-d vector")
    if np.any(np.abs(grid) > _SATURATION_BOUND):
        warnings.warn(
            "grid extends beyond the invertible range of the bounded transform; "
            "curve values there are clipped to the boundary",
            UserWarning,
            stacklevel=3,
        )
    s_tilde = tau_sigmoid(np.clip(grid, -_SATURATION_BOUND, _SATURATION_BOUND), tau)
    return np.clip(np.asarray(s_tilde), 0.0, tau)


def _mixture_curves(chains, z_star, grid, spec, want):
    """Averaged predictive curves; ``want`` picks any of cdf/pdf/survival."""
    spec = _spec_from_chains(chains, spec)
    z_star = np.asarray(z_star, dtype=float).reshape(-1)
    if chains.n_covariates is not None and z_star.size != int(chains.n_covariates):
        raise ValidationError(
            f"z_star must have {chains.n_covariates} entries, got {z_star.size}"
        )

    s_tilde = _squash_grid(grid, spec.tau)
    basis_vals = spec.evaluate(s_tilde)
    basis_slopes = spec.derivative(s_tilde)
    squash_slope = np.asarray(tau_sigmoid_derivative(np.asarray(grid, float), spec.tau))

    alpha, p, psi, nu, beta = _unpack(chains)
    n_draws = alpha.shape[0]
    sums = {name: np.zeros(s_tilde.size) for name in want}

    for start in range(0, n_draws, _DRAW_BLOCK):
        sl = slice(start, min(start + _DRAW_BLOCK, n_draws))
        scale = np.exp(-(beta[sl] @ z_star))[:, None]
        x = (alpha[sl] @ basis_vals.T) * scale
        # Weibull power with overflow confined to the rejection-region cap
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            logx = np.where(x > 0.0, np.log(np.maximum(x, 1e-300)), -np.inf)
            power = np.exp(
                np.minimum(
                    nu[sl][:, None, :]
                    * (logx[:, :, None] - np.log(psi[sl])[:, None, :]),
                    POWER_EXPONENT_CAP,
                )
            )
            comp_surv = np.exp(-power)
        if "cdf" in want:
            sums["cdf"] += np.einsum("dl,dgl->g", p[sl], 1.0 - comp_surv)
        if "survival" in want:
            sums["survival"] += np.einsum("dl,dgl->g", p[sl], comp_surv)
        if "pdf" in want:
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                dens = (
                    nu[sl][:, None, :] / psi[sl][:, None, :]
                    * np.exp(
                        (nu[sl][:, None, :] - 1.0)
                        * (logx[:, :, None] - np.log(psi[sl])[:, None, :])
                    )
                    * comp_surv
                )
            dens = np.where(np.isfinite(dens), dens, 0.0)
            mix_dens = np.einsum("dl,dgl->dg", p[sl], dens)
            h_slope = alpha[sl] @ basis_slopes.T
            sums["pdf"] += np.sum(
                mix_dens * h_slope * scale * squash_slope[None, :], axis=0
            )

    return spec, {name: total / n_draws for name, total in sums.items()}


def ppd_cdf(chains, z_star, grid, spec=None):
    """Averaged predictive CDF at covariate row z_star on a response grid.

    Each draw contributes its conditional CDF (the draw's error-mixture CDF
    evaluated at the transform value rescaled by the draw's regression
    factor); the result is the plain average, made monotone against rounding.
    """
    _, curves = _mixture_curves(chains, z_star, grid, spec, ("cdf",))
    cdf = np.clip(np.maximum.accumulate(curves["cdf"]), 0.0, 1.0)
    return PPDResult(grid=np.asarray(grid, dtype=float), cdf=cdf)


def ppd_pdf(chains, z_star, grid, spec=None):
    """Averaged predictive density on a response grid (the exact derivative
    of :func:`ppd_cdf` draw by draw), with the CDF included."""
    _, curves = _mixture_curves(chains, z_star, grid, spec, ("cdf", "pdf"))
    cdf = np.clip(np.maximum.accumulate(curves["cdf"]), 0.0, 1.0)
    return PPDResult(
        grid=np.asarray(grid, dtype=float),
        cdf=cdf,
        pdf=np.maximum(curves["pdf"], 0.0),
    )


def _invert_cdf(grid, cdf, q):
    if cdf[0] > q or cdf[-1] < q:
        raise ExtrapolationError(
            f"target level {q} outside the CDF span [{cdf[0]:.4g}, {cdf[-1]:.4g}]; "
            "widen the grid"
        )
    idx = int(np.searchsorted(cdf, q, side="left"))
    if idx == 0:
        return float(grid[0])
    lo_c, hi_c = cdf[idx - 1], cdf[idx]
    if hi_c == lo_c:
        return float(grid[idx])
    frac = (q - lo_c) / (hi_c - lo_c)
    return float(grid[idx - 1] + frac * (grid[idx] - grid[idx - 1]))


def predicted_value(ppd, mode="median"):
    """Point prediction by inverting the averaged CDF.

    mode: "median", or a quantile level in (0, 1) (used with censored data at
    the observed censoring rate).
    """
    if ppd.cdf is None:
        raise ValidationError("PPDResult has no cdf values")
    if mode == "median":
        q = 0.5
    else:
        q = float(mode)
        if not (0.0 < q < 1.0):
            raise ValidationError(f"quantile level must lie in (0, 1), got {q}")
    return _invert_cdf(ppd.grid, ppd.cdf, q)


def prediction_interval(ppd, level=0.95):
    """Central predictive interval at the given coverage level."""
    level = float(level)
    if not (0.0 < level < 1.0):
        raise ValidationError(f"level must lie in (0, 1), got {level}")
    lo = predicted_value(ppd, (1.0 - level) / 2.0)
    hi = predicted_value(ppd, (1.0 + level) / 2.0)
    return lo, hi


def conditional_survival(chains, z_star, grid, spec=None):
    """Averaged conditional survival curve on the grid.

    Computed as the direct average of per-draw mixture survival (not one
    minus the averaged CDF), which keeps precision in the deep tail; the two
    agree to rounding.
    """
    _, curves = _mixture_curves(chains, z_star, grid, spec, ("survival",))
    surv = np.clip(curves["survival"], 0.0, 1.0)
    return np.minimum.accumulate(surv)


def conditional_cumulative_hazard_curve(chains, z_star, grid, spec=None, cap=700.0):
    """Cumulative hazard -log(survival) on the grid, capped where survival
    underflows to zero (a warning marks the cap)."""
    cap = float(cap)
    if cap <= 0.0:
        raise ValidationError("cap must be positive")
    surv = conditional_survival(chains, z_star, grid, spec)
    with np.errstate(divide="ignore"):
        lam = -np.log(surv)
    if np.any(lam > cap):
        warnings.warn(
            f"survival underflow: cumulative hazard clipped at {cap}",
            UserWarning,
            stacklevel=2,
        )
        lam = np.minimum(lam, cap)
    return lam


@dataclass(frozen=True)
class ProjectedBeta:
    """Unit-sphere projection of the regression coefficient draws."""

    draws: np.ndarray
    point: np.ndarray
    intervals: np.ndarray
    level: float
    n_dropped: int


def project_beta(chains, level=0.95):
    """Project every coefficient draw onto the unit sphere and summarize.

    Near-zero draws (norm below 1e-12) cannot be projected and are dropped,
    with the count reported.  The point estimate is the mean of the projected
    draws, itself rescaled back onto the sphere; intervals are central
    per-coordinate credible intervals of the projected draws.
    """
    level = float(level)
    if not (0.0 < level < 1.0):
        raise ValidationError(f"level must lie in (0, 1), got {level}")
    if isinstance(chains, np.ndarray):
        beta = np.asarray(chains, dtype=float)
        if beta.ndim != 2:
            raise ValidationError("beta draws must be a 2-d array")
    elif chains.n_basis is not None:
        beta = chains.beta_draws()
    elif chains.beta is not None:
        beta = chains.beta.reshape(-1, chains.beta.shape[-1])
    else:
        raise ValidationError("chains carry no coefficient draws")
    if beta.shape[1] < 1:
        raise ValidationError("no coefficients to project")

    norms = np.linalg.norm(beta, axis=1)
    keep = norms >= 1e-12
    n_dropped = int(np.sum(~keep))
    if not np.any(keep):
        raise ValidationError("every coefficient draw has near-zero norm")
    unit = beta[keep] / norms[keep][:, None]

    mean = unit.mean(axis=0)
    mean_norm = np.linalg.norm(mean)
    if mean_norm < 1e-12:
        raise ValidationError("projected draws average to the zero vector")
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    intervals = np.column_stack(
        [np.quantile(unit, lo_q, axis=0), np.quantile(unit, hi_q, axis=0)]
    )
    return ProjectedBeta(
        draws=unit,
        point=mean / mean_norm,
        intervals=intervals,
        level=level,
        n_dropped=n_dropped,
    )


def default_grid(test_y, domain, n_points=200):
    """Response grid for predictive curves: pad a real-valued span by half
    its range on both sides; run a positive-domain grid from 0 to 1.2x the
    observed maximum."""
    test_y = np.asarray(test_y, dtype=float)
    if test_y.ndim != 1 or test_y.size == 0:
        raise ValidationError("test_y must be a nonempty vector")
    n_points = int(n_points)
    if n_points < 2:
        raise ValidationError("n_points must be at least 2")
    if domain == "positive":
        return np.linspace(0.0, 1.2 * float(np.max(test_y)), n_points)
    if domain != "real":
        raise ValidationError(f"domain must be 'real' or 'positive', got {domain!r}")
    lo, hi = float(np.min(test_y)), float(np.max(test_y))
    span = hi - lo
    if span <= 0.0:
        span = max(abs(lo), 1.0)
    return np.linspace(lo - 0.5 * span, hi + 0.5 * span, n_points)
