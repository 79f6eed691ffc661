"""
Censored positive responses: survival curves and their scores
=============================================================

With right-censored event times the fit uses the survival contribution for
censored rows, knot placement interpolates the levels the censoring hides,
and predictions come out as survival and cumulative hazard curves.  The
usual survival scores apply: concordance for ranking, the integrated Brier
score for calibrated curves.

The generator caps censoring times, so the dataset builder warns that it
nudges the resulting ties apart; that is expected here.
"""

import numpy as np

from transmix.evalharness import SimSpec, c_index, generate, ibs
from transmix.inference import (
    conditional_cumulative_hazard_curve,
    conditional_survival,
)
from transmix.model import Hyperparams, basis_for_dataset
from transmix.sampler import SamplerConfig, sample_posterior

train, test, truth = generate(SimSpec(setting="b1", n=150, n_test=12, seed=4))
rate = 1.0 - train.n_events / train.n
print(f"censored benchmark: n = {train.n}, events = {train.n_events} "
      f"(censoring rate {rate:.0%})")

# knot placement cannot see the upper quantiles of the event law, so the
# missing levels are interpolated across the observed span
spec = basis_for_dataset(train, n_knots=4)
print("interior knots:", np.array2string(spec.interior_knots, precision=4))

hp = Hyperparams(rate_alpha=0.25, rate_psi=0.25, rate_nu=1.0)
cfg = SamplerConfig(chains=2, warmup=300, draws=200, seed=9, jobs=1)
print("fitting ...")
chains = sample_posterior(train, spec, hp, cfg)
print(f"divergence rate = {chains.divergence_rate():.4f}")

# survival and cumulative hazard for the first test subject; the grid
# starts at 0 so the Brier integral below can cover [0, horizon]
grid = np.linspace(0.0, 1.2 * float(train.y.max()), 250)
surv = conditional_survival(chains, test.z[0], grid)
haz = conditional_cumulative_hazard_curve(chains, test.z[0], grid)
print(f"\nrow 0 survival: S({grid[0]:.3f}) = {surv[0]:.4f}, "
      f"S({grid[-1]:.3f}) = {surv[-1]:.4f}")
assert np.all(np.diff(surv) <= 1e-12), "survival never increases"
err = np.max(np.abs(haz - (-np.log(np.maximum(surv, 1e-300)))))
print(f"cumulative hazard matches -log S within {err:.2e}")

# under heavy censoring most of each predicted law sits beyond the
# observed span, so point medians are often out of reach; the restricted
# mean survival time (area under the curve up to the horizon) is always
# finite and ranks subjects just as well (larger = later event)
curves = np.stack([conditional_survival(chains, test.z[i], grid)
                   for i in range(test.n)])
rmst = np.trapezoid(curves, grid, axis=1)
print(f"\nrestricted mean survival times: "
      f"[{rmst.min():.3f}, {rmst.max():.3f}]")
ci = c_index(rmst, test.y, test.delta.astype(int))
print(f"concordance index on {test.n} test subjects: {ci:.4f}")

# the integrated Brier score wants the whole curve per subject; keep the
# horizon inside the censored follow-up so the reweighting stays defined
horizon = 1.2
score = ibs(curves, grid, test.y, test.delta.astype(int), horizon=horizon)
print(f"integrated Brier score up to t = {horizon:.2f}: {score:.4f}")
print("(0 is perfect; 0.25 matches an uninformed constant 1/2 curve)")
