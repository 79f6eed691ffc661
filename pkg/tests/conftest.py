"""Shared fixtures and the acceptance-summary reporter.

Acceptance tests record one line per criterion through ``record_criterion``;
the terminal-summary hook prints the collected lines at the end of the run
so every criterion's pass/fail status is visible even when pytest captures
stdout.
"""

import numpy as np
import pytest

from transmix.evalharness import SimSpec, generate
from transmix.model import Hyperparams, basis_for_dataset
from transmix.sampler import SamplerConfig, sample_posterior

_CRITERION_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    _CRITERION_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_a1_fit():
    """One compact posterior fit reused by sampler, inference, and CLI tests."""
    train, test, truth = generate(SimSpec(setting="a1", n=80, n_test=8, seed=12))
    spec = basis_for_dataset(train, n_knots=4)
    hp = Hyperparams(rate_alpha=0.25, rate_psi=0.25, rate_nu=1.0, n_components=8)
    cfg = SamplerConfig(chains=2, warmup=200, draws=150, seed=5, jobs=1)
    chains = sample_posterior(train, spec, hp, cfg)
    return {
        "train": train,
        "test": test,
        "truth": truth,
        "spec": spec,
        "hp": hp,
        "cfg": cfg,
        "chains": chains,
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
