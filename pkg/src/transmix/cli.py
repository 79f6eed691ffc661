"""Command-line surface: flat key=value configuration, CSV/JSON artifacts,
and run reports tying the pipeline together.

Subcommands: simulate, fit, tune, predict, evaluate, diagnose.  Every config
key has a matching command-line flag that overrides it one for one.  Numeric
output is printed with 17 significant digits so runs can be replayed and
compared exactly.  Exit codes: 0 success, 2 validation error, 3 tuning
failure, 4 sampler pathology (more than 10% divergent transitions).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .basis import BasisSpec, covariate_ranges, expand_additive_basis
from .diagnostics import bulk_ess, split_rank_normalized_rhat, within_chain_variance
from .errormix import stick_fractions_from_weights
from .evalharness import (
    SimSpec,
    c_index,
    coverage_probability,
    generate,
    ibs,
    mae,
    rimse,
)
from .exceptions import ExtrapolationError, TransmixError, ValidationError
from .inference import (
    conditional_cumulative_hazard_curve,
    conditional_survival,
    ppd_cdf,
    ppd_pdf,
    predicted_value,
    prediction_interval,
    project_beta,
)
from .informativeness import DEFAULT_ZETA_LADDER, tune, vtilde_curve
from .model import Hyperparams, basis_for_dataset, make_dataset
from .sampler import ChainSet, SamplerConfig, sample_posterior

__all__ = [
    "main",
    "RunConfig",
    "load_config_file",
    "read_input_csv",
    "read_covariates_csv",
    "read_draws_csv",
    "write_draws_csv",
]

_FMT = ".17g"
_DIVERGENCE_LIMIT = 0.10

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TUNING = 3
EXIT_SAMPLER = 4


def _fmt(x):
    return format(float(x), _FMT)


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text):
    vals = tuple(float(tok) for tok in text.split(",") if tok.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


# key -> (default string, converter); "" means unset for path-like keys
KEY_SPECS = {
    # prior and structural settings
    "eta": ("0.01", float),
    "zeta": ("0.25", float),
    "rho": ("1.0", float),
    "concentration": ("1.0", float),
    "n_components": ("12", int),
    "n_knots": ("4", int),
    "order": ("4", int),
    "tau": ("5.0", float),
    "domain": ("real", str),
    "gap_threshold": ("0.05", float),
    # sampler
    "chains": ("4", int),
    "warmup": ("500", int),
    "draws": ("500", int),
    "target_accept": ("0.8", float),
    "max_tree_depth": ("10", int),
    "jobs": ("1", int),
    "seed": ("0", int),
    "accelerate": ("true", _parse_bool),
    # tuning
    "budget": ("4", int),
    "zeta_ladder": (",".join(str(z) for z in DEFAULT_ZETA_LADDER), _parse_floats),
    # prediction grids and summaries
    "n_grid": ("200", int),
    "level": ("0.95", float),
    "mode": ("auto", str),
    "quantile": ("", str),
    "grid_lo": ("", str),
    "grid_hi": ("", str),
    # covariate expansion
    "expand": ("none", str),
    "expand_k": ("9", int),
    # simulation + evaluation
    "setting": ("a1", str),
    "n": ("200", int),
    "n_test": ("20", int),
    # paths
    "input": ("", str),
    "covariates": ("", str),
    "draws_csv": ("", str),
    "predictions": ("", str),
    "curves": ("", str),
    "output_dir": (".", str),
}


class RunConfig:
    """Resolved configuration: defaults, then config-file keys, then flags."""

    def __init__(self, mapping):
        unknown = sorted(set(mapping) - set(KEY_SPECS))
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
        for key, (default, conv) in KEY_SPECS.items():
            raw = mapping.get(key, default)
            try:
                value = conv(raw) if raw != "" or conv is str else ""
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"bad value for {key}: {raw!r} ({exc})") from None
            setattr(self, key, value)
        self.resolved = {key: str(mapping.get(key, KEY_SPECS[key][0])) for key in KEY_SPECS}
        if self.domain not in ("real", "positive"):
            raise ValidationError(f"domain must be 'real' or 'positive', got {self.domain!r}")
        if self.mode not in ("auto", "median", "quantile"):
            raise ValidationError(f"mode must be auto, median, or quantile, got {self.mode!r}")
        if self.expand not in ("none", "bspline", "fourier"):
            raise ValidationError(f"expand must be none, bspline, or fourier, got {self.expand!r}")
        if not (0.0 < self.level < 1.0):
            raise ValidationError(f"level must lie in (0, 1), got {self.level}")

    def hyperparams(self):
        return Hyperparams(
            rate_alpha=self.eta,
            rate_psi=self.zeta,
            rate_nu=self.rho,
            concentration=self.concentration,
            n_components=self.n_components,
            n_knots=self.n_knots,
            order=self.order,
            tau=self.tau,
        )

    def sampler_config(self):
        return SamplerConfig(
            chains=self.chains,
            warmup=self.warmup,
            draws=self.draws,
            target_accept=self.target_accept,
            max_tree_depth=self.max_tree_depth,
            seed=self.seed,
            jobs=self.jobs,
        )

    def require(self, *keys):
        missing = [k for k in keys if getattr(self, k) == ""]
        if missing:
            raise ValidationError(
                f"missing required setting(s): {', '.join(missing)} "
                "(set in the config file or pass the matching flag)"
            )


def load_config_file(path):
    """Parse a flat key = value text file ('#' starts a comment)."""
    mapping = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ValidationError(
                        f"{path}:{lineno}: expected 'key = value', got {text!r}"
                    )
                key, _, value = text.partition("=")
                mapping[key.strip()] = value.strip()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from None
    return mapping


# ---------------------------------------------------------------------------
# atomic file output


def _atomic_write(path, text):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def _write_csv(path, header, rows):
    """Rows of mixed ints/floats/strings; floats rendered with 17 digits."""
    buf = io.StringIO()
    out = csv.writer(buf)
    out.writerow(header)
    for row in rows:
        out.writerow(
            [
                _fmt(cell) if isinstance(cell, (float, np.floating)) else str(cell)
                for cell in row
            ]
        )
    _atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# dataset and draws I/O


def read_input_csv(path):
    """Read a modeling CSV: response column 'y', optional 'status' column
    (1 = event, 0 = right-censored), every other column a covariate.

    Returns (y, delta_or_None, z, covariate_names).
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValidationError(f"{path} is empty") from None
            header = [h.strip() for h in header]
            rows = [row for row in reader if row]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    if "y" not in header:
        raise ValidationError(f"{path} has no response column 'y'")
    if len(set(header)) != len(header):
        raise ValidationError(f"{path} has duplicate column names")
    if not rows:
        raise ValidationError(f"{path} has a header but no data rows")

    y_idx = header.index("y")
    status_idx = header.index("status") if "status" in header else None
    cov_idx = [i for i in range(len(header)) if i not in (y_idx, status_idx)]
    if not cov_idx:
        raise ValidationError(f"{path} has no covariate columns")

    def cell(row, i, rowno):
        try:
            return float(row[i])
        except (ValueError, IndexError):
            raise ValidationError(
                f"{path} row {rowno}: cannot parse column {header[i]!r}"
            ) from None

    y = np.array([cell(r, y_idx, k + 2) for k, r in enumerate(rows)])
    z = np.array([[cell(r, i, k + 2) for i in cov_idx] for k, r in enumerate(rows)])
    delta = None
    if status_idx is not None:
        status = np.array([cell(r, status_idx, k + 2) for k, r in enumerate(rows)])
        if not np.all(np.isin(status, [0.0, 1.0])):
            raise ValidationError(f"{path}: status entries must be 0 or 1")
        delta = status.astype(bool)
    return y, delta, z, [header[i] for i in cov_idx]


def read_covariates_csv(path, wanted_names):
    """Read the named covariate columns from a CSV (extra columns such as a
    response or status column are ignored)."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise ValidationError(f"{path} is empty") from None
            rows = [row for row in reader if row]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    missing = [name for name in wanted_names if name not in header]
    if missing:
        raise ValidationError(f"{path} lacks covariate column(s): {', '.join(missing)}")
    if not rows:
        raise ValidationError(f"{path} has a header but no data rows")
    idx = [header.index(name) for name in wanted_names]
    try:
        return np.array([[float(row[i]) for i in idx] for row in rows])
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"cannot parse covariates in {path}: {exc}") from None


def _draws_header(n_cov, n_int_knots, n_basis, n_components):
    cols = ["chain", "iter", "lp"]
    cols += [f"beta_{i + 1}" for i in range(n_cov)]
    cols += [f"H_s{j + 1}" for j in range(n_int_knots)]
    cols += [f"alpha_{k + 1}" for k in range(n_basis)]
    cols += [f"psi_{l + 1}" for l in range(n_components)]
    cols += [f"nu_{l + 1}" for l in range(n_components)]
    cols += [f"p_{l + 1}" for l in range(n_components)]
    return cols


def write_draws_csv(path, chains):
    """One row per stored draw: chain and iteration indices (1-based), log
    posterior, then the constrained parameter blocks."""
    n_chains, n_draws = chains.n_chains, chains.n_draws
    n_int_knots = chains.h_at_knots.shape[2]
    alpha = chains.alpha_draws().reshape(n_chains, n_draws, -1)
    p, psi, nu = chains.mixture_draws()
    p = p.reshape(n_chains, n_draws, -1)
    psi = psi.reshape(n_chains, n_draws, -1)
    nu = nu.reshape(n_chains, n_draws, -1)
    beta = chains.beta_draws().reshape(n_chains, n_draws, -1)

    header = _draws_header(
        beta.shape[2], n_int_knots, alpha.shape[2], psi.shape[2]
    )
    rows = []
    for c in range(n_chains):
        for i in range(n_draws):
            row = [c + 1, i + 1, float(chains.lp[c, i])]
            row += [float(x) for x in beta[c, i]]
            row += [float(x) for x in chains.h_at_knots[c, i]]
            row += [float(x) for x in alpha[c, i]]
            row += [float(x) for x in psi[c, i]]
            row += [float(x) for x in nu[c, i]]
            row += [float(x) for x in p[c, i]]
            rows.append(row)
    _write_csv(path, header, rows)


def read_draws_csv(path, meta):
    """Rebuild a ChainSet (unconstrained draws, lp, model metadata) from a
    draws CSV plus the run report written beside it."""
    K = int(meta["n_basis"])
    L = int(meta["n_components"])
    p_cov = int(meta["n_covariates_fit"])
    knots = np.asarray(meta["knots"], dtype=float)
    J = knots.size

    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as exc:
        raise ValidationError(f"cannot read draws file {path}: {exc}") from None
    expected = _draws_header(p_cov, J, K, L)
    if header != expected:
        raise ValidationError(
            f"{path} columns do not match the run report (expected {len(expected)} "
            f"columns starting {expected[:4]}, got {len(header)} starting {header[:4]})"
        )
    data = np.array([[float(x) for x in row] for row in rows])
    if data.shape[0] == 0:
        raise ValidationError(f"{path} has no draws")
    data = data[np.lexsort((data[:, 1], data[:, 0]))]

    chain_ids = data[:, 0].astype(int)
    n_chains = chain_ids.max()
    n_draws = data.shape[0] // n_chains
    if n_chains * n_draws != data.shape[0]:
        raise ValidationError(f"{path}: chains have unequal lengths")

    lp = data[:, 2].reshape(n_chains, n_draws)
    ofs = 3
    beta = data[:, ofs : ofs + p_cov]
    ofs += p_cov
    h_at = data[:, ofs : ofs + J].reshape(n_chains, n_draws, J)
    ofs += J
    alpha = data[:, ofs : ofs + K]
    ofs += K
    psi = data[:, ofs : ofs + L]
    ofs += L
    nu = data[:, ofs : ofs + L]
    ofs += L
    weights = data[:, ofs : ofs + L]

    if np.any(alpha <= 0.0) or np.any(psi <= 0.0) or np.any(nu <= 0.0):
        raise ValidationError(f"{path}: positive parameter columns contain nonpositive values")
    v = stick_fractions_from_weights(weights)
    u = np.concatenate(
        [np.log(alpha), np.log(v) - np.log1p(-v), np.log(psi), np.log(nu), beta],
        axis=1,
    ).reshape(n_chains, n_draws, -1)

    return ChainSet(
        draws=u,
        lp=lp,
        accept_stat=np.full((n_chains, n_draws), np.nan),
        divergences=np.zeros((n_chains, n_draws), dtype=int),
        max_depth_hits=np.zeros((n_chains, n_draws), dtype=int),
        step_size=np.full(n_chains, np.nan),
        inv_mass=np.ones((n_chains, u.shape[2])),
        seed=int(meta.get("seed", 0)),
        h_at_knots=h_at,
        beta=beta.reshape(n_chains, n_draws, -1),
        knots=knots,
        n_basis=K,
        n_components=L,
        n_covariates=p_cov,
        tau=float(meta["tau"]),
        domain=meta.get("domain"),
    )


def _load_run_meta(draws_path):
    run_path = os.path.join(os.path.dirname(os.path.abspath(draws_path)), "run.json")
    if not os.path.exists(run_path):
        raise ValidationError(f"no run report next to the draws file: {run_path} missing")
    with open(run_path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _prepare_dataset(cfg):
    cfg.require("input")
    y, delta, z_raw, names = read_input_csv(cfg.input)
    expand_info = None
    z = z_raw
    if cfg.expand != "none":
        ranges = covariate_ranges(z_raw)
        z = expand_additive_basis(z_raw, family=cfg.expand, k_per_covariate=cfg.expand_k, ranges=ranges)
        expand_info = {
            "family": cfg.expand,
            "k_per_covariate": cfg.expand_k,
            "ranges": [[lo, hi] for lo, hi in ranges],
        }
    data = make_dataset(y, z, delta, domain=cfg.domain, tau=cfg.tau)
    return data, names, expand_info


def _expanded_names(names, expand_info):
    if expand_info is None:
        return list(names)
    k = expand_info["k_per_covariate"]
    return [f"{name}_b{i + 1}" for name in names for i in range(k)]


def _diagnostics_payload(chains):
    tracked = {"lp": chains.lp}
    beta = chains.beta_draws().reshape(chains.n_chains, chains.n_draws, -1)
    for i in range(beta.shape[2]):
        tracked[f"beta_{i + 1}"] = beta[:, :, i]
    for j in range(chains.h_at_knots.shape[2]):
        tracked[f"H_s{j + 1}"] = chains.h_at_knots[:, :, j]
    params = {}
    for name, arr in tracked.items():
        params[name] = {
            "rhat": split_rank_normalized_rhat(arr),
            "ess_bulk": bulk_ess(arr),
            "within_chain_variance": within_chain_variance(arr),
        }
    return {
        "n_chains": chains.n_chains,
        "n_draws": chains.n_draws,
        "divergences": int(chains.divergences.sum()),
        "divergence_rate": chains.divergence_rate(),
        "max_depth_hits": int(chains.max_depth_hits.sum()),
        "step_size": [float(e) for e in chains.step_size],
        "parameters": params,
    }


def _projection_payload(chains, names, level):
    proj = project_beta(chains, level=level)
    return {
        "level": proj.level,
        "names": list(names),
        "point": [float(x) for x in proj.point],
        "intervals": [[float(lo), float(hi)] for lo, hi in proj.intervals],
        "n_dropped": proj.n_dropped,
    }


def _run_meta(cfg, command, data, spec, names, expand_info, chains, runtime):
    return {
        "artifact": command,
        "package": "transmix",
        "version": __version__,
        "knots": [float(t) for t in spec.interior_knots],
        "order": spec.order,
        "tau": spec.tau,
        "n_basis": spec.K,
        "n_components": cfg.n_components,
        "n_covariates_fit": data.n_covariates,
        "covariate_names": list(names),
        "expand": expand_info,
        "domain": data.domain,
        "n_rows": data.n,
        "n_events": data.n_events,
        "censoring_rate": 1.0 - data.n_events / data.n,
        "train_y_min": float(np.min(data.y)),
        "train_y_max": float(np.max(data.y)),
        "seed": cfg.seed,
        "n_chains": chains.n_chains if chains is not None else None,
        "n_draws": chains.n_draws if chains is not None else None,
        "divergence_rate": chains.divergence_rate() if chains is not None else None,
        "runtime_seconds": runtime,
        "config": cfg.resolved,
    }


_GRID_S_CAP = 37.0  # the bounded transform is flat to double precision beyond this


def _prediction_grid(cfg, meta, chains, spec, z_new, lo_target, hi_target):
    """Evaluation grid for predictive curves.

    Starts from the training span (padded by half its range on the real
    line, or [0, 1.2 max] on the positive half-line).  Unless the user
    pinned an endpoint, each free endpoint is then pushed outward by
    bisection until the averaged CDF brackets, for every prediction row,
    every level the run must invert - or that row's reachable limit: the
    monotone transform is finite at the response bound, so each draw leaves
    tail mass beyond its reach and the averaged CDF can saturate short of a
    requested level.
    """
    lo_raw, hi_raw = cfg.grid_lo, cfg.grid_hi
    positive = meta["domain"] == "positive"
    if positive:
        lo = float(lo_raw) if lo_raw != "" else 0.0
        hi = float(hi_raw) if hi_raw != "" else 1.2 * meta["train_y_max"]
    else:
        y_lo, y_hi = meta["train_y_min"], meta["train_y_max"]
        span = max(y_hi - y_lo, 1e-12)
        lo = float(lo_raw) if lo_raw != "" else y_lo - 0.5 * span
        hi = float(hi_raw) if hi_raw != "" else y_hi + 0.5 * span
    if hi <= lo:
        raise ValidationError(f"prediction grid is empty: lo={lo}, hi={hi}")
    if cfg.n_grid < 2:
        raise ValidationError("n_grid must be at least 2")

    def row_cdfs(a, b):
        out = np.empty((z_new.shape[0], 2))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            for r in range(z_new.shape[0]):
                out[r] = ppd_cdf(chains, z_new[r], np.array([a, b]), spec).cdf
        return out

    extend_hi = hi_raw == ""
    extend_lo = lo_raw == "" and not positive
    if extend_hi or extend_lo:
        cap_lo = lo if positive else -_GRID_S_CAP
        asymptotes = row_cdfs(min(cap_lo, lo), _GRID_S_CAP)
        here = row_cdfs(lo, hi)
    if extend_hi:
        # per-row requirement: the target level, or just under that row's
        # reachable ceiling when the ceiling sits below the target
        hi_req = np.minimum(hi_target, asymptotes[:, 1] * (1.0 - 1e-6) - 1e-9)
        if np.any(here[:, 1] < hi_req):
            a, b = hi, _GRID_S_CAP
            for _ in range(40):
                mid = 0.5 * (a + b)
                if np.all(row_cdfs(lo, mid)[:, 1] >= hi_req):
                    b = mid
                else:
                    a = mid
            hi = b
    if extend_lo:
        lo_req = np.maximum(lo_target, asymptotes[:, 0] * (1.0 + 1e-6) + 1e-9)
        if np.any(here[:, 0] > lo_req):
            a, b = -_GRID_S_CAP, lo
            for _ in range(40):
                mid = 0.5 * (a + b)
                if np.all(row_cdfs(mid, hi)[:, 0] <= lo_req):
                    a = mid
                else:
                    b = mid
            lo = a
    return np.linspace(lo, hi, cfg.n_grid)


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(cfg):
    cfg.require("input", "output_dir")
    os.makedirs(cfg.output_dir, exist_ok=True)
    data, names, expand_info = _prepare_dataset(cfg)
    spec = basis_for_dataset(data, cfg.n_knots, cfg.order, cfg.gap_threshold)
    started = time.time()
    chains = sample_posterior(data, spec, cfg.hyperparams(), cfg.sampler_config(),
                              accelerate=cfg.accelerate)
    runtime = time.time() - started

    fit_names = _expanded_names(names, expand_info)
    write_draws_csv(os.path.join(cfg.output_dir, "draws.csv"), chains)
    diag = _diagnostics_payload(chains)
    _write_json(os.path.join(cfg.output_dir, "diagnostics.json"), diag)
    _write_json(
        os.path.join(cfg.output_dir, "beta_projection.json"),
        _projection_payload(chains, fit_names, cfg.level),
    )
    _write_json(
        os.path.join(cfg.output_dir, "run.json"),
        _run_meta(cfg, "fit", data, spec, names, expand_info, chains, runtime),
    )

    lp_stats = diag["parameters"]["lp"]
    print(f"fit: {data.n} rows, {data.n_events} events, {chains.n_chains} chains x "
          f"{chains.n_draws} draws in {runtime:.1f}s -> {cfg.output_dir}")
    print(f"fit: lp rhat={_fmt(lp_stats['rhat'])} ess={_fmt(lp_stats['ess_bulk'])} "
          f"divergence_rate={_fmt(diag['divergence_rate'])}")
    if diag["divergence_rate"] > _DIVERGENCE_LIMIT:
        print(
            f"fit: divergence rate {_fmt(diag['divergence_rate'])} exceeds "
            f"{_DIVERGENCE_LIMIT}; treat these draws as unreliable",
            file=sys.stderr,
        )
        return EXIT_SAMPLER
    return EXIT_OK


def cmd_tune(cfg):
    cfg.require("input", "output_dir")
    os.makedirs(cfg.output_dir, exist_ok=True)
    data, names, expand_info = _prepare_dataset(cfg)
    spec = basis_for_dataset(data, cfg.n_knots, cfg.order, cfg.gap_threshold)
    hp0 = cfg.hyperparams()
    ladder = sorted(set([cfg.zeta] + [z for z in cfg.zeta_ladder if z > cfg.zeta]))
    schedule = [(cfg.eta, z) for z in ladder]
    started = time.time()
    report = tune(data, spec, hp0, schedule=schedule, budget=cfg.budget,
                  cfg=cfg.sampler_config(), accelerate=cfg.accelerate)
    runtime = time.time() - started

    _atomic_write(os.path.join(cfg.output_dir, "tuning_report.json"), report.to_json() + "\n")
    zeta_grid = np.linspace(min(0.005, cfg.zeta), max(1.0, *ladder), 200)
    curve = vtilde_curve(cfg.eta, zeta_grid, cfg.n_components, report.j0, report.weights)
    _write_csv(
        os.path.join(cfg.output_dir, "vtilde_curve.csv"),
        ["zeta", "vtilde"],
        [(float(z), float(v)) for z, v in curve],
    )

    for idx, rnd in enumerate(report.rounds, start=1):
        print(f"tune: round {idx} eta={_fmt(rnd.eta)} zeta={_fmt(rnd.zeta)} "
              f"W={_fmt(rnd.within_var)} threshold={_fmt(rnd.threshold)} "
              f"{'pass' if rnd.passed else 'fail'} rhat_lp={_fmt(rnd.rhat_lp)}")
    print(f"tune: {'passed' if report.passed else 'FAILED'} after "
          f"{len(report.rounds)} round(s) in {runtime:.1f}s -> {cfg.output_dir}")
    if not report.passed:
        print("tune: budget exhausted without a sufficiently informative prior",
              file=sys.stderr)
        return EXIT_TUNING
    return EXIT_OK


def _predict_mode(cfg, meta):
    if cfg.mode == "median":
        return "median", 0.5
    if cfg.mode == "quantile":
        q = float(cfg.quantile) if cfg.quantile != "" else meta["censoring_rate"]
    else:  # auto: censoring-rate quantile when the training data were censored
        if meta["censoring_rate"] == 0.0:
            return "median", 0.5
        q = meta["censoring_rate"]
    if not (0.0 < q < 1.0):
        raise ValidationError(f"prediction quantile must lie in (0, 1), got {q}")
    return "quantile", q


def cmd_predict(cfg):
    cfg.require("draws_csv", "covariates", "output_dir")
    os.makedirs(cfg.output_dir, exist_ok=True)
    meta = _load_run_meta(cfg.draws_csv)
    chains = read_draws_csv(cfg.draws_csv, meta)
    spec = BasisSpec(np.asarray(meta["knots"]), order=int(meta["order"]), tau=float(meta["tau"]))

    z_new = read_covariates_csv(cfg.covariates, meta["covariate_names"])
    if meta["expand"] is not None:
        exp = meta["expand"]
        z_new = expand_additive_basis(
            z_new,
            family=exp["family"],
            k_per_covariate=int(exp["k_per_covariate"]),
            ranges=[tuple(r) for r in exp["ranges"]],
        )
    if z_new.shape[1] != int(meta["n_covariates_fit"]):
        raise ValidationError(
            f"covariate dimension mismatch: draws were fit with "
            f"{meta['n_covariates_fit']} columns, got {z_new.shape[1]}"
        )

    mode, q = _predict_mode(cfg, meta)
    lo_target = min((1.0 - cfg.level) / 2.0, q)
    hi_target = max((1.0 + cfg.level) / 2.0, q)
    grid = _prediction_grid(cfg, meta, chains, spec, z_new, lo_target, hi_target)
    positive = meta["domain"] == "positive"

    def clamped_quantile(res, level):
        # an averaged CDF can saturate short of a requested level: the
        # transform is finite at the response bound, so draws leave mass
        # beyond its reach; clamp to the grid edge and flag the row
        try:
            return predicted_value(res, level), True
        except ExtrapolationError:
            edge = res.grid[-1] if float(res.cdf[-1]) < level else res.grid[0]
            return float(edge), False

    curve_rows, summary_rows, surv_rows = [], [], []
    n_unbounded = 0
    for row in range(z_new.shape[0]):
        res = ppd_pdf(chains, z_new[row], grid, spec)
        point, ok_point = clamped_quantile(res, 0.5 if mode == "median" else q)
        lo, ok_lo = clamped_quantile(res, (1.0 - cfg.level) / 2.0)
        hi, ok_hi = clamped_quantile(res, (1.0 + cfg.level) / 2.0)
        bounded = ok_point and ok_lo and ok_hi
        if not bounded:
            n_unbounded += 1
        summary_rows.append([row, mode, float(q), float(point), float(lo), float(hi),
                             float(cfg.level), int(bounded)])
        for s, dens, prob in zip(grid, res.pdf, res.cdf):
            curve_rows.append([row, float(s), float(dens), float(prob)])
        if positive:
            surv = conditional_survival(chains, z_new[row], grid, spec)
            haz = conditional_cumulative_hazard_curve(chains, z_new[row], grid, spec)
            for s, sv, hz in zip(grid, surv, haz):
                surv_rows.append([row, float(s), float(sv), float(hz)])

    _write_csv(os.path.join(cfg.output_dir, "ppd_curves.csv"),
               ["row", "s", "pdf", "cdf"], curve_rows)
    _write_csv(os.path.join(cfg.output_dir, "predictions.csv"),
               ["row", "mode", "quantile", "prediction", "lower", "upper", "level",
                "bounded"],
               summary_rows)
    if positive:
        _write_csv(os.path.join(cfg.output_dir, "survival_curves.csv"),
                   ["row", "s", "survival", "cum_hazard"], surv_rows)
    _write_json(os.path.join(cfg.output_dir, "predict.json"), {
        "artifact": "predict",
        "package": "transmix",
        "version": __version__,
        "draws_csv": os.path.abspath(cfg.draws_csv),
        "n_rows": z_new.shape[0],
        "mode": mode,
        "quantile": float(q),
        "level": cfg.level,
        "n_unbounded_rows": n_unbounded,
        "grid": {"lo": float(grid[0]), "hi": float(grid[-1]), "n": int(grid.size)},
        "config": cfg.resolved,
    })
    print(f"predict: {z_new.shape[0]} row(s), mode={mode} quantile={_fmt(q)} "
          f"level={_fmt(cfg.level)} -> {cfg.output_dir}")
    if n_unbounded:
        print(f"predict: {n_unbounded} row(s) have quantiles beyond the transform's "
              "reach; their summaries are clamped to the grid edge (bounded=0)",
              file=sys.stderr)
    return EXIT_OK


def cmd_simulate(cfg):
    cfg.require("output_dir")
    os.makedirs(cfg.output_dir, exist_ok=True)
    sim = SimSpec(setting=cfg.setting, n=cfg.n, n_test=cfg.n_test, seed=cfg.seed)
    train, test, truth = generate(sim)

    def dataset_rows(ds):
        return [
            [float(ds.y[i]), int(ds.delta[i])] + [float(x) for x in ds.z[i]]
            for i in range(ds.n)
        ]

    names = [f"z{j + 1}" for j in range(train.n_covariates)]
    header = ["y", "status"] + names
    _write_csv(os.path.join(cfg.output_dir, "train.csv"), header, dataset_rows(train))
    _write_csv(os.path.join(cfg.output_dir, "test.csv"), header, dataset_rows(test))

    if train.domain == "positive":
        grid = np.linspace(1e-9, 1.2 * float(np.max(test.y)), cfg.n_grid)
    else:
        lo, hi = float(np.min(test.y)), float(np.max(test.y))
        span = max(hi - lo, 1e-12)
        grid = np.linspace(lo - 0.5 * span, hi + 0.5 * span, cfg.n_grid)
    truth_rows = []
    for row in range(test.n):
        pdf_vals = truth.pdf(grid, test.z[row])
        cdf_vals = truth.cdf(grid, test.z[row])
        for s, dens, prob in zip(grid, pdf_vals, cdf_vals):
            truth_rows.append([row, float(s), float(dens), float(prob)])
    _write_csv(os.path.join(cfg.output_dir, "truth_grid.csv"),
               ["row", "s", "pdf", "cdf"], truth_rows)
    _write_json(os.path.join(cfg.output_dir, "sim.json"), {
        "artifact": "simulate",
        "package": "transmix",
        "version": __version__,
        "setting": sim.setting,
        "n": sim.n,
        "n_test": sim.n_test,
        "seed": sim.seed,
        "domain": train.domain,
        "censoring_rate_train": 1.0 - train.n_events / train.n,
        "beta": [float(b) for b in np.atleast_1d(truth.beta)] if truth.beta is not None else None,
        "config": cfg.resolved,
    })
    print(f"simulate: setting {sim.setting}, {train.n} train / {test.n} test rows, "
          f"domain={train.domain} -> {cfg.output_dir}")
    return EXIT_OK


def _read_predictions_csv(path, n_expected):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as exc:
        raise ValidationError(f"cannot read predictions file {path}: {exc}") from None
    for col in ("row", "prediction", "lower", "upper"):
        if col not in header:
            raise ValidationError(f"{path} has no column {col!r}")
    idx = {col: header.index(col) for col in ("row", "prediction", "lower", "upper")}
    if len(rows) != n_expected:
        raise ValidationError(f"{path} has {len(rows)} rows, expected {n_expected}")
    order = np.argsort([int(r[idx["row"]]) for r in rows])
    pred = np.array([float(rows[i][idx["prediction"]]) for i in order])
    lower = np.array([float(rows[i][idx["lower"]]) for i in order])
    upper = np.array([float(rows[i][idx["upper"]]) for i in order])
    return pred, np.column_stack([lower, upper])


def _read_curves_csv(path, n_expected):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as exc:
        raise ValidationError(f"cannot read curves file {path}: {exc}") from None
    for col in ("row", "s", "cdf"):
        if col not in header:
            raise ValidationError(f"{path} has no column {col!r}")
    r_i, s_i, c_i = header.index("row"), header.index("s"), header.index("cdf")
    by_row = {}
    for row in rows:
        by_row.setdefault(int(row[r_i]), []).append((float(row[s_i]), float(row[c_i])))
    if sorted(by_row) != list(range(n_expected)):
        raise ValidationError(f"{path} must hold rows 0..{n_expected - 1}")
    grids = []
    cdfs = []
    for key in range(n_expected):
        pts = by_row[key]
        grids.append(np.array([s for s, _ in pts]))
        cdfs.append(np.array([c for _, c in pts]))
    grid = grids[0]
    for g in grids[1:]:
        if g.shape != grid.shape or not np.allclose(g, grid, rtol=0.0, atol=1e-12):
            raise ValidationError(f"{path}: all rows must share one evaluation grid")
    return grid, np.vstack(cdfs)


def cmd_evaluate(cfg):
    cfg.require("predictions", "output_dir")
    os.makedirs(cfg.output_dir, exist_ok=True)
    sim = SimSpec(setting=cfg.setting, n=cfg.n, n_test=cfg.n_test, seed=cfg.seed)
    _, test, truth = generate(sim)
    pred, intervals = _read_predictions_csv(cfg.predictions, test.n)

    location = np.array([truth.location(test.z[i]) for i in range(test.n)])
    order = np.argsort(location)
    loc_sorted = location[order]
    pred_sorted = pred[order]
    keep = np.concatenate([[True], np.diff(loc_sorted) > 0.0])
    rimse_val = (
        rimse(pred_sorted[keep], loc_sorted[keep], loc_sorted[keep])
        if int(keep.sum()) >= 2
        else None
    )

    metrics = {
        "rimse_vs_location": rimse_val,
        "mae": mae(pred, test.y),
        "c_index": c_index(pred, test.y, test.delta),
        "coverage": coverage_probability(intervals, test.y),
        "level": cfg.level,
        "ibs": None,
        "ibs_horizon": None,
    }
    if cfg.curves != "" and test.domain == "positive":
        grid, cdfs = _read_curves_csv(cfg.curves, test.n)
        pos = grid >= 0.0
        metrics["ibs"] = ibs(1.0 - cdfs[:, pos], grid[pos], test.y, test.delta,
                             horizon=float(grid[pos][-1]))
        metrics["ibs_horizon"] = float(grid[pos][-1])

    payload = {
        "artifact": "evaluate",
        "package": "transmix",
        "version": __version__,
        "setting": sim.setting,
        "n": sim.n,
        "n_test": sim.n_test,
        "seed": sim.seed,
        "metrics": metrics,
        "config": cfg.resolved,
    }
    _write_json(os.path.join(cfg.output_dir, "metrics.json"), payload)
    shown = {k: (_fmt(v) if isinstance(v, float) else v) for k, v in metrics.items()}
    print(f"evaluate: setting {sim.setting} seed {sim.seed}: "
          + " ".join(f"{k}={v}" for k, v in shown.items() if v is not None))
    print(f"evaluate: metrics written -> {os.path.join(cfg.output_dir, 'metrics.json')}")
    return EXIT_OK


def cmd_diagnose(cfg):
    cfg.require("draws_csv", "output_dir")
    os.makedirs(cfg.output_dir, exist_ok=True)
    meta = _load_run_meta(cfg.draws_csv)
    chains = read_draws_csv(cfg.draws_csv, meta)
    diag = _diagnostics_payload(chains)
    _write_json(os.path.join(cfg.output_dir, "diagnostics.json"), diag)
    width = max(len(name) for name in diag["parameters"])
    print(f"{'parameter'.ljust(width)}  {'rhat':>22}  {'ess_bulk':>22}  {'within_var':>22}")
    for name, stats in diag["parameters"].items():
        print(f"{name.ljust(width)}  {_fmt(stats['rhat']):>22}  "
              f"{_fmt(stats['ess_bulk']):>22}  {_fmt(stats['within_chain_variance']):>22}")
    print(f"diagnose: report written -> {os.path.join(cfg.output_dir, 'diagnostics.json')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "tune": cmd_tune,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "diagnose": cmd_diagnose,
}


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", default=None,
                        help="flat key = value config file")
    for key in KEY_SPECS:
        common.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None,
                            metavar="VALUE", help=f"override config key {key}")
    parser = argparse.ArgumentParser(
        prog="transmix",
        description="Bayesian transformation-model regression with monotone-spline "
                    "transforms and Weibull-mixture errors",
    )
    parser.add_argument("--version", action="version", version=f"transmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub.add_parser(name, parents=[common], help=f"{name} subcommand")
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        mapping = load_config_file(args.config) if args.config else {}
        for key in KEY_SPECS:
            value = getattr(args, key, None)
            if value is not None:
                mapping[key] = value
        cfg = RunConfig(mapping)
        return _COMMANDS[args.command](cfg)
    except TransmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
