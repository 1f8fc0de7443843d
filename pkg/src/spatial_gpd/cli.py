"""Command-line workflow.

    spatial-gpd simulate        synthetic grid, observations and truth
    spatial-gpd threshold-scan  GPD fits over a grid of quantile thresholds
    spatial-gpd k-factor        likelihood magnitude-adjustment constant
    spatial-gpd fit             hierarchical spatial model
    spatial-gpd single-cell     independent per-cell baseline
    spatial-gpd return-levels   posterior return-level maps
    spatial-gpd predict         predictive return levels
    spatial-gpd diagnose        DIC, ESS and acceptance summaries

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .diagnostics import acceptance_summary, dic, effective_sample_size
from .gpd import (DAYS_PER_YEAR, GpdError, fit_theta_mle, select_threshold, theta_information,
                  threshold_stability_scan)
from .hier_mcmc import NumericalAbort, SamplerConfig, default_process_config, init_state, run_chain
from .lattice import LatticeError
from .likelihood_adjust import estimate_godambe_k
from .return_levels import ReturnLevelError, emit_map, posterior_return_levels, return_level
from .single_cell import ChainDegenerate, run_single_cells
from .synth import SynthError, SynthSpec, simulate_dataset

logger = logging.getLogger("spatial_gpd")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    grid: str = ""
    observations: str = ""
    out: str = "out"
    fit_dir: str = ""
    quantile_level: float = 0.95
    covariates: list = field(default_factory=list)
    adjacency: str = "rook"
    n_iter: int = 20_000
    burn_in: int = 5_000
    thin: int = 1
    phi_thin: int = 1
    seed: int = 0
    return_periods: list = field(default_factory=lambda: [100.0, 1000.0, 10000.0])
    adapt_interval: int = 100
    target_acceptance: float = 0.234
    adapt_gain: float = 1.0
    nu_theta: float = 4.0
    nu_phi: float = 4.0
    omega_theta: list = field(default_factory=list)
    omega_phi: list = field(default_factory=list)
    k: float = 0.0
    k_mode: str = "pooled"
    n_y: float = DAYS_PER_YEAR
    min_exceed: int = 10
    phi_sweep: str = "spectral"
    solver_tol: float = 1e-8
    map_format: str = "csv"
    source: str = "auto"
    levels: list = field(default_factory=lambda: [0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98])
    cells: list = field(default_factory=list)
    rows: int = 5
    cols: int = 5
    n_days: int = 10_000
    shock: float = 0.0
    threads: int = 0

    def validate(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1 or self.phi_thin < 1:
            raise ConfigError("thin must be >= 1")
        if not 0 < self.quantile_level < 1:
            raise ConfigError("quantile_level must lie in (0, 1)")
        if self.adjacency not in ("rook", "queen"):
            raise ConfigError(f"adjacency must be rook or queen, got {self.adjacency!r}")
        if self.k_mode not in ("pooled", "full"):
            raise ConfigError("k_mode must be pooled or full")
        if self.k < 0:
            raise ConfigError("k must be positive (0 means estimate)")
        if self.map_format not in ("csv", "geojson"):
            raise ConfigError("map_format must be csv or geojson")
        if self.source not in ("auto", "hier", "single"):
            raise ConfigError("source must be auto, hier or single")
        if self.phi_sweep not in ("spectral", "sequential", "coloured"):
            raise ConfigError("phi_sweep must be spectral, sequential or coloured")
        for name in ("omega_theta", "omega_phi"):
            v = getattr(self, name)
            if v and len(v) != 3:
                raise ConfigError(f"{name} takes three values: s11,s12,s22")
        if any(r <= 0 for r in self.return_periods):
            raise ConfigError("return periods must be positive")
        return self

    def hash(self) -> str:
        skip = {"out", "threads", "fit_dir", "grid", "observations"}
        payload = {k: v for k, v in asdict(self).items() if k not in skip}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]

    def header(self) -> str:
        return io.header_line(self.hash(), self.seed)


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}
_LIST_TYPES = {"covariates": str, "return_periods": float, "omega_theta": float,
               "omega_phi": float, "levels": float, "cells": int}


def _coerce(key, value):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    if key in _LIST_TYPES:
        if isinstance(value, list):
            return [_LIST_TYPES[key](v) for v in value]
        parts = [p.strip() for p in str(value).split(",") if p.strip()]
        try:
            return [_LIST_TYPES[key](p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    default = getattr(RunConfig(), key)
    try:
        if isinstance(default, int) and not isinstance(default, bool):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return str(value)


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, lists are comma-separated."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = _coerce(key, value)
    return out


def build_config(args) -> RunConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v)
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# shared steps
# ---------------------------------------------------------------------------

def _threads(cfg):
    return cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)


def load_records(cfg: RunConfig):
    """Grid + observations -> lattice and per-cell threshold excess records."""
    if not cfg.grid:
        raise ConfigError("a grid file is required (--grid)")
    if not cfg.observations:
        raise ConfigError("an observations file is required (--obs)")
    lattice = io.read_grid(cfg.grid, cfg.adjacency)
    obs = io.read_observations(cfg.observations)
    grid_ids = set(int(c) for c in lattice.cell_ids)
    extra = set(obs.cell_ids) - grid_ids
    missing = grid_ids - set(obs.cell_ids)
    if extra or missing:
        raise io.DataError(f"cells in observations but not grid: {sorted(extra)}; "
                           f"in grid but not observations: {sorted(missing)}")
    records = []
    for cid in lattice.cell_ids:
        try:
            _, rec = select_threshold(obs.values[int(cid)], cfg.quantile_level, int(cid),
                                      cfg.n_y, obs.days[int(cid)])
        except GpdError as exc:
            raise io.DataError(str(exc)) from exc
        records.append(rec)
    return lattice, records


def fit_cells(records, cfg):
    def one(rec):
        th, fit = fit_theta_mle(rec, min_exceed=cfg.min_exceed)
        return th, theta_information(th, rec.excesses, rec.u), fit.converged

    try:
        with ThreadPoolExecutor(max_workers=_threads(cfg)) as pool:
            res = list(pool.map(one, records))
    except GpdError as exc:
        raise io.DataError(str(exc)) from exc
    theta = np.array([r[0] for r in res])
    info = np.array([r[1] for r in res])
    conv = np.array([r[2] for r in res])
    return theta, info, conv


def write_k(out, est, records, theta, conv, header):
    # the mode column is text, so this row bypasses io.write_csv
    with (out / "k_factor.csv").open("w", newline="") as fh:
        fh.write(f"# {header}\n")
        fh.write("k,p,trace,effective_independent_sites,mode,k_raw\n")
        fh.write(",".join([io.fmt(est.k), str(est.p), io.fmt(est.trace_HinvJ),
                           io.fmt(est.effective_independent_sites), est.mode,
                           io.fmt(est.k_raw)]) + "\n")
    excluded = set(est.excluded_cells)
    io.write_csv(out / "k_cells.csv",
                 ["cell_id", "u", "n_exceed", "log_sigma_tilde", "xi", "mle_converged",
                  "trace_ratio", "excluded"],
                 [(r.cell_id, r.u, r.n_exceed, theta[j, 0], theta[j, 1], bool(conv[j]),
                   est.per_cell_ratio[j], r.cell_id in excluded)
                  for j, r in enumerate(records)], header)


def _process_config(cfg, lattice, theta):
    kw = {}
    for name, key in (("omega_theta", "Omega_theta"), ("omega_phi", "Omega_phi")):
        v = getattr(cfg, name)
        if v:
            kw[key] = np.array([[v[0], v[1]], [v[1], v[2]]])
    return default_process_config(lattice, theta, covariates=cfg.covariates,
                                  nu_theta=cfg.nu_theta, nu_phi=cfg.nu_phi, **kw)


def _sampler(cfg):
    return SamplerConfig(n_iter=cfg.n_iter, burn_in=cfg.burn_in, thin=cfg.thin,
                         phi_thin=cfg.phi_thin, adapt_interval=cfg.adapt_interval,
                         target_acceptance=cfg.target_acceptance, adapt_gain=cfg.adapt_gain,
                         phi_sweep=cfg.phi_sweep)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig):
    out = Path(cfg.out)
    spec = SynthSpec(n_rows=cfg.rows, n_cols=cfg.cols, n_days=cfg.n_days, seed=cfg.seed,
                     shock=cfg.shock, n_y=cfg.n_y, adjacency=cfg.adjacency)
    ds = simulate_dataset(spec)
    h = cfg.header()
    io.write_grid(out / "grid.csv", ds.lattice, h)
    io.write_observations(out / "observations.csv", ds.lattice, ds.series, h)
    io.write_truth(out / "truth.csv", ds.lattice, ds.theta, ds.phi, h)
    logger.info("simulated %d cells x %d days into %s", ds.lattice.size, cfg.n_days, out)
    return EXIT_OK


def cmd_threshold_scan(cfg: RunConfig):
    lattice = io.read_grid(cfg.grid, cfg.adjacency) if cfg.grid else None
    obs = io.read_observations(cfg.observations)
    cells = cfg.cells or (list(lattice.cell_ids) if lattice is not None else obs.cell_ids)
    out = Path(cfg.out)
    for cid in cells:
        if int(cid) not in obs.values:
            raise io.DataError(f"cell {cid} has no observations")
        rows = threshold_stability_scan(obs.values[int(cid)], cfg.levels, cfg.min_exceed)
        io.write_csv(out / f"threshold_scan_cell{int(cid)}.csv", io.SCAN_HEADER,
                     [(r.level, r.u, r.sigma_star, r.xi, r.se_sigma_star, r.se_xi, r.converged)
                      for r in rows], cfg.header())
    return EXIT_OK


def cmd_k_factor(cfg: RunConfig):
    lattice, records = load_records(cfg)
    theta, info, conv = fit_cells(records, cfg)
    est = estimate_godambe_k(records, theta, info, mode=cfg.k_mode)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_k(out, est, records, theta, conv, cfg.header())
    print(f"k = {est.k:.6f}  p = {est.p}  trace = {est.trace_HinvJ:.6f}  "
          f"effective independent sites = {est.effective_independent_sites:.2f}")
    return EXIT_OK


def _write_inputs(out, lattice, records, h):
    io.write_grid(out / "grid.csv", lattice, h)
    io.write_records(out, records, h)


def cmd_fit(cfg: RunConfig):
    t0 = time.perf_counter()
    lattice, records = load_records(cfg)
    theta, info, conv = fit_cells(records, cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.header()
    _write_inputs(out, lattice, records, h)
    est = estimate_godambe_k(records, theta, info, mode=cfg.k_mode)
    write_k(out, est, records, theta, conv, h)
    k = cfg.k if cfg.k > 0 else est.k
    pconf = _process_config(cfg, lattice, theta)
    state = init_state(records, lattice, pconf, theta, info, k=k)
    archive = run_chain(records, lattice, pconf, k, _sampler(cfg), seed=cfg.seed, state=state)
    acc = archive.accepted.mean(axis=0)
    meta = {"config": asdict(cfg), "config_hash": cfg.hash(), "version": __version__,
            "k_estimated": est.k, "k_used": k,
            "acceptance": {"min": float(acc.min()), "mean": float(acc.mean()),
                           "max": float(acc.max())},
            "total_wall_time_s": time.perf_counter() - t0}
    io.write_archive(out / "chain", archive, h, meta)
    pm = archive.theta.mean(axis=0)
    ps = archive.theta.std(axis=0, ddof=1) if archive.n_draws > 1 else np.zeros_like(pm)
    io.write_csv(out / "posterior_summary.csv",
                 ["cell_id", "mean_log_sigma_tilde", "sd_log_sigma_tilde", "mean_xi", "sd_xi",
                  "mean_sigma_u", "acceptance_rate"],
                 [(r.cell_id, pm[j, 0], ps[j, 0], pm[j, 1], ps[j, 1],
                   np.exp(pm[j, 0]) + pm[j, 1] * r.u, acc[j]) for j, r in enumerate(records)], h)
    print(f"fit: {lattice.size} cells, k = {k:.4f}, {archive.n_draws} stored draws -> {out}")
    return EXIT_OK


def cmd_single_cell(cfg: RunConfig):
    lattice, records = load_records(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.header()
    _write_inputs(out, lattice, records, h)
    chains = run_single_cells(records, seed=cfg.seed, min_exceed=cfg.min_exceed,
                              sampler=_sampler(cfg))
    io.write_single_chains(out / "single_cell", chains, h)
    print(f"single-cell: {len(chains)} cells -> {out / 'single_cell'}")
    return EXIT_OK


def _load_fit(cfg):
    if not cfg.fit_dir:
        raise ConfigError("--fit-dir is required")
    fit_dir = Path(cfg.fit_dir)
    if not fit_dir.is_dir():
        raise io.DataError(f"fit directory not found: {fit_dir}")
    lattice = io.read_grid(fit_dir / "grid.csv", cfg.adjacency)
    records = io.read_records(fit_dir)
    source = cfg.source
    if source == "auto":
        source = "hier" if (fit_dir / "chain" / "run_metadata.json").exists() else "single"
    if source == "hier":
        draws = io.read_archive(fit_dir / "chain")
    else:
        draws = io.read_single_chains(fit_dir / "single_cell", records)
    return lattice, records, draws, source


def cmd_return_levels(cfg: RunConfig):
    lattice, records, draws, source = _load_fit(cfg)
    summaries = posterior_return_levels(draws, records, cfg.return_periods)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if cfg.map_format == "csv" else "geojson"
    emit_map(summaries, lattice, cfg.map_format, out / f"return_levels_{source}.{ext}",
             header=cfg.header())
    print(f"return-levels: {len(summaries)} rows ({source}) -> {out}")
    return EXIT_OK


def cmd_predict(cfg: RunConfig):
    lattice, records, draws, source = _load_fit(cfg)
    summaries = posterior_return_levels(draws, records, cfg.return_periods, predictive=True,
                                        solver_tol=cfg.solver_tol)
    theta = draws.theta if hasattr(draws, "theta") else np.stack([c.draws for c in draws], 1)
    pm = theta.mean(axis=0)
    idx = {r.cell_id: j for j, r in enumerate(records)}
    by_id = {c.cell_id: c for c in lattice.cells}
    rows = []
    for s in summaries:
        j = idx[s.cell_id]
        rec = records[j]
        plug = return_level(pm[j], rec.u, rec.lambda_u, rec.n_y, s.r)
        c = by_id[s.cell_id]
        rows.append((s.cell_id, c.lon, c.lat, s.r, s.predictive_level, plug, s.mean))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / f"predictive_{source}.csv",
                 ["cell_id", "lon", "lat", "r", "predictive", "plugin_posterior_mean",
                  "posterior_mean_level"], rows, cfg.header())
    if cfg.map_format == "geojson":
        emit_map(summaries, lattice, "geojson", out / f"predictive_{source}.geojson",
                 header=cfg.header())
    print(f"predict: {len(rows)} rows ({source}) -> {out}")
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig):
    lattice, records, draws, source = _load_fit(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.header()
    k = float(draws.meta.get("k", 1.0)) if source == "hier" else 1.0
    rep = dic(draws, records, k)
    io.write_csv(out / f"dic_{source}.csv", ["mean_deviance", "deviance_at_mean", "p_D", "DIC"],
                 [(rep.mean_deviance, rep.deviance_at_mean, rep.p_D, rep.DIC)], h)
    acc = acceptance_summary(draws)
    theta = draws.theta if source == "hier" else np.stack([c.draws for c in draws], 1)
    rows = []
    for j, rec in enumerate(records):
        e = [effective_sample_size(theta[:, j, i]).ess if theta.shape[0] >= 100 else np.nan
             for i in range(2)]
        rows.append((rec.cell_id, acc.rates[j], e[0], e[1],
                     theta[:, j, 0].mean(), theta[:, j, 1].mean()))
    io.write_csv(out / f"diagnostics_{source}.csv",
                 ["cell_id", "acceptance_rate", "ess_log_sigma_tilde", "ess_xi",
                  "mean_log_sigma_tilde", "mean_xi"], rows, h)
    io.write_csv(out / f"acceptance_histogram_{source}.csv", ["lower", "upper", "count"],
                 acc.histogram_rows(), h)
    print(f"diagnose ({source}): DIC = {rep.DIC:.3f}, p_D = {rep.p_D:.3f}")
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "simulate a synthetic gridded dataset"),
    "threshold-scan": (cmd_threshold_scan, "threshold stability scan per cell"),
    "k-factor": (cmd_k_factor, "estimate the likelihood adjustment constant k"),
    "fit": (cmd_fit, "fit the hierarchical spatial model"),
    "single-cell": (cmd_single_cell, "fit each cell independently"),
    "return-levels": (cmd_return_levels, "posterior return-level summaries"),
    "predict": (cmd_predict, "predictive return levels"),
    "diagnose": (cmd_diagnose, "DIC, ESS and acceptance diagnostics"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--version", action="version", version=f"spatial-gpd {__version__}")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", help="random seed")
    p.add_argument("--threads", help="worker threads (0 = all cores); results do not "
                                     "depend on this value")
    p.add_argument("--grid", help="grid CSV (cell_id,lon,lat,row,col)")
    p.add_argument("--obs", dest="observations", help="observation CSV (cell_id,date,value)")
    p.add_argument("--fit-dir", dest="fit_dir", help="output directory of fit / single-cell")
    p.add_argument("--adjacency", help="rook or queen")
    p.add_argument("--quantile-level", dest="quantile_level", help="threshold quantile level")
    p.add_argument("--n-y", dest="n_y", help="observations per year")
    p.add_argument("--min-exceed", dest="min_exceed", help="minimum excesses per cell")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_sampler(p):
    p.add_argument("--n-iter", dest="n_iter")
    p.add_argument("--burn-in", dest="burn_in")
    p.add_argument("--thin")
    p.add_argument("--phi-thin", dest="phi_thin")
    p.add_argument("--adapt-interval", dest="adapt_interval")
    p.add_argument("--target-acceptance", dest="target_acceptance")
    p.add_argument("--adapt-gain", dest="adapt_gain")


def make_parser():
    parser = _Parser(prog="spatial-gpd", description=__doc__.split("\n\n")[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"spatial-gpd {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        _add_common(p)
        if name == "simulate":
            p.add_argument("--rows")
            p.add_argument("--cols")
            p.add_argument("--n-days", dest="n_days")
            p.add_argument("--shock", help="probability of a common daily shock, in [0, 1]")
        if name == "threshold-scan":
            p.add_argument("--levels", help="comma-separated quantile levels")
            p.add_argument("--cells", help="comma-separated cell ids (default all)")
        if name in ("k-factor", "fit"):
            p.add_argument("--k-mode", dest="k_mode", help="pooled or full")
        if name in ("fit", "single-cell"):
            _add_sampler(p)
        if name == "fit":
            p.add_argument("--covariates", help="comma-separated: lon,lat")
            p.add_argument("--k", help="fix k instead of estimating it")
            p.add_argument("--nu-theta", dest="nu_theta")
            p.add_argument("--nu-phi", dest="nu_phi")
            p.add_argument("--omega-theta", dest="omega_theta", help="s11,s12,s22")
            p.add_argument("--omega-phi", dest="omega_phi", help="s11,s12,s22")
            p.add_argument("--phi-sweep", dest="phi_sweep", help="spectral, sequential or coloured")
        if name in ("return-levels", "predict"):
            p.add_argument("--r", dest="return_periods", help="comma-separated periods (years)")
            p.add_argument("--format", dest="map_format", help="csv or geojson")
            p.add_argument("--solver-tol", dest="solver_tol")
        if name in ("return-levels", "predict", "diagnose"):
            p.add_argument("--source", help="auto, hier or single")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = build_config(args)
        return func(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (io.DataError, LatticeError, GpdError, SynthError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalAbort as exc:
        print(f"numerical abort at iteration {exc.iteration}: {exc}", file=sys.stderr)
        if exc.state is not None and cfg.out:
            dump = Path(cfg.out) / "abort_state.json"
            dump.parent.mkdir(parents=True, exist_ok=True)
            dump.write_text(json.dumps({k: np.asarray(v).tolist() for k, v in
                                        vars(exc.state).items() if v is not None}, indent=1))
        return EXIT_NUMERIC
    except (ReturnLevelError, ChainDegenerate) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
