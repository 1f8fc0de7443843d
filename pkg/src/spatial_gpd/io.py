"""CSV readers and writers for grids, observations, fits and chain archives.

Every artifact written here starts with one ``#`` comment line carrying the
tool version, config hash and seed.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .gpd import DAYS_PER_YEAR, ExcessRecord
from .hier_mcmc import ChainArchive
from .lattice import GRID_HEADER, Lattice, read_grid_csv
from .single_cell import SingleCellChain

OBS_HEADER = ["cell_id", "date", "value"]
TRUTH_HEADER = ["cell_id", "log_sigma_tilde", "xi", "phi1", "phi2"]
THRESHOLD_HEADER = ["cell_id", "u", "lambda_u", "n_exceed", "n_total", "n_y"]
SCAN_HEADER = ["level", "u", "sigma_star", "xi", "se_sigma_star", "se_xi", "converged"]
START_DATE = np.datetime64("1979-01-01")


class DataError(ValueError):
    """Unreadable or inconsistent input data."""


def header_line(config_hash: str, seed) -> str:
    return f"spatial-gpd {__version__} config_hash={config_hash} seed={seed}"


def fmt(v, digits=10) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), f".{digits}g")


def write_csv(path, columns, rows, header: str | None = None, digits=10):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if header is not None:
            fh.write(f"# {header}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v, digits) for v in row) + "\n")


def read_csv(path, expected=None):
    """Rows of a CSV (comment lines skipped) as lists of strings."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: empty file")
    head = [h.strip() for h in rows[0]]
    if expected is not None and head[: len(expected)] != list(expected):
        raise DataError(f"{path}: expected header {','.join(expected)}, got {','.join(head)}")
    return head, rows[1:]


# -- grid -------------------------------------------------------------------

def write_grid(path, lattice: Lattice, header=None):
    rows = [(c.cell_id, c.lon, c.lat, c.grid_row, c.grid_col) for c in lattice.cells]
    write_csv(path, GRID_HEADER, rows, header, digits=12)


def read_grid(path, adjacency="rook") -> Lattice:
    if not Path(path).exists():
        raise DataError(f"file not found: {path}")
    try:
        return read_grid_csv(path, adjacency=adjacency)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


# -- observations -----------------------------------------------------------

def write_observations(path, lattice: Lattice, series, header=None, start=START_DATE):
    series = np.asarray(series)
    dates = (start + np.arange(series.shape[1])).astype(str)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if header is not None:
            fh.write(f"# {header}\n")
        fh.write(",".join(OBS_HEADER) + "\n")
        for j, c in enumerate(lattice.cells):
            vals = [f"{v:.6f}" for v in series[j]]
            fh.write("".join(f"{c.cell_id},{d},{v}\n" for d, v in zip(dates, vals)))


@dataclass
class Observations:
    cell_ids: list
    days: dict    # cell_id -> int64 day index relative to the earliest date
    values: dict  # cell_id -> float64 values


def read_observations(path) -> Observations:
    _, rows = read_csv(path, OBS_HEADER)
    ids, dates, vals = [], [], []
    for lineno, r in enumerate(rows, start=2):
        try:
            ids.append(int(r[0]))
            dates.append(r[1].strip())
            vals.append(float(r[2]))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: bad row {lineno}: {','.join(r)}") from exc
    if not ids:
        raise DataError(f"{path}: no observations")
    try:
        date_arr = np.array(dates, dtype="datetime64[D]")
    except ValueError as exc:
        raise DataError(f"{path}: unparseable date ({exc})") from exc
    ids = np.array(ids)
    vals = np.array(vals)
    if not np.all(np.isfinite(vals)):
        raise DataError(f"{path}: non-finite values")
    day = (date_arr - date_arr.min()).astype(np.int64)
    out_days, out_vals = {}, {}
    order = np.argsort(ids, kind="stable")
    uniq, starts = np.unique(ids[order], return_index=True)
    bounds = list(starts) + [len(order)]
    for cid, a, b in zip(uniq, bounds[:-1], bounds[1:]):
        idx = order[a:b]
        idx = idx[np.argsort(day[idx], kind="stable")]
        out_days[int(cid)] = day[idx]
        out_vals[int(cid)] = vals[idx]
    return Observations([int(c) for c in uniq], out_days, out_vals)


def write_truth(path, lattice, theta, phi, header=None):
    rows = [(c.cell_id, *theta[j], *phi[j]) for j, c in enumerate(lattice.cells)]
    write_csv(path, TRUTH_HEADER, rows, header, digits=17)


def read_truth(path):
    _, rows = read_csv(path, TRUTH_HEADER)
    arr = np.array([[float(v) for v in r] for r in rows])
    return arr[:, 0].astype(int), arr[:, 1:3], arr[:, 3:5]


# -- fitted records ---------------------------------------------------------

def write_records(out_dir, records: list[ExcessRecord], header=None):
    out_dir = Path(out_dir)
    write_csv(out_dir / "thresholds.csv", THRESHOLD_HEADER,
              [(r.cell_id, r.u, r.lambda_u, r.n_exceed, r.n_total, r.n_y) for r in records],
              header, digits=17)
    rows = []
    for r in records:
        days = r.days if r.days is not None else np.full(r.n_exceed, -1)
        rows += [(r.cell_id, int(t), float(y)) for t, y in zip(days, r.excesses)]
    write_csv(out_dir / "excesses.csv", ["cell_id", "day", "excess"], rows, header, digits=17)


def read_records(out_dir) -> list[ExcessRecord]:
    out_dir = Path(out_dir)
    _, trows = read_csv(out_dir / "thresholds.csv", THRESHOLD_HEADER)
    _, erows = read_csv(out_dir / "excesses.csv", ["cell_id", "day", "excess"])
    by_cell: dict = {}
    for r in erows:
        by_cell.setdefault(int(r[0]), []).append((int(r[1]), float(r[2])))
    records = []
    for r in trows:
        cid = int(r[0])
        pairs = by_cell.get(cid, [])
        days = np.array([p[0] for p in pairs], dtype=np.int64)
        records.append(ExcessRecord(cell_id=cid, u=float(r[1]),
                                    excesses=np.array([p[1] for p in pairs]),
                                    n_total=int(r[4]), n_y=float(r[5]),
                                    days=None if np.any(days < 0) else days))
    return records


# -- chain archives ---------------------------------------------------------

def _param_cols(cell_ids, names=("log_sigma_tilde", "xi")):
    return [f"c{c}_{n}" for c in cell_ids for n in names]


def write_archive(out_dir, archive: ChainArchive, header=None, meta_extra=None):
    """One CSV per parameter block plus ``run_metadata.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    it = archive.iterations
    ids = archive.cell_ids
    N = archive.n_draws

    def block(name, cols, arr, iters):
        write_csv(out_dir / f"{name}.csv", ["iteration"] + cols,
                  (np.column_stack([iters, arr.reshape(len(iters), -1)]).tolist()
                   if len(iters) else []), header, digits=17)

    block("theta", _param_cols(ids), archive.theta, it)
    q = archive.beta.shape[1]
    names = archive.meta.get("covariates", [f"x{i}" for i in range(q)])
    block("beta", [f"{n}_{p}" for n in names for p in ("log_sigma_tilde", "xi")], archive.beta, it)
    tri = [(0, 0), (0, 1), (1, 1)]
    block("sigma_theta", ["s11", "s12", "s22"],
          np.stack([archive.Sigma_theta[:, a, b] for a, b in tri], axis=1), it)
    block("sigma_phi", ["s11", "s12", "s22"],
          np.stack([archive.Sigma_phi[:, a, b] for a, b in tri], axis=1), it)
    block("phi", _param_cols(ids, ("phi1", "phi2")), archive.phi, archive.phi_iterations)
    write_csv(out_dir / "accepted.csv", ["iteration"] + [f"c{c}" for c in ids],
              [(int(i), *map(int, a)) for i, a in zip(it, archive.accepted)], header)
    write_csv(out_dir / "loglik.csv", ["iteration", "loglik"],
              [(int(i), v) for i, v in zip(it, archive.loglik)], header, digits=17)
    write_csv(out_dir / "proposal.csv", ["cell_id", "proposal_scale", "burnin_acceptance"],
              [(int(c), s, a) for c, s, a in zip(ids, archive.proposal_scale,
                                                archive.burnin_acceptance)], header, digits=17)
    meta = dict(archive.meta)
    meta.update(meta_extra or {})
    meta["n_draws"] = N
    meta["cell_ids"] = [int(c) for c in ids]
    with (out_dir / "run_metadata.json").open("w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def _read_block(path):
    _, rows = read_csv(path)
    if not rows:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 0))
    arr = np.array(rows, dtype=float)
    return arr[:, 0].astype(np.int64), arr[:, 1:]


def read_archive(out_dir) -> ChainArchive:
    out_dir = Path(out_dir)
    meta_path = out_dir / "run_metadata.json"
    if not meta_path.exists():
        raise DataError(f"no chain archive in {out_dir}")
    meta = json.loads(meta_path.read_text())
    ids = np.array(meta["cell_ids"], dtype=np.int64)
    d = ids.size
    it, theta = _read_block(out_dir / "theta.csv")
    N = it.size
    _, beta = _read_block(out_dir / "beta.csv")
    _, st = _read_block(out_dir / "sigma_theta.csv")
    _, sp = _read_block(out_dir / "sigma_phi.csv")
    phi_it, phi = _read_block(out_dir / "phi.csv")
    _, acc = _read_block(out_dir / "accepted.csv")
    _, ll = _read_block(out_dir / "loglik.csv")
    _, prop = _read_block(out_dir / "proposal.csv")

    def full(tri):
        M = np.empty((tri.shape[0], 2, 2))
        M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1] = tri[:, 0], tri[:, 1], tri[:, 1], tri[:, 2]
        return M

    return ChainArchive(cell_ids=ids, theta=theta.reshape(N, d, 2),
                        beta=beta.reshape(N, -1, 2), Sigma_theta=full(st.reshape(N, 3)),
                        Sigma_phi=full(sp.reshape(N, 3)), phi=phi.reshape(phi_it.size, d, 2),
                        accepted=acc.reshape(N, d).astype(bool), loglik=ll.reshape(N),
                        iterations=it, phi_iterations=phi_it,
                        proposal_scale=prop[:, 0] if prop.size else np.ones(d),
                        burnin_acceptance=prop[:, 1] if prop.size else np.zeros(d), meta=meta)


def write_single_chains(out_dir, chains: list[SingleCellChain], header=None):
    out_dir = Path(out_dir)
    for c in chains:
        write_csv(out_dir / f"chain_cell{c.cell_id}.csv", ["draw", "log_sigma_tilde", "xi"],
                  [(i + 1, a, b) for i, (a, b) in enumerate(c.draws)], header, digits=17)
    rows = []
    for c in chains:
        m = c.draws.mean(axis=0)
        s = c.draws.std(axis=0, ddof=1) if c.draws.shape[0] > 1 else np.zeros(2)
        rows.append((c.cell_id, m[0], s[0], m[1], s[1], c.acceptance_rate))
    write_csv(out_dir / "single_cell_summary.csv",
              ["cell_id", "mean_log_sigma_tilde", "sd_log_sigma_tilde", "mean_xi", "sd_xi",
               "acceptance_rate"], rows, header)


def read_single_chains(out_dir, records) -> list[SingleCellChain]:
    out_dir = Path(out_dir)
    _, summary = read_csv(out_dir / "single_cell_summary.csv")
    acc = {int(r[0]): float(r[5]) for r in summary}
    chains = []
    for rec in records:
        _, draws = _read_block(out_dir / f"chain_cell{rec.cell_id}.csv")
        chains.append(SingleCellChain(cell_id=rec.cell_id, draws=draws.reshape(-1, 2),
                                      acceptance_rate=acc.get(rec.cell_id, np.nan), u=rec.u,
                                      lambda_u=rec.lambda_u, n_y=rec.n_y))
    return chains
