"""Return levels from GPD parameter draws.

The r-year level solves ``n_y * lambda_u * S(x - u) = 1 / r`` where ``S`` is
the GPD survival function: the level exceeded on average once in r years.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .gpd import XI_ZERO_TOL, ExcessRecord

logger = logging.getLogger(__name__)

MAP_COLUMNS = ["cell_id", "lon", "lat", "r", "mean", "sd", "q025", "q50", "q975", "predictive"]


class ReturnLevelError(ValueError):
    pass


def return_level(theta: ArrayLike, u: float, lambda_u: float, n_y: float, r: float):
    """r-year return level for ``theta = (log_sigma_tilde, xi)``.

    ``theta`` may be a (..., 2) array of draws; infeasible draws
    (``sigma_u <= 0``) give NaN. Raises when ``n_y * lambda_u * r < 1``,
    i.e. the level would fall below the threshold.
    """
    if not r > 0:
        raise ReturnLevelError("return period must be positive")
    m = n_y * lambda_u * r
    if m < 1:
        raise ReturnLevelError(
            f"n_y * lambda_u * r = {m:.6g} < 1: return level lies below the threshold")
    theta = np.asarray(theta, dtype=float)
    xi = theta[..., 1]
    sigma = np.exp(theta[..., 0]) + xi * u
    log_m = np.log(m)
    small = np.abs(xi) < XI_ZERO_TOL
    safe = np.where(small, 1.0, xi)
    with np.errstate(over="ignore", invalid="ignore"):
        gen = sigma / safe * np.expm1(xi * log_m)
    x = u + np.where(small, sigma * log_m, gen)
    x = np.where(sigma > 0, x, np.nan)
    return float(x) if x.ndim == 0 else x


def _draw_array(source) -> NDArray[np.float64]:
    """(N, d, 2) theta draws from an archive, single-cell chains or an array."""
    if hasattr(source, "theta_draws"):
        return np.asarray(source.theta_draws(), dtype=float)
    if isinstance(source, (list, tuple)) and source and hasattr(source[0], "draws"):
        n = {c.draws.shape[0] for c in source}
        if len(n) != 1:
            raise ReturnLevelError("single-cell chains differ in length")
        return np.stack([c.draws for c in source], axis=1)
    arr = np.asarray(source, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, None, :]
    return arr


@dataclass(frozen=True)
class ReturnLevelSummary:
    cell_id: int
    r: float
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    predictive_level: float = np.nan
    n_dropped: int = 0


def posterior_return_levels(source, records: list[ExcessRecord], r_list,
                            predictive: bool = False, solver_tol: float = 1e-8):
    """Summaries of the posterior return-level distribution per cell and period.

    Draws giving an infeasible level are dropped and counted.
    """
    draws = _draw_array(source)
    if draws.shape[0] == 0:
        raise ReturnLevelError("no draws")
    if draws.shape[1] != len(records):
        raise ReturnLevelError(f"{draws.shape[1]} cells in draws, {len(records)} records")
    out = []
    for j, rec in enumerate(records):
        for r in r_list:
            x = return_level(draws[:, j], rec.u, rec.lambda_u, rec.n_y, r)
            ok = np.isfinite(x)
            n_bad = int((~ok).sum())
            if n_bad == x.size:
                raise ReturnLevelError(f"cell {rec.cell_id}: every draw is invalid")
            if n_bad:
                warnings.warn(f"cell {rec.cell_id}, r={r}: dropped {n_bad} invalid draws", stacklevel=2)
            x = x[ok]
            q025, q50, q975 = np.quantile(x, [0.025, 0.5, 0.975])
            sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
            pred = (predictive_return_level(draws[ok, j], rec, r, solver_tol)
                    if predictive else np.nan)
            out.append(ReturnLevelSummary(int(rec.cell_id), float(r), float(np.mean(x)), sd,
                                          float(q025), float(q50), float(q975), pred, n_bad))
    return out


def _mixture_exceedance(y, theta, u, lambda_u):
    """Posterior-averaged daily exceedance probability of level ``y >= u``."""
    xi = theta[:, 1]
    sigma = np.exp(theta[:, 0]) + xi * u
    x = y - u
    small = np.abs(xi) < XI_ZERO_TOL
    safe = np.where(small, 1.0, xi)
    base = 1.0 + safe * x / sigma
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gen = np.where(base > 0, np.power(np.maximum(base, 0.0), -1.0 / safe), 0.0)
    surv = np.where(small, np.exp(-x / sigma), gen)
    return lambda_u * float(np.mean(surv))


def predictive_return_level(cell_draws: ArrayLike, record: ExcessRecord, r: float,
                            solver_tol: float = 1e-8, max_doublings: int = 10) -> float:
    """Level ``y`` whose posterior-predictive daily exceedance probability is ``1/(r n_y)``.

    Solves ``mean_i lambda_u S(y - u | theta_i) = 1 / (r n_y)`` with Brent's
    method inside ``(u, u + w 2^k)``; the bracket width ``w`` starts at the
    median per-draw excess of the return level and is doubled at most
    ``max_doublings`` times.
    """
    theta = np.asarray(cell_draws, dtype=float).reshape(-1, 2)
    sigma = np.exp(theta[:, 0]) + theta[:, 1] * record.u
    theta = theta[sigma > 0]
    if theta.shape[0] == 0:
        raise ReturnLevelError(f"cell {record.cell_id}: no valid draws")
    u, lam = record.u, record.lambda_u
    target = 1.0 / (r * record.n_y)
    if lam <= target:
        raise ReturnLevelError(
            f"cell {record.cell_id}: r * n_y * lambda_u <= 1, no root above the threshold")

    def f(y):
        return _mixture_exceedance(y, theta, u, lam) - target

    levels = return_level(theta, u, lam, record.n_y, r)
    width = float(np.nanmedian(levels) - u)
    if not np.isfinite(width) or width <= 0:
        width = float(np.median(sigma[sigma > 0]))
    hi = u + width
    for _ in range(max_doublings):
        if f(hi) < 0:
            break
        width *= 2
        hi = u + width
    if not f(hi) < 0:
        raise ReturnLevelError(
            f"cell {record.cell_id}: root not bracketed below {hi:.6g}; averaged tail "
            f"probability there is {f(hi) + target:.3e} vs target {target:.3e}")
    return float(brentq(f, u, hi, xtol=1e-12, rtol=max(solver_tol, 4 * np.finfo(float).eps),
                        maxiter=500))


def map_rows(summaries, lattice):
    by_id = {c.cell_id: c for c in lattice.cells}
    missing = {s.cell_id for s in summaries} - set(by_id)
    if missing:
        raise ReturnLevelError(f"summaries for cells not on the lattice: {sorted(missing)}")
    rows = []
    for s in summaries:
        c = by_id[s.cell_id]
        rows.append([s.cell_id, c.lon, c.lat, s.r, s.mean, s.sd, s.q025, s.q50, s.q975,
                     s.predictive_level])
    return rows


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".10g")


def emit_map(summaries, lattice, format: str = "csv", path=None, header: str | None = None) -> str:
    """Render summaries as CSV or a GeoJSON point collection.

    Returns the text, and writes it to ``path`` when given. ``header`` is
    written as a leading ``#`` comment line (CSV only).
    """
    covered = {s.cell_id for s in summaries}
    if covered != set(int(c.cell_id) for c in lattice.cells):
        raise ReturnLevelError("summaries must cover every lattice cell")
    rows = map_rows(summaries, lattice)
    if format == "csv":
        lines = [] if header is None else [f"# {header}"]
        lines.append(",".join(MAP_COLUMNS))
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    elif format == "geojson":
        features = []
        for row in rows:
            props = dict(zip(MAP_COLUMNS, row))
            props = {k: (int(v) if k == "cell_id" else
                         (None if not np.isfinite(v) else float(v)))
                     for k, v in props.items()}
            features.append({"type": "Feature",
                             "geometry": {"type": "Point", "coordinates": [props["lon"], props["lat"]]},
                             "properties": props})
        doc = {"type": "FeatureCollection", "features": features}
        if header is not None:
            doc["metadata"] = header
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    else:
        raise ReturnLevelError(f"unknown map format {format!r}")
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
