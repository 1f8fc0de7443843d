"""Independence likelihood over cells and its magnitude adjustment.

The independence likelihood treats cells as conditionally independent.
Raising it to a power ``k`` keeps the maximiser but rescales curvature;
``k = p / trace(H^-1 J)`` is estimated from the sensitivity ``H`` and the
day-wise score variability ``J``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

from .gpd import XI_ZERO_TOL, ExcessRecord, GpdError, theta_information

logger = logging.getLogger(__name__)

K_MAX = 1.05


class ExcessPanel:
    """Excesses of all cells packed into a zero-padded (d, n_max) array.

    Used for fast evaluation of every cell's log-likelihood at once.
    """

    def __init__(self, records: list[ExcessRecord]):
        self.records = list(records)
        d = len(self.records)
        self.d = d
        self.cell_ids = np.array([r.cell_id for r in self.records], dtype=np.int64)
        self.u = np.array([r.u for r in self.records], dtype=float)
        self.n = np.array([r.n_exceed for r in self.records], dtype=float)
        self.lambda_u = np.array([r.lambda_u for r in self.records], dtype=float)
        self.n_y = np.array([r.n_y for r in self.records], dtype=float)
        n_max = int(self.n.max()) if d else 0
        self.Y = np.zeros((d, n_max))
        for j, r in enumerate(self.records):
            self.Y[j, : r.n_exceed] = r.excesses
        self.y_max = self.Y.max(axis=1) if d else np.zeros(0)
        self.y_sum = self.Y.sum(axis=1)

    def __len__(self):
        return self.d

    def sigma_u(self, theta: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.exp(theta[:, 0]) + theta[:, 1] * self.u

    def feasible(self, theta: NDArray[np.float64]) -> NDArray[np.bool_]:
        """Cells whose parameters give ``sigma_u > 0`` and cover every excess."""
        sigma = self.sigma_u(theta)
        xi = theta[:, 1]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            ok = np.isfinite(sigma) & (sigma > 0)
            ok &= (xi >= 0) | (1.0 + xi * self.y_max / np.where(ok, sigma, 1.0) > 0)
        return ok & np.isfinite(xi)

    def cell_loglik(self, theta: NDArray[np.float64], rows=None) -> NDArray[np.float64]:
        """Per-cell GPD log-likelihood at ``theta`` (d, 2); ``-inf`` where infeasible.

        ``rows`` optionally restricts evaluation to a subset of cells.
        """
        theta = np.asarray(theta, dtype=float)
        Y, u, n, ysum, ymax = self.Y, self.u, self.n, self.y_sum, self.y_max
        if rows is not None:
            Y, u, n, ysum, ymax = Y[rows], u[rows], n[rows], ysum[rows], ymax[rows]
        with np.errstate(over="ignore", invalid="ignore"):
            sigma = np.exp(theta[:, 0]) + theta[:, 1] * u
        xi = theta[:, 1]
        ok = np.isfinite(sigma) & (sigma > 0)
        sig = np.where(ok, sigma, 1.0)
        ok &= (xi >= 0) | (1.0 + xi * ymax / sig > 0)
        out = np.full(theta.shape[0], -np.inf)
        if not ok.any():
            return out
        small = np.abs(xi) < XI_ZERO_TOL
        z = np.where(ok & ~small, xi / sig, 0.0)
        s = np.log1p(z[:, None] * Y).sum(axis=1)
        safe_xi = np.where(small, 1.0, xi)
        ll_gen = -n * np.log(sig) - (1.0 + 1.0 / safe_xi) * s
        ll_exp = -n * np.log(sig) - ysum / sig
        out = np.where(ok, np.where(small, ll_exp, ll_gen), -np.inf)
        return out

    def loglik(self, theta: NDArray[np.float64]) -> float:
        return float(self.cell_loglik(theta).sum()) if self.d else 0.0


def _as_panel(records) -> ExcessPanel:
    return records if isinstance(records, ExcessPanel) else ExcessPanel(records)


def adjusted_loglik(records, theta: ArrayLike, k: float) -> float:
    """``k`` times the independence log-likelihood; ``-inf`` if any cell is infeasible."""
    if not k > 0:
        raise ValueError("k must be positive")
    panel = _as_panel(records)
    if panel.d == 0:
        return 0.0
    return k * panel.loglik(np.asarray(theta, dtype=float).reshape(panel.d, 2))


def _observation_logpdf(theta, y, u):
    """Log-density of each excess in ``y`` at one cell's ``theta``; (..., n)."""
    sigma = np.exp(theta[..., 0]) + theta[..., 1] * u
    xi = theta[..., 1]
    if np.any(sigma <= 0):
        raise GpdError("sigma_u <= 0 while differentiating the score")
    z = y / sigma[..., None]
    xi_b = xi[..., None]
    small = np.abs(xi_b) < XI_ZERO_TOL
    base = 1.0 + xi_b * z
    if np.any(~small & (base <= 0)):
        raise GpdError("an excess lies outside the GPD support")
    safe = np.where(small, 1.0, xi_b)
    gen = -np.log(sigma)[..., None] - (1.0 + 1.0 / safe) * np.log1p(np.where(small, 0.0, xi_b * z))
    return np.where(small, -np.log(sigma)[..., None] - z, gen)


def observation_scores(record: ExcessRecord, theta: ArrayLike, rel_step=1e-6) -> NDArray[np.float64]:
    """Central-difference gradient of each excess's log-density w.r.t. ``theta``; (n, 2)."""
    theta = np.asarray(theta, dtype=float)
    h = rel_step * np.maximum(np.abs(theta), 1.0)
    grads = np.empty((record.n_exceed, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h[i]
        plus = _observation_logpdf(theta + e, record.excesses, record.u)
        minus = _observation_logpdf(theta - e, record.excesses, record.u)
        grads[:, i] = (plus - minus) / (2 * h[i])
    return grads


def score_vector_per_day(records: list[ExcessRecord], theta: ArrayLike,
                         rel_step=1e-6) -> sparse.csr_matrix:
    """Day-by-parameter score matrix of the independence log-likelihood.

    Row ``t`` holds ``s_t`` (length ``2d``, cell ``j`` in columns ``2j, 2j+1``),
    the summed gradient of every excess observed on day ``t``. Days with no
    exceedance anywhere are zero rows. Day indices are taken relative to the
    earliest stamped day across cells.
    """
    theta = np.asarray(theta, dtype=float).reshape(len(records), 2)
    if not records:
        return sparse.csr_matrix((0, 0))
    for r in records:
        if r.days is None:
            raise ValueError(f"cell {r.cell_id}: excesses carry no day stamps")
    day0 = min(int(r.days.min()) for r in records)
    n_days = max(int(r.days.max()) for r in records) - day0 + 1
    rows, cols, vals = [], [], []
    for j, r in enumerate(records):
        g = observation_scores(r, theta[j], rel_step)
        t = r.days - day0
        rows += [t, t]
        cols += [np.full(t.size, 2 * j), np.full(t.size, 2 * j + 1)]
        vals += [g[:, 0], g[:, 1]]
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    # duplicates (two excesses in one cell on the same day) are summed by coo -> csr
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n_days, 2 * len(records))).tocsr()


@dataclass
class AdjustmentEstimate:
    k: float
    p: int
    trace_HinvJ: float
    per_cell_H: list
    effective_independent_sites: float
    mode: str = "pooled"
    per_cell_ratio: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    excluded_cells: list = field(default_factory=list)
    k_raw: float = np.nan


def estimate_godambe_k(records: list[ExcessRecord], theta_mle: ArrayLike,
                       per_cell_information=None, mode: str = "pooled") -> AdjustmentEstimate:
    """Estimate the magnitude-adjustment constant ``k = p / trace(H^-1 J)``.

    Parameters
    ----------
    records : list of ExcessRecord
        Day-stamped excesses, one record per cell.
    theta_mle : array (d, 2)
        Cell-wise MLEs in the ``(log_sigma_tilde, xi)`` parameterisation.
    per_cell_information : list of (2, 2) arrays, optional
        Observed information of each cell at ``theta_mle`` in the same
        parameterisation; computed by finite differences when omitted.
    mode : {"pooled", "full"}
        ``"pooled"`` treats ``theta`` as a parameter shared by all cells
        (``p = 2``): ``H = sum_j H_j`` and ``J`` is the covariance of the
        cell-summed daily score. Dependence between cells enters through
        the cross-cell terms, so ``k`` spans ``(1/d, 1]``.
        ``"full"`` uses all ``2d`` cell parameters; with block-diagonal ``H``
        only the diagonal blocks of ``J`` enter the trace.

    Notes
    -----
    ``J`` sums daily outer products without a lag window, i.e. days are
    treated as independent.
    """
    if mode not in ("pooled", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    d = len(records)
    theta_mle = np.asarray(theta_mle, dtype=float).reshape(d, 2)
    if per_cell_information is None:
        per_cell_information = [theta_information(theta_mle[j], r.excesses, r.u)
                                for j, r in enumerate(records)]
    H_blocks = [np.asarray(h, dtype=float) for h in per_cell_information]

    keep, excluded = [], []
    for j, H in enumerate(H_blocks):
        ok = np.all(np.isfinite(H))
        if ok:
            try:
                np.linalg.cholesky(H)
            except np.linalg.LinAlgError:
                ok = False
        if ok:
            keep.append(j)
        else:
            excluded.append(int(records[j].cell_id))
    if excluded:
        warnings.warn(f"singular information for cells {excluded}; excluded from k", stacklevel=2)
    if not keep:
        raise ValueError("no cell has a usable information matrix")

    recs = [records[j] for j in keep]
    S = score_vector_per_day(recs, theta_mle[keep])
    d_used = len(keep)
    per_cell_ratio = np.full(d, np.nan)
    for jj, j in enumerate(keep):
        Sj = S[:, 2 * jj: 2 * jj + 2].toarray()
        per_cell_ratio[j] = np.trace(np.linalg.solve(H_blocks[j], Sj.T @ Sj)) / 2

    if mode == "full":
        p = 2 * d_used
        trace = float(np.nansum(per_cell_ratio) * 2)
    else:
        p = 2
        H = sum(H_blocks[j] for j in keep)
        pooled = S @ sparse.kron(np.ones((d_used, 1)), sparse.identity(2)).tocsr()
        pooled = np.asarray(pooled.todense()) if sparse.issparse(pooled) else pooled
        J = pooled.T @ pooled
        trace = float(np.trace(np.linalg.solve(H, J)))

    k_raw = p / trace
    k = k_raw
    if not 0 < k <= K_MAX:
        warnings.warn(f"estimated k = {k_raw:.4f} outside (0, {K_MAX}]; clamped", stacklevel=2)
        k = min(max(k, np.finfo(float).tiny), K_MAX)
    return AdjustmentEstimate(k=float(k), p=p, trace_HinvJ=trace, per_cell_H=H_blocks,
                              effective_independent_sites=float(k * d_used), mode=mode,
                              per_cell_ratio=per_cell_ratio, excluded_cells=excluded,
                              k_raw=float(k_raw))
