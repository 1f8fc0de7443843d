"""Chain and model diagnostics: DIC, effective sample size, acceptance."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .likelihood_adjust import ExcessPanel
from .return_levels import _draw_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DicReport:
    mean_deviance: float
    deviance_at_mean: float
    p_D: float
    DIC: float
    excluded_cells: tuple = ()


def dic(source, records, k: float = 1.0) -> DicReport:
    """Deviance information criterion on the adjusted (power-k) likelihood.

    Deviance is ``-2 k sum_j loglik_j(theta_j)``; the plug-in deviance uses
    the posterior mean of ``(log_sigma_tilde, xi)`` per cell. Cells whose
    posterior mean is infeasible are left out of both terms.
    """
    panel = records if isinstance(records, ExcessPanel) else ExcessPanel(records)
    draws = _draw_array(source)
    if draws.shape[0] == 0:
        raise ValueError("archive is empty")
    theta_bar = draws.mean(axis=0)
    ll_bar = panel.cell_loglik(theta_bar)
    ok = np.isfinite(ll_bar)
    excluded = tuple(int(c) for c in panel.cell_ids[~ok])
    if excluded:
        warnings.warn(f"posterior mean infeasible for cells {list(excluded)}; excluded from DIC",
                      stacklevel=2)
    stored = getattr(source, "loglik", None)
    if not excluded and stored is not None and len(stored) == draws.shape[0]:
        mean_ll = float(np.mean(stored))
    else:
        rows = np.flatnonzero(ok)
        total = 0.0
        for t in range(draws.shape[0]):
            total += float(panel.cell_loglik(draws[t, rows], rows=rows).sum())
        mean_ll = total / draws.shape[0]
    d_bar = -2.0 * k * mean_ll
    d_hat = -2.0 * k * float(ll_bar[ok].sum())
    p_d = d_bar - d_hat
    return DicReport(d_bar, d_hat, p_d, d_bar + p_d, excluded)


class EssEstimate(NamedTuple):
    ess: float
    constant: bool


def _autocorrelation(x):
    n = x.size
    x = x - x.mean()
    f = np.fft.rfft(x, n=2 * n)
    acov = np.fft.irfft(f * np.conjugate(f))[:n] / n
    return acov / acov[0]


def effective_sample_size(series: ArrayLike, min_length: int = 100) -> EssEstimate:
    """``N / (1 + 2 sum rho_t)`` with Geyer's initial positive sequence.

    Autocorrelations are summed in adjacent pairs until a pair sum turns
    non-positive. The estimate is capped at N.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < min_length:
        raise ValueError(f"series length {n} below {min_length}")
    if np.ptp(x) == 0:
        return EssEstimate(0.0, True)
    rho = _autocorrelation(x)
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return EssEstimate(float(min(n, n / tau)), False)


@dataclass
class AcceptanceSummary:
    cell_ids: np.ndarray
    rates: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray

    def histogram_rows(self):
        return [(float(lo), float(hi), int(c))
                for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts)]


def acceptance_summary(archive, n_bins: int = 20) -> AcceptanceSummary:
    """Post-burn-in acceptance fraction per cell and a histogram over cells."""
    if hasattr(archive, "accepted"):
        rates = np.asarray(archive.accepted, dtype=float).mean(axis=0)
        ids = np.asarray(archive.cell_ids)
    else:  # single-cell chains
        rates = np.array([c.acceptance_rate for c in archive])
        ids = np.array([c.cell_id for c in archive])
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    counts, _ = np.histogram(rates, bins=edges)
    return AcceptanceSummary(ids, rates, edges, counts)
