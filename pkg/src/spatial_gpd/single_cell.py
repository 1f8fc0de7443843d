"""Independent per-cell Bayesian GPD fits with a flat prior.

The baseline the spatial model is compared against: each cell is sampled
on its own by adaptive random-walk Metropolis, with a prior uniform in
``(log sigma_u, xi)`` on ``xi > -1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.stats import beta as beta_dist

from .gpd import ExcessRecord, GpdError, fit_theta_mle
from .hier_mcmc import PROPOSAL_SCALE, SamplerConfig, adapt_proposals
from .likelihood_adjust import ExcessPanel
from .return_levels import ReturnLevelError, posterior_return_levels

XI_FLOOR = -1.0
STUCK_WINDOW = 1_000


class ChainDegenerate(RuntimeError):
    pass


@dataclass
class SingleCellChain:
    cell_id: int
    draws: NDArray[np.float64]  # (N, 2) in (log_sigma_tilde, xi)
    acceptance_rate: float
    u: float
    lambda_u: float
    n_y: float
    meta: dict = field(default_factory=dict)


def _cell_seed(seed, cell_id):
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(cell_id),))


def _to_theta(eta, u):
    """(log sigma_u, xi) -> (log sigma_tilde, xi); NaN where sigma_tilde <= 0."""
    st = np.exp(eta[:, 0]) - eta[:, 1] * u
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.column_stack([np.where(st > 0, np.log(st), np.nan), eta[:, 1]])


def _log_prior(theta, u, space, martins_stedinger):
    xi = theta[:, 1]
    sigma_u = np.exp(theta[:, 0]) + xi * u
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where((xi > XI_FLOOR) & (sigma_u > 0), 0.0, -np.inf)
        if space == "theta":
            # uniform in (log sigma_u, xi) expressed in (log sigma_tilde, xi)
            lp = lp + theta[:, 0] - np.log(np.where(sigma_u > 0, sigma_u, 1.0))
        if martins_stedinger:
            lp = lp + beta_dist.logpdf(xi + 0.5, 9.0, 6.0)
    return lp


def run_single_cells(records: list[ExcessRecord], n_iter=20_000, burn_in=5_000, thin=1,
                     seed=0, space="theta", martins_stedinger=False,
                     sampler: SamplerConfig | None = None, min_exceed=10):
    """Sample every cell's posterior independently (vectorised across cells).

    Each cell draws its innovations from its own stream keyed by
    ``(seed, cell_id)``, so a cell's chain does not depend on which other
    cells are run alongside it.

    Parameters
    ----------
    space : {"theta", "native"}
        Sampling coordinates: ``(log sigma_tilde, xi)`` or
        ``(log sigma_u, xi)``. The prior is the same distribution in both;
        draws are always returned in ``(log sigma_tilde, xi)``.
    martins_stedinger : bool
        Multiply in the Beta(9, 6) prior on ``xi + 0.5`` (off by default).
    """
    if space not in ("theta", "native"):
        raise ValueError(f"unknown space {space!r}")
    sampler = sampler or SamplerConfig(n_iter=n_iter, burn_in=burn_in, thin=thin)
    n_iter, burn_in, thin = sampler.n_iter, sampler.burn_in, sampler.thin
    panel = ExcessPanel(records)
    d = panel.d
    u = panel.u

    start = np.empty((d, 2))
    cov = np.empty((d, 2, 2))
    for j, rec in enumerate(records):
        if rec.n_exceed < min_exceed:
            raise GpdError(f"cell {rec.cell_id}: need at least {min_exceed} excesses")
        theta, fit = fit_theta_mle(rec, min_exceed=min_exceed)
        info = fit.observed_information  # in (log sigma_u, xi)
        if space == "theta":
            # Jacobian of (log sigma_u, xi) w.r.t. (log sigma_tilde, xi)
            st, su = np.exp(theta[0]), fit.params.sigma_u
            Jm = np.array([[st / su, u[j] / su], [0.0, 1.0]])
            info = Jm.T @ info @ Jm
            start[j] = theta
        else:
            start[j] = [np.log(fit.params.sigma_u), fit.params.xi]
        try:
            c = np.linalg.inv(info)
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            c = np.diag([1e-3, 1e-3])
        cov[j] = PROPOSAL_SCALE * 0.5 * (c + c.T)
    L = np.linalg.cholesky(cov)

    def log_target(x):
        theta = x if space == "theta" else _to_theta(x, u)
        ok = np.all(np.isfinite(theta), axis=1)
        th = np.where(ok[:, None], theta, 0.0)
        with np.errstate(invalid="ignore"):
            out = panel.cell_loglik(th) + _log_prior(th, u, space, martins_stedinger)
        return np.where(ok & ~np.isnan(out), out, -np.inf)

    rngs = [np.random.default_rng(_cell_seed(seed, rec.cell_id)) for rec in records]
    x = start.copy()
    lt = log_target(x)
    if not np.all(np.isfinite(lt)):
        raise GpdError("MLE start has zero posterior density")
    scale = np.ones(d)
    n_keep = (n_iter - burn_in) // thin
    out = np.empty((n_keep, d, 2))
    acc_post = np.zeros(d)
    window = np.zeros(d)
    window_n = 0
    since_accept = np.zeros(d, dtype=np.int64)
    stored = 0
    for it in range(1, n_iter + 1):
        b = (it - 1) % sampler.noise_block
        if b == 0:
            n_blk = min(sampler.noise_block, n_iter - it + 1)
            z_blk = np.stack([r.standard_normal((n_blk, 2)) for r in rngs], axis=1)
            lu_blk = np.log(np.stack([r.random(n_blk) for r in rngs], axis=1))
        prop = x + np.einsum("jab,jb->ja", L, z_blk[b]) * np.sqrt(scale)[:, None]
        lt_prop = log_target(prop)
        accept = lu_blk[b] < lt_prop - lt
        x = np.where(accept[:, None], prop, x)
        lt = np.where(accept, lt_prop, lt)
        since_accept = np.where(accept, 0, since_accept + 1)
        if np.any(since_accept >= STUCK_WINDOW):
            bad = [int(records[j].cell_id) for j in np.flatnonzero(since_accept >= STUCK_WINDOW)]
            raise ChainDegenerate(f"cells {bad}: no proposal accepted in {STUCK_WINDOW} iterations")
        if it <= burn_in:
            window += accept
            window_n += 1
            if window_n == sampler.adapt_interval:
                scale = adapt_proposals(scale, window / window_n, sampler.target_acceptance,
                                        sampler.adapt_gain)
                window[:] = 0
                window_n = 0
        else:
            acc_post += accept
            if (it - burn_in) % thin == 0 and stored < n_keep:
                out[stored] = x if space == "theta" else _to_theta(x, u)
                stored += 1

    rate = acc_post / max(n_iter - burn_in, 1)
    meta = {"seed": int(seed), "n_iter": n_iter, "burn_in": burn_in, "thin": thin,
            "space": space, "martins_stedinger": bool(martins_stedinger)}
    return [SingleCellChain(cell_id=int(rec.cell_id), draws=out[:, j].copy(),
                            acceptance_rate=float(rate[j]), u=float(rec.u),
                            lambda_u=float(rec.lambda_u), n_y=float(rec.n_y),
                            meta={**meta, "final_scale": float(scale[j])})
            for j, rec in enumerate(records)]


def run_single_cell(record: ExcessRecord, n_iter=20_000, burn_in=5_000, thin=1, seed=0,
                    **kwargs) -> SingleCellChain:
    return run_single_cells([record], n_iter=n_iter, burn_in=burn_in, thin=thin,
                            seed=seed, **kwargs)[0]


@dataclass(frozen=True)
class UncertaintyRow:
    cell_id: int
    r: float
    sd_single: float
    sd_hier: float
    ratio: float


def compare_uncertainty(single_chains, hier_archive, records, r_list) -> list[UncertaintyRow]:
    """Posterior SD of the r-year level under both analyses, per cell.

    ``ratio`` is ``sd_hier / sd_single``.
    """
    r_list = list(np.atleast_1d(r_list)) if np.ndim(r_list) else [r_list]
    if not r_list:
        return []
    single_ids = [c.cell_id for c in single_chains]
    hier_ids = [int(c) for c in getattr(hier_archive, "cell_ids", single_ids)]
    rec_ids = [r.cell_id for r in records]
    if not (single_ids == hier_ids == rec_ids):
        raise ReturnLevelError("single-cell chains, hierarchical archive and records "
                               "must cover the same cells in the same order")
    s_single = posterior_return_levels(single_chains, records, r_list)
    s_hier = posterior_return_levels(hier_archive, records, r_list)
    rows = []
    for a, b in zip(s_single, s_hier):
        ratio = b.sd / a.sd if a.sd > 0 else (1.0 if b.sd == 0 else np.inf)
        rows.append(UncertaintyRow(a.cell_id, a.r, a.sd, b.sd, ratio))
    return rows
