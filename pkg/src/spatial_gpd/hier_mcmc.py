"""Gibbs / Metropolis-Hastings sampler for the hierarchical spatial GPD model.

Model, with ``theta_j = (log_sigma_tilde_j, xi_j)``:

    excesses_j | theta_j         ~ GPD, likelihood raised to the power k
    theta_j | beta, phi, Sig_th  ~ N(X_j beta + phi_j, Sig_th)
    phi                          ~ IAR(Sig_phi), centred
    beta                         ~ N(beta0, T_beta^-1)
    Sig_th, Sig_phi              ~ Inverse-Wishart

``beta`` is a (q, 2) matrix; its stacked form ``b = beta.reshape(-1)`` is
row-major, so ``X_j beta = kron(X_j, I_2) b``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .gpd import ExcessRecord, fit_theta_mle, theta_information
from .lattice import Lattice, build_proximity_matrix, center_by_component, pairwise_quadratic_form
from .likelihood_adjust import ExcessPanel

logger = logging.getLogger(__name__)

BLOCKS = ("theta", "beta", "phi", "sigma_theta", "sigma_phi")
PROPOSAL_SCALE = 2.38 ** 2 / 2
PHI_MODES = ("spectral", "sequential", "coloured")


class NumericalAbort(RuntimeError):
    """The chain reached a numerically broken state."""

    def __init__(self, message, iteration=None, state=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration
        self.state = state


# ---------------------------------------------------------------------------
# Wishart sampling
# ---------------------------------------------------------------------------

def sample_wishart(nu, scale, rng, size=None):
    """Wishart(nu, scale) draws by the Bartlett decomposition.

    ``scale`` is the (p, p) scale matrix; the mean is ``nu * scale``.
    """
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if nu <= p - 1:
        raise ValueError(f"degrees of freedom {nu} must exceed {p - 1}")
    L = np.linalg.cholesky(scale)
    n = 1 if size is None else int(size)
    A = np.zeros((n, p, p))
    # chi-square draws in row order, then the strictly lower triangle
    A[:, np.arange(p), np.arange(p)] = np.sqrt(rng.chisquare(nu - np.arange(p), size=(n, p)))
    il = np.tril_indices(p, -1)
    A[:, il[0], il[1]] = rng.standard_normal((n, len(il[0])))
    LA = L @ A
    W = LA @ np.swapaxes(LA, -1, -2)
    return W[0] if size is None else W


def sample_inverse_wishart(nu, Omega, rng, size=None):
    """Inverse-Wishart(nu, Omega) draws; mean ``Omega / (nu - p - 1)``."""
    Omega = np.asarray(Omega, dtype=float)
    try:
        scale = np.linalg.inv(Omega)
        np.linalg.cholesky(Omega)
    except np.linalg.LinAlgError as exc:
        raise NumericalAbort("Inverse-Wishart scale matrix is not SPD") from exc
    W = sample_wishart(nu, scale, rng, size=size)
    S = np.linalg.inv(W)
    return 0.5 * (S + np.swapaxes(S, -1, -2))


# ---------------------------------------------------------------------------
# Configuration and state
# ---------------------------------------------------------------------------

def design_matrix(lattice: Lattice, covariates=(), extra=None):
    """Intercept plus standardised covariate columns.

    ``covariates`` may name ``"lon"`` / ``"lat"`` (taken from the lattice);
    ``extra`` maps further names to length-d arrays.
    """
    cols, names = [np.ones(lattice.size)], ["intercept"]
    extra = extra or {}
    for name in covariates:
        if name == "lon":
            v = np.array([c.lon for c in lattice.cells])
        elif name == "lat":
            v = np.array([c.lat for c in lattice.cells])
        elif name in extra:
            v = np.asarray(extra[name], dtype=float)
        else:
            raise ValueError(f"unknown covariate {name!r}")
        sd = v.std()
        if sd == 0:
            raise ValueError(f"covariate {name!r} is constant")
        cols.append((v - v.mean()) / sd)
        names.append(name)
    return np.column_stack(cols), names


@dataclass
class ProcessConfig:
    X: NDArray[np.float64]
    beta0: NDArray[np.float64]
    T_beta: NDArray[np.float64]
    nu_theta: float
    Omega_theta: NDArray[np.float64]
    nu_phi: float
    Omega_phi: NDArray[np.float64]
    covariate_names: list = field(default_factory=lambda: ["intercept"])

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        d, q = self.X.shape
        self.beta0 = np.asarray(self.beta0, dtype=float).reshape(q, 2)
        self.T_beta = np.asarray(self.T_beta, dtype=float)
        if self.T_beta.shape != (2 * q, 2 * q):
            raise ValueError(f"T_beta must be {2 * q}x{2 * q}")
        if not (self.nu_theta > 3 and self.nu_phi > 3):
            raise ValueError("Inverse-Wishart degrees of freedom must exceed 3")
        for name in ("Omega_theta", "Omega_phi"):
            M = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, M)
            try:
                np.linalg.cholesky(M)
            except np.linalg.LinAlgError as exc:
                raise ValueError(f"{name} is not SPD") from exc

    @property
    def q(self) -> int:
        return self.X.shape[1]


def default_process_config(lattice: Lattice, theta_mle, covariates=(), extra=None,
                           nu_theta=4.0, nu_phi=4.0, intercept_precision=0.01,
                           covariate_precision=0.1, theta_spread=0.5, phi_spread=0.5,
                           Omega_theta=None, Omega_phi=None) -> ProcessConfig:
    """Empirical-Bayes hyperparameters from the cell-wise MLEs.

    ``beta0`` has the mean MLE as intercepts and zero covariate effects.
    Unless given, ``Omega_theta = (nu_theta - 3) * theta_spread * C`` and
    ``Omega_phi = (nu_phi - 3) * phi_spread * theta_spread * C``, where ``C``
    is the between-cell covariance of the MLEs.
    """
    theta_mle = np.asarray(theta_mle, dtype=float)
    X, names = design_matrix(lattice, covariates, extra)
    q = X.shape[1]
    beta0 = np.zeros((q, 2))
    beta0[0] = theta_mle.mean(axis=0)
    prec = np.full(q, covariate_precision)
    prec[0] = intercept_precision
    T_beta = np.kron(np.diag(prec), np.eye(2))
    C = np.cov(theta_mle.T)
    C = C + 1e-8 * np.eye(2) * max(np.trace(C), 1e-8)
    S_theta = theta_spread * C
    if Omega_theta is None:
        Omega_theta = (nu_theta - 3) * S_theta
    if Omega_phi is None:
        Omega_phi = (nu_phi - 3) * phi_spread * S_theta
    return ProcessConfig(X=X, beta0=beta0, T_beta=T_beta, nu_theta=nu_theta,
                         Omega_theta=np.asarray(Omega_theta, float), nu_phi=nu_phi,
                         Omega_phi=np.asarray(Omega_phi, float), covariate_names=names)


@dataclass
class SamplerConfig:
    n_iter: int = 20_000
    burn_in: int = 5_000
    thin: int = 1
    phi_thin: int = 1
    adapt_interval: int = 100
    target_acceptance: float = 0.234
    adapt_gain: float = 1.0
    phi_sweep: str = "spectral"
    update: tuple = BLOCKS
    noise_block: int = 1_000

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1 or self.phi_thin < 1:
            raise ValueError("thin must be >= 1")
        if self.phi_sweep not in PHI_MODES:
            raise ValueError(f"unknown phi_sweep {self.phi_sweep!r}")
        unknown = set(self.update) - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown update blocks {sorted(unknown)}")


@dataclass
class HierState:
    theta: NDArray[np.float64]           # (d, 2)
    beta: NDArray[np.float64]            # (q, 2)
    phi: NDArray[np.float64]             # (d, 2)
    Sigma_theta: NDArray[np.float64]     # (2, 2)
    Sigma_phi: NDArray[np.float64]       # (2, 2)
    proposal_cov: NDArray[np.float64]    # (d, 2, 2) base covariance
    proposal_scale: NDArray[np.float64]  # (d,) multiplier on proposal_cov
    cell_loglik: NDArray[np.float64] | None = None

    def copy(self) -> "HierState":
        return HierState(*(None if v is None else np.array(v) for v in
                           (self.theta, self.beta, self.phi, self.Sigma_theta, self.Sigma_phi,
                            self.proposal_cov, self.proposal_scale, self.cell_loglik)))


def cell_mles(records: list[ExcessRecord], min_exceed: int = 10):
    """Per-cell MLEs and observed information, both in theta space."""
    thetas, infos, converged = [], [], []
    for r in records:
        th, fit = fit_theta_mle(r, min_exceed=min_exceed)
        thetas.append(th)
        infos.append(theta_information(th, r.excesses, r.u))
        converged.append(fit.converged)
    return np.array(thetas), np.array(infos), np.array(converged)


def init_state(records, lattice: Lattice, config: ProcessConfig, theta_mle=None,
               info_mle=None, k: float = 1.0) -> HierState:
    """Starting state at the cell-wise MLEs.

    The base proposal covariance of cell j is ``2.38^2/2 * inv(info_j)``;
    its multiplier starts at ``1/k`` so proposals match the curvature of the
    adjusted likelihood.
    """
    if theta_mle is None or info_mle is None:
        theta_mle, info_mle, _ = cell_mles(records)
    theta_mle = np.asarray(theta_mle, dtype=float)
    d = lattice.size
    if theta_mle.shape != (d, 2) or len(info_mle) != d:
        raise ValueError("MLEs must be supplied for every cell")
    beta = np.zeros((config.q, 2))
    beta[0] = theta_mle.mean(axis=0)
    cov = np.empty((d, 2, 2))
    for j, info in enumerate(info_mle):
        try:
            np.linalg.cholesky(info)
            c = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            logger.warning("cell %d: information not SPD, using diagonal fallback", j)
            c = np.diag(np.abs(np.diag(np.linalg.pinv(info))) + 1e-4)
        cov[j] = PROPOSAL_SCALE * 0.5 * (c + c.T)
    return HierState(theta=theta_mle.copy(), beta=beta, phi=np.zeros((d, 2)),
                     Sigma_theta=config.Omega_theta / (config.nu_theta - 3),
                     Sigma_phi=config.Omega_phi / (config.nu_phi - 3),
                     proposal_cov=cov, proposal_scale=np.full(d, 1.0 / k))


# ---------------------------------------------------------------------------
# Full conditionals
# ---------------------------------------------------------------------------

def beta_conditional(state: HierState, config: ProcessConfig):
    """Mean and precision of the Gaussian full conditional of stacked beta."""
    T_theta = np.linalg.inv(state.Sigma_theta)
    X = config.X
    P = config.T_beta + np.kron(X.T @ X, T_theta)
    rhs = config.T_beta @ config.beta0.reshape(-1) + (X.T @ (state.theta - state.phi) @ T_theta).reshape(-1)
    try:
        Lp = np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise NumericalAbort("beta conditional precision is not SPD") from exc
    mean = np.linalg.solve(Lp.T, np.linalg.solve(Lp, rhs))
    return mean, P, Lp


def gibbs_beta(state: HierState, config: ProcessConfig, rng) -> NDArray[np.float64]:
    mean, _, Lp = beta_conditional(state, config)
    z = rng.standard_normal(mean.size)
    return (mean + np.linalg.solve(Lp.T, z)).reshape(config.q, 2)


def _colouring(lattice: Lattice):
    colour = -np.ones(lattice.size, dtype=int)
    for j, nb in enumerate(lattice.neighbor_sets):
        used = {colour[i] for i in nb}
        c = 0
        while c in used:
            c += 1
        colour[j] = c
    return [np.flatnonzero(colour == c) for c in range(colour.max() + 1)]


class PhiSweeper:
    """Draws of the IAR field given theta, beta and both covariances.

    ``"spectral"`` samples the whole field at once from its exact
    sum-to-zero constrained conditional: in the eigenbasis of W the
    precision ``W (x) T_phi + I (x) T_theta`` is block diagonal with 2x2
    blocks ``lambda_i T_phi + T_theta``, and the constraint removes the
    null-space coordinates. ``"sequential"`` (canonical order) and
    ``"coloured"`` (red-black) sweep the single-site conditionals and
    then centre; centring after a sweep only approximates the constrained
    conditional.
    """

    def __init__(self, lattice: Lattice, mode: str = "spectral"):
        if mode not in PHI_MODES:
            raise ValueError(f"unknown phi_sweep {mode!r}")
        self.lattice = lattice
        self.mode = mode
        self.m = lattice.neighbor_counts
        self.m_values = np.unique(self.m)
        self.nb = [np.fromiter(sorted(s), dtype=np.int64) for s in lattice.neighbor_sets]
        self.nb_lists = [list(a) for a in self.nb]
        self.colours = _colouring(lattice) if mode == "coloured" else None
        rows = np.concatenate([np.full(len(a), j) for j, a in enumerate(self.nb)])
        self._adj = np.zeros((lattice.size, lattice.size))
        self._adj[rows, np.concatenate(self.nb)] = 1.0
        if mode == "spectral":
            lam, U = np.linalg.eigh(build_proximity_matrix(lattice))
            keep = lam > 1e-9 * max(lam.max(), 1.0)
            self.lam, self.U = lam[keep], U[:, keep]

    def conditional(self, j, state, config):
        """Mean and covariance of phi_j given everything else (reference form)."""
        T_theta = np.linalg.inv(state.Sigma_theta)
        T_phi = np.linalg.inv(state.Sigma_phi)
        V = np.linalg.inv(self.m[j] * T_phi + T_theta)
        r = state.theta[j] - config.X[j] @ state.beta
        mu = V @ (T_theta @ r + T_phi @ state.phi[self.nb[j]].sum(axis=0))
        return mu, V

    def sweep(self, state: HierState, config: ProcessConfig, rng) -> NDArray[np.float64]:
        T_theta = np.linalg.inv(state.Sigma_theta)
        T_phi = np.linalg.inv(state.Sigma_phi)
        d = self.lattice.size
        if self.mode == "spectral":
            return self._spectral(state, config, rng, T_theta, T_phi)
        A = {}
        B = {}
        Lc = {}
        for m in self.m_values:
            V = np.linalg.inv(m * T_phi + T_theta)
            V = 0.5 * (V + V.T)
            A[m], B[m], Lc[m] = V @ T_theta, V @ T_phi, np.linalg.cholesky(V)
        resid = state.theta - config.X @ state.beta
        z = rng.standard_normal((d, 2))
        a = np.empty((d, 2))
        for m in self.m_values:
            idx = self.m == m
            a[idx] = resid[idx] @ A[m].T + z[idx] @ Lc[m].T
        phi = np.array(state.phi)
        if self.mode == "sequential":
            Bm = [B[m] for m in self.m]
            for j in range(d):
                s = phi[self.nb_lists[j]].sum(axis=0)
                phi[j] = a[j] + Bm[j] @ s
        else:
            for idx in self.colours:
                s = self._adj[idx] @ phi
                for m in self.m_values:
                    sel = self.m[idx] == m
                    phi[idx[sel]] = a[idx[sel]] + s[sel] @ B[m].T
        return center_by_component(self.lattice, phi)


    def _spectral(self, state, config, rng, T_theta, T_phi):
        d = self.lattice.size
        z = rng.standard_normal((d, 2))[: self.lam.size]
        P = self.lam[:, None, None] * T_phi + T_theta           # (n, 2, 2)
        L = np.linalg.cholesky(P)
        b = self.U.T @ ((state.theta - config.X @ state.beta) @ T_theta)
        mean = np.linalg.solve(P, b[..., None])[..., 0]
        # L^-T z has covariance P^-1
        noise = np.linalg.solve(np.swapaxes(L, 1, 2), z[..., None])[..., 0]
        return center_by_component(self.lattice, self.U @ (mean + noise))


def gibbs_phi(state: HierState, lattice: Lattice, config: ProcessConfig, rng,
              sweeper: PhiSweeper | None = None) -> NDArray[np.float64]:
    sweeper = sweeper or PhiSweeper(lattice)
    return sweeper.sweep(state, config, rng)


def gibbs_sigma_theta(state: HierState, config: ProcessConfig, rng) -> NDArray[np.float64]:
    R = state.theta - state.phi - config.X @ state.beta
    d = R.shape[0]
    return sample_inverse_wishart(config.nu_theta + d, config.Omega_theta + R.T @ R, rng)


def gibbs_sigma_phi(state: HierState, lattice: Lattice, config: ProcessConfig, rng) -> NDArray[np.float64]:
    Q = pairwise_quadratic_form(lattice, state.phi)
    return sample_inverse_wishart(config.nu_phi + lattice.size, config.Omega_phi + Q, rng)


def _log_process_prior(theta, mean, T_theta):
    r = theta - mean
    return -0.5 * np.einsum("ij,jk,ik->i", r, T_theta, r)


def mh_theta(state: HierState, panel: ExcessPanel, k: float, config: ProcessConfig,
             z: NDArray[np.float64], log_unif: NDArray[np.float64]):
    """One random-walk Metropolis update of every cell's theta.

    Cells are conditionally independent given the process level, so all
    cells are proposed and accepted/rejected simultaneously. ``z`` (d, 2)
    holds standard normal innovations and ``log_unif`` (d,) the log
    uniforms for the accept test. Returns (new theta, accepted flags, new
    cell log-likelihoods).
    """
    T_theta = np.linalg.inv(state.Sigma_theta)
    mean = config.X @ state.beta + state.phi
    L = np.linalg.cholesky(state.proposal_cov)
    step = np.einsum("jab,jb->ja", L, z) * np.sqrt(state.proposal_scale)[:, None]
    prop = state.theta + step
    ll_cur = state.cell_loglik if state.cell_loglik is not None else panel.cell_loglik(state.theta)
    ll_prop = panel.cell_loglik(prop)
    with np.errstate(invalid="ignore"):
        log_ratio = (k * (ll_prop - ll_cur) + _log_process_prior(prop, mean, T_theta)
                     - _log_process_prior(state.theta, mean, T_theta))
    log_ratio = np.where(np.isfinite(ll_prop), log_ratio, -np.inf)
    accept = log_unif < log_ratio
    theta = np.where(accept[:, None], prop, state.theta)
    ll = np.where(accept, ll_prop, ll_cur)
    return theta, accept, ll


def adapt_proposals(scale, acceptance_rate, target=0.234, gain=0.05):
    """Multiplicative Robbins-Monro style nudge toward the target rate."""
    return np.asarray(scale) * np.exp(gain * (np.asarray(acceptance_rate) - target))


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class ChainArchive:
    cell_ids: NDArray[np.int64]
    theta: NDArray[np.float64]        # (N, d, 2)
    beta: NDArray[np.float64]         # (N, q, 2)
    Sigma_theta: NDArray[np.float64]  # (N, 2, 2)
    Sigma_phi: NDArray[np.float64]    # (N, 2, 2)
    phi: NDArray[np.float64]          # (N_phi, d, 2)
    accepted: NDArray[np.bool_]       # (N, d)
    loglik: NDArray[np.float64]       # (N,) unadjusted independence log-likelihood
    iterations: NDArray[np.int64]     # (N,) 1-based iteration index of each stored draw
    phi_iterations: NDArray[np.int64]
    proposal_scale: NDArray[np.float64]
    burnin_acceptance: NDArray[np.float64]
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.theta.shape[0]

    @property
    def d(self) -> int:
        return self.theta.shape[1]

    def theta_draws(self):
        return self.theta


def _check_state(state: HierState, panel: ExcessPanel, lattice: Lattice, it: int):
    for name in ("Sigma_theta", "Sigma_phi"):
        try:
            np.linalg.cholesky(getattr(state, name))
        except np.linalg.LinAlgError:
            raise NumericalAbort(f"{name} lost positive definiteness", it, state.copy())
    if not np.all(panel.feasible(state.theta)):
        raise NumericalAbort("theta left the data support", it, state.copy())


def run_chain(records, lattice: Lattice, config: ProcessConfig, k: float,
              sampler: SamplerConfig | None = None, seed: int = 0,
              state: HierState | None = None, callback=None, **overrides) -> ChainArchive:
    """Run the hierarchical sampler and archive post-burn-in draws.

    Each iteration performs, in order: MH for theta, then Gibbs for beta,
    phi, Sigma_theta and Sigma_phi (blocks not listed in ``sampler.update``
    stay fixed). Proposal multipliers adapt every ``adapt_interval``
    iterations during burn-in only.

    Random streams: one for the Gibbs blocks and one per cell for the MH
    innovations, all spawned from ``seed``. ``callback(iteration, state)``
    is invoked after every iteration.
    """
    sampler = replace(sampler or SamplerConfig(), **overrides)
    panel = records if isinstance(records, ExcessPanel) else ExcessPanel(records)
    d = lattice.size
    if panel.d != d:
        raise ValueError(f"{panel.d} records for a lattice of {d} cells")
    if not list(panel.cell_ids) == list(lattice.cell_ids):
        raise ValueError("records must follow the lattice's canonical cell order")
    if not k > 0:
        raise ValueError("k must be positive")
    if state is None:
        state = init_state(panel.records, lattice, config, k=k)
    state = state.copy()
    state.cell_loglik = panel.cell_loglik(state.theta)
    if not np.all(np.isfinite(state.cell_loglik)):
        raise NumericalAbort("initial theta outside the data support", 0, state)

    ss = np.random.SeedSequence(seed)
    gibbs_ss, *cell_ss = ss.spawn(1 + d)
    rng = np.random.default_rng(gibbs_ss)
    cell_rngs = [np.random.default_rng(s) for s in cell_ss]
    sweeper = PhiSweeper(lattice, sampler.phi_sweep)
    update = set(sampler.update)

    n_keep = (sampler.n_iter - sampler.burn_in) // sampler.thin
    n_phi = (sampler.n_iter - sampler.burn_in) // (sampler.thin * sampler.phi_thin)
    q = config.q
    out_theta = np.empty((n_keep, d, 2))
    out_beta = np.empty((n_keep, q, 2))
    out_st = np.empty((n_keep, 2, 2))
    out_sp = np.empty((n_keep, 2, 2))
    out_phi = np.empty((n_phi, d, 2))
    out_acc = np.zeros((n_keep, d), dtype=bool)
    out_ll = np.empty(n_keep)
    out_it = np.empty(n_keep, dtype=np.int64)
    out_phi_it = np.empty(n_phi, dtype=np.int64)

    window = np.zeros(d)
    window_n = 0
    burn_acc = np.zeros(d)
    accepted = np.ones(d, dtype=bool)
    stored = stored_phi = 0
    start = time.perf_counter()
    z_block = logu_block = None

    for it in range(1, sampler.n_iter + 1):
        b = (it - 1) % sampler.noise_block
        if b == 0:
            n_blk = min(sampler.noise_block, sampler.n_iter - it + 1)
            z_block = np.stack([r.standard_normal((n_blk, 2)) for r in cell_rngs], axis=1)
            logu_block = np.log(np.stack([r.random(n_blk) for r in cell_rngs], axis=1))

        if "theta" in update:
            theta, accepted, ll = mh_theta(state, panel, k, config, z_block[b], logu_block[b])
            state.theta, state.cell_loglik = theta, ll
        if "beta" in update:
            state.beta = gibbs_beta(state, config, rng)
        if "phi" in update:
            state.phi = sweeper.sweep(state, config, rng)
        if "sigma_theta" in update:
            state.Sigma_theta = gibbs_sigma_theta(state, config, rng)
        if "sigma_phi" in update:
            state.Sigma_phi = gibbs_sigma_phi(state, lattice, config, rng)
        _check_state(state, panel, lattice, it)

        if it <= sampler.burn_in:
            window += accepted
            burn_acc += accepted
            window_n += 1
            if "theta" in update and window_n == sampler.adapt_interval:
                state.proposal_scale = adapt_proposals(
                    state.proposal_scale, window / window_n,
                    sampler.target_acceptance, sampler.adapt_gain)
                window[:] = 0
                window_n = 0
        else:
            post = it - sampler.burn_in
            if post % sampler.thin == 0 and stored < n_keep:
                out_theta[stored] = state.theta
                out_beta[stored] = state.beta
                out_st[stored] = state.Sigma_theta
                out_sp[stored] = state.Sigma_phi
                out_acc[stored] = accepted
                out_ll[stored] = state.cell_loglik.sum()
                out_it[stored] = it
                if post % (sampler.thin * sampler.phi_thin) == 0 and stored_phi < n_phi:
                    out_phi[stored_phi] = state.phi
                    out_phi_it[stored_phi] = it
                    stored_phi += 1
                stored += 1
        if callback is not None:
            callback(it, state)

    wall = time.perf_counter() - start
    meta = {"k": float(k), "seed": int(seed), "n_iter": sampler.n_iter,
            "burn_in": sampler.burn_in, "thin": sampler.thin, "phi_thin": sampler.phi_thin,
            "adapt_interval": sampler.adapt_interval,
            "target_acceptance": sampler.target_acceptance,
            "phi_sweep": sampler.phi_sweep, "update": list(sampler.update),
            "covariates": list(config.covariate_names),
            "nu_theta": float(config.nu_theta), "nu_phi": float(config.nu_phi),
            "Omega_theta": config.Omega_theta.tolist(), "Omega_phi": config.Omega_phi.tolist(),
            "wall_time_s": wall}
    return ChainArchive(cell_ids=lattice.cell_ids, theta=out_theta, beta=out_beta,
                        Sigma_theta=out_st, Sigma_phi=out_sp, phi=out_phi, accepted=out_acc,
                        loglik=out_ll, iterations=out_it, phi_iterations=out_phi_it,
                        proposal_scale=state.proposal_scale.copy(),
                        burnin_acceptance=burn_acc / max(sampler.burn_in, 1), meta=meta)
