"""Simulation of gridded threshold-excess data from the hierarchical model.

Ground truth for oracle tests: latent IAR field, per-cell GPD parameters,
Bernoulli exceedances and GPD excesses, all reproducible from one seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .gpd import DAYS_PER_YEAR, ExcessRecord, GpdParams, gpd_quantile
from .lattice import Lattice, build_proximity_matrix, center_by_component, grid_lattice


class SynthError(RuntimeError):
    pass


def simulate_phi(lattice: Lattice, Sigma_phi, rng) -> NDArray[np.float64]:
    """Draw a (d, 2) IAR field restricted to the sum-zero subspace.

    Each non-null eigenvector ``q_i`` of W gets a coefficient
    ``c_i ~ N(0, Sigma_phi / lambda_i)``; null directions (one per connected
    component) are left out, so every component sums to zero.
    """
    Sigma_phi = np.atleast_2d(np.asarray(Sigma_phi, dtype=float))
    p = Sigma_phi.shape[0]
    W = build_proximity_matrix(lattice)
    lam, Q = np.linalg.eigh(W)
    keep = lam > 1e-10
    lam, Q = lam[keep], Q[:, keep]
    z = rng.standard_normal((lam.size, p))
    try:
        L = np.linalg.cholesky(Sigma_phi)
        C = (z @ L.T) / np.sqrt(lam)[:, None]
    except np.linalg.LinAlgError:
        # positive semi-definite (e.g. zero) covariance
        w, V = np.linalg.eigh(Sigma_phi)
        C = (z @ (V * np.sqrt(np.clip(w, 0, None))).T) / np.sqrt(lam)[:, None]
    return center_by_component(lattice, Q @ C)


@dataclass
class SynthSpec:
    """Generator settings.

    ``shock`` in [0, 1] is the probability that a cell takes the day's common
    uniforms (for both exceedance and magnitude) instead of its own; it
    induces cross-cell dependence without changing the margins.
    """

    n_rows: int = 5
    n_cols: int = 5
    beta_true: NDArray[np.float64] = field(default_factory=lambda: np.array([[np.log(8.0), 0.1]]))
    Sigma_theta_true: NDArray[np.float64] = field(
        default_factory=lambda: np.array([[0.004, 0.0], [0.0, 0.0004]]))
    Sigma_phi_true: NDArray[np.float64] = field(
        default_factory=lambda: np.array([[0.02, 0.0], [0.0, 0.002]]))
    u: float | NDArray[np.float64] = 20.0
    lambda_u_true: float = 0.05
    n_days: int = 10_000
    seed: int = 0
    shock: float = 0.0
    design: NDArray[np.float64] | None = None
    n_y: float = DAYS_PER_YEAR
    adjacency: str = "rook"

    def __post_init__(self):
        self.beta_true = np.atleast_2d(np.asarray(self.beta_true, dtype=float))
        self.Sigma_theta_true = np.asarray(self.Sigma_theta_true, dtype=float)
        self.Sigma_phi_true = np.asarray(self.Sigma_phi_true, dtype=float)
        if not 0 < self.lambda_u_true < 1:
            raise SynthError("lambda_u_true must lie in (0, 1)")
        if not 0 <= self.shock <= 1:
            raise SynthError("shock must lie in [0, 1]")
        for name in ("Sigma_theta_true", "Sigma_phi_true"):
            M = getattr(self, name)
            if M.shape != (2, 2) or not np.allclose(M, M.T) or np.any(np.linalg.eigvalsh(M) < 0):
                raise SynthError(f"{name} must be a symmetric PSD 2x2 matrix")
        if self.n_days < 1:
            raise SynthError("n_days must be positive")


@dataclass
class SynthDataset:
    lattice: Lattice
    records: list[ExcessRecord]
    series: NDArray[np.float64]  # (d, n_days) daily values
    theta: NDArray[np.float64]   # (d, 2) true (log_sigma_tilde, xi)
    phi: NDArray[np.float64]
    beta: NDArray[np.float64]
    design: NDArray[np.float64]
    u: NDArray[np.float64]
    spec: SynthSpec


def simulate_dataset(spec: SynthSpec, max_tries: int = 1000) -> SynthDataset:
    lattice = grid_lattice(spec.n_rows, spec.n_cols, adjacency=spec.adjacency)
    d = lattice.size
    X = np.ones((d, 1)) if spec.design is None else np.asarray(spec.design, dtype=float)
    if X.shape != (d, spec.beta_true.shape[0]):
        raise SynthError(f"design shape {X.shape} does not match beta {spec.beta_true.shape}")
    u = np.broadcast_to(np.asarray(spec.u, dtype=float), (d,)).copy()

    ss = np.random.SeedSequence(spec.seed)
    latent_ss, common_ss, *cell_ss = ss.spawn(2 + d)
    latent = np.random.default_rng(latent_ss)

    phi = simulate_phi(lattice, spec.Sigma_phi_true, latent)
    mean = X @ spec.beta_true + phi
    w, V = np.linalg.eigh(spec.Sigma_theta_true)
    L = V * np.sqrt(np.clip(w, 0, None))
    theta = np.empty((d, 2))
    for j in range(d):
        for _ in range(max_tries):
            z = latent.standard_normal(2)
            t = mean[j] + L @ z
            if np.exp(t[0]) + t[1] * u[j] > 0 and t[1] > -1:
                theta[j] = t
                break
        else:
            raise SynthError(f"cell {j}: no feasible parameters after {max_tries} tries")

    common = np.random.default_rng(common_ss)
    U_c = common.random(spec.n_days)
    V_c = common.random(spec.n_days)
    series = np.empty((d, spec.n_days))
    records = []
    days_all = np.arange(spec.n_days)
    for j in range(d):
        rng = np.random.default_rng(cell_ss[j])
        U = rng.random(spec.n_days)
        V = rng.random(spec.n_days)
        body = rng.random(spec.n_days)
        if spec.shock > 0:
            use_common = rng.random(spec.n_days) < spec.shock
            U = np.where(use_common, U_c, U)
            V = np.where(use_common, V_c, V)
        V = np.where(V == 0, np.nextafter(0.0, 1.0), V)
        exceed = U < spec.lambda_u_true
        params = GpdParams(float(np.exp(theta[j, 0]) + theta[j, 1] * u[j]), float(theta[j, 1]))
        excess = gpd_quantile(V[exceed], params)
        excess = np.where(excess > 0, excess, np.nextafter(0.0, 1.0))
        values = u[j] * body
        values[exceed] = u[j] + excess
        series[j] = values
        if exceed.any():
            records.append(ExcessRecord(cell_id=int(lattice.cells[j].cell_id), u=float(u[j]),
                                        excesses=excess, n_total=spec.n_days, n_y=spec.n_y,
                                        days=days_all[exceed]))
        else:
            raise SynthError(f"cell {j}: no exceedances in {spec.n_days} days")
    return SynthDataset(lattice=lattice, records=records, series=series, theta=theta, phi=phi,
                        beta=spec.beta_true.copy(), design=X, u=u, spec=spec)
