"""Generalised Pareto distribution for threshold excesses.

Two parameterisations are used throughout the package:

* ``GpdParams(sigma_u, xi)`` -- the threshold-dependent scale and shape.
* ``theta = (log_sigma_tilde, xi)`` -- the transformed, threshold-independent
  form used by the latent spatial model, with
  ``sigma_u = exp(log_sigma_tilde) + xi * u``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from ._numdiff import fd_gradient, fd_hessian

logger = logging.getLogger(__name__)

XI_ZERO_TOL = 1e-6
SIGMA_TILDE_FLOOR = 0.05
XI_LOWER = -1.0 + 1e-8
DAYS_PER_YEAR = 365.25


class GpdError(ValueError):
    """Invalid GPD parameters or data."""


@dataclass(frozen=True)
class GpdParams:
    sigma_u: float
    xi: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma_u) and self.sigma_u > 0):
            raise GpdError(f"sigma_u must be positive and finite, got {self.sigma_u}")
        if not np.isfinite(self.xi):
            raise GpdError(f"xi must be finite, got {self.xi}")

    @property
    def upper_endpoint(self) -> float:
        return -self.sigma_u / self.xi if self.xi < 0 else np.inf


@dataclass
class ExcessRecord:
    """Threshold excesses observed in one grid cell.

    ``days`` holds the integer day index of each excess; it is only needed
    when scores are matched across cells (likelihood adjustment).
    """

    cell_id: int
    u: float
    excesses: NDArray[np.float64]
    n_total: int
    n_y: float = DAYS_PER_YEAR
    days: NDArray[np.int64] | None = None
    lambda_u: float = field(init=False)

    def __post_init__(self):
        self.excesses = np.asarray(self.excesses, dtype=float)
        if self.excesses.ndim != 1:
            raise GpdError("excesses must be one-dimensional")
        if np.any(self.excesses <= 0) or not np.all(np.isfinite(self.excesses)):
            raise GpdError(f"cell {self.cell_id}: excesses must be positive and finite")
        if self.days is not None:
            self.days = np.asarray(self.days, dtype=np.int64)
            if self.days.shape != self.excesses.shape:
                raise GpdError(f"cell {self.cell_id}: days and excesses differ in length")
        if self.n_total < self.n_exceed or self.n_exceed == 0:
            raise GpdError(
                f"cell {self.cell_id}: need 0 < n_exceed <= n_total "
                f"(got {self.n_exceed}, {self.n_total})"
            )
        self.lambda_u = self.n_exceed / self.n_total

    @property
    def n_exceed(self) -> int:
        return int(self.excesses.size)


def theta_to_params(theta: ArrayLike, u: float) -> GpdParams:
    """Map ``(log_sigma_tilde, xi)`` to threshold-dependent parameters at ``u``."""
    log_sigma_tilde, xi = np.asarray(theta, dtype=float)
    return GpdParams(float(np.exp(log_sigma_tilde) + xi * u), float(xi))


def params_to_theta(params: GpdParams, u: float) -> NDArray[np.float64]:
    sigma_tilde = params.sigma_u - params.xi * u
    if sigma_tilde <= 0:
        raise GpdError(f"threshold-independent scale {sigma_tilde} is not positive")
    return np.array([np.log(sigma_tilde), params.xi])


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise GpdError("x must be finite")
    return x


def gpd_survival(x: ArrayLike, p: GpdParams) -> NDArray[np.float64] | float:
    """Pr(X - u > x | X > u)."""
    x = _check_x(x)
    if np.any(x < 0):
        raise GpdError("excess magnitudes must be non-negative")
    z = x / p.sigma_u
    if abs(p.xi) < XI_ZERO_TOL:
        out = np.exp(-z)
    else:
        base = 1.0 + p.xi * z
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(base > 0, np.power(np.maximum(base, 0.0), -1.0 / p.xi), 0.0)
    return out[()] if out.ndim == 0 else out


def gpd_logpdf(x: ArrayLike, p: GpdParams) -> NDArray[np.float64] | float:
    """Log-density of the excess; ``-inf`` outside the support."""
    x = _check_x(x)
    z = x / p.sigma_u
    if abs(p.xi) < XI_ZERO_TOL:
        out = np.where(x >= 0, -np.log(p.sigma_u) - z, -np.inf)
    else:
        base = 1.0 + p.xi * z
        ok = (x >= 0) & (base > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -np.log(p.sigma_u) - (1.0 + 1.0 / p.xi) * np.log1p(p.xi * z)
        out = np.where(ok, val, -np.inf)
    return out[()] if out.ndim == 0 else out


def gpd_quantile(prob: ArrayLike, p: GpdParams) -> NDArray[np.float64] | float:
    prob = np.asarray(prob, dtype=float)
    if np.any((prob < 0) | (prob >= 1)) or not np.all(np.isfinite(prob)):
        raise GpdError("prob must lie in [0, 1)")
    if abs(p.xi) < XI_ZERO_TOL:
        out = -p.sigma_u * np.log1p(-prob)
    else:
        out = p.sigma_u / p.xi * np.expm1(-p.xi * np.log1p(-prob))
    return out[()] if out.ndim == 0 else out


def gpd_loglik(excesses: NDArray[np.float64], p: GpdParams) -> float:
    return float(np.sum(gpd_logpdf(excesses, p)))


def theta_loglik(theta: ArrayLike, excesses: NDArray[np.float64], u: float) -> float:
    """GPD log-likelihood of ``excesses`` at transformed parameters ``theta``.

    Returns ``-inf`` when ``sigma_u <= 0`` or an excess lies beyond the
    upper endpoint.
    """
    log_sigma_tilde, xi = theta
    sigma_u = np.exp(log_sigma_tilde) + xi * u
    if not np.isfinite(sigma_u) or sigma_u <= 0:
        return -np.inf
    return gpd_loglik(excesses, GpdParams(float(sigma_u), float(xi)))


def _native_loglik(eta, excesses):
    # eta = (log sigma_u, xi)
    log_sigma, xi = eta
    if not xi > XI_LOWER:
        return -np.inf
    sigma = np.exp(log_sigma)
    if not np.isfinite(sigma) or sigma <= 0:
        return -np.inf
    return gpd_loglik(excesses, GpdParams(float(sigma), float(xi)))


def moment_estimates(excesses: NDArray[np.float64]) -> GpdParams:
    """Method-of-moments starting values (valid for xi < 1/2)."""
    mean = float(np.mean(excesses))
    var = float(np.var(excesses))
    if var <= 0:
        return GpdParams(1.5 * mean, -0.5)
    ratio = mean * mean / var
    xi = 0.5 * (1.0 - ratio)
    sigma = 0.5 * mean * (ratio + 1.0)
    return GpdParams(sigma, max(xi, -0.9))


@dataclass
class MleFit:
    params: GpdParams
    observed_information: NDArray[np.float64]
    converged: bool
    loglik: float
    message: str = ""

    def __iter__(self):
        return iter((self.params, self.observed_information, self.converged))


def fit_mle(record: ExcessRecord | NDArray[np.float64], min_exceed: int = 10,
            maxiter: int = 20_000) -> MleFit:
    """Maximum-likelihood GPD fit over ``(log sigma_u, xi)``.

    A Nelder-Mead search is started from the moment estimates. The observed
    information (negative Hessian of the log-likelihood, central differences)
    is returned in the ``(log sigma_u, xi)`` parameterisation.
    """
    excesses = record.excesses if isinstance(record, ExcessRecord) else np.asarray(record, float)
    if excesses.size < min_exceed:
        raise GpdError(f"need at least {min_exceed} excesses, got {excesses.size}")

    start = moment_estimates(excesses)
    x0 = np.array([np.log(start.sigma_u), start.xi])
    # the start must be feasible
    if not np.isfinite(_native_loglik(x0, excesses)):
        x0 = np.array([np.log(max(excesses.max(), start.sigma_u)), 0.0])

    def nll(eta):
        ll = _native_loglik(eta, excesses)
        return -ll if np.isfinite(ll) else 1e300

    res = minimize(nll, x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": maxiter,
                            "maxfev": 2 * maxiter, "adaptive": False})
    eta = res.x
    converged = bool(res.success) and np.isfinite(res.fun) and res.fun < 1e300
    message = str(res.message)
    if converged and eta[1] < XI_LOWER + 1e-3:
        converged = False
        message = "shape estimate on the xi = -1 boundary"
    if not converged:
        logger.warning("MLE did not converge (%s); using moment estimates", message)
        eta = np.array([np.log(start.sigma_u), start.xi])

    params = GpdParams(float(np.exp(eta[0])), float(eta[1]))
    ll = _native_loglik(eta, excesses)
    if np.isfinite(ll):
        info = -fd_hessian(lambda e: _native_loglik(e, excesses), eta, rel_step=1e-5)
    else:
        info = np.full((2, 2), np.nan)
    return MleFit(params, info, converged, float(ll), message)


def fit_theta_mle(record: ExcessRecord, min_exceed: int = 10):
    """MLE in the ``(log_sigma_tilde, xi)`` parameterisation.

    Uses :func:`fit_mle` and converts; when the unconstrained optimum has
    ``sigma_tilde <= 0`` (not representable on the log scale) the fit is
    redone directly over ``theta``. That optimum sits on the boundary
    ``sigma_tilde -> 0``, so the refit keeps ``sigma_tilde`` at or above
    ``SIGMA_TILDE_FLOOR`` times the unconstrained ``sigma_u`` to give a
    usable interior start. Returns ``(theta, MleFit)``.
    """
    fit = fit_mle(record, min_exceed=min_exceed)
    sigma_tilde = fit.params.sigma_u - fit.params.xi * record.u
    if sigma_tilde > 0:
        return params_to_theta(fit.params, record.u), fit
    logger.warning("cell %s: MLE sigma_tilde = %.4g <= 0; refitting on the log scale",
                   record.cell_id, sigma_tilde)
    sigma_u = fit.params.sigma_u
    lo = np.log(SIGMA_TILDE_FLOOR * sigma_u)
    x0 = np.array([np.log(0.5 * sigma_u), 0.5 * sigma_u / record.u])

    def nll(t):
        if not t[1] > XI_LOWER or t[0] < lo:
            return 1e300
        ll = theta_loglik(t, record.excesses, record.u)
        return -ll if np.isfinite(ll) else 1e300

    res = minimize(nll, x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20_000, "maxfev": 40_000})
    theta = res.x
    params = GpdParams(float(np.exp(theta[0]) + theta[1] * record.u), float(theta[1]))
    converged = bool(res.success) and res.fun < 1e300
    info = -fd_hessian(lambda e: _native_loglik(e, record.excesses),
                       np.array([np.log(params.sigma_u), params.xi]), rel_step=1e-5)
    return theta, MleFit(params, info, converged, float(-res.fun), "refit over theta")


def theta_information(theta: ArrayLike, excesses: NDArray[np.float64], u: float) -> NDArray[np.float64]:
    """Observed information in the ``(log_sigma_tilde, xi)`` parameterisation."""
    theta = np.asarray(theta, dtype=float)
    return -fd_hessian(lambda t: theta_loglik(t, excesses, u), theta, rel_step=1e-5)


def theta_score(theta: ArrayLike, excesses: NDArray[np.float64], u: float) -> NDArray[np.float64]:
    theta = np.asarray(theta, dtype=float)
    return fd_gradient(lambda t: theta_loglik(t, excesses, u), theta, rel_step=1e-6)


def select_threshold(series: ArrayLike, quantile_level: float = 0.95, cell_id: int = 0,
                     n_y: float = DAYS_PER_YEAR, days: ArrayLike | None = None):
    """Empirical-quantile threshold (linear interpolation) and its excesses."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise GpdError("series is empty")
    if not 0 < quantile_level < 1:
        raise GpdError("quantile_level must lie in (0, 1)")
    u = float(np.quantile(series, quantile_level, method="linear"))
    above = series > u
    if not np.any(above):
        raise GpdError(f"cell {cell_id}: no excesses above threshold {u}")
    rec_days = None if days is None else np.asarray(days)[above]
    record = ExcessRecord(cell_id=cell_id, u=u, excesses=series[above] - u,
                          n_total=int(series.size), n_y=n_y, days=rec_days)
    return u, record


@dataclass(frozen=True)
class ScanRow:
    level: float
    u: float
    sigma_star: float
    xi: float
    se_sigma_star: float
    se_xi: float
    converged: bool


def threshold_stability_scan(series: ArrayLike, levels: ArrayLike,
                             min_exceed: int = 10) -> list[ScanRow]:
    """Fit the GPD at each quantile level and report the modified scale.

    Under a GPD tail both ``sigma_star = sigma_u - xi * u`` and ``xi`` stay
    constant across thresholds; standard errors come from the inverse
    observed information, with the delta method for ``sigma_star``.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.size and (np.any(np.diff(levels) <= 0) or levels[0] <= 0 or levels[-1] >= 1):
        raise GpdError("levels must be strictly ascending within (0, 1)")
    rows = []
    for level in levels:
        try:
            u, rec = select_threshold(series, level)
            fit = fit_mle(rec, min_exceed=min_exceed)
        except GpdError as exc:
            logger.warning("threshold scan: level %.4f failed (%s)", level, exc)
            rows.append(ScanRow(float(level), np.nan, np.nan, np.nan, np.nan, np.nan, False))
            continue
        sigma, xi = fit.params.sigma_u, fit.params.xi
        try:
            cov = np.linalg.inv(fit.observed_information)
            grad = np.array([sigma, -u])  # d sigma_star / d(log sigma_u, xi)
            se_star = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
            se_xi = float(np.sqrt(max(cov[1, 1], 0.0)))
        except np.linalg.LinAlgError:
            se_star = se_xi = np.nan
        rows.append(ScanRow(float(level), u, sigma - xi * u, xi, se_star, se_xi, fit.converged))
    return rows
