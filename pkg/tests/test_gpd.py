import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.stats import genpareto

from spatial_gpd.gpd import (ExcessRecord, GpdError, GpdParams, fit_mle, fit_theta_mle,
                             gpd_logpdf, gpd_quantile, gpd_survival, params_to_theta,
                             select_threshold, theta_loglik, theta_to_params,
                             threshold_stability_scan)
from spatial_gpd._numdiff import fd_gradient


def test_reference_values():
    # frozen from scipy.stats.genpareto
    assert gpd_survival(1.0, GpdParams(1.0, 0.5)) == pytest.approx(0.4444444444444444, abs=1e-12)
    assert gpd_logpdf(2.0, GpdParams(2.0, 0.0)) == pytest.approx(-1.6931471805599454, abs=1e-12)
    assert gpd_logpdf(1.0, GpdParams(1.0, -0.5)) == pytest.approx(np.log(0.5), abs=1e-12)
    assert gpd_quantile(0.5, GpdParams(1.0, 0.0)) == pytest.approx(np.log(2.0), abs=1e-12)
    assert gpd_logpdf(3.7, GpdParams(1.8, 0.25)) == pytest.approx(-2.661195480967561, abs=1e-12)
    assert gpd_survival(0.9, GpdParams(1.2, -0.3)) == pytest.approx(0.42756847324588954, abs=1e-12)
    assert gpd_quantile(0.99, GpdParams(2.5, 0.4)) == pytest.approx(33.184834030012055, rel=1e-12)


def test_support_edges():
    p = GpdParams(1.0, -0.5)  # upper endpoint 2
    assert gpd_survival(2.5, p) == 0.0
    assert gpd_logpdf(2.5, p) == -np.inf
    assert p.upper_endpoint == pytest.approx(2.0)
    with pytest.raises(GpdError):
        gpd_quantile(1.0, GpdParams(1.0, 0.2))


def test_invalid_params():
    with pytest.raises(GpdError):
        GpdParams(0.0, 0.1)
    with pytest.raises(GpdError):
        GpdParams(1.0, np.nan)


@settings(max_examples=60, deadline=None)
@given(sigma=st.floats(0.05, 50), xi=st.floats(-0.9, 1.5),
       prob=st.floats(1e-4, 1 - 1e-4))
def test_quantile_survival_round_trip(sigma, xi, prob):
    p = GpdParams(sigma, xi)
    x = gpd_quantile(prob, p)
    assert gpd_survival(x, p) == pytest.approx(1 - prob, rel=1e-8, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(sigma=st.floats(0.1, 20), xi=st.floats(-0.45, 0.9), x=st.floats(0.0, 30))
def test_matches_scipy(sigma, xi, x):
    # scipy mishandles denormal shapes; the exponential branch covers |xi| < 1e-6
    assume(xi == 0 or abs(xi) > 1e-6)
    p = GpdParams(sigma, xi)
    assert gpd_survival(x, p) == pytest.approx(genpareto.sf(x, xi, scale=sigma), rel=1e-8, abs=1e-14)
    lp = gpd_logpdf(x, p)
    ref = genpareto.logpdf(x, xi, scale=sigma)
    if np.isfinite(ref):
        assert lp == pytest.approx(ref, rel=1e-8, abs=1e-10)
    else:
        assert lp == -np.inf


def test_survival_monotone():
    x = np.linspace(0, 20, 401)
    for xi in (-0.3, 0.0, 0.4):
        s = gpd_survival(x, GpdParams(2.0, xi))
        assert np.all(np.diff(s) <= 0)
        assert s[0] == 1.0


def test_theta_round_trip():
    p = GpdParams(10.0, 0.1)
    theta = params_to_theta(p, 20.0)
    assert theta[0] == pytest.approx(np.log(8.0))
    back = theta_to_params(theta, 20.0)
    assert back.sigma_u == pytest.approx(10.0) and back.xi == 0.1
    with pytest.raises(GpdError):
        params_to_theta(GpdParams(1.0, 0.1), 20.0)


def test_theta_loglik_matches_native():
    rng = np.random.default_rng(3)
    y = genpareto.rvs(0.15, scale=4.0, size=300, random_state=rng)
    theta = params_to_theta(GpdParams(4.0, 0.15), 12.0)
    assert theta_loglik(theta, y, 12.0) == pytest.approx(genpareto.logpdf(y, 0.15, scale=4.0).sum())


def test_mle_recovery_and_information():
    rng = np.random.default_rng(42)
    y = genpareto.rvs(0.2, scale=2.0, size=5000, random_state=rng)
    fit = fit_mle(y)
    assert fit.converged
    assert abs(fit.params.sigma_u - 2.0) < 0.1
    assert abs(fit.params.xi - 0.2) < 0.1
    # scipy oracle
    c, _, scale = genpareto.fit(y, floc=0)
    assert fit.params.xi == pytest.approx(c, abs=1e-4)
    assert fit.params.sigma_u == pytest.approx(scale, rel=1e-4)
    params, info, ok = fit
    assert np.all(np.linalg.eigvalsh(info) > 0)


def test_mle_too_few():
    with pytest.raises(GpdError):
        fit_mle(np.ones(5))


def test_fit_theta_mle_interior_start_on_boundary():
    # excesses whose unconstrained fit has sigma_tilde < 0 at a large threshold
    rng = np.random.default_rng(0)
    y = genpareto.rvs(0.45, scale=3.0, size=400, random_state=rng)
    rec = ExcessRecord(0, u=40.0, excesses=y, n_total=8000)
    theta, fit = fit_theta_mle(rec)
    assert np.all(np.isfinite(theta))
    assert np.exp(theta[0]) > 0
    assert fit.params.sigma_u == pytest.approx(np.exp(theta[0]) + theta[1] * 40.0)


def test_threshold_selection_example():
    u, rec = select_threshold(np.arange(1, 101, dtype=float), 0.95)
    assert u == pytest.approx(95.05)
    assert rec.n_exceed == 5
    assert rec.lambda_u == pytest.approx(0.05)
    np.testing.assert_allclose(rec.excesses, np.arange(96, 101) - 95.05)


def test_threshold_selection_errors():
    with pytest.raises(GpdError):
        select_threshold(np.ones(10), 0.9)
    with pytest.raises(GpdError):
        select_threshold([], 0.9)


def test_stability_scan_flat_for_gpd_tail():
    rng = np.random.default_rng(7)
    y = genpareto.rvs(0.1, scale=3.0, size=20000, random_state=rng)
    rows = threshold_stability_scan(y, [0.5, 0.7, 0.9])
    assert all(r.converged for r in rows)
    for r in rows:
        assert abs(r.sigma_star - 3.0) < 3 * r.se_sigma_star + 0.05
        assert abs(r.xi - 0.1) < 3 * r.se_xi + 0.01
    with pytest.raises(GpdError):
        threshold_stability_scan(y, [0.9, 0.5])


def test_score_zero_at_mle():
    rng = np.random.default_rng(1)
    y = genpareto.rvs(0.2, scale=2.0, size=2000, random_state=rng)
    fit = fit_mle(y)
    eta = np.array([np.log(fit.params.sigma_u), fit.params.xi])
    g = fd_gradient(lambda e: genpareto.logpdf(y, e[1], scale=np.exp(e[0])).sum(), eta)
    assert np.max(np.abs(g)) / y.size < 1e-4


def test_xi_zero_continuity():
    x = np.linspace(0, 10, 51)
    for eps in (1e-7, -1e-7):
        np.testing.assert_allclose(gpd_survival(x, GpdParams(2.0, eps)),
                                   gpd_survival(x, GpdParams(2.0, 0.0)), atol=1e-5)
        np.testing.assert_allclose(gpd_logpdf(x, GpdParams(2.0, eps)),
                                   gpd_logpdf(x, GpdParams(2.0, 0.0)), atol=1e-5)
