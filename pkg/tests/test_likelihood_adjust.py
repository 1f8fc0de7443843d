import warnings

import numpy as np
import pytest
from scipy.stats import genpareto

from spatial_gpd.gpd import ExcessRecord, fit_theta_mle, theta_loglik
from spatial_gpd.likelihood_adjust import (ExcessPanel, adjusted_loglik, estimate_godambe_k,
                                           observation_scores, score_vector_per_day)


def _record(cell_id, seed, n_days=4000, lam=0.1, xi=0.1, scale=3.0, u=10.0):
    rng = np.random.default_rng(seed)
    days = np.flatnonzero(rng.random(n_days) < lam)
    y = genpareto.rvs(xi, scale=scale, size=days.size, random_state=rng)
    return ExcessRecord(cell_id, u=u, excesses=y, n_total=n_days, days=days)


def _analytic_score(theta, y, u):
    a, xi = theta
    s = np.exp(a) + xi * u
    dl_ds = -1 / s + (1 + xi) * y / (s * (s + xi * y))
    dl_dxi = np.log1p(xi * y / s) / xi**2 - (1 + 1 / xi) * y / (s + xi * y)
    return np.column_stack([np.exp(a) * dl_ds, u * dl_ds + dl_dxi])


def test_panel_matches_cellwise():
    recs = [_record(j, j) for j in range(4)]
    panel = ExcessPanel(recs)
    theta = np.array([[np.log(2.0), 0.1], [np.log(1.5), 0.05], [np.log(2.5), 0.2], [0.5, 0.0]])
    ll = panel.cell_loglik(theta)
    for j, r in enumerate(recs):
        assert ll[j] == pytest.approx(theta_loglik(theta[j], r.excesses, r.u), rel=1e-12)
    assert adjusted_loglik(recs, theta, 0.5) == pytest.approx(0.5 * ll.sum())
    with pytest.raises(ValueError):
        adjusted_loglik(recs, theta, 0.0)


def test_panel_infeasible_is_minus_inf():
    rec = _record(0, 0)
    panel = ExcessPanel([rec])
    # sigma_u <= 0
    assert panel.cell_loglik(np.array([[0.0, -0.5]]))[0] == -np.inf
    # negative shape with endpoint below the largest excess
    bad = np.array([[np.log(0.5) - 0.0, -0.9]])
    bad[0, 0] = np.log(0.9 * 0.9 * rec.excesses.max() + 9.0)
    assert not panel.feasible(bad)[0]
    assert panel.cell_loglik(bad)[0] == -np.inf


def test_observation_scores_match_analytic():
    rec = _record(0, 11)
    theta = np.array([np.log(2.0), 0.15])
    num = observation_scores(rec, theta)
    np.testing.assert_allclose(num, _analytic_score(theta, rec.excesses, rec.u),
                               rtol=1e-5, atol=1e-7)


def test_score_matrix_layout_and_zero_mean_at_mle():
    recs = [_record(j, 100 + j) for j in range(3)]
    theta = np.array([fit_theta_mle(r)[0] for r in recs])
    S = score_vector_per_day(recs, theta)
    assert S.shape == (max(int(r.days.max()) for r in recs) - min(int(r.days.min()) for r in recs) + 1, 6)
    np.testing.assert_allclose(np.asarray(S.sum(axis=0)).ravel(), 0, atol=1e-3)
    # cell 1's column block only holds days on which cell 1 exceeded
    day0 = min(int(r.days.min()) for r in recs)
    nz = np.flatnonzero(np.asarray(S[:, 2:4].todense()).any(axis=1))
    np.testing.assert_array_equal(nz, recs[1].days - day0)


def test_requires_day_stamps():
    rec = ExcessRecord(0, 10.0, np.ones(20), 100)
    with pytest.raises(ValueError):
        score_vector_per_day([rec], np.zeros((1, 2)))


def _mle(recs):
    return np.array([fit_theta_mle(r)[0] for r in recs])


def test_k_identical_cells_scales_with_d():
    base = _record(0, 5)
    d = 6
    recs = [ExcessRecord(j, base.u, base.excesses.copy(), base.n_total, days=base.days.copy())
            for j in range(d)]
    theta = _mle(recs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # a lone cell's k can sit above the clamp
        single = estimate_godambe_k([base], theta[:1])
    est = estimate_godambe_k(recs, theta)
    # H sums d copies, J sums d^2 copies: k = k_single / d exactly
    assert est.k * d == pytest.approx(single.k_raw, rel=1e-9)
    assert est.effective_independent_sites == pytest.approx(single.k_raw, rel=1e-9)


def test_k_independent_cells_near_one():
    recs = [_record(j, 200 + j, n_days=10_000) for j in range(6)]
    est = estimate_godambe_k(recs, _mle(recs))
    assert 0.85 < est.k <= 1.05
    full = estimate_godambe_k(recs, _mle(recs), mode="full")
    assert full.p == 12 and 0.85 < full.k <= 1.05


def test_k_bad_mode():
    recs = [_record(0, 1)]
    with pytest.raises(ValueError):
        estimate_godambe_k(recs, _mle(recs), mode="blocks")


def test_singular_information_excluded():
    recs = [_record(j, 300 + j) for j in range(3)]
    theta = _mle(recs)
    info = [np.eye(2) * 50, np.zeros((2, 2)), np.eye(2) * 50]
    with pytest.warns(UserWarning, match="singular"):
        est = estimate_godambe_k(recs, theta, info)
    assert est.excluded_cells == [1]
