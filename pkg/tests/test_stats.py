import math

import numpy as np
import pytest

from transport_noise.dynamics import LIMIT, Ensemble, SimulationConfig
from transport_noise.stats import (autocorrelation, autocorrelation_compare, bootstrap, increment_moments,
                                   loglog_slope, moments_report, qv_fit, qv_target, stationarity_report)


def synthetic(values, dt=1e-2, obs=((1, 0), (0, 1)), nu=1.0):
    """Wrap ``values[path, time, obs]`` as an ensemble recorded every ``dt``."""
    P, n_t, n_o = values.shape
    cfg = SimulationConfig(nu=nu, cutoff=4, dt=dt, T=dt * (n_t - 1), equation=LIMIT, observables=obs)
    inc = np.diff(values, axis=1)
    qv = np.zeros((P, n_t, n_o, n_o))
    qv[:, 1:] = np.cumsum(inc[..., :, None] * inc[..., None, :], axis=1)
    return Ensemble(cfg, np.arange(P), dt * np.arange(n_t), values, np.zeros((P, n_t)), qv, ["ok"] * P)


def ou_paths(n_paths, n_t, dt, lam, seed):
    rng = np.random.default_rng(seed)
    a, s = math.exp(-lam * dt), math.sqrt(1 - math.exp(-2 * lam * dt))
    x = np.empty((n_paths, n_t))
    x[:, 0] = rng.standard_normal(n_paths)
    for i in range(1, n_t):
        x[:, i] = a * x[:, i - 1] + s * rng.standard_normal(n_paths)
    return x


def test_bootstrap_is_seeded():
    d = np.arange(50.0)
    a = bootstrap(np.mean, d, 200, seed=3)
    assert np.array_equal(a, bootstrap(np.mean, d, 200, seed=3))
    assert not np.array_equal(a, bootstrap(np.mean, d, 200, seed=4))
    assert a.std() == pytest.approx(d.std() / math.sqrt(50), rel=0.2)


def test_iid_normals_pass():
    x = np.random.default_rng(0).standard_normal((5000, 3, 4))
    rep = moments_report(x, [0.0, 0.5, 1.0], [(1, 0), (0, 1), (1, 1), (2, 0)])
    assert rep.passed, rep.flags
    assert rep.to_dict()["passed"]


def test_inflated_variance_is_flagged():
    x = math.sqrt(1.2) * np.random.default_rng(1).standard_normal((5000, 1, 1))
    rep = moments_report(x, [1.0], [(1, 0)])
    assert not rep.passed
    assert any("variance" in f for f in rep.flags)


def test_shifted_mean_is_flagged():
    x = np.random.default_rng(2).standard_normal((5000, 1, 1)) + 0.2
    assert any("mean" in f for f in moments_report(x, [1.0], [(1, 0)]).flags)


def test_non_gaussian_marginal_fails_ks():
    # unit-variance uniform keeps the variance check quiet
    x = np.random.default_rng(3).uniform(-math.sqrt(3), math.sqrt(3), (20000, 1, 1))
    rep = moments_report(x, [1.0], [(1, 0)])
    assert any("KS" in f for f in rep.flags)


def test_degenerate_inputs():
    with pytest.raises(ValueError):
        moments_report(np.zeros((1, 1, 1)), [0.0], [(1, 0)])
    ens = synthetic(np.random.default_rng(0).standard_normal((50, 3, 2)))
    with pytest.raises(ValueError, match="degenerate"):
        stationarity_report(ens)
    with pytest.raises(ValueError, match="not recorded"):
        stationarity_report(ens, times=[0.015], min_paths=10)


def test_stationarity_selects_times_and_modes():
    ens = synthetic(np.random.default_rng(4).standard_normal((400, 5, 2)))
    rep = stationarity_report(ens, times=[0.02, 0.04], modes=[(0, 1)])
    assert rep.variance.shape == (2, 1)
    np.testing.assert_allclose(rep.times, [0.02, 0.04])


def test_aborted_paths_are_dropped():
    v = np.random.default_rng(5).standard_normal((200, 3, 2))
    v[0, 1:] = np.nan
    ens = synthetic(v)
    ens.status[0] = "aborted at t=0.01"
    assert stationarity_report(ens).n_paths == 199


def test_qv_fit_recovers_brownian_rate():
    rate, dt, n_t = 3.0, 1e-3, 201
    rng = np.random.default_rng(6)
    inc = math.sqrt(rate * dt) * rng.standard_normal((200, n_t - 1, 2))
    v = np.concatenate([np.zeros((200, 1, 2)), np.cumsum(inc, axis=1)], axis=1)
    ens = synthetic(v, dt=dt)
    fit = qv_fit(ens, (1, 0), (1, 0), target=rate)
    assert fit.contains_target
    assert fit.se == pytest.approx(rate * math.sqrt(2 / (200 * (n_t - 1))), rel=0.5)
    cross = qv_fit(ens, (1, 0), (0, 1), target=0.0)
    assert cross.contains_target
    assert not qv_fit(ens, (1, 0), (1, 0), target=1.1 * rate).contains_target


def test_qv_fit_needs_three_times():
    ens = synthetic(np.zeros((5, 2, 2)))
    with pytest.raises(ValueError):
        qv_fit(ens, (1, 0), (1, 0))


def test_qv_target():
    assert qv_target(1.2, (1, 0)) == pytest.approx(94.7482, abs=1e-4)
    assert qv_target(1.0, (1, 1)) == pytest.approx(16 * math.pi ** 2)


def test_ou_fourth_moment_of_increments():
    lam, dt = 2.0, 0.01
    x = ou_paths(2000, 200, dt, lam, 7)
    gaps = np.array([0.01, 0.04, 0.16])
    scan = increment_moments(x, dt, gaps)
    exact = 3 * (2 * (1 - np.exp(-lam * gaps))) ** 2
    assert np.all(np.abs(scan.moments - exact) < 4 * scan.se)
    assert scan.slope == pytest.approx(loglog_slope(gaps, scan.moments))
    start = increment_moments(x, dt, gaps, origin="start")
    assert np.all(np.abs(start.moments - exact) < 4 * start.se)


def test_brownian_increment_slope_is_two():
    x = np.cumsum(np.random.default_rng(8).standard_normal((500, 600)) * 0.1, axis=1)
    scan = increment_moments(x, 1.0, [1, 2, 4, 8, 16, 32])
    assert abs(scan.slope - 2) < 4 * scan.slope_se


@pytest.mark.parametrize("gaps", [[0.015, 0.02], [0.01], [0.01, 10.0]])
def test_bad_gaps(gaps):
    with pytest.raises(ValueError):
        increment_moments(np.zeros((3, 100)), 0.01, gaps)


def test_white_noise_autocorrelation():
    x = np.random.default_rng(9).standard_normal((400, 300))
    r = autocorrelation(x, 1.0, [0, 1, 5])
    assert r[0] == pytest.approx(1.0)
    assert np.all(np.abs(r[1:]) < 4 / math.sqrt(400 * 295))


def test_ou_autocorrelation_comparison():
    lam = 3.0
    a = synthetic(ou_paths(300, 101, 0.01, lam, 10)[:, :, None], obs=((1, 0),))
    b = synthetic(ou_paths(300, 51, 0.02, lam, 11)[:, :, None], dt=0.02, obs=((1, 0),))
    lags = np.arange(0, 0.41, 0.04)
    res = autocorrelation_compare(a, b, (1, 0), lags, n_boot=300)
    assert res.bands_overlap
    np.testing.assert_allclose(res.acf_a, np.exp(-lam * lags), atol=4 * res.se_a.max() + 1e-12)
    slow = synthetic(ou_paths(300, 101, 0.01, 0.5 * lam, 12)[:, :, None], obs=((1, 0),))
    far = autocorrelation_compare(slow, b, (1, 0), lags, n_boot=300)
    assert not far.bands_overlap and far.distance > res.distance
    assert set(res.to_dict()) >= {"lags", "distance", "bands_overlap"}


def test_comparison_checks_inputs():
    a = synthetic(np.zeros((4, 11, 1)) + 1, obs=((1, 0),))
    b = synthetic(np.zeros((4, 11, 1)) + 1, obs=((1, 0),), nu=2.0)
    with pytest.raises(ValueError, match="viscosities"):
        autocorrelation_compare(a, b, (1, 0), [0.0, 0.01])
    with pytest.raises(ValueError, match="multiples"):
        autocorrelation_compare(a, a, (1, 0), [0.0, 0.015])
    with pytest.raises(ValueError, match="horizon"):
        autocorrelation_compare(a, a, (1, 0), [0.0, 0.2])
