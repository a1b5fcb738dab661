import math

import numpy as np
import pytest
from scipy import stats

from ebacktest.distributions import Family, InnovationSpec, expected_shortfall, quantile
from ebacktest.timeseries import (
    Adjustment,
    ArGarchParams,
    ConfigError,
    FitError,
    Forecaster,
    RiskForecasts,
    ScenarioConfig,
    adjust_report,
    empirical_forecast,
    filter_volatility,
    fit_ar_garch_qml,
    fit_innovations,
    forecast_risk,
    forecast_stream,
    parse_config,
    simulate,
    standardized_residuals,
)


def _replay(path, cfg):
    """Rebuild the conditional moments from the losses with plain Python."""
    pr = cfg.params
    beta = cfg.beta_path()[cfg.burn_in:]
    mu = np.empty(path.losses.size)
    s2 = np.empty(path.losses.size)
    mu[0], s2[0] = path.mu[0], path.sigma[0] ** 2
    for t in range(1, mu.size):
        eps = path.losses[t - 1] - mu[t - 1]
        mu[t] = pr.c + pr.psi * path.losses[t - 1]
        s2[t] = pr.alpha0 + pr.alpha1 * eps**2 + beta[t] * s2[t - 1]
    return mu, np.sqrt(s2)


def test_simulation_recursion():
    cfg = ScenarioConfig.stationary()
    path = simulate(cfg, 11)
    assert path.losses.size == 1000
    mu, sigma = _replay(path, cfg)
    np.testing.assert_allclose(path.mu, mu, rtol=1e-12)
    np.testing.assert_allclose(path.sigma, sigma, rtol=1e-12)
    np.testing.assert_allclose(path.losses, path.mu + path.sigma * path.innovations, rtol=1e-12)


def test_structural_beta_switch():
    cfg = ScenarioConfig.structural(b_star=100)
    path = simulate(cfg, 5)
    beta = cfg.beta_path()[cfg.burn_in + cfg.n_presample:]
    assert np.all(beta[:100] == 0.7) and np.all(beta[100:] == pytest.approx(0.95))
    # loss is minus sigma times the innovation, no mean
    np.testing.assert_allclose(path.losses, -path.sigma * path.innovations, rtol=1e-12)
    _, sigma = _replay(path, cfg)
    np.testing.assert_allclose(path.sigma, sigma, rtol=1e-12)


def test_simulation_deterministic():
    cfg = ScenarioConfig.stationary(n_test=50)
    np.testing.assert_array_equal(simulate(cfg, 9).losses, simulate(cfg, 9).losses)
    assert not np.array_equal(simulate(cfg, 9).losses, simulate(cfg, 10).losses)


def test_nonstationary_warning():
    cfg = ScenarioConfig.stationary(params=ArGarchParams(0.0, 0.0, 0.01, 0.2, 0.85), n_test=10)
    with pytest.warns(RuntimeWarning):
        simulate(cfg, 0)


def test_qml_recovers_parameters():
    cfg = ScenarioConfig.stationary(n_presample=0, n_test=20000,
                                    innovation=InnovationSpec.normal())
    x = simulate(cfg, 1).losses
    fit = fit_ar_garch_qml(x)
    truth = cfg.params
    assert fit.c == pytest.approx(truth.c, abs=0.02)
    assert fit.psi == pytest.approx(truth.psi, abs=0.03)
    assert fit.alpha1 == pytest.approx(truth.alpha1, abs=0.03)
    assert fit.beta == pytest.approx(truth.beta, abs=0.04)


def test_qml_errors():
    with pytest.raises(FitError):
        fit_ar_garch_qml(np.zeros(50))
    with pytest.raises(FitError):
        fit_ar_garch_qml(np.ones(500))


def test_filter_and_residuals():
    p = ArGarchParams(0.0, 0.0, 0.1, 0.1, 0.8)
    x = np.array([1.0, -2.0, 0.5])
    mu, s2 = filter_volatility(p, x)
    assert mu.size == s2.size == 4
    assert s2[0] == pytest.approx(1.0)
    assert s2[1] == pytest.approx(0.1 + 0.1 * 1.0 + 0.8 * 1.0)
    z = standardized_residuals(p, x, "zero")
    assert z[0] == pytest.approx(1.0)


def test_fit_innovations():
    spec = InnovationSpec.skewed_t(5.0, 1.5)
    z = spec.sample(4, 20000)
    fit = fit_innovations(z, Family.SKEWED_T)
    assert fit.shape == pytest.approx(5.0, rel=0.25)
    assert fit.skewness == pytest.approx(1.5, abs=0.08)
    assert fit_innovations(z, "normal").family is Family.NORMAL


def test_forecast_risk_location_scale():
    p = ArGarchParams(0.1, 0.5, 0.2, 0.1, 0.7)
    spec = InnovationSpec.normal()
    var, es = forecast_risk(p, spec, last_loss=1.0, last_sigma=2.0, last_z_innov=0.5, p=0.975)
    sigma = math.sqrt(0.2 + 0.1 * 1.0 + 0.7 * 4.0)
    assert var == pytest.approx(0.1 + 0.5 + sigma * stats.norm.ppf(0.975))
    assert es == pytest.approx(0.6 + sigma * expected_shortfall(spec, 0.975))


def test_empirical_forecast():
    x = np.arange(1, 101, dtype=float)
    var, es = empirical_forecast(x, 0.95)
    assert var == 95.0
    assert es == pytest.approx(np.mean([96, 97, 98, 99, 100]))


def test_adjustments():
    base = RiskForecasts(np.array([1.0]), np.array([2.0]), 0.975)
    up = adjust_report(base, Adjustment.PLUS_BOTH)
    assert (up.var[0], up.es[0]) == pytest.approx((1.1, 2.2))
    down = adjust_report(base, "-10%es")
    assert (down.var[0], down.es[0]) == pytest.approx((1.0, 1.8))
    assert base.report("var")[1] is None


def test_true_forecasts_are_exact():
    cfg = ScenarioConfig.stationary(n_test=40)
    path = simulate(cfg, 2)
    fc = forecast_stream(path, cfg)
    sl = path.test_slice
    q = quantile(cfg.innovation, cfg.p)
    np.testing.assert_allclose(fc.var, path.mu[sl] + path.sigma[sl] * q, rtol=1e-10)


def test_structural_true_forecast_mirrors_skew():
    cfg = ScenarioConfig.structural(b_star=None, forecaster=Forecaster.TRUE)
    path = simulate(cfg, 2)
    fc = forecast_stream(path, cfg)
    mirrored = InnovationSpec.skewed_t(5.0, 1 / 0.95)
    np.testing.assert_allclose(fc.var, path.sigma[path.test_slice] * quantile(mirrored, 0.95), rtol=1e-9)


def test_fitted_forecaster_stream():
    cfg = ScenarioConfig.stationary(n_test=30, forecaster=Forecaster.NORMAL, refit_interval=10)
    fc = forecast_stream(simulate(cfg, 3), cfg)
    assert len(fc) == 30
    assert np.all(fc.es > fc.var)


def test_gamed_stream_switches():
    cfg = ScenarioConfig.gamed(switch_day=20, n_test=40, refit_interval=20)
    path = simulate(cfg, 1)
    fc = forecast_stream(path, cfg)
    ref = forecast_stream(path, ScenarioConfig.stationary(n_test=40, forecaster=Forecaster.NORMAL,
                                                          refit_interval=20))
    np.testing.assert_allclose(fc.es[20:], ref.es[20:])
    assert np.all(fc.es[:20] > ref.es[:20])


def test_config_parsing():
    cfg = parse_config("dgp = structural\nb_star = 100  # change day\n")
    assert cfg.b_star == 100 and cfg.n_test == 250 and cfg.p == 0.95
    cfg = parse_config("n_test = 300\nbeta = 0.8\ninnovation = t\nshape = 6\n")
    assert cfg.params.beta == 0.8 and cfg.innovation.shape == 6.0
    with pytest.raises(ConfigError, match="n_tset"):
        parse_config("n_tset = 3")
    with pytest.raises(ConfigError, match="forecaster"):
        parse_config("forecaster = psychic")
    with pytest.raises(ConfigError, match="n_test"):
        parse_config("n_test = many")


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig.stationary(p=1.5)
    with pytest.raises(ConfigError):
        ScenarioConfig.stationary(adjustment=Adjustment.GAMED)
    with pytest.raises(ConfigError):
        ScenarioConfig.stationary(forecaster=Forecaster.NORMAL, n_presample=100)
