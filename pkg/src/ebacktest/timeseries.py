"""
AR(1)-GARCH(1,1) simulation, Gaussian quasi-likelihood fitting, and the
VaR/ES forecast streams a reporting desk would submit.

Losses follow ``L_t = mu_t + s * sigma_t * Z_t`` with ``mu_t = c + psi L_{t-1}``
and ``sigma_t^2 = alpha0 + alpha1 (L_{t-1} - mu_{t-1})^2 + beta_t sigma_{t-1}^2``,
where ``s = -1`` for the structural-change design (losses are negated
returns there) and ``+1`` otherwise.
"""

from __future__ import annotations

import configparser
import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from numba import njit

from . import _fit
from .distributions import Family, InnovationSpec, ParameterError, expected_shortfall, quantile, sample

__all__ = [
    "Adjustment",
    "ArGarchParams",
    "ConfigError",
    "Dgp",
    "FitError",
    "ForecastError",
    "Forecaster",
    "RiskForecasts",
    "RollingFits",
    "ScenarioConfig",
    "SimulatedPath",
    "adjust_report",
    "empirical_forecast",
    "fit_ar_garch_qml",
    "fit_innovations",
    "forecast_risk",
    "forecast_stream",
    "load_config",
    "parse_config",
    "simulate",
]

log = logging.getLogger(__name__)

MIN_FIT_WINDOW = 100
_START_PAIRS = ((0.05, 0.90), (0.10, 0.80), (0.15, 0.60))


class FitError(RuntimeError):
    """Quasi-likelihood search failed; ``best`` holds the best parameters found, if any."""

    def __init__(self, msg: str, best: "ArGarchParams | None" = None):
        super().__init__(msg)
        self.best = best


class ForecastError(ValueError):
    pass


class ConfigError(ValueError):
    """Bad scenario configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass(frozen=True)
class ArGarchParams:
    c: float = 0.0
    psi: float = 0.0
    alpha0: float = 1.0
    alpha1: float = 0.0
    beta: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha0 <= 0 or self.alpha1 < 0 or self.beta < 0:
            raise ParameterError("need alpha0 > 0 and alpha1, beta >= 0")

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta

    @property
    def unconditional_variance(self) -> float:
        if self.persistence >= 1:
            return math.inf
        return self.alpha0 / (1.0 - self.persistence)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.c, self.psi, self.alpha0, self.alpha1, self.beta)


STATIONARY_PARAMS = ArGarchParams(c=-0.05, psi=0.3, alpha0=0.01, alpha1=0.1, beta=0.85)
STATIONARY_INNOVATION = InnovationSpec.skewed_t(5.0, 1.5)
STRUCTURAL_PARAMS = ArGarchParams(c=0.0, psi=0.0, alpha0=1e-5, alpha1=0.04, beta=0.7)
STRUCTURAL_INNOVATION = InnovationSpec.skewed_t(5.0, 0.95)


class Dgp(str, enum.Enum):
    STATIONARY = "stationary"
    STRUCTURAL = "structural"
    CUSTOM = "custom"


class Forecaster(str, enum.Enum):
    NORMAL = "normal"
    T = "t"
    SKEWED_T = "skewed-t"
    TRUE = "true"
    EMPIRICAL = "empirical"
    # one fit on the presample, empirical quantiles of the standardized residuals
    FILTERED_EMPIRICAL = "filtered-empirical"


class Adjustment(str, enum.Enum):
    EXACT = "exact"
    MINUS_ES = "-10%es"
    MINUS_BOTH = "-10%both"
    PLUS_ES = "+10%es"
    PLUS_BOTH = "+10%both"
    MINUS_VAR = "-10%var"
    PLUS_VAR = "+10%var"
    GAMED = "gamed"

    @property
    def factors(self) -> tuple[float, float]:
        """Multipliers applied to (VaR, ES)."""
        return _FACTORS[self]


_FACTORS = {
    Adjustment.EXACT: (1.0, 1.0),
    Adjustment.MINUS_ES: (1.0, 0.9),
    Adjustment.MINUS_BOTH: (0.9, 0.9),
    Adjustment.PLUS_ES: (1.0, 1.1),
    Adjustment.PLUS_BOTH: (1.1, 1.1),
    Adjustment.MINUS_VAR: (0.9, 1.0),
    Adjustment.PLUS_VAR: (1.1, 1.0),
    Adjustment.GAMED: (1.1, 1.1),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to generate one replication's losses and forecasts.

    ``p`` is the level of the backtested measure; ``measure`` is ``"var"``
    (report ``r = VaR_p``) or ``"es"`` (report ``r = ES_p`` with ``z = VaR_p``).
    ``switch_day`` (gamed reports) and ``b_star`` (structural change) count
    test days from 1.
    """

    dgp: Dgp = Dgp.STATIONARY
    params: ArGarchParams | None = None
    innovation: InnovationSpec | None = None
    burn_in: int = 1000
    n_presample: int = 500
    n_test: int = 500
    forecaster: Forecaster = Forecaster.TRUE
    fit_window: int = 500
    refit_interval: int = 1
    adjustment: Adjustment = Adjustment.EXACT
    switch_day: int | None = None
    b_star: int | None = None
    beta_shift: float = 0.25
    p: float = 0.975
    measure: str = "es"

    def __post_init__(self) -> None:
        for name, enum_type in (("dgp", Dgp), ("forecaster", Forecaster), ("adjustment", Adjustment)):
            try:
                object.__setattr__(self, name, enum_type(getattr(self, name)))
            except ValueError:
                raise ConfigError(name, f"unknown value {getattr(self, name)!r}") from None
        if self.params is None:
            object.__setattr__(self, "params", STRUCTURAL_PARAMS if self.dgp is Dgp.STRUCTURAL else STATIONARY_PARAMS)
        if self.innovation is None:
            object.__setattr__(self, "innovation",
                               STRUCTURAL_INNOVATION if self.dgp is Dgp.STRUCTURAL else STATIONARY_INNOVATION)
        for name in ("burn_in", "n_presample"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be nonnegative")
        if self.n_test < 1:
            raise ConfigError("n_test", "must be positive")
        if self.refit_interval < 1:
            raise ConfigError("refit_interval", "must be at least 1")
        if self.fit_window < 1:
            raise ConfigError("fit_window", "must be positive")
        if not 0 < self.p < 1:
            raise ConfigError("p", "must lie in (0, 1)")
        if self.measure not in ("var", "es"):
            raise ConfigError("measure", "must be 'var' or 'es'")
        if self.adjustment is Adjustment.GAMED:
            if self.switch_day is None or not 0 <= self.switch_day <= self.n_test:
                raise ConfigError("switch_day", "gamed reports need a switch day within the test span")
        if self.b_star is not None and not 0 <= self.b_star <= self.n_test:
            raise ConfigError("b_star", "must lie within the test span")
        if self.forecaster in (Forecaster.NORMAL, Forecaster.T, Forecaster.SKEWED_T, Forecaster.EMPIRICAL):
            if self.n_presample < self.fit_window:
                raise ConfigError("n_presample", "must cover the first fitting window")

    @classmethod
    def stationary(cls, **kw) -> "ScenarioConfig":
        return cls(Dgp.STATIONARY, **kw)

    @classmethod
    def structural(cls, b_star: int | None, **kw) -> "ScenarioConfig":
        base = dict(n_presample=250, n_test=250, p=0.95, forecaster=Forecaster.FILTERED_EMPIRICAL)
        base.update(kw)
        return cls(Dgp.STRUCTURAL, b_star=b_star, **base)

    @classmethod
    def gamed(cls, switch_day: int = 1000, n_test: int = 2000, **kw) -> "ScenarioConfig":
        return cls(Dgp.STATIONARY, n_test=n_test, adjustment=Adjustment.GAMED,
                   switch_day=switch_day, forecaster=Forecaster.NORMAL, **kw)

    @property
    def loss_sign(self) -> float:
        return -1.0 if self.dgp is Dgp.STRUCTURAL else 1.0

    def beta_path(self) -> np.ndarray:
        """``beta_t`` for every simulated day after burn-in."""
        n = self.n_presample + self.n_test
        beta = np.full(self.burn_in + n, self.params.beta)
        if self.b_star is not None and self.dgp is Dgp.STRUCTURAL:
            test_day = np.arange(beta.size) - self.burn_in - self.n_presample + 1
            beta = beta + self.beta_shift * (test_day > self.b_star)
        return beta


@dataclass(frozen=True)
class SimulatedPath:
    """Presample followed by the test span; ``mu``/``sigma`` are the true conditional moments."""

    losses: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    innovations: np.ndarray
    n_presample: int

    @property
    def test_slice(self) -> slice:
        return slice(self.n_presample, self.losses.size)


@njit(cache=True)
def _simulate_kernel(c, psi, alpha0, alpha1, beta, z, sign, s2_0, prev):
    n = z.shape[0]
    loss = np.empty(n)
    mu = np.empty(n)
    s2 = np.empty(n)
    s2_prev = s2_0
    eps_prev = 0.0
    has_prev = False
    for t in range(n):
        mu[t] = c + psi * prev
        if has_prev:
            s2[t] = alpha0 + alpha1 * eps_prev * eps_prev + beta[t] * s2_prev
        else:
            s2[t] = s2_0
        eps_prev = sign * math.sqrt(s2[t]) * z[t]
        loss[t] = mu[t] + eps_prev
        prev = loss[t]
        s2_prev = s2[t]
        has_prev = True
    return loss, mu, s2


def simulate(config: ScenarioConfig, seed) -> SimulatedPath:
    """Simulate burn-in + presample + test days and drop the burn-in."""
    pr = config.params
    beta = config.beta_path()
    if np.any(pr.alpha1 + beta >= 1):
        warnings.warn("alpha1 + beta >= 1 on part of the path; variance is not stationary there",
                      RuntimeWarning, stacklevel=2)
    total = config.burn_in + config.n_presample + config.n_test
    z = sample(config.innovation, seed, total)
    s2_0 = pr.alpha0 / (1.0 - pr.persistence) if pr.persistence < 1 else pr.alpha0
    prev = pr.c / (1.0 - pr.psi) if abs(pr.psi) < 1 else 0.0
    loss, mu, s2 = _simulate_kernel(pr.c, pr.psi, pr.alpha0, pr.alpha1, beta, z,
                                    config.loss_sign, s2_0, prev)
    keep = slice(config.burn_in, total)
    return SimulatedPath(loss[keep], mu[keep], np.sqrt(s2[keep]), z[keep], config.n_presample)


# --------------------------------------------------------------------------- fitting


def _to_unconstrained(p: ArGarchParams, mean_model: str) -> np.ndarray:
    rest = max(1.0 - p.alpha1 - p.beta, 1e-8)
    core = [math.log(p.alpha0), math.log(max(p.alpha1, 1e-8) / rest), math.log(max(p.beta, 1e-8) / rest)]
    if mean_model == "ar1":
        return np.array([p.c, math.atanh(np.clip(p.psi, -0.99, 0.99))] + core)
    return np.array(core)


def _from_unconstrained(theta: np.ndarray, code: int) -> ArGarchParams:
    return ArGarchParams(*_fit.unpack_garch(theta, code))


def _moment_starts(x: np.ndarray, mean_model: str) -> list[ArGarchParams]:
    if mean_model == "ar1":
        xc = x - x.mean()
        denom = float(xc[:-1] @ xc[:-1])
        psi = float(np.clip(xc[1:] @ xc[:-1] / denom, -0.9, 0.9)) if denom > 0 else 0.0
        c = float(x.mean() * (1.0 - psi))
        resid = x[1:] - c - psi * x[:-1]
    else:
        psi, c, resid = 0.0, 0.0, x
    v = float(np.mean(resid**2)) if mean_model == "zero" else float(np.var(resid))
    return [ArGarchParams(c, psi, v * (1.0 - a - b), a, b) for a, b in _START_PAIRS]


def fit_ar_garch_qml(window, mean_model: str = "ar1", start: ArGarchParams | None = None,
                     max_evals: int = 4000) -> ArGarchParams:
    """Gaussian quasi-likelihood fit of AR(1)-GARCH(1,1) (``mean_model="ar1"``)
    or zero-mean GARCH(1,1) (``"zero"``).

    Simplex search in a reparameterized space where ``alpha0 > 0``,
    ``|psi| < 1`` and ``alpha1 + beta < 1`` hold automatically.  Three starts
    are tried; with ``start`` given it replaces the first of them.
    """
    x = np.ascontiguousarray(window, dtype=float)
    if x.size < MIN_FIT_WINDOW:
        raise FitError(f"need at least {MIN_FIT_WINDOW} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise FitError("window contains non-finite losses")
    if mean_model not in ("ar1", "zero"):
        raise ValueError(f"unknown mean model {mean_model!r}")
    if np.std(x) < 1e-12 * max(1.0, np.abs(x).max()):
        raise FitError("window is constant; the likelihood is degenerate")
    code = _fit.QML_AR1 if mean_model == "ar1" else _fit.QML_ZERO
    starts = _moment_starts(x, mean_model)
    if start is not None:
        starts[0] = start
    sd = float(np.std(x))
    step = np.array(([0.1 * sd, 0.2] if mean_model == "ar1" else []) + [0.5, 0.5, 0.5])
    best_theta, best_f, any_conv = None, math.inf, False
    for s in starts:
        theta0 = _to_unconstrained(s, mean_model)
        theta, f, _, conv = _fit.nelder_mead(theta0, step, code, x, max_evals, 1e-6, 1e-10)
        if conv:
            # restart from the optimum to guard against premature collapse
            theta, f, _, conv = _fit.nelder_mead(theta, step * 0.1, code, x, max_evals, 1e-6, 1e-10)
        any_conv |= conv
        if f < best_f:
            best_theta, best_f = theta, f
    best = _from_unconstrained(best_theta, code) if best_theta is not None and best_f < _fit.BIG else None
    if best is None or not any_conv:
        raise FitError("quasi-likelihood search did not converge", best)
    return best


def filter_volatility(params: ArGarchParams, x, prev: float = math.nan) -> tuple[np.ndarray, np.ndarray]:
    """Fitted ``(mu_t, sigma_t)`` along ``x`` plus the one-step-ahead values at the end."""
    mu, s2 = _fit.garch_filter(*params.as_tuple(), np.ascontiguousarray(x, dtype=float), prev)
    return mu, np.sqrt(s2)


def standardized_residuals(params: ArGarchParams, x, mean_model: str = "ar1") -> np.ndarray:
    x = np.asarray(x, float)
    if mean_model == "ar1":
        mu, sig = filter_volatility(params, x[1:], x[0])
        return (x[1:] - mu[:-1]) / sig[:-1]
    mu, sig = filter_volatility(params, x)
    return (x - mu[:-1]) / sig[:-1]


def fit_innovations(residuals, family: Family | str, start: InnovationSpec | None = None) -> InnovationSpec:
    """Maximum-likelihood shape (and skewness) of standardized residuals.

    Degrees of freedom at or below 2.01 are clamped there with a warning.
    """
    family = Family(family)
    if family is Family.NORMAL:
        return InnovationSpec.normal()
    z = np.ascontiguousarray(residuals, dtype=float)
    if z.size < MIN_FIT_WINDOW:
        raise FitError(f"need at least {MIN_FIT_WINDOW} residuals, got {z.size}")
    nu0 = start.shape if start is not None and start.family is family else 6.0
    if family is Family.STUDENT_T:
        code, theta0, step = _fit.NLL_T, np.array([math.log(nu0 - 2.0)]), np.array([0.5])
    else:
        xi0 = start.skewness if start is not None and start.family is family else 1.0
        code = _fit.NLL_SKEWT
        theta0 = np.array([math.log(nu0 - 2.0), math.log(xi0)])
        step = np.array([0.5, 0.2])
    theta, f, _, conv = _fit.nelder_mead(theta0, step, code, z, 2000, 1e-7, 1e-12)
    if not conv or f >= _fit.BIG:
        raise FitError(f"{family.value} innovation fit did not converge")
    nu = 2.0 + math.exp(theta[0])
    if nu <= 2.01:
        warnings.warn(f"fitted degrees of freedom {nu:.4f} clamped to 2.01", RuntimeWarning, stacklevel=2)
        nu = 2.01
    if family is Family.STUDENT_T:
        return InnovationSpec.student_t(nu)
    return InnovationSpec.skewed_t(nu, math.exp(theta[1]))


# --------------------------------------------------------------------------- forecasts


@dataclass(frozen=True)
class RiskForecasts:
    """Per-day VaR_p and ES_p reports."""

    var: np.ndarray
    es: np.ndarray
    p: float

    def __len__(self) -> int:
        return self.var.size

    def report(self, measure: str) -> tuple[np.ndarray, np.ndarray | None]:
        """``(r, z)`` for a VaR (``z`` is None) or an ES backtest."""
        if measure == "var":
            return self.var, None
        return self.es, self.var


def forecast_risk(params: ArGarchParams, spec: InnovationSpec, last_loss: float,
                  last_sigma: float, last_z_innov: float, p: float) -> tuple[float, float]:
    """One-step VaR and ES forecasts from the AR-GARCH recursion."""
    mu = params.c + params.psi * last_loss
    s2 = params.alpha0 + params.alpha1 * (last_sigma * last_z_innov) ** 2 + params.beta * last_sigma**2
    sigma = math.sqrt(s2)
    if sigma == 0:
        return mu, mu
    return mu + sigma * quantile(spec, p), mu + sigma * expected_shortfall(spec, p)


def empirical_forecast(window, p: float) -> tuple[float, float]:
    """Historical-simulation VaR (order statistic ``ceil(n p)``) and ES (mean of the top ``floor(n(1-p))``)."""
    x = np.ascontiguousarray(window, dtype=float)
    if x.size * (1.0 - p) < 1.0 - 1e-9:
        raise ForecastError(f"window of {x.size} is too short for level {p}")
    z, r = _fit.empirical_var_es(x, float(p))
    return float(z), float(r)


def adjust_report(forecasts: RiskForecasts, adjustment: Adjustment | str) -> RiskForecasts:
    """Scale the reports multiplicatively.  Gamed streams are assembled by :func:`forecast_stream`."""
    fz, fr = Adjustment(adjustment).factors
    return RiskForecasts(forecasts.var * fz, forecasts.es * fr, forecasts.p)


@dataclass
class RollingFits:
    """Rolling-window quasi-likelihood fits over the test span of one path.

    Day ``i`` of the test span (absolute index ``n_presample + i``) is
    forecast from the ``window`` losses before it with the parameters fitted
    at the latest refit day.  Failed fits reuse the previous parameters.
    """

    losses: np.ndarray
    n_presample: int
    n_test: int
    window: int = 500
    refit_interval: int = 1
    mean_model: str = "ar1"
    params: list[ArGarchParams] = field(default_factory=list)
    mu: np.ndarray = field(init=False)
    sigma: np.ndarray = field(init=False)
    failures: int = field(default=0, init=False)
    _innov: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        self.losses = np.asarray(self.losses, float)
        self.mu = np.empty(self.n_test)
        self.sigma = np.empty(self.n_test)
        prev: ArGarchParams | None = None
        self.params = []
        for i in range(self.n_test):
            t = self.n_presample + i
            win = self.losses[t - self.window:t]
            if i % self.refit_interval == 0:
                try:
                    prev = fit_ar_garch_qml(win, self.mean_model, start=prev)
                except FitError as exc:
                    self.failures += 1
                    if prev is None:
                        if exc.best is None:
                            raise
                        prev = exc.best
                    log.debug("refit at day %d failed (%s); keeping previous parameters", t, exc)
                self.params.append(prev)
            mu, sig = self._filter(prev, win)
            self.mu[i], self.sigma[i] = mu[-1], sig[-1]

    def _filter(self, params: ArGarchParams, win: np.ndarray):
        if self.mean_model == "ar1":
            return filter_volatility(params, win[1:], win[0])
        return filter_volatility(params, win)

    def block_of(self, i: int) -> int:
        return i // self.refit_interval

    def innovation_specs(self, family: Family) -> list[InnovationSpec]:
        """Innovation law refitted on each block's standardized residuals."""
        family = Family(family)
        if family in self._innov:
            return self._innov[family]
        specs: list[InnovationSpec] = []
        prev = None
        for b, par in enumerate(self.params):
            if family is Family.NORMAL:
                specs.append(InnovationSpec.normal())
                continue
            t = self.n_presample + b * self.refit_interval
            resid = standardized_residuals(par, self.losses[t - self.window:t], self.mean_model)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    prev = fit_innovations(resid, family, start=prev)
            except FitError:
                self.failures += 1
                if prev is None:
                    raise
            specs.append(prev)
        self._innov[family] = specs
        return specs

    def forecasts(self, family: Family, p: float) -> RiskForecasts:
        specs = self.innovation_specs(family)
        q = np.array([quantile(s, p) for s in specs])
        es = np.array([expected_shortfall(s, p) for s in specs])
        blocks = np.arange(self.n_test) // self.refit_interval
        return RiskForecasts(self.mu + self.sigma * q[blocks], self.mu + self.sigma * es[blocks], p)


_FAMILY = {Forecaster.NORMAL: Family.NORMAL, Forecaster.T: Family.STUDENT_T, Forecaster.SKEWED_T: Family.SKEWED_T}


def true_forecasts(path: SimulatedPath, config: ScenarioConfig, p: float) -> RiskForecasts:
    sl = path.test_slice
    spec = config.innovation
    s = config.loss_sign
    mu, sig = path.mu[sl], path.sigma[sl]
    if s > 0:
        q, es = quantile(spec, p), expected_shortfall(spec, p)
    else:
        # losses are -sigma Z: upper tail of -Z
        mirrored = replace(spec, skewness=1.0 / spec.skewness) if spec.family is Family.SKEWED_T else spec
        q, es = quantile(mirrored, p), expected_shortfall(mirrored, p)
    return RiskForecasts(mu + sig * q, mu + sig * es, p)


def filtered_empirical_forecasts(path: SimulatedPath, p: float, mean_model: str = "zero") -> RiskForecasts:
    """Single fit on the presample; VaR/ES are the fitted volatility times the
    empirical VaR/ES of the presample's standardized residuals."""
    x = path.losses
    n0 = path.n_presample
    params = fit_ar_garch_qml(x[:n0], mean_model)
    mu, sig = filter_volatility(params, x)
    resid = (x[:n0] - mu[:n0]) / sig[:n0]
    zq, zr = empirical_forecast(resid, p)
    sl = slice(n0, x.size)
    return RiskForecasts(mu[sl] + sig[sl] * zq, mu[sl] + sig[sl] * zr, p)


def rolling_empirical_forecasts(path: SimulatedPath, window: int, p: float) -> RiskForecasts:
    x = path.losses
    n0 = path.n_presample
    out = np.array([empirical_forecast(x[t - window:t], p) for t in range(n0, x.size)])
    return RiskForecasts(out[:, 0], out[:, 1], p)


def forecast_stream(path: SimulatedPath, config: ScenarioConfig, fits: RollingFits | None = None,
                    p: float | None = None) -> RiskForecasts:
    """Forecasts over the test span for the configured forecaster and adjustment.

    ``fits`` lets several forecasters share one set of rolling quasi-likelihood fits.
    """
    p = config.p if p is None else p
    fc = config.forecaster
    if config.adjustment is Adjustment.GAMED:
        fits = fits or rolling_fits(path, config)
        early = adjust_report(fits.forecasts(Family.SKEWED_T, p), Adjustment.PLUS_BOTH)
        late = fits.forecasts(_FAMILY.get(fc, Family.NORMAL), p)
        k = config.switch_day
        return RiskForecasts(np.concatenate([early.var[:k], late.var[k:]]),
                             np.concatenate([early.es[:k], late.es[k:]]), p)
    if fc is Forecaster.TRUE:
        base = true_forecasts(path, config, p)
    elif fc is Forecaster.EMPIRICAL:
        base = rolling_empirical_forecasts(path, config.fit_window, p)
    elif fc is Forecaster.FILTERED_EMPIRICAL:
        base = filtered_empirical_forecasts(path, p, "zero" if config.dgp is Dgp.STRUCTURAL else "ar1")
    else:
        fits = fits or rolling_fits(path, config)
        base = fits.forecasts(_FAMILY[fc], p)
    return adjust_report(base, config.adjustment)


def rolling_fits(path: SimulatedPath, config: ScenarioConfig) -> RollingFits:
    mean_model = "zero" if config.dgp is Dgp.STRUCTURAL else "ar1"
    return RollingFits(path.losses, path.n_presample, path.losses.size - path.n_presample,
                       config.fit_window, config.refit_interval, mean_model)


# --------------------------------------------------------------------------- config files

_PARAM_KEYS = ("c", "psi", "alpha0", "alpha1", "beta")
_INT_KEYS = ("burn_in", "n_presample", "n_test", "fit_window", "refit_interval", "switch_day", "b_star")


def parse_config(text: str) -> ScenarioConfig:
    """Parse ``key = value`` lines (``#`` comments) into a :class:`ScenarioConfig`.

    Besides the config fields, the keys ``c, psi, alpha0, alpha1, beta`` set
    the data-generating parameters and ``innovation, shape, skewness`` the
    innovation law.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[scenario]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None
    raw = dict(cp["scenario"])
    known = {f.name for f in fields(ScenarioConfig)} - {"params", "innovation"}
    allowed = known | set(_PARAM_KEYS) | {"innovation", "shape", "skewness"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(key, "unknown key")
    kw: dict = {}
    for key, val in raw.items():
        if key in _PARAM_KEYS or key in ("innovation", "shape", "skewness"):
            continue
        try:
            if key in _INT_KEYS:
                kw[key] = None if val.lower() in ("", "none") else int(val)
            elif key in ("p", "beta_shift"):
                kw[key] = float(val)
            else:
                kw[key] = val.strip()
        except ValueError:
            raise ConfigError(key, f"cannot parse {val!r}") from None
    dgp = Dgp(kw.get("dgp", "stationary")) if kw.get("dgp", "stationary") in {d.value for d in Dgp} else None
    if dgp is None:
        raise ConfigError("dgp", f"unknown value {kw['dgp']!r}")
    if dgp is Dgp.STRUCTURAL:
        for k, v in dict(n_presample=250, n_test=250, p=0.95, forecaster="filtered-empirical").items():
            kw.setdefault(k, v)
    base = STRUCTURAL_PARAMS if dgp is Dgp.STRUCTURAL else STATIONARY_PARAMS
    try:
        pvals = {k: float(raw[k]) if k in raw else getattr(base, k) for k in _PARAM_KEYS}
    except ValueError as exc:
        bad = next(k for k in _PARAM_KEYS if k in raw and not _is_float(raw[k]))
        raise ConfigError(bad, str(exc)) from None
    try:
        kw["params"] = ArGarchParams(**pvals)
    except ParameterError as exc:
        raise ConfigError("alpha0", str(exc)) from None
    if "innovation" in raw or "shape" in raw or "skewness" in raw:
        default = STRUCTURAL_INNOVATION if dgp is Dgp.STRUCTURAL else STATIONARY_INNOVATION
        try:
            fam = Family(raw.get("innovation", default.family.value))
        except ValueError:
            raise ConfigError("innovation", f"unknown family {raw['innovation']!r}") from None
        try:
            shape = float(raw["shape"]) if "shape" in raw else default.shape
            skew = float(raw["skewness"]) if "skewness" in raw else default.skewness
            if fam is Family.NORMAL:
                kw["innovation"] = InnovationSpec.normal()
            elif fam is Family.STUDENT_T:
                kw["innovation"] = InnovationSpec.student_t(shape)
            else:
                kw["innovation"] = InnovationSpec.skewed_t(shape, skew)
        except (ValueError, TypeError) as exc:
            raise ConfigError("shape", str(exc)) from None
    try:
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<file>", str(exc)) from None


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    return parse_config(text)
