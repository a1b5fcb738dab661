"""
Predictable betting fractions for the e-process.

Each rule picks ``lam_t`` in ``[0, gamma_cap]`` from information available
before day ``t``:

* ``gro``   -- log-growth optimal against a supplied law of the next loss
* ``gree``  -- log-growth optimal on past realized e-values
* ``grel``  -- log-growth optimal on past losses re-scored with today's forecasts
* ``grem``  -- the equal-wealth mixture of the ``gree`` and ``grel`` e-processes
* ``taylor-*`` -- second-order approximations of the three empirical rules
* ``fixed`` -- a constant fraction
"""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from . import _kernels
from .estatistics import EStatistic, FiniteLaw, Kind

__all__ = [
    "BettingState",
    "BettingStrategy",
    "EmptyHistory",
    "GremStep",
    "LocationScaleAlternative",
    "Method",
    "QuantileLaw",
    "StrategyError",
    "gree_lambda",
    "grel_lambda",
    "grem_combine",
    "gro_lambda",
    "solve_log_growth",
    "taylor_lambda",
    "taylor_lambda_es",
    "taylor_lambda_var",
]

log = logging.getLogger(__name__)

LAMBDA_TOL = 1e-10
INF_CAP = 1e12
GRO_NODES = 512

_GL_U, _GL_W = np.polynomial.legendre.leggauss(GRO_NODES)
_GL_U = 0.5 * (_GL_U + 1.0)
_GL_W = 0.5 * _GL_W


class EmptyHistory(ValueError):
    """No observations to estimate from; callers bet nothing."""


class StrategyError(RuntimeError):
    pass


class Method(str, enum.Enum):
    GRO = "gro"
    GREE = "gree"
    GREL = "grel"
    GREM = "grem"
    TAYLOR_GREE = "taylor-gree"
    TAYLOR_GREL = "taylor-grel"
    TAYLOR_GREM = "taylor-grem"
    FIXED = "fixed"

    @property
    def taylor(self) -> bool:
        return self.value.startswith("taylor")

    @property
    def base(self) -> str:
        return self.value.removeprefix("taylor-")

    @property
    def empirical(self) -> bool:
        return self.base in ("gree", "grel", "grem")


@dataclass(frozen=True)
class QuantileLaw:
    """A continuous alternative given through its quantile function."""

    quantile: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LocationScaleAlternative:
    """Day ``t`` loss is ``loc[t] + scale[t] * X`` with ``X`` given by its quantile function.

    ``t`` is 1-based, matching :meth:`BettingStrategy.law_at`.
    """

    quantile: Callable[[np.ndarray], np.ndarray]
    loc: np.ndarray
    scale: np.ndarray

    def __call__(self, t: int) -> QuantileLaw:
        m, s = float(self.loc[t - 1]), float(self.scale[t - 1])
        q = self.quantile
        return QuantileLaw(lambda u: m + s * np.asarray(q(u), float))

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes (standardized quantiles) and weights."""
        return np.asarray(self.quantile(_GL_U), float), _GL_W


Law = Union[FiniteLaw, QuantileLaw]


def solve_log_growth(values, weights=None, gamma_cap: float = 0.5,
                     inf_cap: float = INF_CAP) -> float:
    """Maximize ``sum_i w_i log(1 - lam + lam v_i)`` over ``lam`` in ``[0, gamma_cap]``.

    Golden-section search to 1e-10. Returns 0 whenever the weighted mean of
    the values is at most 1 (this also settles the flat all-ones case). A
    positive-weight ``+inf`` value forces ``gamma_cap`` unless a zero value
    also has positive weight, in which case infinities are replaced by
    ``inf_cap``.
    """
    v = np.ascontiguousarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyHistory("cannot bet on an empty sample")
    if not 0 < gamma_cap <= 1:
        raise ValueError(f"gamma_cap must lie in (0, 1], got {gamma_cap}")
    if np.isnan(v).any():
        raise StrategyError("sample contains NaN e-values")
    if weights is None:
        w = np.empty(0)
    else:
        w = np.ascontiguousarray(weights, dtype=float).ravel()
        if w.size != v.size or np.any(w < 0):
            raise ValueError("weights must be nonnegative and match the sample")
        w = w / w.sum()
    return float(_kernels.solve_log_growth(v, w, float(gamma_cap), LAMBDA_TOL, float(inf_cap)))


def _law_evalues(law: Law, estat: EStatistic, r: float, z: float | None):
    if isinstance(law, FiniteLaw):
        return np.asarray(estat(law.values, r, z), float), law.probs
    losses = np.asarray(law.quantile(_GL_U), float)
    return np.asarray(estat(losses, r, z), float), _GL_W


def gro_lambda(alternative: Law, estat: EStatistic, r: float, z: float | None = None,
               gamma_cap: float = 0.5) -> float:
    """Growth-optimal fraction when the next loss follows ``alternative``.

    Continuous laws are integrated over their quantile function with a
    512-node Gauss-Legendre rule.
    """
    values, weights = _law_evalues(alternative, estat, r, z)
    if np.isnan(values).any():
        raise StrategyError("e-statistic is not integrable under the alternative")
    return solve_log_growth(values, weights, gamma_cap)


def _window(a, window: int | None):
    a = np.asarray(a, float)
    return a if window is None or window <= 0 else a[-window:]


def gree_lambda(history_e, gamma_cap: float = 0.5, window: int | None = None) -> float:
    """Fraction from the empirical law of past realized e-values."""
    hist = _window(history_e, window)
    if hist.size == 0:
        return 0.0
    return solve_log_growth(hist, None, gamma_cap)


def grel_lambda(history_loss, estat: EStatistic, r: float, z: float | None = None,
                gamma_cap: float = 0.5, window: int | None = None) -> float:
    """Fraction from past losses scored with the current forecasts ``(r, z)``."""
    hist = _window(history_loss, window)
    if hist.size == 0:
        return 0.0
    return solve_log_growth(np.asarray(estat(hist, r, z), float), None, gamma_cap)


def _clamp(num: float, den: float, gamma_cap: float) -> float:
    if den == 0:
        return 0.0 if num <= 0 else gamma_cap
    return min(max(num / den, 0.0), gamma_cap)


def taylor_lambda(history_e, gamma_cap: float = 0.5) -> float:
    """Quadratic approximation ``(sum e - n) / sum (e - 1)^2`` clamped to ``[0, gamma_cap]``."""
    e = np.minimum(np.asarray(history_e, float), INF_CAP)
    if e.size == 0:
        raise EmptyHistory("taylor_lambda needs at least one observation")
    return _clamp(float(e.sum() - e.size), float(((e - 1.0) ** 2).sum()), gamma_cap)


def taylor_lambda_var(history_loss, r, p: float, gamma_cap: float = 0.5) -> float:
    """Closed form of the approximation for the VaR statistic.

    ``r`` is today's VaR report (GREL) or the array of past reports (GREE).
    """
    loss = np.asarray(history_loss, float)
    if loss.size == 0:
        raise EmptyHistory("taylor_lambda_var needs at least one observation")
    n = loss.size
    below = float(np.sum(loss <= np.asarray(r, float)))
    num = (1.0 - p) * (n * p - below)
    den = n * p * p + (1.0 - 2.0 * p) * below
    return _clamp(num, den, gamma_cap)


def taylor_lambda_es(history_loss, r: float, z: float, p: float, gamma_cap: float = 0.5) -> float:
    """Closed form of the approximation for the (ES, VaR) statistic with fixed ``(r, z)``.

    Past losses are re-scored against today's reports, as in the GREL rule.
    For the GREE rule use :func:`taylor_lambda` on the realized e-values.
    """
    loss = np.asarray(history_loss, float)
    if loss.size == 0:
        raise EmptyHistory("taylor_lambda_es needs at least one observation")
    if r < z:
        return gamma_cap
    c = (1.0 - p) * (r - z)
    excess = np.maximum(loss - z, 0.0)
    num = c * (excess.sum() - loss.size * c)
    den = float(((excess - c) ** 2).sum())
    if c == 0:
        # every e-value is 0/0 = 1 or +inf
        return gamma_cap if np.any(excess > 0) else 0.0
    return _clamp(num, den, gamma_cap)


class GremStep(NamedTuple):
    lam: float
    log_wealth: float


def grem_combine(gree_log_wealth: float, grel_log_wealth: float,
                 lam_gree: float, lam_grel: float) -> GremStep:
    """Mixture fraction weighting each leg by its wealth before today's bet.

    Returns the reported fraction and the mixture's log wealth
    ``log((M_gree + M_grel) / 2)`` at the same time point.
    """
    a, b = float(gree_log_wealth), float(grel_log_wealth)
    mix = float(np.logaddexp(a, b) - math.log(2.0))
    if a == -math.inf and b == -math.inf:
        return GremStep(0.0, -math.inf)
    if a == math.inf and b == math.inf:
        wa = 0.5
    elif a == math.inf or b == -math.inf:
        wa = 1.0
    elif b == math.inf or a == -math.inf:
        wa = 0.0
    else:
        wa = 1.0 / (1.0 + math.exp(b - a))
    return GremStep(wa * lam_gree + (1.0 - wa) * lam_grel, mix)


@dataclass(frozen=True)
class BettingStrategy:
    """Which betting rule is in force and its tuning.

    ``warmup`` is the number of leading days forced to bet nothing; it defaults
    to 1 for the empirical rules (no history on day 1) and 0 otherwise.
    ``alternative`` is only used by ``gro``: a law of the next loss or a
    callable ``t -> law``.
    """

    method: Method = Method.GREM
    gamma_cap: float = 0.5
    window: int | None = None
    warmup: int | None = None
    lam: float = 0.0
    alternative: Law | Callable[[int], Law] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        if not 0 < self.gamma_cap < 1:
            raise ValueError(f"gamma_cap must lie in (0, 1), got {self.gamma_cap}")
        if self.method is Method.FIXED and not 0 <= self.lam <= self.gamma_cap:
            raise ValueError("fixed lambda must lie in [0, gamma_cap]")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be a positive count")
        if self.method is Method.GRO and self.alternative is None:
            raise ValueError("gro needs an alternative law")
        if self.warmup is None:
            object.__setattr__(self, "warmup", 1 if self.method.empirical else 0)
        elif self.warmup < 0:
            raise ValueError("warmup must be nonnegative")

    @classmethod
    def fixed(cls, lam: float, **kw) -> "BettingStrategy":
        return cls(Method.FIXED, lam=lam, **kw)

    def law_at(self, t: int) -> Law:
        alt = self.alternative
        return alt if isinstance(alt, (FiniteLaw, QuantileLaw)) else alt(t)


class Proposal(NamedTuple):
    lam: float
    lam_gree: float
    lam_grel: float


class BettingState:
    """Streaming state of one betting rule over one record stream.

    Call :meth:`propose` with the forecasts for day ``t`` before the loss is
    known, then :meth:`observe` once it is realized.  Days up to ``n_train``
    only build history and always bet nothing.
    """

    def __init__(self, strategy: BettingStrategy, estat: EStatistic, n_train: int = 0):
        self.strategy = strategy
        self.estat = estat
        self.n_train = n_train
        maxlen = strategy.window
        self.history_e: deque[float] = deque(maxlen=maxlen)
        self.history_loss: deque[float] = deque(maxlen=maxlen)
        self.t = 0
        self.gree_log_wealth = 0.0
        self.grel_log_wealth = 0.0
        self.last: Proposal | None = None

    def _empirical(self, use_loss: bool, r, z) -> float:
        s = self.strategy
        if not use_loss:
            hist = np.fromiter(self.history_e, float, len(self.history_e))
            if s.method.taylor:
                return taylor_lambda(hist, s.gamma_cap)
            return gree_lambda(hist, s.gamma_cap)
        losses = np.fromiter(self.history_loss, float, len(self.history_loss))
        if s.method.taylor:
            if self.estat.kind is Kind.QUANTILE and self.estat.mixture_h == 1.0:
                return taylor_lambda_var(losses, r, self.estat.p, s.gamma_cap)
            if self.estat.kind is Kind.ES and self.estat.mixture_h == 1.0:
                return taylor_lambda_es(losses, r, z, self.estat.p, s.gamma_cap)
            return taylor_lambda(np.asarray(self.estat(losses, r, z), float), s.gamma_cap)
        return grel_lambda(losses, self.estat, r, z, s.gamma_cap)

    def propose(self, r: float, z: float | None = None) -> Proposal:
        s = self.strategy
        day = self.t + 1
        lam_e = lam_l = 0.0
        if s.method is Method.FIXED:
            lam = 0.0 if day <= self.n_train + s.warmup else s.lam
        elif s.method is Method.GRO:
            lam = 0.0
            if day > self.n_train + s.warmup:
                lam = gro_lambda(s.law_at(day), self.estat, r, z, s.gamma_cap)
        elif day <= max(s.warmup, self.n_train) or self.t == 0:
            lam = 0.0
        else:
            base = s.method.base
            if base in ("gree", "grem"):
                lam_e = self._empirical(False, r, z)
            if base in ("grel", "grem"):
                lam_l = self._empirical(True, r, z)
            if base == "gree":
                lam = lam_e
            elif base == "grel":
                lam = lam_l
            else:
                lam = grem_combine(self.gree_log_wealth, self.grel_log_wealth, lam_e, lam_l).lam
        self.last = Proposal(lam, lam_e, lam_l)
        return self.last

    def observe(self, loss: float, r: float, z: float | None = None) -> float:
        """Record day ``t``'s realized loss; returns its e-value."""
        e = float(self.estat(loss, r, z))
        if self.last is not None and self.strategy.method.base == "grem":
            self.gree_log_wealth = _kernels.log_step(self.gree_log_wealth, self.last.lam_gree, e)
            self.grel_log_wealth = _kernels.log_step(self.grel_log_wealth, self.last.lam_grel, e)
        self.history_e.append(e)
        self.history_loss.append(float(loss))
        self.t += 1
        self.last = None
        return e
