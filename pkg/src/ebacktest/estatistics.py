"""
Backtest e-statistics.

Every function here maps a realized loss ``x`` and reported forecasts to a
nonnegative extended real.  The conventions ``0/0 = 1`` and ``c/0 = +inf`` for
``c > 0`` are applied throughout, and ``eval_es`` returns ``+inf`` whenever the
reported ES lies below the reported VaR.

All evaluators broadcast over numpy arrays and return a float for scalar input.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "BacktestRecord",
    "DomainError",
    "EStatistic",
    "FiniteLaw",
    "Kind",
    "eval_es",
    "eval_expected_loss",
    "eval_mean",
    "eval_quantile",
    "eval_variance",
    "identification_function",
    "mixture_form",
]


class DomainError(ValueError):
    """Arguments outside the domain of an e-statistic."""


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # nonnegative num / nonnegative den with 0/0 = 1 and c/0 = inf
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out = np.where(den == 0, np.where(num == 0, 1.0, np.inf), out)
    return out


def _out(args, value):
    if all(np.ndim(a) == 0 for a in args):
        return float(value)
    return value


def _check_p(p: float) -> None:
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")


def eval_mean(x, r, a=0.0):
    """(x - a) / (r - a) for losses bounded below by ``a``."""
    xa, ra = np.asarray(x, float), np.asarray(r, float)
    if np.any(xa < a) or np.any(ra < a):
        raise DomainError("eval_mean requires x >= a and r >= a")
    return _out((x, r), _ratio(xa - a, ra - a))


def eval_expected_loss(x, r, a, loss: Callable[[np.ndarray], np.ndarray]):
    """(loss(x) - a) / (r - a) where ``loss`` maps into [a, inf)."""
    lx = np.asarray(loss(np.asarray(x, float)), float)
    return _out((x, r), np.asarray(eval_mean(lx, r, a)))


def eval_variance(x, r, z):
    """(x - z)^2 / r, the e-statistic for (variance, mean)."""
    xa, ra, za = (np.asarray(v, float) for v in (x, r, z))
    if np.any(ra < 0):
        raise DomainError("variance forecast must be nonnegative")
    return _out((x, r, z), _ratio((xa - za) ** 2, ra))


def eval_quantile(x, r, p):
    """1{x > r} / (1 - p), the e-statistic for VaR_p."""
    _check_p(p)
    xa, ra = np.asarray(x, float), np.asarray(r, float)
    return _out((x, r), (xa > ra) / (1.0 - p))


def eval_es(x, r, z, p):
    """(x - z)_+ / ((1 - p)(r - z)), the e-statistic for (ES_p, VaR_p).

    ``r < z`` maps to ``+inf``.  A VaR report of ``+inf`` (with ``r = +inf``)
    is treated as the limit of ever larger reports and gives 0.
    """
    _check_p(p)
    xa, ra, za = (np.asarray(v, float) for v in (x, r, z))
    with np.errstate(invalid="ignore"):
        num = np.where(np.isposinf(za), 0.0, np.maximum(xa - za, 0.0))
        den = np.where(np.isposinf(za), np.inf, (1.0 - p) * (ra - za))
    out = _ratio(num, den)
    out = np.where(np.isposinf(za), 0.0, out)
    out = np.where(ra < za, np.inf, out)
    return _out((x, r, z), out)


def mixture_form(base_e, h, k=0.0, x=None, z=None, p=None):
    """1 - h + h * base_e, optionally plus k * (p - 1{x <= z}) / (1 - p).

    This is the dominating form of the one-sided e-statistics for the mean,
    (variance, mean), VaR and (ES, VaR).  The ``k`` term needs ``x``, ``z`` and
    ``p`` and requires ``h + k <= 1``.
    """
    ha = np.asarray(h, float)
    if np.any(ha < 0) or np.any(ha > 1):
        raise DomainError(f"mixture weight h must lie in [0, 1], got {h}")
    be = np.asarray(base_e, float)
    with np.errstate(invalid="ignore"):
        out = np.where(ha == 0, 1.0, 1.0 - ha + ha * be)
    if np.any(np.asarray(k) != 0):
        ka = np.asarray(k, float)
        if np.any(ka < 0) or np.any(ha + ka > 1):
            raise DomainError("mixture weights need k >= 0 and h + k <= 1")
        if x is None or z is None or p is None:
            raise DomainError("the k term needs x, z and p")
        _check_p(p)
        out = out + ka * (p - (np.asarray(x, float) <= np.asarray(z, float))) / (1.0 - p)
    return _out((base_e, h), out)


def identification_function(base_e):
    """1 - e; the primary coordinate of the induced identification function."""
    be = np.asarray(base_e, float)
    return _out((base_e,), 1.0 - be)


class Kind(str, enum.Enum):
    MEAN = "mean"
    EXPECTED_LOSS = "expected-loss"
    VARIANCE = "variance"
    QUANTILE = "var"
    ES = "es"


Weight = Union[float, Callable[[float, float], float]]


@dataclass(frozen=True)
class EStatistic:
    """A configured backtest e-statistic.

    ``mixture_h`` and ``mixture_k`` give the characterization form
    ``1 - h + h e + k (p - 1{x <= z}) / (1 - p)``; the defaults (h=1, k=0)
    return the raw statistic.  ``h`` may be a function of ``(r, z)`` except for
    the monotone quantile statistic, where only constants are allowed.
    """

    kind: Kind
    p: float | None = None
    a: float = 0.0
    loss: Callable[[np.ndarray], np.ndarray] | None = None
    mixture_h: Weight = 1.0
    mixture_k: float = 0.0
    monotone: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.QUANTILE, Kind.ES):
            if self.p is None:
                raise DomainError(f"{self.kind.value} e-statistic needs a level p")
            _check_p(self.p)
        if self.kind is Kind.EXPECTED_LOSS and self.loss is None:
            raise DomainError("expected-loss e-statistic needs a loss transform")
        if callable(self.mixture_h):
            if self.kind is Kind.QUANTILE and self.monotone:
                raise DomainError("the monotone VaR e-statistic only admits a constant h")
        elif not 0 <= self.mixture_h <= 1:
            raise DomainError(f"mixture_h must lie in [0, 1], got {self.mixture_h}")
        if self.mixture_k:
            if self.kind not in (Kind.QUANTILE, Kind.ES):
                raise DomainError("mixture_k only applies to the VaR and ES statistics")
            if not 0 <= self.mixture_k <= 1:
                raise DomainError("mixture_k must lie in [0, 1]")
            if not callable(self.mixture_h) and self.mixture_h + self.mixture_k > 1:
                raise DomainError("need h + k <= 1")

    @classmethod
    def var(cls, p: float, **kw) -> "EStatistic":
        return cls(Kind.QUANTILE, p=p, **kw)

    @classmethod
    def es(cls, p: float, **kw) -> "EStatistic":
        return cls(Kind.ES, p=p, **kw)

    @property
    def needs_aux(self) -> bool:
        return self.kind in (Kind.VARIANCE, Kind.ES)

    def base(self, x, r, z=None):
        """The raw statistic without the mixture weights."""
        if self.kind is Kind.MEAN:
            return eval_mean(x, r, self.a)
        if self.kind is Kind.EXPECTED_LOSS:
            return eval_expected_loss(x, r, self.a, self.loss)
        if self.kind is Kind.VARIANCE:
            return eval_variance(x, r, z)
        if self.kind is Kind.QUANTILE:
            return eval_quantile(x, r, self.p)
        return eval_es(x, r, z, self.p)

    def __call__(self, x, r, z=None):
        raw = self.base(x, r, z)
        h = self.mixture_h
        if h == 1.0 and not self.mixture_k:
            return raw
        if callable(h):
            h = np.vectorize(h, otypes=[float])(r, z if z is not None else np.nan)
        if not self.mixture_k:
            return mixture_form(raw, h)
        z_ = r if self.kind is Kind.QUANTILE else z
        return mixture_form(raw, h, self.mixture_k, x=x, z=z_, p=self.p)


@dataclass(frozen=True)
class BacktestRecord:
    """One day of a backtest: realized loss and the forecasts reported for it."""

    t: int
    loss: float
    r: float
    z: float | None = None

    @property
    def inverted(self) -> bool:
        """True when the ES report sits below the VaR report (e-value +inf)."""
        return self.z is not None and self.r < self.z


@dataclass(frozen=True)
class FiniteLaw:
    """A distribution with finitely many atoms."""

    values: np.ndarray
    probs: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, float).ravel()
        pr = np.full(v.size, 1.0 / v.size) if self.probs is None else np.asarray(self.probs, float).ravel()
        if v.size == 0 or v.size != pr.size:
            raise DomainError("values and probs must be nonempty and of equal length")
        if np.any(pr < 0) or not np.isclose(pr.sum(), 1.0, atol=1e-12):
            raise DomainError("probs must be a probability vector")
        order = np.argsort(v, kind="stable")
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "probs", pr[order])

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def expect(self, fn) -> float:
        vals = np.asarray(fn(self.values), float)
        keep = self.probs > 0
        return float(vals[keep] @ self.probs[keep])

    def var(self, p: float) -> float:
        """Lower p-quantile, inf{x : F(x) >= p}."""
        _check_p(p)
        cum = np.cumsum(self.probs)
        idx = int(np.searchsorted(cum, p - 1e-15, side="left"))
        return float(self.values[min(idx, self.values.size - 1)])

    def es(self, p: float) -> float:
        """(1/(1-p)) * integral_p^1 VaR_u du, computed atom by atom."""
        _check_p(p)
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        cum[-1] = 1.0
        lo = np.maximum(cum[:-1], p)
        mass = np.clip(cum[1:] - lo, 0.0, None)
        return float(mass @ self.values / (1.0 - p))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.choice(self.values, size=size, p=self.probs)
