"""
Standardized innovation distributions used for simulation and forecasting.

Three families are supported, each rescaled to mean 0 and variance 1:

* ``normal``
* ``t`` -- Student-t with ``shape`` degrees of freedom
* ``skewed-t`` -- the Fernandez-Steel skewed Student-t (the ``sstd`` construction
  of fGarch/rugarch), with ``skewness`` > 1 putting more mass in the right tail

Quantiles are obtained by root finding on the distribution function and the
Expected Shortfall by integrating the upper quantile function, so every family
goes through the same numerical path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.random import Generator
from scipy import special

__all__ = [
    "Family",
    "InnovationSpec",
    "ParameterError",
    "cdf",
    "expected_shortfall",
    "pdf",
    "quantile",
    "sample",
]

QUANTILE_TOL = 1e-10
ES_RTOL = 1e-8

# Gauss-Legendre rule on [0, 1] for the adaptive ES integration.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
# u = 1 - (1 - p) * s**_TAIL_POWER flattens the quantile singularity at u = 1.
_TAIL_POWER = 4


class ParameterError(ValueError):
    """Invalid distribution parameters or arguments outside the domain."""


class Family(str, enum.Enum):
    NORMAL = "normal"
    STUDENT_T = "t"
    SKEWED_T = "skewed-t"


@dataclass(frozen=True)
class InnovationSpec:
    """A standardized (mean 0, variance 1) innovation law.

    ``shape`` is the degrees of freedom for ``t`` and ``skewed-t``; ``skewness``
    is the Fernandez-Steel asymmetry parameter (1 = symmetric).
    """

    family: Family = Family.NORMAL
    shape: float | None = None
    skewness: float | None = None

    def __post_init__(self) -> None:
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if family is Family.NORMAL:
            if self.shape is not None or self.skewness is not None:
                raise ParameterError("normal innovations take no shape or skewness")
            return
        if self.shape is None or not self.shape > 2:
            raise ParameterError(
                f"shape must be > 2 for a variance-standardized {family.value}, got {self.shape}"
            )
        if family is Family.STUDENT_T:
            if self.skewness is not None:
                raise ParameterError("Student-t innovations take no skewness")
        else:
            if self.skewness is None:
                object.__setattr__(self, "skewness", 1.0)
            elif not self.skewness > 0:
                raise ParameterError(f"skewness must be positive, got {self.skewness}")
        object.__setattr__(self, "shape", float(self.shape))
        if self.skewness is not None:
            object.__setattr__(self, "skewness", float(self.skewness))

    @classmethod
    def normal(cls) -> "InnovationSpec":
        return cls(Family.NORMAL)

    @classmethod
    def student_t(cls, shape: float) -> "InnovationSpec":
        return cls(Family.STUDENT_T, shape=shape)

    @classmethod
    def skewed_t(cls, shape: float, skewness: float) -> "InnovationSpec":
        return cls(Family.SKEWED_T, shape=shape, skewness=skewness)

    # The methods below are thin conveniences over the module functions.
    def pdf(self, x):
        return pdf(self, x)

    def logpdf(self, x):
        return logpdf(self, x)

    def cdf(self, x):
        return cdf(self, x)

    def sf(self, x):
        return sf(self, x)

    def quantile(self, p):
        return quantile(self, p)

    def expected_shortfall(self, p):
        return expected_shortfall(self, p)

    def sample(self, seed, n: int) -> np.ndarray:
        return sample(self, seed, n)


def _t_scale(nu: float) -> float:
    # standardized t: Z = T / s with T ~ t_nu
    return math.sqrt(nu / (nu - 2.0))


def _skew_constants(nu: float, xi: float) -> tuple[float, float, float]:
    """Mean shift, scale and mixing constant of the Fernandez-Steel skewed-t."""
    m1 = 2.0 * math.sqrt(nu - 2.0) / (nu - 1.0) / special.beta(0.5, nu / 2.0)
    mu = m1 * (xi - 1.0 / xi)
    sigma = math.sqrt((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0)
    g = 2.0 / (xi + 1.0 / xi)
    return mu, sigma, g


def _std_t_cdf(nu: float, x):
    return special.stdtr(nu, x * _t_scale(nu))


def _std_t_logpdf(nu: float, x):
    s = _t_scale(nu)
    return (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * np.log(np.pi * (nu - 2.0))
        - (nu + 1.0) / 2.0 * np.log1p((x * s) ** 2 / nu)
    )


def _wrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def logpdf(spec: InnovationSpec, x):
    xa = np.asarray(x, dtype=float)
    if spec.family is Family.NORMAL:
        out = -0.5 * xa * xa - 0.5 * math.log(2.0 * math.pi)
    elif spec.family is Family.STUDENT_T:
        out = _std_t_logpdf(spec.shape, xa)
    else:
        nu, xi = spec.shape, spec.skewness
        mu, sigma, g = _skew_constants(nu, xi)
        z = xa * sigma + mu
        scale = np.where(z >= 0, xi, 1.0 / xi)
        out = math.log(g) + math.log(sigma) + _std_t_logpdf(nu, z / scale)
    return _wrap(x, out)


def pdf(spec: InnovationSpec, x):
    """Density of the standardized innovation at ``x``."""
    out = np.exp(logpdf(spec, x))
    return _wrap(x, out)


def cdf(spec: InnovationSpec, x):
    """Distribution function; nondecreasing with limits 0 and 1."""
    xa = np.asarray(x, dtype=float)
    if spec.family is Family.NORMAL:
        out = special.ndtr(xa)
    elif spec.family is Family.STUDENT_T:
        out = _std_t_cdf(spec.shape, xa)
    else:
        nu, xi = spec.shape, spec.skewness
        mu, sigma, g = _skew_constants(nu, xi)
        z = xa * sigma + mu
        left = g / xi * _std_t_cdf(nu, xi * np.minimum(z, 0.0))
        right = 1.0 - g * xi * _std_t_cdf(nu, -np.maximum(z, 0.0) / xi)
        out = np.where(z < 0, left, right)
    return _wrap(x, out)


def sf(spec: InnovationSpec, x):
    """Survival function ``1 - cdf``, accurate in the right tail."""
    xa = np.asarray(x, dtype=float)
    if spec.family is Family.NORMAL:
        out = special.ndtr(-xa)
    elif spec.family is Family.STUDENT_T:
        out = _std_t_cdf(spec.shape, -xa)
    else:
        nu, xi = spec.shape, spec.skewness
        mu, sigma, g = _skew_constants(nu, xi)
        z = xa * sigma + mu
        left = 1.0 - g / xi * _std_t_cdf(nu, xi * np.minimum(z, 0.0))
        right = g * xi * _std_t_cdf(nu, -np.maximum(z, 0.0) / xi)
        out = np.where(z < 0, left, right)
    return _wrap(x, out)


def _invert(func, target: np.ndarray, increasing: bool) -> np.ndarray:
    """Solve ``func(x) = target`` elementwise by bracketing and bisection."""
    target = np.asarray(target, dtype=float)
    lo = np.full(target.shape, -1.0)
    hi = np.full(target.shape, 1.0)
    sign = 1.0 if increasing else -1.0
    for _ in range(2000):
        bad = sign * (func(lo) - target) > 0
        if not bad.any():
            break
        lo = np.where(bad, lo * 2.0, lo)
    for _ in range(2000):
        bad = sign * (func(hi) - target) < 0
        if not bad.any():
            break
        hi = np.where(bad, hi * 2.0, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = sign * (func(mid) - target) >= 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        width = hi - lo
        if np.all(width <= 0.1 * QUANTILE_TOL * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def _upper_quantile(spec: InnovationSpec, w) -> np.ndarray:
    """Quantile at level ``1 - w``, solved on the survival function."""
    return _invert(lambda x: sf(spec, x), np.asarray(w, dtype=float), increasing=False)


def _check_prob(p) -> np.ndarray:
    pa = np.asarray(p, dtype=float)
    if np.any(~(pa > 0) | ~(pa < 1)):
        raise ParameterError(f"probability level must lie in (0, 1), got {p}")
    return pa


def quantile(spec: InnovationSpec, p):
    """Lower ``p``-quantile (VaR_p) of the standardized law."""
    pa = _check_prob(p)
    if pa.ndim == 0:
        return _quantile_cached(spec, float(pa))
    flat = pa.ravel()
    out = np.empty_like(flat)
    low = flat <= 0.5
    if low.any():
        out[low] = _invert(lambda x: cdf(spec, x), flat[low], increasing=True)
    if (~low).any():
        out[~low] = _upper_quantile(spec, 1.0 - flat[~low])
    return out.reshape(pa.shape)


@lru_cache(maxsize=4096)
def _quantile_cached(spec: InnovationSpec, p: float) -> float:
    if p <= 0.5:
        return float(_invert(lambda x: cdf(spec, x), np.array([p]), increasing=True)[0])
    return float(_upper_quantile(spec, np.array([1.0 - p]))[0])


def expected_shortfall(spec: InnovationSpec, p):
    """ES_p = (1/(1-p)) * integral of the quantile function over (p, 1)."""
    pa = _check_prob(p)
    if pa.ndim == 0:
        return _es_cached(spec, float(pa))
    return np.array([_es_cached(spec, float(v)) for v in pa.ravel()]).reshape(pa.shape)


@lru_cache(maxsize=4096)
def _es_cached(spec: InnovationSpec, p: float) -> float:
    if spec.family is not Family.NORMAL and spec.shape <= 1:
        raise ParameterError("ES requires a finite first moment")
    tail = 1.0 - p
    m = _TAIL_POWER

    def integrand(s: np.ndarray) -> np.ndarray:
        w = tail * s**m
        return _upper_quantile(spec, w) * m * s ** (m - 1)

    return _adaptive_gauss_legendre(integrand, 0.0, 1.0, ES_RTOL)


def _adaptive_gauss_legendre(f, a: float, b: float, rtol: float, max_rounds: int = 40) -> float:
    """Globally adaptive composite Gauss-Legendre quadrature.

    Each round compares the 16-point rule on every interval with the rule on
    its two halves and splits the intervals whose disagreement dominates.
    """
    edges = np.linspace(a, b, 5)
    lo, hi = edges[:-1], edges[1:]
    done_total = 0.0
    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        whole = _gl_batch(f, lo, hi)
        halves = _gl_batch(f, lo, mid) + _gl_batch(f, mid, hi)
        err = np.abs(whole - halves)
        total = done_total + halves.sum()
        budget = rtol * max(abs(total), 1e-300)
        if err.sum() <= budget:
            return float(total)
        # keep splitting intervals whose error exceeds their share of the budget
        share = budget * (hi - lo) / (b - a)
        keep = err > share
        done_total += halves[~keep].sum()
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
    return float(done_total + _gl_batch(f, lo, hi).sum())


def _gl_batch(f, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    width = (hi - lo)[:, None]
    nodes = lo[:, None] + width * _GL_X[None, :]
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return (vals * _GL_W[None, :] * width).sum(axis=1)


def sample(spec: InnovationSpec, seed: int | Generator, n: int) -> np.ndarray:
    """Draw ``n`` iid standardized innovations.

    ``seed`` is either an integer (a fresh PCG64 stream) or a Generator owned
    by the caller.
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    rng = seed if isinstance(seed, Generator) else np.random.default_rng(seed)
    if spec.family is Family.NORMAL:
        return rng.standard_normal(n)
    nu = spec.shape
    if spec.family is Family.STUDENT_T:
        return rng.standard_t(nu, n) / _t_scale(nu)
    xi = spec.skewness
    mu, sigma, _ = _skew_constants(nu, xi)
    weight = xi / (xi + 1.0 / xi)
    u = rng.uniform(-weight, 1.0 - weight, n)
    side = np.sign(u)
    t = np.abs(rng.standard_t(nu, n) / _t_scale(nu))
    x = -t / xi**side * side
    return (x - mu) / sigma


def validate_prob(p) -> float:
    return float(_check_prob(p))
