import math

import numpy as np
import pytest
from scipy import integrate, stats

from ebacktest.distributions import (
    Family,
    InnovationSpec,
    ParameterError,
    cdf,
    expected_shortfall,
    pdf,
    quantile,
    sample,
    sf,
)

SPECS = [
    InnovationSpec.normal(),
    InnovationSpec.student_t(5.0),
    InnovationSpec.skewed_t(5.0, 1.5),
    InnovationSpec.skewed_t(5.0, 0.95),
    InnovationSpec.skewed_t(8.0, 0.7),
]


def _moment(spec, k):
    val, _ = integrate.quad(lambda x: x**k * pdf(spec, x), -np.inf, np.inf, limit=200)
    return val


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family.value}-{s.shape}-{s.skewness}")
def test_standardized(spec):
    assert integrate.quad(lambda x: pdf(spec, x), -np.inf, np.inf)[0] == pytest.approx(1.0, abs=1e-8)
    assert _moment(spec, 1) == pytest.approx(0.0, abs=1e-8)
    assert _moment(spec, 2) == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family.value}-{s.shape}-{s.skewness}")
def test_quantile_inverts_cdf(spec):
    p = np.array([1e-6, 0.01, 0.3, 0.5, 0.875, 0.975, 0.99, 1 - 1e-9])
    q = quantile(spec, p)
    assert np.all(np.diff(q) > 0)
    np.testing.assert_allclose(cdf(spec, q[:-1]), p[:-1], rtol=1e-9, atol=1e-12)
    assert sf(spec, q[-1]) == pytest.approx(1e-9, rel=1e-6)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family.value}-{s.shape}-{s.skewness}")
@pytest.mark.parametrize("p", [0.875, 0.95, 0.975, 0.99])
def test_es_matches_tail_integral(spec, p):
    # oracle: integrate x f(x) over the upper tail
    q = quantile(spec, p)
    tail, _ = integrate.quad(lambda x: x * pdf(spec, x), q, np.inf, limit=200, epsabs=1e-13)
    assert expected_shortfall(spec, p) == pytest.approx(tail / (1 - p), rel=1e-7)


def test_normal_closed_forms():
    spec = InnovationSpec.normal()
    for p in (0.9, 0.975, 0.99):
        q = stats.norm.ppf(p)
        assert quantile(spec, p) == pytest.approx(q, rel=1e-10)
        assert expected_shortfall(spec, p) == pytest.approx(stats.norm.pdf(q) / (1 - p), rel=1e-9)


def test_student_t_matches_scipy():
    nu = 5.0
    spec = InnovationSpec.student_t(nu)
    s = math.sqrt(nu / (nu - 2))
    x = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(cdf(spec, x), stats.t.cdf(x * s, nu), rtol=1e-12)
    assert quantile(spec, 0.99) == pytest.approx(stats.t.ppf(0.99, nu) / s, rel=1e-9)


def test_skewed_t_unit_skewness_is_student_t():
    a = InnovationSpec.skewed_t(6.0, 1.0)
    b = InnovationSpec.student_t(6.0)
    x = np.linspace(-5, 5, 21)
    np.testing.assert_allclose(pdf(a, x), pdf(b, x), rtol=1e-12)


def test_skewness_mirror():
    # X with skewness xi and -X with skewness 1/xi share a law
    a = InnovationSpec.skewed_t(5.0, 1.5)
    b = InnovationSpec.skewed_t(5.0, 1 / 1.5)
    x = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(pdf(a, x), pdf(b, -x), rtol=1e-12)


def test_right_skew_heavier_upper_tail():
    spec = InnovationSpec.skewed_t(5.0, 1.5)
    assert quantile(spec, 0.99) > -quantile(spec, 0.01)


@pytest.mark.parametrize("spec", SPECS[1:3], ids=["t", "skewed-t"])
def test_sample_moments_and_tail(spec):
    x = sample(spec, 42, 400_000)
    assert x.mean() == pytest.approx(0.0, abs=0.01)
    assert x.var() == pytest.approx(1.0, abs=0.05)
    q = quantile(spec, 0.95)
    assert np.mean(x > q) == pytest.approx(0.05, abs=0.002)


def test_sample_reproducible():
    spec = InnovationSpec.skewed_t(5.0, 1.5)
    np.testing.assert_array_equal(sample(spec, 7, 100), sample(spec, 7, 100))
    rng = np.random.default_rng(7)
    assert sample(spec, rng, 5).shape == (5,)


@pytest.mark.parametrize("kw", [
    dict(family=Family.STUDENT_T, shape=2.0),
    dict(family=Family.SKEWED_T, shape=5.0, skewness=0.0),
    dict(family=Family.NORMAL, shape=3.0),
])
def test_invalid_parameters(kw):
    with pytest.raises(ParameterError):
        InnovationSpec(**kw)


def test_probability_domain():
    with pytest.raises(ParameterError):
        quantile(InnovationSpec.normal(), 1.0)
    with pytest.raises(ParameterError):
        expected_shortfall(InnovationSpec.normal(), 0.0)
