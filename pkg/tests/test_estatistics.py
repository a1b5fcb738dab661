import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebacktest.estatistics import (
    BacktestRecord,
    DomainError,
    EStatistic,
    FiniteLaw,
    eval_es,
    eval_mean,
    eval_quantile,
    eval_variance,
    identification_function,
    mixture_form,
)


def test_mean_values():
    assert eval_mean(2.0, 1.0, 0.0) == 2.0
    assert eval_mean(3.0, 3.0, 1.0) == 1.0
    assert eval_mean(1.0, 1.0, 1.0) == 1.0  # 0/0
    assert eval_mean(2.0, 1.0, 1.0) == math.inf
    with pytest.raises(DomainError):
        eval_mean(-1.0, 1.0, 0.0)


def test_variance_values():
    assert eval_variance(3.0, 2.0, 1.0) == 2.0
    assert eval_variance(1.0, 2.0, 1.0) == 0.0
    assert eval_variance(1.0, 0.0, 1.0) == 1.0
    with pytest.raises(DomainError):
        eval_variance(0.0, -1.0, 0.0)


def test_quantile_values():
    assert eval_quantile(2.0, 1.0, 0.99) == pytest.approx(100.0)
    assert eval_quantile(1.0, 1.0, 0.99) == 0.0
    np.testing.assert_allclose(eval_quantile([0.0, 5.0], [1.0, 1.0], 0.9), [0.0, 10.0])


def test_es_values():
    # (x - z)_+ / ((1 - p)(r - z))
    assert eval_es(3.0, 2.0, 1.0, 0.9) == pytest.approx(20.0)
    assert eval_es(0.5, 2.0, 1.0, 0.9) == 0.0
    assert eval_es(1.0, 1.0, 1.0, 0.9) == 1.0  # 0/0
    assert eval_es(2.0, 1.0, 1.0, 0.9) == math.inf
    assert eval_es(0.0, 0.5, 1.0, 0.9) == math.inf  # r < z
    assert eval_es(5.0, math.inf, math.inf, 0.975) == 0.0


def test_scalar_in_scalar_out():
    assert isinstance(eval_es(1.0, 2.0, 1.0, 0.9), float)
    assert isinstance(eval_es(np.array([1.0]), 2.0, 1.0, 0.9), np.ndarray)


def _brute_es(law, r, z, p):
    return sum(q * max(v - z, 0) for v, q in zip(law.values, law.probs)) / ((1 - p) * (r - z))


laws = st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=8).map(
    lambda v: FiniteLaw(np.array(v)))


@settings(max_examples=150, deadline=None)
@given(law=laws, p=st.sampled_from([0.8, 0.9, 0.95, 0.975]), bump=st.floats(0.0, 3.0))
def test_es_is_e_variable_when_not_underestimated(law, p, bump):
    z = law.var(p)
    r = law.es(p) + bump
    if r <= z:
        r = z + 1e-9 + bump
    mean_e = law.expect(lambda x: eval_es(x, r, z, p))
    assert mean_e == pytest.approx(_brute_es(law, r, z, p), rel=1e-9, abs=1e-12)
    assert mean_e <= 1 + 1e-9


@settings(max_examples=150, deadline=None)
@given(law=laws, p=st.sampled_from([0.8, 0.9, 0.95]), bump=st.floats(0.0, 3.0))
def test_var_is_e_variable_when_not_underestimated(law, p, bump):
    r = law.var(p) + bump
    assert law.expect(lambda x: eval_quantile(x, r, p)) <= 1 + 1e-12


def test_underestimation_gives_mean_above_one():
    law = FiniteLaw(np.linspace(0, 10, 101))
    p = 0.9
    assert law.expect(lambda x: eval_quantile(x, law.var(p) - 0.5, p)) > 1
    z = law.var(p)
    assert law.expect(lambda x: eval_es(x, law.es(p) * 0.9, z, p)) > 1


def test_finite_law_risk_measures():
    law = FiniteLaw(np.array([0.0, 1.0, 2.0, 3.0]))
    assert law.var(0.5) == 1.0
    assert law.var(0.76) == 3.0
    assert law.es(0.5) == pytest.approx(2.5)
    # es splits an atom: top 30% = 0.25 at 3 and 0.05 at 2
    assert law.es(0.7) == pytest.approx((0.25 * 3 + 0.05 * 2) / 0.3)
    with pytest.raises(DomainError):
        FiniteLaw(np.array([1.0, 2.0]), np.array([0.5, 0.6]))


def test_mixture_form():
    assert mixture_form(3.0, 0.5) == pytest.approx(2.0)
    assert mixture_form(math.inf, 0.0) == 1.0
    # k term: p - 1{x <= z} over 1 - p
    assert mixture_form(0.0, 0.2, 0.3, x=0.0, z=1.0, p=0.9) == pytest.approx(0.8 + 0.3 * (0.9 - 1) / 0.1)
    with pytest.raises(DomainError):
        mixture_form(1.0, 0.7, 0.5, x=0.0, z=1.0, p=0.9)
    with pytest.raises(DomainError):
        mixture_form(1.0, 1.5)


@settings(max_examples=100, deadline=None)
@given(law=laws, h=st.floats(0, 1), k=st.floats(0, 1))
def test_mixture_keeps_e_property(law, h, k):
    if h + k > 1:
        h, k = h / (h + k), k / (h + k)
    p = 0.9
    z = law.var(p)
    r = max(law.es(p), z + 1e-6)
    e = EStatistic.es(p, mixture_h=h, mixture_k=k)
    assert law.expect(lambda x: e(x, r, z)) <= 1 + 1e-9


def test_identification_function():
    np.testing.assert_allclose(identification_function(np.array([0.0, 1.0, 3.0])), [1.0, 0.0, -2.0])


def test_estatistic_validation():
    with pytest.raises(DomainError):
        EStatistic.var(1.2)
    with pytest.raises(DomainError):
        EStatistic.es(0.9, mixture_h=0.8, mixture_k=0.3)
    with pytest.raises(DomainError):
        EStatistic.var(0.9, mixture_h=lambda r, z: 0.5)
    with pytest.raises(DomainError):
        EStatistic("expected-loss")
    assert EStatistic.es(0.9).needs_aux and not EStatistic.var(0.9).needs_aux


def test_callable_weight():
    e = EStatistic.es(0.9, mixture_h=lambda r, z: 0.5)
    assert e(3.0, 2.0, 1.0) == pytest.approx(1 - 0.5 + 0.5 * 20.0)


def test_record_inverted_flag():
    assert BacktestRecord(1, 0.0, r=1.0, z=2.0).inverted
    assert not BacktestRecord(1, 0.0, r=2.0, z=1.0).inverted
    assert not BacktestRecord(1, 0.0, r=2.0).inverted
