import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cdlearn.core import ConcentrationDistribution, ValidationError
from cdlearn.dirichlet import dirichlet_mean
from cdlearn.recovery import (apparent_expectation, apparent_rows, bound_constant, recover,
                              recover_rows)

evidence = arrays(np.float64, st.integers(2, 12), elements=st.floats(0, 1e4, allow_nan=False))


def test_zero_evidence_is_all_background():
    r = recover(np.zeros(4))
    np.testing.assert_array_equal(r.cd.label_part, np.zeros(4))
    assert r.cd.background == 1.0
    np.testing.assert_allclose(r.apparent.values, 0.25)


def test_two_class_example():
    r = recover([2, 2])
    np.testing.assert_allclose(r.cd.label_part, [1 / 3, 1 / 3])
    assert r.cd.background == pytest.approx(1 / 3)
    np.testing.assert_allclose(r.apparent.values, [0.5, 0.5])
    assert r.evidence_total == 4.0


def test_six_class_example():
    r = recover([6, 0, 0, 0, 0, 0])
    np.testing.assert_allclose(r.cd.label_part, [0.5, 0, 0, 0, 0, 0])
    assert r.cd.background == pytest.approx(0.5)


def test_negative_evidence_rejected():
    with pytest.raises(ValidationError):
        recover([1.0, -0.1])
    with pytest.raises(ValidationError):
        recover_rows([[1.0, -0.1]])


@given(evidence)
def test_round_trip_with_dirichlet_mean(e):
    r = recover(e)
    assert r.cd.label_part.sum() + r.cd.background == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(apparent_expectation(r.cd).values, dirichlet_mean(e + 1).values,
                               atol=1e-12, rtol=0)
    np.testing.assert_allclose(r.apparent.values, apparent_expectation(r.cd).values, atol=1e-12, rtol=0)


@given(evidence.filter(lambda e: e.sum() > 1e-6), st.floats(1.01, 100))
def test_scaling_evidence_lowers_background(e, k):
    assert recover(k * e).cd.background < recover(e).cd.background


def test_background_tends_to_zero():
    e = np.array([1.0, 2.0, 0.5])
    mus = [recover(k * e).cd.background for k in (1, 10, 1e3, 1e6)]
    assert mus == sorted(mus, reverse=True) and mus[-1] < 1e-5


@pytest.mark.parametrize("cd, expected", [
    (ConcentrationDistribution([1 / 3, 1 / 3], 1 / 3), [0.5, 0.5]),
    (ConcentrationDistribution([0.2, 0.8], 0.0), [0.2, 0.8]),
    (ConcentrationDistribution([0, 0, 0], 1.0), [1 / 3] * 3),
])
def test_apparent_expectation(cd, expected):
    np.testing.assert_allclose(apparent_expectation(cd).values, expected, atol=1e-15)


def test_rows_agree_with_scalar():
    E = np.random.default_rng(0).exponential(2.0, (50, 5))
    CD = recover_rows(E)
    for e, row in zip(E, CD):
        np.testing.assert_allclose(row, recover(e).cd.vector, atol=1e-15)
    np.testing.assert_allclose(apparent_rows(CD), (E + 1) / (E.sum(1, keepdims=True) + 5), atol=1e-15)


def test_bound_constant():
    assert bound_constant(1) == 1.125
    assert bound_constant(6) == pytest.approx(1.0059524, abs=1e-6)
    assert bound_constant(10**6) - 1 == pytest.approx(2.5e-13, rel=1e-5)
    vals = [bound_constant(c) for c in range(1, 50)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValidationError):
        bound_constant(0)
