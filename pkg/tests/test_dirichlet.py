import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdlearn.core import DimensionError, ValidationError
from cdlearn.dirichlet import (DirichletParams, amse_grad_batch, amse_gradient, amse_loss,
                               amse_loss_batch, dirichlet_logpdf, dirichlet_mean,
                               dirichlet_sample, dirichlet_variance, log_beta, mse_loss)


def mc_expected_sq_error(alpha, y, rng, count=10**6):
    """Monte-Carlo estimate of E ||y - p||^2 for p ~ Dir(alpha)."""
    P = dirichlet_sample(DirichletParams(alpha), rng, count)
    return float(np.mean(np.sum((P - y) ** 2, axis=1)))


def fd_gradient(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (2 * h)
    return g


@pytest.mark.parametrize("alpha, expected", [
    ([1, 1], [0.5, 0.5]),
    ([2, 1, 1], [0.5, 0.25, 0.25]),
    ([1, 1, 1, 1], [0.25] * 4),
])
def test_dirichlet_mean(alpha, expected):
    np.testing.assert_allclose(dirichlet_mean(DirichletParams(alpha)).values, expected)


def test_params_validation():
    with pytest.raises(ValidationError):
        DirichletParams([1.0, 0.0])
    p = DirichletParams.from_evidence([0, 2])
    assert p.S == 4.0 and p.c == 2


@pytest.mark.parametrize("alpha", [[5, 5], [10, 1]])
def test_sample_mean_within_three_standard_errors(alpha):
    rng = np.random.default_rng(7)
    count = 10**6
    P = dirichlet_sample(DirichletParams(alpha), rng, count)
    assert P.shape == (count, 2)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    se = np.sqrt(dirichlet_variance(alpha) / count)
    mean = dirichlet_mean(alpha).values
    assert np.all(np.abs(P.mean(axis=0) - mean) <= 3 * se)


def test_single_flat_sample_is_inside_simplex():
    p = dirichlet_sample(DirichletParams([1, 1]), np.random.default_rng(0), 1)[0]
    assert np.all(p > 0) and np.all(p < 1) and p.sum() == pytest.approx(1.0)


def test_small_alpha_sampling():
    P = dirichlet_sample(DirichletParams([0.3, 0.5, 0.2]), np.random.default_rng(3), 200_000)
    assert np.all(np.isfinite(P))
    np.testing.assert_allclose(P.mean(axis=0), [0.3, 0.5, 0.2], atol=5e-3)


@pytest.mark.parametrize("alpha, y, total, err, var", [
    ([1, 1], [1, 0], 2 / 3, 0.5, 1 / 6),
    ([1, 1], [0.5, 0.5], 1 / 6, 0.0, 1 / 6),
    ([2, 1, 1], [0.5, 0.25, 0.25], 0.125, 0.0, 0.125),
])
def test_amse_examples(alpha, y, total, err, var):
    out = amse_loss(DirichletParams(alpha), y)
    assert out.total == pytest.approx(total, abs=1e-12)
    assert out.err == pytest.approx(err, abs=1e-12)
    assert out.var == pytest.approx(var, abs=1e-12)


@pytest.mark.parametrize("alpha, y", [([1, 1], [1, 0]), ([2, 1, 1], [0.5, 0.25, 0.25]),
                                      ([0.4, 3.0, 7.5], [0.1, 0.6, 0.3])])
def test_amse_matches_monte_carlo(alpha, y):
    mc = mc_expected_sq_error(alpha, np.array(y), np.random.default_rng(11))
    assert amse_loss(alpha, y).total == pytest.approx(mc, rel=1e-2)


def test_amse_matches_quadrature_on_two_simplex():
    # for c = 2, p1 ~ Beta(a1, a2); integrate the density directly
    from scipy import integrate
    alpha, y = np.array([2.5, 1.5]), np.array([0.3, 0.7])

    def integrand(p1):
        p = np.array([p1, 1 - p1])
        return np.sum((y - p) ** 2) * np.exp(dirichlet_logpdf(p, alpha))

    val, _ = integrate.quad(integrand, 0, 1)
    assert amse_loss(alpha, y).total == pytest.approx(val, rel=1e-9)


def test_log_beta_flat():
    # B(1,1,1) = Gamma(1)^3 / Gamma(3) = 1/2
    assert log_beta([1, 1, 1]) == pytest.approx(np.log(0.5))


def test_amse_dimension_mismatch():
    with pytest.raises(DimensionError):
        amse_loss([1, 1], [0.2, 0.3, 0.5])
    with pytest.raises(DimensionError):
        amse_gradient([1, 1], [0.2, 0.3, 0.5])


@given(st.integers(2, 8), st.integers(0, 2**31 - 1))
def test_decomposition_exact(c, seed):
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.05, 30, c)
    y = rng.dirichlet(np.ones(c))
    out = amse_loss(alpha, y)
    assert out.total == pytest.approx(out.err + out.var, abs=1e-12)
    assert out.err >= 0 and out.var >= 0


def test_variance_vanishes_when_scaling_alpha():
    base = np.array([2.0, 1.0, 1.0])
    y = base / base.sum()
    vars_ = []
    for k in (1, 10, 100, 1000):
        out = amse_loss(k * base, y)
        assert out.err == pytest.approx(0.0, abs=1e-15)
        vars_.append(out.var)
    assert all(a > b for a, b in zip(vars_, vars_[1:]))
    assert vars_[-1] < 1e-3


def test_gradient_example():
    np.testing.assert_allclose(amse_gradient([1, 1], [1, 0]), [-5 / 9, 4 / 9], atol=1e-12)
    g = amse_gradient([3.7, 3.7], [0.5, 0.5])
    assert g[0] == pytest.approx(g[1], abs=1e-15)


@settings(max_examples=60)
@given(st.integers(2, 10), st.integers(0, 2**31 - 1))
def test_gradient_matches_finite_differences(c, seed):
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.5, 20, c)
    y = rng.dirichlet(np.ones(c))
    fd = fd_gradient(lambda a: amse_loss(a, y).total, alpha)
    g = amse_gradient(alpha, y)
    assert np.all(np.abs(g - fd) <= 1e-4 * np.maximum(np.abs(fd), np.abs(g)) + 1e-8)


def test_batch_versions_agree_with_scalar():
    rng = np.random.default_rng(5)
    A = rng.uniform(1, 10, (20, 4))
    Y = rng.dirichlet(np.ones(4), 20)
    np.testing.assert_allclose(amse_loss_batch(A, Y), [amse_loss(a, y).total for a, y in zip(A, Y)],
                               rtol=1e-13)
    np.testing.assert_allclose(amse_grad_batch(A, Y), [amse_gradient(a, y) for a, y in zip(A, Y)],
                               rtol=1e-13)


@pytest.mark.parametrize("p, y, expected", [
    ([0.3, 0.7], [0.3, 0.7], 0.0),
    ([0.5, 0.5], [1, 0], 0.5),
    ([0.5, 0.5], [0.2, 0.8], 0.18),
])
def test_mse_loss(p, y, expected):
    assert mse_loss(p, y) == pytest.approx(expected, abs=1e-15)
