"""Dirichlet mean, sampling, and the expected squared-error loss.

The adjusted MSE is the expectation of ``||y - p||^2`` under
``p ~ Dir(alpha)``, which has the closed form

    sum_i (y_i - alpha_i / S)^2  +  alpha_i (S - alpha_i) / (S^2 (S + 1))

with ``S = sum(alpha)``. The first sum is the error term, the second the
variance term. Training uses this closed form; sampling is only an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import DimensionError, LabelDistribution, ValidationError


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise ValidationError(f"alpha must be a vector of length >= 2, got shape {a.shape}")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValidationError(f"alpha entries must be finite and > 0, got {a}")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def from_evidence(cls, e) -> "DirichletParams":
        return cls(np.asarray(e, dtype=float) + 1.0)

    @property
    def S(self) -> float:
        return float(self.alpha.sum())

    @property
    def c(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    err: float
    var: float


def _alpha(params) -> np.ndarray:
    if isinstance(params, DirichletParams):
        return params.alpha
    return DirichletParams(params).alpha


def _target(y, c: int) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.shape != (c,):
        raise DimensionError(f"target has shape {arr.shape}, expected ({c},)")
    return arr


def dirichlet_mean(params) -> LabelDistribution:
    a = _alpha(params)
    return LabelDistribution(a / a.sum())


def dirichlet_variance(params) -> np.ndarray:
    """Marginal variances ``alpha_i (S - alpha_i) / (S^2 (S + 1))``."""
    a = _alpha(params)
    S = a.sum()
    return a * (S - a) / (S * S * (S + 1.0))


def log_beta(params) -> float:
    """Log of the multivariate Beta function, the Dirichlet normalizer."""
    a = _alpha(params)
    return float(gammaln(a).sum() - gammaln(a.sum()))


def dirichlet_logpdf(p, params) -> float:
    a = _alpha(params)
    p = np.asarray(p, dtype=float)
    return float(np.sum((a - 1.0) * np.log(p)) - log_beta(a))


def dirichlet_sample(params, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` points from ``Dir(alpha)`` as an ``(count, c)`` array.

    Each row is a vector of independent ``Gamma(alpha_i, 1)`` draws divided
    by its sum. Rows whose gamma draws all underflow (only possible for very
    small ``alpha``) are redrawn.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    a = _alpha(params)
    g = rng.standard_gamma(a, size=(count, a.size))
    sums = g.sum(axis=1)
    dead = sums <= 0
    while np.any(dead):
        g[dead] = rng.standard_gamma(a, size=(int(dead.sum()), a.size))
        sums = g.sum(axis=1)
        dead = sums <= 0
    return g / sums[:, None]


def amse_loss(params, target) -> LossBreakdown:
    a = _alpha(params)
    y = _target(target, a.size)
    S = a.sum()
    err = float(np.sum((y - a / S) ** 2))
    var = float(np.sum(a * (S - a)) / (S * S * (S + 1.0)))
    return LossBreakdown(err + var, err, var)


def amse_gradient(params, target) -> np.ndarray:
    """Analytic derivative of :func:`amse_loss` total with respect to alpha."""
    a = _alpha(params)
    y = _target(target, a.size)
    return amse_grad_batch(a[None, :], y[None, :])[0]


def mse_loss(prediction, target) -> float:
    p = np.asarray(prediction, dtype=float)
    y = np.asarray(target, dtype=float)
    if p.shape != y.shape:
        raise DimensionError(f"prediction shape {p.shape} != target shape {y.shape}")
    return float(np.sum((y - p) ** 2))


# Row-wise versions used on the training path. No validation: callers pass
# alpha >= 1 from the network and pre-checked targets.

def amse_loss_batch(alpha: np.ndarray, Y: np.ndarray) -> np.ndarray:
    S = alpha.sum(axis=1, keepdims=True)
    p_hat = alpha / S
    err = np.sum((Y - p_hat) ** 2, axis=1)
    var = np.sum(p_hat * (1.0 - p_hat), axis=1) / (S[:, 0] + 1.0)
    return err + var


def amse_grad_batch(alpha: np.ndarray, Y: np.ndarray) -> np.ndarray:
    S = alpha.sum(axis=1, keepdims=True)
    p_hat = alpha / S
    resid = Y - p_hat
    d_err = (-2.0 / S) * (resid - np.sum(resid * p_hat, axis=1, keepdims=True))
    # var = 1/(S+1) - Q/(S^2 (S+1)) with Q = sum(alpha^2)
    Q = np.sum(alpha * alpha, axis=1, keepdims=True)
    d_var = (-1.0 / (S + 1.0) ** 2
             - 2.0 * alpha / (S * S * (S + 1.0))
             + Q * (3.0 * S + 2.0) / (S ** 3 * (S + 1.0) ** 2))
    return d_err + d_var
