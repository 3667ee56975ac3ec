"""scikit-learn compatible estimators.

``ConcentrationLearner`` is the evidential model: fit on label
distributions, predict concentration distributions ``[b, mu]``.
``SoftmaxLDLRegressor`` and ``NoiseAppendBaseline`` form the naive
comparison method.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_array, check_is_fitted

from .core import DimensionError, check_distribution_rows
from .data import noise_append_rows
from .metrics import cosine
from .network import NetworkConfig, forward_batch, train
from .recovery import recover_rows


class _MLPBase(BaseEstimator):
    _head = "relu"

    def __init__(self, hidden_dims: Optional[Sequence[int]] = None, hidden_activation: str = "tanh",
                 optimizer: str = "adam", learning_rate: float = 1e-3, epochs: int = 500,
                 batch_size: int = 32, adam_beta1: float = 0.9, adam_beta2: float = 0.999,
                 adam_eps: float = 1e-8, weight_decay: float = 0.0,
                 early_stopping: Optional[int] = None, random_state: int = 0):
        self.hidden_dims = hidden_dims
        self.hidden_activation = hidden_activation
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.weight_decay = weight_decay
        self.early_stopping = early_stopping
        self.random_state = random_state

    def _network_config(self, m: int, c: int) -> NetworkConfig:
        return NetworkConfig(
            input_dim=m, output_dim=c,
            hidden_dims=None if self.hidden_dims is None else tuple(self.hidden_dims),
            hidden_activation=self.hidden_activation, head=self._head,
            seed=int(self.random_state), learning_rate=self.learning_rate,
            epochs=self.epochs, batch_size=self.batch_size, optimizer=self.optimizer,
            adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2, adam_eps=self.adam_eps,
            weight_decay=self.weight_decay, early_stopping=self.early_stopping)

    def fit(self, X, Y):
        """Train on features ``X`` (n, m) and label distributions ``Y`` (n, c)."""
        X = check_array(X, dtype=np.float64)
        Y = check_distribution_rows(check_array(Y, dtype=np.float64), "label")
        if Y.shape[0] != X.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        self.n_features_in_ = X.shape[1]
        self.n_labels_ = Y.shape[1]
        self.model_ = train(X, Y, self._network_config(X.shape[1], Y.shape[1]))
        return self

    def _output(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward_batch(self.model_, X)

    @property
    def history_(self) -> list[tuple[int, float]]:
        check_is_fitted(self, "model_")
        return self.model_.history


class ConcentrationLearner(_MLPBase):
    """Learn concentration distributions from label-distribution targets.

    A feed-forward network emits non-negative evidence ``e``; ``e + 1``
    parameterizes a Dirichlet over label distributions and the network is
    trained on the expected squared error under that Dirichlet. At predict
    time evidence is split into a label part ``e / (sum(e) + c)`` and a
    background ``c / (sum(e) + c)``.

    Parameters
    ----------
    hidden_dims : sequence of int, optional
        Hidden layer widths; defaults to one layer of ``max(64, 4 c)``.
    hidden_activation : {"tanh", "relu"}
    optimizer : {"adam", "sgd"}
    learning_rate, epochs, batch_size : training schedule.
    adam_beta1, adam_beta2, adam_eps : Adam constants.
    weight_decay : float
        L2 coefficient added to weight gradients (biases excluded).
    early_stopping : int, optional
        Patience in epochs on the training loss; off by default.
    random_state : int
        Seed for initialization and shuffling.
    """

    _head = "relu"

    def predict_evidence(self, X) -> np.ndarray:
        return self._output(X)

    def predict_alpha(self, X) -> np.ndarray:
        return self._output(X) + 1.0

    def predict(self, X) -> np.ndarray:
        """Concentration distributions, shape ``(n, c + 1)``; last column is the background."""
        return recover_rows(self._output(X))

    def predict_background(self, X) -> np.ndarray:
        return self.predict(X)[:, -1]

    def predict_label_distribution(self, X) -> np.ndarray:
        """Dirichlet mean ``(e + 1) / (sum(e) + c)``, the apparent label distribution."""
        alpha = self.predict_alpha(X)
        return alpha / alpha.sum(axis=1, keepdims=True)

    def score(self, X, Y) -> float:
        """Mean cosine similarity between predicted and true concentration distributions."""
        Y = check_distribution_rows(check_array(Y, dtype=np.float64), "concentration")
        return float(np.mean(cosine(Y, self.predict(X))))


class SoftmaxLDLRegressor(_MLPBase):
    """The same network with a softmax head trained on squared error."""

    _head = "softmax"

    def predict(self, X) -> np.ndarray:
        return self._output(X)

    def score(self, X, Y) -> float:
        """Mean cosine similarity between predicted and true label distributions."""
        Y = check_array(Y, dtype=np.float64)
        return float(np.mean(cosine(Y, self.predict(X))))


class NoiseAppendBaseline(BaseEstimator):
    """Turn any label-distribution predictor into a concentration predictor.

    The background column is the ground-truth value ``g`` perturbed by
    uniform noise in ``(-noise g, noise g)``, after which the row is
    renormalized. Because ``g`` is needed at predict time, ``predict`` takes
    it as a second argument.
    """

    def __init__(self, estimator=None, noise: float = 0.2, random_state: int = 0):
        self.estimator = estimator
        self.noise = noise
        self.random_state = random_state

    def fit(self, X, Y):
        base = self.estimator if self.estimator is not None else SoftmaxLDLRegressor()
        self.estimator_ = clone(base).fit(X, Y)
        self._rng = np.random.default_rng(self.random_state)
        return self

    def predict(self, X, background) -> np.ndarray:
        check_is_fitted(self, "estimator_")
        P = np.asarray(self.estimator_.predict(X), dtype=float)
        return noise_append_rows(P, np.asarray(background, dtype=float), self._rng, self.noise)
