"""Shared test fixtures and minimal oracle stand-ins."""

import numpy as np
import pytest

from lazo.oracles import Oracle


class StaticOracle(Oracle):
    """Stationary oracle wrapping an arbitrary loss function.

    Handy for pinning estimator arithmetic against closed forms; supports
    batched evaluation so the Monte-Carlo checks stay fast.
    """

    def __init__(self, fn, dimension, seed=0, gradient=None, batch_fn=None):
        super().__init__(dimension, seed)
        self._fn = fn
        self._grad = gradient
        self._batch = batch_fn
        self.has_true_gradient = gradient is not None

    def _value(self, x):
        return float(self._fn(x))

    def eval_batch(self, X):
        if self._batch is not None:
            return np.asarray(self._batch(X), dtype=float)
        return np.array([float(self._fn(x)) for x in X])

    def _gradient(self, x):
        return np.asarray(self._grad(x), dtype=float)


def linear_oracle(a, scale=1.0, seed=0):
    """f(x) = scale * (a . x): the sharp-moment reference loss."""
    a = np.asarray(a, dtype=float)
    return StaticOracle(
        lambda x: scale * float(a @ x),
        len(a),
        seed=seed,
        gradient=lambda x: scale * a,
        batch_fn=lambda X: scale * (X @ a),
    )


def constant_oracle(value, dimension, seed=0):
    return StaticOracle(
        lambda x: value,
        dimension,
        seed=seed,
        gradient=lambda x: np.zeros(dimension),
        batch_fn=lambda X: np.full(len(X), float(value)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
