"""Online predictors for imputing expensive outcomes.

Predictors are measurable functions of past collected data only: drivers
call ``update`` strictly after the step that revealed the outcome.
"""

from __future__ import annotations

import warnings

import numpy as np


def _sigmoid(v: float) -> float:
    if v >= 0:
        return 1.0 / (1.0 + np.exp(-v))
    ev = np.exp(v)
    return ev / (1.0 + ev)


class OnlineLogistic:
    """Stochastic-gradient logistic regression with running standardization.

    Fixed step size; feature means/variances are tracked online from the
    rows passed to ``update``.  Rows with non-finite features are skipped
    with a warning counter.
    """

    def __init__(self, n_features: int, step: float = 0.1):
        self.step = step
        self.weights = np.zeros(n_features)
        self.bias = 0.0
        self.count = 0
        self.feat_mean = np.zeros(n_features)
        self.feat_m2 = np.zeros(n_features)
        self.skipped = 0
        self.updates = 0

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return x
        sd = np.sqrt(self.feat_m2 / self.count)
        return (x - self.feat_mean) / np.where(sd > 1e-12, sd, 1.0)

    def update(self, x, y) -> None:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)) or not np.isfinite(y):
            self.skipped += 1
            warnings.warn("skipping update with non-finite row")
            return
        self.count += 1
        delta = x - self.feat_mean
        self.feat_mean += delta / self.count
        self.feat_m2 += delta * (x - self.feat_mean)
        z = self._standardize(x)
        grad = _sigmoid(float(z @ self.weights + self.bias)) - y
        self.weights -= self.step * grad * z
        self.bias -= self.step * grad
        self.updates += 1

    def predict(self, x) -> float:
        z = self._standardize(np.asarray(x, dtype=float))
        return _sigmoid(float(z @ self.weights + self.bias))

    def predict_dist(self, x):
        p = self.predict(x)
        return [(1.0, p), (0.0, 1.0 - p)]


class EwmaMean:
    """Exponentially weighted mean of collected outcomes; ignores features."""

    def __init__(self, init: float = 0.5, gain: float = 0.2):
        self.value = init
        self.gain = gain

    def update(self, x, y) -> None:
        self.value += self.gain * (float(y) - self.value)

    def predict(self, x) -> float:
        return self.value

    def predict_dist(self, x):
        return [(1.0, self.value), (0.0, 1.0 - self.value)]


class Biased:
    """Wraps a predictor and shifts its point prediction (clipped to [0, 1]).

    Used to exercise the invalid imputation baseline.
    """

    def __init__(self, base, bias: float):
        self.base = base
        self.bias = bias

    def update(self, x, y) -> None:
        self.base.update(x, y)

    def predict(self, x) -> float:
        return float(np.clip(self.base.predict(x) + self.bias, 0.0, 1.0))

    def predict_dist(self, x):
        p = self.predict(x)
        return [(1.0, p), (0.0, 1.0 - p)]


class Constant:
    def __init__(self, value: float):
        self.value = value

    def update(self, x, y) -> None:
        pass

    def predict(self, x) -> float:
        return self.value

    def predict_dist(self, x):
        return [(1.0, self.value), (0.0, 1.0 - self.value)]
