"""Synthetic data streams, poisoning schedules, and CSV ingestion.

Desk-scale synthetic substitutes stand in for large public tabular
datasets; CSV ingestion lets users supply real ones.  Normalized time
``t = i/n`` parameterizes the poisoning schedules.
"""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass

import numpy as np

from .rng import RngState, normals, substream, uniforms


def flip_prob_risk(t):
    """Label-flip probability for the drifting risk stream: clamp((t/0.5)^2)."""
    return np.clip((np.asarray(t, dtype=float) / 0.5) ** 2, 0.0, 1.0)


def flip_prob_changepoint(t):
    """Flip probability with a crisp onset: 1[t>=0.3] * clamp(((t+1)/5 + 0.2)^2)."""
    t = np.asarray(t, dtype=float)
    return np.where(t >= 0.3, np.clip(((t + 1.0) / 5.0 + 0.2) ** 2, 0.0, 1.0), 0.0)


def bernoulli_mean_stream(theta: float, n: int, seed: int | str, d: int = 3,
                          shift: float = 1.0, name: str = "mean-stream"):
    """Binary outcomes with exact marginal mean theta and informative features.

    ``y ~ Bernoulli(theta)`` and ``x | y ~ N(y * shift * 1, I)``, so a
    predictor can learn y from x while the estimand stays exactly theta.
    """
    rng = substream(seed, name)
    u, rng = uniforms(rng, n)
    y = (u < theta).astype(float)
    noise, rng = normals(rng, n * d)
    x = noise.reshape(n, d) + y[:, None] * shift
    return x, y


@dataclass(frozen=True)
class MonitoredModel:
    """Frozen classifier under risk monitoring, with its validation loss."""

    weights: np.ndarray
    bias: float
    val_risk: float

    def classify(self, x: np.ndarray) -> np.ndarray:
        scores = np.asarray(x) @ self.weights + self.bias
        return (scores > 0).astype(float)


def classification_rows(n: int, rng: RngState, d: int = 5, sharpness: float = 8.0
                        ) -> tuple[np.ndarray, np.ndarray, RngState]:
    """Clean binary-classification rows: P(y=1 | x) = sigmoid(sharpness * w.x)."""
    direction = np.ones(d) / np.sqrt(d)
    feats, rng = normals(rng, n * d)
    feats = feats.reshape(n, d)
    p = 1.0 / (1.0 + np.exp(-sharpness * (feats @ direction)))
    u, rng = uniforms(rng, n)
    return feats, (u < p).astype(float), rng


def train_monitored_model(seed: int | str, d: int = 5, sharpness: float = 8.0,
                          n_train: int = 2000, n_val: int = 2000,
                          epochs: int = 30, step: float = 0.5) -> MonitoredModel:
    """Fit a logistic classifier on a clean split and freeze it.

    Batch gradient descent is plenty at this scale; the monitoring
    protocol only needs some fixed f together with its validation loss.
    """
    rng = substream(seed, "monitored-model")
    x_tr, y_tr, rng = classification_rows(n_train, rng, d=d, sharpness=sharpness)
    x_va, y_va, rng = classification_rows(n_val, rng, d=d, sharpness=sharpness)
    w = np.zeros(d)
    b = 0.0
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(x_tr @ w + b)))
        grad_w = x_tr.T @ (p - y_tr) / n_train
        grad_b = float(np.mean(p - y_tr))
        w -= step * grad_w
        b -= step * grad_b
    model = MonitoredModel(weights=w, bias=b, val_risk=0.0)
    val_risk = float(np.mean(model.classify(x_va) != y_va))
    return MonitoredModel(weights=w, bias=b, val_risk=val_risk)




def poisoned_loss_stream(model: MonitoredModel, n: int, seed: int | str,
                         schedule=None, d: int = 5, sharpness: float = 8.0,
                         name: str = "loss-stream"):
    """0-1 losses of the frozen model on a stream with scheduled label flips.

    ``schedule`` maps normalized time to flip probability (None = clean).
    Returns (features, losses).
    """
    rng = substream(seed, name)
    feats, labels, rng = classification_rows(n, rng, d=d, sharpness=sharpness)
    if schedule is not None:
        t = np.arange(1, n + 1) / n
        u, rng = uniforms(rng, n)
        labels = np.where(u < schedule(t), 1.0 - labels, labels)
    losses = (model.classify(feats) != labels).astype(float)
    return feats, losses


def ingest_csv(path, feature_cols: list[str], label_col: str,
               label_domain=None, shuffle_seed=None):
    """Load a stream from a headered CSV file.

    Returns (features, labels) in file order, optionally shuffled by a
    seed.  Missing columns, non-numeric cells, or labels outside the
    declared domain are rejected with row/column diagnostics.
    """
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        missing = [c for c in feature_cols + [label_col] if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}; found {reader.fieldnames}")
        feats, labels = [], []
        for line, row in enumerate(reader, start=2):
            values = []
            for col in feature_cols + [label_col]:
                try:
                    values.append(float(row[col]))
                except (TypeError, ValueError):
                    raise ValueError(
                        f"{path}: non-numeric value {row[col]!r} at line {line}, column {col!r}"
                    ) from None
            feats.append(values[:-1])
            labels.append(values[-1])
    x = np.asarray(feats, dtype=float)
    y = np.asarray(labels, dtype=float)
    if label_domain is not None:
        bad = ~np.isin(y, list(label_domain))
        if np.any(bad):
            first = int(np.argmax(bad))
            raise ValueError(
                f"{path}: label {y[first]!r} at data row {first + 1} outside domain {sorted(label_domain)}"
            )
    if shuffle_seed is not None:
        u, _ = uniforms(substream(shuffle_seed, "csv-shuffle"), len(y))
        order = np.argsort(u, kind="stable")
        x, y = x[order], y[order]
    return x, y
