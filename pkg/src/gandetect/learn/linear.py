"""Standardized logistic regression over feature vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FeatureVector
from ..imagecore import DegenerateDataError, InvalidInputError
from .config import TrainConfig

L2 = 1e-4
STD_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class LinearModel:
    extractor: str
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    final_loss: float = float("nan")

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


def _as_matrix(features) -> tuple[str, np.ndarray]:
    features = list(features)
    if not features:
        raise InvalidInputError("no training features")
    if isinstance(features[0], FeatureVector):
        names = {f.extractor for f in features}
        if len(names) != 1:
            raise InvalidInputError(f"mixed extractors {sorted(names)}")
        lengths = {len(f) for f in features}
        if len(lengths) != 1:
            raise InvalidInputError("feature vectors have different lengths")
        return names.pop(), np.stack([f.values for f in features])
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError("features must be a 2D array or FeatureVectors")
    return "", x


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return np.exp(-_softplus(-z))


def train_linear(features, labels, cfg: TrainConfig | None = None, extractor: str | None = None) -> LinearModel:
    """Mean BCE + 1e-4 ||w||^2 by full-batch heavy-ball gradient descent."""
    cfg = cfg or TrainConfig()
    name, x = _as_matrix(features)
    name = extractor or name
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.size != x.shape[0]:
        raise InvalidInputError("labels and features differ in length")
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise InvalidInputError("labels must be binary")
    if min(np.sum(y == 0), np.sum(y == 1)) < 2:
        raise DegenerateDataError("need at least 2 examples of each class")

    mean = x.mean(axis=0)
    scale = np.maximum(x.std(axis=0), STD_FLOOR)
    z = (x - mean) / scale
    n, d = z.shape
    # Lipschitz bound of the gradient for (w, b): 0.25 * lambda_max([z 1]^T [z 1] / n) + 2 * L2
    za = np.hstack([z, np.ones((n, 1))])
    lmax = np.linalg.eigvalsh(za.T @ za / n)[-1]
    step = 1.0 / (0.25 * lmax + 2 * L2)

    w = np.zeros(d)
    b = 0.0
    vw = np.zeros(d)
    vb = 0.0
    mu = cfg.momentum
    for _ in range(cfg.linear_iters):
        logits = z @ w + b
        g = (_sigmoid(logits) - y) / n
        gw = z.T @ g + 2 * L2 * w
        gb = g.sum()
        vw = mu * vw - step * gw
        vb = mu * vb - step * gb
        w = w + vw
        b = b + vb
    logits = z @ w + b
    loss = float(np.mean(_softplus(logits) - y * logits) + L2 * w @ w)
    return LinearModel(name, w, float(b), mean, scale, loss)


def predict_linear(model: LinearModel, feat) -> float:
    if isinstance(feat, FeatureVector):
        if model.extractor and feat.extractor != model.extractor:
            raise InvalidInputError(f"model expects {model.extractor!r}, got {feat.extractor!r}")
        feat = feat.values
    x = np.asarray(feat, dtype=np.float64)
    if x.shape != model.weights.shape:
        raise InvalidInputError(f"feature length {x.size} != {model.weights.size}")
    return float(model.standardize(x) @ model.weights + model.bias)


def predict_many(model: LinearModel, x: np.ndarray) -> np.ndarray:
    return model.standardize(np.asarray(x, dtype=np.float64)) @ model.weights + model.bias
