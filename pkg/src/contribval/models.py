"""Small classifiers with closed-form gradients.

Two architectures share the :class:`ModelParams` container and are told apart
by their segment names: multinomial logistic regression (``W``, ``b``) and a
one-hidden-layer tanh network (``W1``, ``b1``, ``W2``, ``b2``).
"""

from __future__ import annotations

import warnings

import numpy as np

from .aggregation import ModelParams

ARCHITECTURES = ("logreg", "mlp")


class EmptyShardWarning(UserWarning):
    pass


def init_model(arch: str, n_features: int, n_classes: int, rng: np.random.Generator, hidden: int = 32) -> ModelParams:
    if arch == "logreg":
        return ModelParams.from_arrays({
            "W": np.zeros((n_features, n_classes)),
            "b": np.zeros(n_classes),
        })
    if arch == "mlp":
        return ModelParams.from_arrays({
            "W1": rng.normal(0.0, 1.0 / np.sqrt(n_features), (n_features, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, n_classes)),
            "b2": np.zeros(n_classes),
        })
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


def architecture(params: ModelParams) -> str:
    names = [name for name, _ in params.layout]
    if names == ["W", "b"]:
        return "logreg"
    if names == ["W1", "b1", "W2", "b2"]:
        return "mlp"
    raise ValueError(f"unrecognised layout {names}")


def last_layer(params: ModelParams) -> np.ndarray:
    """Output-layer weights as a ``(classes, inputs)`` matrix."""
    name = "W" if architecture(params) == "logreg" else "W2"
    return params.segment(name).T


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logits(params: ModelParams, X: np.ndarray) -> np.ndarray:
    a = params.arrays()
    if architecture(params) == "logreg":
        return X @ a["W"] + a["b"]
    return np.tanh(X @ a["W1"] + a["b1"]) @ a["W2"] + a["b2"]


def predict(params: ModelParams, X: np.ndarray) -> np.ndarray:
    return logits(params, X).argmax(axis=1)


def accuracy(params: ModelParams, X: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.mean(predict(params, X) == y))


def loss_and_grad(params: ModelParams, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient as a flat vector in ``params``' layout."""
    a = params.arrays()
    B = X.shape[0]
    rows = np.arange(B)
    if architecture(params) == "logreg":
        P = _softmax(X @ a["W"] + a["b"])
        loss = -np.mean(np.log(P[rows, y] + 1e-300))
        D = P.copy()
        D[rows, y] -= 1.0
        D /= B
        grads = [X.T @ D, D.sum(axis=0)]
    else:
        H = np.tanh(X @ a["W1"] + a["b1"])
        P = _softmax(H @ a["W2"] + a["b2"])
        loss = -np.mean(np.log(P[rows, y] + 1e-300))
        D2 = P.copy()
        D2[rows, y] -= 1.0
        D2 /= B
        D1 = (D2 @ a["W2"].T) * (1.0 - H * H)
        grads = [X.T @ D1, D1.sum(axis=0), H.T @ D2, D2.sum(axis=0)]
    return float(loss), np.concatenate([g.ravel() for g in grads])


def local_train(
    model: ModelParams,
    shard,
    *,
    epochs: int = 1,
    lr: float = 0.05,
    batch: int = 32,
    rng: np.random.Generator,
) -> ModelParams:
    """Mini-batch gradient descent on cross-entropy over ``shard``.

    ``shard`` needs ``features`` and ``labels``.  An empty shard leaves the
    model unchanged and emits :class:`EmptyShardWarning`.
    """
    X, y = shard.features, shard.labels
    if len(y) == 0:
        warnings.warn("empty shard: model returned unchanged", EmptyShardWarning, stacklevel=2)
        return model.copy()
    w = model.values.copy()
    n = len(y)
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch):
            idx = order[lo:lo + batch]
            _, g = loss_and_grad(model.with_values(w), X[idx], y[idx])
            w -= lr * g
    return model.with_values(w)
