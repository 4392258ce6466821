"""Model parameter vectors and the aggregation rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

Layout = tuple[tuple[str, tuple[int, ...]], ...]


class LayoutMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Flat parameter vector with named, shaped segments."""

    values: np.ndarray
    layout: Layout

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        size = sum(int(np.prod(shape)) for _, shape in self.layout)
        if values.ndim != 1 or values.size != size:
            raise LayoutMismatchError(f"{values.size} values for a layout of {size}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ModelParams":
        layout = tuple((name, tuple(np.shape(a))) for name, a in arrays.items())
        flat = np.concatenate([np.ravel(np.asarray(a, dtype=float)) for a in arrays.values()])
        return cls(flat, layout)

    def arrays(self) -> dict[str, np.ndarray]:
        out = {}
        offset = 0
        for name, shape in self.layout:
            size = int(np.prod(shape))
            out[name] = self.values[offset:offset + size].reshape(shape)
            offset += size
        return out

    def segment(self, name: str) -> np.ndarray:
        try:
            return self.arrays()[name]
        except KeyError:
            raise KeyError(f"no segment {name!r} in layout {[n for n, _ in self.layout]}") from None

    def with_values(self, values: np.ndarray) -> "ModelParams":
        return ModelParams(values, self.layout)

    def copy(self) -> "ModelParams":
        return ModelParams(self.values.copy(), self.layout)

    def __len__(self) -> int:
        return self.values.size


def softmax_weights(phi) -> np.ndarray:
    """exp(phi_i) / sum_j exp(phi_j), computed after subtracting the max."""
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0:
        raise ValueError("softmax of an empty vector")
    if not np.all(np.isfinite(phi)):
        raise ValueError("contributions must be finite")
    e = np.exp(phi - phi.max())
    return e / e.sum()


def _check_models(models: Sequence[ModelParams]) -> Layout:
    if not models:
        raise ValueError("no models to aggregate")
    layout = models[0].layout
    for m in models[1:]:
        if m.layout != layout:
            raise LayoutMismatchError(f"layout {m.layout} differs from {layout}")
    return layout


def aggregate(models: Sequence[ModelParams], alpha) -> ModelParams:
    """Convex combination ``sum_i alpha_i W_i`` of models sharing one layout."""
    layout = _check_models(models)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (len(models),):
        raise ValueError(f"{alpha.size} weights for {len(models)} models")
    stack = np.stack([m.values for m in models])
    if all(np.array_equal(stack[0], row) for row in stack[1:]):
        return ModelParams(stack[0].copy(), layout)
    return ModelParams(alpha @ stack, layout)


def fedavg_uniform(models: Sequence[ModelParams]) -> ModelParams:
    _check_models(models)
    return aggregate(models, np.full(len(models), 1.0 / len(models)))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def shapfed_wa_weights(client_grads, reference=None) -> np.ndarray:
    """Cosine-similarity aggregation weights.

    Each client's gradient is compared with ``reference`` (default: the mean
    client gradient).  Gradients shaped ``(classes, features)`` are compared
    class by class and the cosines averaged.  Negative cosines count as zero;
    if all are zero the weights are uniform.
    """
    grads = [np.asarray(g, dtype=float) for g in client_grads]
    if not grads:
        raise ValueError("no client gradients")
    ref = np.mean(grads, axis=0) if reference is None else np.asarray(reference, dtype=float)
    gamma = np.empty(len(grads))
    for i, g in enumerate(grads):
        if g.shape != ref.shape:
            raise ValueError(f"gradient shape {g.shape} differs from reference {ref.shape}")
        if g.ndim == 1:
            cos = _cosine(g, ref)
        else:
            rows_g, rows_r = g.reshape(g.shape[0], -1), ref.reshape(ref.shape[0], -1)
            cos = float(np.mean([_cosine(a, b) for a, b in zip(rows_g, rows_r)]))
        gamma[i] = max(cos, 0.0)
    total = gamma.sum()
    if total <= 0:
        return np.full(len(grads), 1.0 / len(grads))
    return gamma / total


AGGREGATOR_IDS = ("softmax-contrib", "fedavg", "shapfed-wa")
