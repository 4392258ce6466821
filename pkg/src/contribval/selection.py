"""Epsilon-greedy client selection with a contribution floor and confidence bonus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LOW_GAIN_SCALE = 0.1


@dataclass(frozen=True)
class SelectionConfig:
    epsilon: float = 0.1
    c: float = 1.0
    tau: float = 0.0
    k: int = 10
    low_gain_scale: float = LOW_GAIN_SCALE

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.c <= 0:
            raise ValueError(f"confidence weight c must be > 0, got {self.c}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.low_gain_scale != LOW_GAIN_SCALE:
            raise ValueError(f"low_gain_scale is fixed at {LOW_GAIN_SCALE}")


@dataclass
class BanditState:
    """Selection counts per client and the current round index."""

    sigma: np.ndarray
    t: int = 0
    explored: list[bool] = field(default_factory=list)

    @classmethod
    def fresh(cls, n: int) -> "BanditState":
        return cls(np.zeros(n, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.sigma.size


def score(phi_i: float, sigma_i: int, t: int, cfg: SelectionConfig) -> float:
    """Effective gain plus confidence bonus for one client.

    The gain is ``phi_i`` when it reaches the floor ``tau`` and 0 otherwise;
    below the floor the bonus is also damped by ``low_gain_scale``.
    """
    if sigma_i < 0 or t < 0:
        raise ValueError("sigma and t must be non-negative")
    bonus = cfg.c * math.sqrt(math.log(t + 1) / (sigma_i + 1))
    if phi_i >= cfg.tau:
        return phi_i + bonus
    return cfg.low_gain_scale * bonus


def scores(phi, sigma, t: int, cfg: SelectionConfig) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    sigma = np.asarray(sigma)
    if np.any(sigma < 0) or t < 0:
        raise ValueError("sigma and t must be non-negative")
    bonus = cfg.c * np.sqrt(math.log(t + 1) / (sigma + 1))
    above = phi >= cfg.tau
    return np.where(above, phi + bonus, cfg.low_gain_scale * bonus)


def selection_weights(phi, state: BanditState, cfg: SelectionConfig) -> np.ndarray:
    """Exploitation probabilities: scores shifted to a zero minimum and normalized.

    Falls back to uniform weights when every shifted score is zero.
    """
    s = scores(phi, state.sigma, state.t, cfg)
    s = s - s.min()
    total = s.sum()
    if total <= 0 or not math.isfinite(total):
        return np.full(s.size, 1.0 / s.size)
    return s / total


def weighted_sample_without_replacement(
    weights, k: int, rng: np.random.Generator, *, fill_uniform: bool = False
) -> np.ndarray:
    """Draw ``k`` distinct indices by repeated draw-remove-renormalize.

    Raises:
        ValueError: if fewer than ``k`` weights are positive, unless
            ``fill_uniform`` is set, in which case the remaining picks are made
            uniformly among the zero-weight indices.
    """
    w = np.array(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a finite non-negative vector")
    if not 0 <= k <= w.size:
        raise ValueError(f"cannot draw {k} of {w.size} indices")
    if np.count_nonzero(w) < k and not fill_uniform:
        raise ValueError(f"only {np.count_nonzero(w)} positive weights for {k} draws")
    available = np.ones(w.size, dtype=bool)
    picks = []
    for _ in range(k):
        mass = np.where(available, w, 0.0)
        total = mass.sum()
        if total <= 0:
            mass = available.astype(float)
            total = mass.sum()
        cdf = np.cumsum(mass / total)
        i = int(np.searchsorted(cdf, rng.random(), side="right"))
        i = min(i, w.size - 1)
        while not available[i] or mass[i] == 0:
            i -= 1  # guards against cdf round-off past the last positive entry
        picks.append(i)
        available[i] = False
    return np.array(picks, dtype=np.int64)


def select_clients(phi, state: BanditState, cfg: SelectionConfig, rng: np.random.Generator) -> np.ndarray:
    """Pick ``cfg.k`` clients for the next round and record the selection.

    With probability ``epsilon`` the whole batch is uniform; otherwise it is
    drawn by :func:`selection_weights`.  Selection counts grow in both cases;
    the caller advances ``state.t`` once per round.
    """
    phi = np.asarray(phi, dtype=float)
    n = phi.size
    if n != state.n:
        raise ValueError(f"{n} contributions for {state.n} clients")
    if cfg.k > n:
        raise ValueError(f"cannot select {cfg.k} of {n} clients")
    explore = rng.random() < cfg.epsilon
    if explore:
        chosen = rng.choice(n, size=cfg.k, replace=False)
    else:
        p = selection_weights(phi, state, cfg)
        chosen = weighted_sample_without_replacement(p, cfg.k, rng, fill_uniform=True)
    state.sigma[chosen] += 1
    state.explored.append(bool(explore))
    return np.sort(chosen)
