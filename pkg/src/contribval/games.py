"""Coalitions, coalitional games, normalization and the exact oracles.

Coalitions are bitmasks over players ``0..n-1`` (``n <= 64``).  A game wraps a
deterministic utility and counts every evaluation, so estimators can be held
to an evaluation budget and oracles can report their cost.
"""

from __future__ import annotations

import math
import operator
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator

import numpy as np

MAX_PLAYERS = 64
MAX_EXACT_PLAYERS = 20


class GameError(ValueError):
    pass


class DegenerateGameError(GameError):
    """The grand coalition and the empty coalition have the same value."""


class TooManyPlayersError(GameError):
    pass


class UnknownGameError(GameError):
    pass


class PlayerIndexError(GameError, IndexError):
    pass


def full_mask(n: int) -> int:
    return (1 << n) - 1


def popcount(masks) -> np.ndarray:
    return np.bitwise_count(np.asarray(masks, dtype=np.uint64)).astype(np.int64)


def _check_n(n: int) -> int:
    n = operator.index(n)
    if n > MAX_PLAYERS:
        raise TooManyPlayersError(f"bitmask coalitions hold at most {MAX_PLAYERS} players, got {n}")
    if n < 1:
        raise GameError(f"player count must be in [1, {MAX_PLAYERS}], got {n}")
    return n


@dataclass(frozen=True)
class Coalition:
    """Immutable set of players stored as a bitmask over the low ``n`` bits."""

    mask: int
    n: int

    def __post_init__(self) -> None:
        _check_n(self.n)
        if self.mask < 0 or self.mask >> self.n:
            raise GameError(f"mask {self.mask:#x} uses bits outside 0..{self.n - 1}")

    @classmethod
    def of(cls, members: Iterable[int], n: int) -> "Coalition":
        mask = 0
        for j in members:
            if not 0 <= j < n:
                raise PlayerIndexError(f"player {j} out of range for n={n}")
            mask |= 1 << j
        return cls(mask, n)

    @classmethod
    def empty(cls, n: int) -> "Coalition":
        return cls(0, n)

    @classmethod
    def grand(cls, n: int) -> "Coalition":
        return cls(full_mask(n), n)

    def insert(self, j: int) -> "Coalition":
        if not 0 <= j < self.n:
            raise PlayerIndexError(f"player {j} out of range for n={self.n}")
        return Coalition(self.mask | (1 << j), self.n)

    def remove(self, j: int) -> "Coalition":
        if not 0 <= j < self.n:
            raise PlayerIndexError(f"player {j} out of range for n={self.n}")
        return Coalition(self.mask & ~(1 << j), self.n)

    def members(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.n) if self.mask >> j & 1)

    def __contains__(self, j: object) -> bool:
        try:
            j = operator.index(j)
        except TypeError:
            return False
        return 0 <= j < self.n and bool(self.mask >> j & 1)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __iter__(self) -> Iterator[int]:
        return iter(self.members())

    def __index__(self) -> int:
        return self.mask


def coalition_insert(c: Coalition, j: int) -> Coalition:
    """Return ``c ∪ {j}``; ``c`` itself is left untouched."""
    return c.insert(j)


class CoalitionalGame:
    """A transferable-utility game over ``n`` players.

    ``utility`` maps an integer bitmask to a real value.  ``batch_utility``,
    when given, maps a ``uint64`` array of masks to an array of values and is
    used by :meth:`values`; either one may be omitted.
    """

    def __init__(
        self,
        n: int,
        utility: Callable[[int], float] | None = None,
        *,
        batch_utility: Callable[[np.ndarray], np.ndarray] | None = None,
        name: str = "game",
    ) -> None:
        if utility is None and batch_utility is None and type(self)._evaluate is CoalitionalGame._evaluate:
            raise GameError("a game needs a utility or a batch utility")
        self.n = _check_n(n)
        self.name = name
        self._utility = utility
        self._batch_utility = batch_utility
        self._count = 0
        self._lock = threading.Lock()

    @property
    def full_mask(self) -> int:
        return full_mask(self.n)

    @property
    def eval_count(self) -> int:
        return self._count

    def _tick(self, k: int = 1) -> None:
        with self._lock:
            self._count += k

    def _check_mask(self, mask: int) -> int:
        mask = operator.index(mask)
        if mask < 0 or mask >> self.n:
            raise GameError(f"mask {mask:#x} uses bits outside 0..{self.n - 1}")
        return mask

    def _evaluate(self, mask: int) -> float:
        if self._utility is not None:
            return self._utility(mask)
        return self._batch_utility(np.array([mask], dtype=np.uint64))[0]

    def _evaluate_batch(self, masks: np.ndarray) -> np.ndarray:
        if self._batch_utility is not None:
            return self._batch_utility(masks)
        return np.fromiter((self._evaluate(int(m)) for m in masks), dtype=float, count=masks.size)

    def value(self, coalition: int | Coalition) -> float:
        mask = self._check_mask(coalition)
        self._tick()
        return float(self._evaluate(mask))

    __call__ = value

    def values(self, masks) -> np.ndarray:
        """Evaluate many coalitions; counts one evaluation per mask."""
        arr = np.asarray(masks, dtype=np.uint64)
        flat = arr.ravel()
        if self.n < MAX_PLAYERS and flat.size and np.any(flat >> np.uint64(self.n)):
            raise GameError(f"masks use bits outside 0..{self.n - 1}")
        self._tick(flat.size)
        if flat.size == 0:
            return np.zeros(arr.shape)
        return np.asarray(self._evaluate_batch(flat), dtype=float).reshape(arr.shape)

    def table(self) -> np.ndarray:
        """Values of all ``2**n`` coalitions indexed by mask (costs ``2**n`` calls)."""
        if self.n > MAX_EXACT_PLAYERS:
            raise TooManyPlayersError(f"enumeration needs n <= {MAX_EXACT_PLAYERS}, got {self.n}")
        return self.values(np.arange(1 << self.n, dtype=np.uint64))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, n={self.n})"


class TableGame(CoalitionalGame):
    """Game given by an explicit table of ``2**n`` values."""

    def __init__(self, table, *, name: str = "table") -> None:
        table = np.asarray(table, dtype=float)
        n = int(table.size).bit_length() - 1
        if table.ndim != 1 or table.size != 1 << n or n < 1:
            raise GameError("table length must be a power of two >= 2")
        super().__init__(n, name=name)
        self._table = table.copy()
        self._table.setflags(write=False)

    def _evaluate(self, mask: int) -> float:
        return self._table[mask]

    def _evaluate_batch(self, masks: np.ndarray) -> np.ndarray:
        return self._table[masks.astype(np.int64)]

    def __add__(self, other: "TableGame") -> "TableGame":
        return TableGame(self._table + other._table, name=f"{self.name}+{other.name}")


class NormalizedGame(CoalitionalGame):
    """Affine rescaling of a game so that v(∅) = 0 and v(N) = 1 exactly.

    The two endpoint values are read from ``inner`` once at construction and
    returned as exact constants afterwards.
    """

    def __init__(self, inner: CoalitionalGame) -> None:
        super().__init__(inner.n, name=f"normalized({inner.name})")
        self.inner = inner
        self.v_empty = inner.value(0)
        self.v_full = inner.value(inner.full_mask)
        span = self.v_full - self.v_empty
        if not math.isfinite(span) or span == 0.0:
            raise DegenerateGameError(
                f"cannot normalize {inner.name}: v(N) = {self.v_full!r}, v(∅) = {self.v_empty!r}"
            )
        self.span = span

    def _evaluate(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        if mask == self.full_mask:
            return 1.0
        return (self.inner.value(mask) - self.v_empty) / self.span

    def _evaluate_batch(self, masks: np.ndarray) -> np.ndarray:
        out = (self.inner.values(masks) - self.v_empty) / self.span
        out[masks == 0] = 0.0
        out[masks == np.uint64(self.full_mask)] = 1.0
        return out


def normalize(game: CoalitionalGame) -> NormalizedGame:
    """Rescale ``game`` to v'(S) = (v(S) - v(∅)) / (v(N) - v(∅)).

    Raises:
        DegenerateGameError: if v(N) == v(∅).
    """
    return NormalizedGame(game)


@dataclass
class ContributionVector:
    """Per-player scores with the cost that produced them."""

    values: np.ndarray
    estimator: str
    evals_used: int = 0
    budget: int | None = None
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("contribution values must be a 1-D vector")
        if self.budget is not None and self.evals_used > self.budget:
            raise ValueError(f"{self.evals_used} evaluations exceed the budget of {self.budget}")

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _shapley_weights(n: int) -> np.ndarray:
    # |S|! (n - |S| - 1)! / n!  for |S| = 0..n-1
    return np.array(
        [math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) for s in range(n)]
    )


def _exact(game: CoalitionalGame, weight_of_size: np.ndarray, label: str) -> ContributionVector:
    n = game.n
    if n > MAX_EXACT_PLAYERS:
        raise TooManyPlayersError(f"{label} needs n <= {MAX_EXACT_PLAYERS}, got {n}")
    before = game.eval_count
    v = game.table()
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = popcount(masks)
    phi = np.empty(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.sum(weight_of_size[sizes[without]] * (v[without | bit] - v[without]))
    return ContributionVector(phi, label, game.eval_count - before, budget=1 << n)


def exact_shapley(game: CoalitionalGame) -> ContributionVector:
    """Shapley values by enumerating all coalitions once (``2**n`` evaluations)."""
    return _exact(game, _shapley_weights(game.n), "exact-shapley")


def exact_banzhaf(game: CoalitionalGame) -> ContributionVector:
    """Banzhaf values: the mean marginal over all ``2**(n-1)`` coalitions without i."""
    n = game.n
    return _exact(game, np.full(n, 2.0 ** -(n - 1)), "exact-banzhaf")


# ---------------------------------------------------------------------------
# test-game catalog


def _bits(masks: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n, dtype=np.uint64)
    return ((masks[:, None] >> shifts) & np.uint64(1)).astype(float)


def additive_game(weights, *, name: str = "additive") -> CoalitionalGame:
    w = np.asarray(weights, dtype=float)
    n = w.size

    def batch(masks: np.ndarray) -> np.ndarray:
        return _bits(masks, n) @ w

    return CoalitionalGame(n, batch_utility=batch, name=name)


def majority_game(n: int, quota: int | None = None) -> CoalitionalGame:
    quota = n // 2 + 1 if quota is None else quota

    def batch(masks: np.ndarray) -> np.ndarray:
        return (popcount(masks) >= quota).astype(float)

    return CoalitionalGame(n, batch_utility=batch, name=f"majority(q={quota})")


def glove_game(n: int, left: Iterable[int] | None = None) -> CoalitionalGame:
    left = range(n - n // 2) if left is None else left
    left_mask = np.uint64(Coalition.of(left, n).mask)
    right_mask = np.uint64(full_mask(n)) & ~left_mask

    def batch(masks: np.ndarray) -> np.ndarray:
        return np.minimum(popcount(masks & left_mask), popcount(masks & right_mask)).astype(float)

    return CoalitionalGame(n, batch_utility=batch, name="glove")


def dividend_game(dividends: dict[int, float], n: int, *, name: str = "dividends") -> CoalitionalGame:
    """v(S) = sum of a_T over T ⊆ S (Harsanyi dividends; monotone if all a_T >= 0)."""
    ts = np.array(list(dividends), dtype=np.uint64)
    a = np.array(list(dividends.values()), dtype=float)

    def batch(masks: np.ndarray) -> np.ndarray:
        covered = (masks[:, None] & ts[None, :]) == ts[None, :]
        return covered.astype(float) @ a

    return CoalitionalGame(n, batch_utility=batch, name=name)


def random_monotone_game(n: int, seed: int) -> CoalitionalGame:
    """Random monotone supermodular game with v(∅)=0 and v(N)=1.

    Non-negative dividends on every singleton plus ``2n`` random coalitions of
    size 2..4.
    """
    rng = np.random.default_rng([int(seed), n, 0x6A3E])
    dividends: dict[int, float] = {}
    for i in range(n):
        dividends[1 << i] = rng.uniform(0.05, 1.0)
    if n >= 2:
        for _ in range(2 * n):
            size = int(rng.integers(2, min(4, n) + 1))
            members = rng.choice(n, size=size, replace=False)
            t = int(sum(1 << int(j) for j in members))
            dividends[t] = dividends.get(t, 0.0) + rng.uniform(0.0, 0.6)
    total = sum(dividends.values())
    return dividend_game({t: a / total for t, a in dividends.items()}, n, name=f"random_monotone(seed={seed})")


def saturating_game(n: int, seed: int, steepness: float = 5.0) -> CoalitionalGame:
    """Diminishing-returns game v(S) = 1 - exp(-steepness * sum_{i in S} w_i).

    Monotone and submodular, shaped like an accuracy curve that saturates as
    clients are added.
    """
    rng = np.random.default_rng([int(seed), n, 0x5A7])
    w = rng.dirichlet(np.full(n, 2.0))

    def batch(masks: np.ndarray) -> np.ndarray:
        return 1.0 - np.exp(-steepness * (_bits(masks, n) @ w))

    return CoalitionalGame(n, batch_utility=batch, name=f"saturating(seed={seed})")


GAME_CATALOG = ("additive", "majority", "glove", "random_monotone", "saturating")


def standard_games(name: str, n: int, seed: int | None = None, **params) -> CoalitionalGame:
    """Build a test game from the catalog.

    ``additive`` takes ``weights`` (default: seeded random weights summing to
    one); ``majority`` takes ``quota``; ``glove`` takes ``left``;
    ``saturating`` takes ``steepness``.  The result is deterministic for a
    given ``(name, n, seed, params)``.
    """
    n = _check_n(n)
    seed = 0 if seed is None else seed
    if name == "additive":
        weights = params.pop("weights", None)
        if weights is None:
            weights = np.random.default_rng([int(seed), n, 0xADD]).dirichlet(np.ones(n))
        if len(weights) != n:
            raise GameError(f"additive game needs {n} weights, got {len(weights)}")
        game = additive_game(weights)
    elif name == "majority":
        game = majority_game(n, params.pop("quota", None))
    elif name == "glove":
        game = glove_game(n, params.pop("left", None))
    elif name == "random_monotone":
        game = random_monotone_game(n, seed)
    elif name == "saturating":
        game = saturating_game(n, seed, params.pop("steepness", 5.0))
    else:
        raise UnknownGameError(f"unknown game {name!r}; expected one of {', '.join(GAME_CATALOG)}")
    if params:
        raise GameError(f"unused parameters for {name!r}: {sorted(params)}")
    return game
