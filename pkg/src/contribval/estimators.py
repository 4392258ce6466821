"""Sampled Shapley and Banzhaf estimators under a shared evaluation budget.

Every estimator charges a :class:`~contribval.budget.BudgetMeter` one unit per
utility evaluation.  The value of the empty coalition is the reference point
of every walk and is never charged: it is 0 for a normalized game and is read
once from the game otherwise.

Random draws come from per-walk streams (see :mod:`contribval.streams`), so
permutation-based estimators that share a seed walk the same permutations.
That coupling is what makes ``gtg_shapley(eps=0)``, ``weighted_shap(1, 1)``
and ``owen_walk(Q=1, eta=0, mode="paper")`` reproduce ``mc_shapley`` bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .budget import BudgetMeter
from .games import CoalitionalGame, ContributionVector, GameError, NormalizedGame, popcount
from .streams import Purpose, stream


class NotNormalizedError(GameError):
    """The estimator needs a game with v(∅) = 0 and v(N) = 1."""


NORMALIZATION_MODES = ("paper", "visited")


@dataclass(frozen=True)
class OwenConfig:
    """Parameters of the truncated Owen walk.

    Attributes:
        Q: number of inclusion levels; the levels are 1/Q, 2/Q, ..., 1.
        M: planned walks per level before budget recycling.
        eta: truncation tolerance on the remaining attainable gain.
        normalization_mode: ``"paper"`` averages each level over its walks
            and the levels over Q; ``"visited"`` divides each player's total
            increment by the number of walks that visited it.
        seed: root of the walk streams.
    """

    Q: int = 2
    M: int = 2
    eta: float = 0.0
    normalization_mode: str = "visited"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.Q < 1:
            raise ValueError(f"Q must be >= 1, got {self.Q}")
        if self.M < 0:
            raise ValueError(f"M must be >= 0, got {self.M}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.normalization_mode not in NORMALIZATION_MODES:
            raise ValueError(f"normalization_mode must be one of {NORMALIZATION_MODES}")

    @property
    def levels(self) -> tuple[float, ...]:
        return tuple(i / self.Q for i in range(1, self.Q + 1))


@dataclass(frozen=True)
class WalkRecord:
    level: float
    order: tuple[int, ...]
    increments: tuple[float, ...]
    truncated: bool
    cut: bool = False  # stopped because the budget ran out


def _meter(budget: BudgetMeter | None, natural: int) -> BudgetMeter:
    return BudgetMeter(natural) if budget is None else budget


def _baseline(game: CoalitionalGame) -> float:
    if isinstance(game, NormalizedGame):
        return 0.0
    return game.value(0)


def _single_player(game: CoalitionalGame, label: str, meter: BudgetMeter) -> ContributionVector:
    # one player takes everything: v(N) - v(∅)
    value = 1.0 if isinstance(game, NormalizedGame) else game.value(1) - game.value(0)
    return ContributionVector(np.array([value]), label, 0, meter.limit)


def _walk_permutation(game, perm, base, acc, weights=None) -> None:
    mask = 0
    prev = base
    for pos, i in enumerate(perm):
        mask |= 1 << int(i)
        cur = game.value(mask)
        delta = cur - prev
        acc[i] += delta if weights is None else weights[pos] * delta
        prev = cur


def _permutation(seed: int, m: int, n: int) -> np.ndarray:
    return stream(seed, Purpose.ORDER, 0, m).permutation(n)


def mc_shapley(
    game: CoalitionalGame, M: int, budget: BudgetMeter | None = None, seed: int = 0
) -> ContributionVector:
    """Average marginal gains over ``M`` uniformly random permutations.

    Each permutation costs ``n`` evaluations and is reserved up front; when the
    budget cannot cover a whole permutation, sampling stops and the average is
    taken over the permutations completed.
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    n = game.n
    meter = _meter(budget, n * M)
    if n == 1:
        return _single_player(game, "mc", meter)
    start = meter.used
    base = _baseline(game)
    phi = np.zeros(n)
    done = 0
    for m in range(M):
        if not meter.try_charge(n):
            break
        _walk_permutation(game, _permutation(seed, m, n), base, phi)
        done += 1
    if done:
        phi = phi / done
    return ContributionVector(phi, "mc", meter.used - start, meter.limit, {"permutations": done})


def beta_position_weights(n: int, alpha: float, beta: float) -> np.ndarray:
    """Beta(alpha, beta) density at the position midpoints (j - 0.5)/n, scaled to mean 1."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("Beta parameters must be positive")
    x = (np.arange(1, n + 1) - 0.5) / n
    # the Beta normalizing constant cancels in the mean-1 scaling
    w = x ** (alpha - 1.0) * (1.0 - x) ** (beta - 1.0)
    return w / w.mean()


def weighted_shap(
    game: CoalitionalGame,
    alpha: float,
    beta: float,
    M: int,
    budget: BudgetMeter | None = None,
    seed: int = 0,
) -> ContributionVector:
    """Permutation sampling with the marginal at position j weighted by a Beta density."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    n = game.n
    weights = beta_position_weights(n, alpha, beta)
    meter = _meter(budget, n * M)
    if n == 1:
        return _single_player(game, "wshap", meter)
    start = meter.used
    base = _baseline(game)
    phi = np.zeros(n)
    done = 0
    for m in range(M):
        if not meter.try_charge(n):
            break
        _walk_permutation(game, _permutation(seed, m, n), base, phi, weights)
        done += 1
    if done:
        phi = phi / done
    return ContributionVector(
        phi, "wshap", meter.used - start, meter.limit, {"permutations": done, "weights": weights}
    )


def gtg_shapley(
    game: CoalitionalGame,
    eps_trunc: float,
    M: int,
    budget: BudgetMeter | None = None,
    seed: int = 0,
) -> ContributionVector:
    """Permutation sampling that stops evaluating once v(N) is within ``eps_trunc``.

    While ``|v(N) - v_prev| >= eps_trunc`` the next coalition is evaluated;
    afterwards the running value is carried forward and the remaining players
    of the permutation get zero marginal.  v(N) costs one evaluation unless the
    game is normalized.  A permutation that runs out of budget is discarded.
    """
    if eps_trunc < 0:
        raise ValueError(f"eps_trunc must be >= 0, got {eps_trunc}")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    n = game.n
    meter = _meter(budget, n * M + 1)
    if n == 1:
        return _single_player(game, "gtg", meter)
    start = meter.used
    base = _baseline(game)
    phi = np.zeros(n)
    done = 0
    if isinstance(game, NormalizedGame):
        v_full = 1.0
    elif meter.try_charge(1):
        v_full = game.value(game.full_mask)
    else:
        return ContributionVector(phi, "gtg", 0, meter.limit, {"permutations": 0})
    skipped = 0
    for m in range(M):
        local = np.zeros(n)
        mask = 0
        prev = base
        complete = True
        for i in _permutation(seed, m, n):
            mask |= 1 << int(i)
            if abs(v_full - prev) >= eps_trunc:
                if not meter.try_charge(1):
                    complete = False
                    break
                cur = game.value(mask)
            else:
                cur = prev
                skipped += 1
            local[i] += cur - prev
            prev = cur
        if not complete:
            break
        phi += local
        done += 1
    if done:
        phi = phi / done
    return ContributionVector(
        phi, "gtg", meter.used - start, meter.limit, {"permutations": done, "skipped": skipped}
    )


def data_banzhaf(
    game: CoalitionalGame, M: int, budget: BudgetMeter | None = None, seed: int = 0
) -> ContributionVector:
    """Monte-Carlo Banzhaf: marginals of every outsider of ``M`` uniform subsets.

    The sums are divided by the number of subsets, not by each player's own
    sample count, so the estimate converges to half the Banzhaf value.
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    n = game.n
    meter = _meter(budget, n * M)
    if n == 1:
        return _single_player(game, "banzhaf", meter)
    start = meter.used
    base = _baseline(game)
    bits = np.uint64(1) << np.arange(n, dtype=np.uint64)
    beta = np.zeros(n)
    done = 0
    for m in range(M):
        inside = stream(seed, Purpose.SUBSET, 0, m).random(n) < 0.5
        mask = int(np.bitwise_or.reduce(bits[inside])) if inside.any() else 0
        outside = np.flatnonzero(~inside)
        if not meter.try_charge(outside.size + (mask != 0)):
            break
        v_s = game.value(mask) if mask else base
        if outside.size:
            beta[outside] += game.values(np.uint64(mask) | bits[outside]) - v_s
        done += 1
    if done:
        beta = beta / done
    return ContributionVector(beta, "banzhaf", meter.used - start, meter.limit, {"subsets": done})


def owen_strict(
    game: CoalitionalGame,
    Q: int,
    M: int,
    seed: int = 0,
    budget: BudgetMeter | None = None,
    grid: str = "stratified",
) -> ContributionVector:
    """Owen multilinear estimator with present/absent twins for every player.

    For each of ``Q`` inclusion levels, ``M`` Bernoulli masks are drawn and
    every player j contributes v(S ∪ {j}) - v(S \\ {j}).  With
    ``grid="stratified"`` the inclusion probability of each mask is uniform
    inside its level's slice ((i-1)/Q, i/Q], which keeps the estimate unbiased
    for the Shapley value; ``grid="right"`` uses the fixed points q = i/Q.

    Masks are processed level-interleaved, so a budget that runs out early
    still leaves every level sampled.
    """
    if Q < 1 or M < 1:
        raise ValueError(f"Q and M must be >= 1, got Q={Q}, M={M}")
    if grid not in ("stratified", "right"):
        raise ValueError(f"grid must be 'stratified' or 'right', got {grid!r}")
    n = game.n
    if n == 1:
        return _single_player(game, "owen-strict", _meter(budget, 0))
    bits = np.uint64(1) << np.arange(n, dtype=np.uint64)

    include = np.empty((M, Q, n), dtype=bool)
    for li in range(Q):
        rng = stream(seed, Purpose.STRICT, li)
        u = rng.random((M, n))
        if grid == "stratified":
            q = (li + rng.random(M)) / Q
        else:
            q = np.full(M, (li + 1) / Q)
        include[:, li, :] = u < q[:, None]
    include = include.reshape(M * Q, n)
    level_of = np.tile(np.arange(Q), M)
    masks = np.bitwise_or.reduce(np.where(include, bits, np.uint64(0)), axis=1)

    # v(mask) once (free when empty) plus one twin per player (free when it is empty)
    sizes = popcount(masks)
    cost = (sizes > 0).astype(np.int64) + n - (sizes == 1)
    meter = _meter(budget, int(cost.sum()))
    start = meter.used
    take = int(np.searchsorted(np.cumsum(cost), meter.remaining, side="right"))
    if take and not meter.try_charge(int(cost[:take].sum())):
        raise RuntimeError("budget changed concurrently")
    masks, include, level_of = masks[:take], include[:take], level_of[:take]

    base = _baseline(game)
    v_mask = np.full(take, base)
    nz = masks != 0
    v_mask[nz] = game.values(masks[nz])
    twins = masks[:, None] ^ bits[None, :]
    v_twin = np.full(twins.shape, base)
    tz = twins != 0
    v_twin[tz] = game.values(twins[tz])
    diff = np.where(include, v_mask[:, None] - v_twin, v_twin - v_mask[:, None])

    est = np.zeros(n)
    per_level = np.bincount(level_of, minlength=Q)
    for li in range(Q):
        if per_level[li]:
            est += diff[level_of == li].mean(axis=0)
    est /= Q
    return ContributionVector(
        est, "owen-strict", meter.used - start, meter.limit,
        {"masks": take, "masks_per_level": per_level.tolist(), "grid": grid},
    )


def owen_walk(
    game: NormalizedGame,
    cfg: OwenConfig,
    budget: BudgetMeter | None = None,
    *,
    record_walks: bool = False,
) -> ContributionVector:
    """Truncated Owen walk with budget recycling.

    At each level q, a Bernoulli(q) mask selects players, who are added one at
    a time in random order while their increments are recorded.  A walk stops
    as soon as the attainable remainder 1 - v(C) drops below ``cfg.eta``
    (``eta=0`` turns truncation off).
    After the planned ``cfg.M`` walks per level, leftover evaluations are spent
    on extra walks, cycling through the levels, until the meter is full.

    Raises:
        NotNormalizedError: if ``game`` is not a :class:`NormalizedGame`.
        ValueError: if the budget has nothing left to spend.
    """
    if not isinstance(game, NormalizedGame):
        raise NotNormalizedError("owen_walk needs a normalized game (see games.normalize)")
    n = game.n
    meter = _meter(budget, n * cfg.Q * cfg.M)
    if meter.remaining <= 0:
        raise ValueError("owen_walk needs a positive budget")
    if n == 1:
        return _single_player(game, "owen", meter)
    start = meter.used
    levels = cfg.levels
    Q = len(levels)
    sums = np.zeros((Q, n))
    walks = np.zeros(Q, dtype=np.int64)
    visits = np.zeros(n, dtype=np.int64)
    records: list[WalkRecord] = []
    truncated = 0

    def walk(li: int, w: int) -> None:
        nonlocal truncated
        q = levels[li]
        selected = np.flatnonzero(stream(cfg.seed, Purpose.MASK, li, w).random(n) < q)
        order = stream(cfg.seed, Purpose.ORDER, li, w).permutation(selected)
        mask = 0
        prev = 0.0
        steps: list[float] = []
        was_truncated = cut = False
        for pos, j in enumerate(order):
            if not meter.try_charge(1):
                cut = True
                break
            mask |= 1 << int(j)
            cur = game.value(mask)
            h = cur - prev
            sums[li, j] += h
            visits[j] += 1
            steps.append(h)
            # the running remainder 1 - sum(h) telescopes to 1 - v(C); eta=0 disables
            # the test, which could otherwise fire on non-monotone games with v(C) > 1
            if cfg.eta > 0 and 1.0 - cur < cfg.eta:
                was_truncated = pos < len(order) - 1
                break
            prev = cur
        walks[li] += 1
        truncated += was_truncated
        if record_walks:
            records.append(WalkRecord(q, tuple(int(j) for j in order[: len(steps)]), tuple(steps), was_truncated, cut))

    for li in range(Q):
        for w in range(cfg.M):
            if meter.remaining == 0:
                break
            walk(li, w)
    next_walk = [cfg.M] * Q
    li = 0
    while meter.remaining > 0:
        walk(li, next_walk[li])
        next_walk[li] += 1
        li = (li + 1) % Q

    if cfg.normalization_mode == "paper":
        est = np.zeros(n)
        for li in range(Q):
            if walks[li]:
                est += sums[li] / walks[li]
        est /= Q
    else:
        total = sums.sum(axis=0)
        est = np.divide(total, visits, out=np.zeros(n), where=visits > 0)
    info = {
        "walks": int(walks.sum()),
        "walks_per_level": walks.tolist(),
        "truncated": truncated,
        "visits": visits.tolist(),
    }
    if record_walks:
        info["records"] = records
    return ContributionVector(est, "owen", meter.used - start, meter.limit, info)


# ---------------------------------------------------------------------------
# registry


ESTIMATOR_IDS = ("owen", "owen-strict", "mc", "gtg", "banzhaf", "wshap")


def natural_budget(estimator_id: str, n: int, M: int, Q: int = 2) -> int:
    """Evaluations an estimator needs for ``M`` samples without any cut."""
    if estimator_id == "owen":
        return n * Q * M
    if estimator_id == "owen-strict":
        return Q * M * (n + 1)
    if estimator_id == "gtg":
        return n * M + 1
    if estimator_id in ESTIMATOR_IDS:
        return n * M
    raise KeyError(estimator_id)


def estimate(
    estimator_id: str,
    game: CoalitionalGame,
    *,
    M: int,
    seed: int = 0,
    budget: BudgetMeter | None = None,
    Q: int = 2,
    eta: float = 0.0,
    mode: str = "visited",
    gtg_eps: float = 0.01,
    wshap_alpha: float = 1.0,
    wshap_beta: float = 4.0,
    grid: str = "stratified",
) -> ContributionVector:
    """Run an estimator by registry id.

    ``M`` is the estimator's own sample count: permutations for ``mc``,
    ``gtg`` and ``wshap``, subsets for ``banzhaf``, and draws per inclusion
    level for ``owen`` and ``owen-strict``.
    """
    if estimator_id == "owen":
        cfg = OwenConfig(Q=Q, M=M, eta=eta, normalization_mode=mode, seed=seed)
        return owen_walk(game, cfg, budget)
    if estimator_id == "owen-strict":
        return owen_strict(game, Q, M, seed=seed, budget=budget, grid=grid)
    if estimator_id == "mc":
        return mc_shapley(game, M, budget, seed)
    if estimator_id == "gtg":
        return gtg_shapley(game, gtg_eps, M, budget, seed)
    if estimator_id == "banzhaf":
        return data_banzhaf(game, M, budget, seed)
    if estimator_id == "wshap":
        return weighted_shap(game, wshap_alpha, wshap_beta, M, budget, seed)
    raise KeyError(f"unknown estimator {estimator_id!r}; expected one of {', '.join(ESTIMATOR_IDS)}")


ESTIMATORS: dict[str, Callable[..., ContributionVector]] = {
    name: (lambda game, _name=name, **kw: estimate(_name, game, **kw)) for name in ESTIMATOR_IDS
}
