"""Federated training loop with per-round contribution valuation.

Each round: pick k clients, train them locally from the global model, value
the k updates on the server's held-out set under a k*M evaluation budget,
aggregate, and fold the new estimates into the stored contribution vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models
from .aggregation import ModelParams, aggregate, shapfed_wa_weights, softmax_weights
from .budget import BudgetMeter
from .config import ExperimentConfig
from .data import Dataset, PartitionSpec, make_blobs, partition_dataset, split_eval_set
from .estimators import estimate
from .games import Coalition, CoalitionalGame, DegenerateGameError, normalize
from .idx import load_idx_pair
from .selection import BanditState, SelectionConfig, select_clients
from .streams import Purpose, derive_seed, stream

PHI_DECAY = 0.7


@dataclass
class ClientState:
    id: int
    indices: np.ndarray  # rows of the source dataset
    shard: Dataset
    model: ModelParams | None = None


@dataclass
class RoundRecord:
    round: int
    selected: tuple[int, ...]
    phi: np.ndarray  # stored contribution of every client after the round
    alpha: np.ndarray  # aggregation weights of the participants, in ``selected`` order
    eval_accuracy: float
    utility_calls: int
    valued: bool = True


@dataclass
class ServerState:
    cfg: ExperimentConfig
    seed: int
    source: Dataset
    eval_indices: np.ndarray
    eval_set: Dataset
    clients: list[ClientState]
    model: ModelParams
    phi: np.ndarray
    bandit: BanditState
    selection: SelectionConfig
    initial_accuracy: float
    records: list[RoundRecord] = field(default_factory=list)

    @property
    def t(self) -> int:
        return len(self.records)


def coalition_model(base: ModelParams, updates, members) -> ModelParams:
    members = list(members)
    if not members:
        return base
    if len(members) == 1:
        return updates[members[0]]
    stack = np.stack([updates[i].values for i in members])
    return base.with_values(stack.mean(axis=0))


def coalition_utility(base: ModelParams, updates, S, eval_set: Dataset, meter: BudgetMeter | None = None) -> float:
    """Eval accuracy of the uniform average of the members' models.

    ``updates`` maps player index to model; ``S`` is a Coalition, bitmask or
    iterable of indices.  The empty coalition scores the base model.  When a
    meter is given the call costs one evaluation.
    """
    if meter is not None:
        meter.charge(1)
    if isinstance(S, Coalition):
        members = S.members()
    elif isinstance(S, (int, np.integer)):
        members = [j for j in range(int(S).bit_length()) if S >> j & 1]
    else:
        members = list(S)
    return models.accuracy(coalition_model(base, updates, members), eval_set.features, eval_set.labels)


class RoundUtilityGame(CoalitionalGame):
    """Coalition accuracy over one round's participants, memoized per mask.

    Repeated masks still count as calls; the cache only saves the forward pass.
    """

    def __init__(self, base: ModelParams, updates: list[ModelParams], eval_set: Dataset):
        super().__init__(len(updates), name="round-utility")
        self.base = base
        self.updates = updates
        self.eval_set = eval_set
        self._cache: dict[int, float] = {}

    def _evaluate(self, mask: int) -> float:
        if mask not in self._cache:
            self._cache[mask] = coalition_utility(self.base, self.updates, mask, self.eval_set)
        return self._cache[mask]


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "idx":
        X, y = load_idx_pair(cfg.idx_images, cfg.idx_labels)
        n_classes = int(y.max()) + 1 if y.size else 1
        return Dataset(X, y, n_classes)
    return make_blobs(cfg.n_samples, cfg.n_classes, cfg.n_features, cfg.class_sep, cfg.data_seed)


def setup_run(cfg: ExperimentConfig, seed: int, source: Dataset | None = None) -> ServerState:
    """Split the data and build the initial server state for one seed.

    The evaluation set is drawn from the source data first; the long-tail
    subsample and the Dirichlet split act on what remains.
    """
    source = load_dataset(cfg) if source is None else source
    train_idx, eval_idx = split_eval_set(source.labels, cfg.eval_fraction, stream(seed, Purpose.PARTITION, 0))
    spec = PartitionSpec(cfg.n_clients, cfg.dirichlet_alpha, cfg.imbalance_factor, seed)
    shards = [train_idx[s] for s in partition_dataset(source.subset(train_idx), spec)]
    clients = [ClientState(i, s, source.subset(s)) for i, s in enumerate(shards)]
    eval_set = source.subset(eval_idx)
    model = models.init_model(
        cfg.model, source.features.shape[1], source.n_classes, stream(seed, Purpose.INIT), hidden=cfg.hidden
    )
    return ServerState(
        cfg=cfg,
        seed=seed,
        source=source,
        eval_indices=eval_idx,
        eval_set=eval_set,
        clients=clients,
        model=model,
        phi=np.zeros(cfg.n_clients),
        bandit=BanditState.fresh(cfg.n_clients),
        selection=SelectionConfig(epsilon=cfg.epsilon, c=cfg.confidence_c, tau=cfg.tau, k=cfg.clients_per_round),
        initial_accuracy=models.accuracy(model, eval_set.features, eval_set.labels),
    )


def _per_level(cfg: ExperimentConfig) -> int:
    if cfg.estimator == "owen":
        return cfg.M // cfg.Q
    if cfg.estimator == "owen-strict":
        return max(1, cfg.M // cfg.Q)
    if cfg.estimator == "banzhaf":
        return cfg.M * cfg.clients_per_round
    return cfg.M


def value_round(state: ServerState, updates: list[ModelParams]) -> tuple[np.ndarray | None, int]:
    """Estimate each participant's contribution; ``(None, 0)`` if the round is flat.

    The game is normalized by its empty and full coalitions, which are read
    once outside the budget.
    """
    cfg = state.cfg
    if cfg.estimator == "none":
        return None, 0
    game = RoundUtilityGame(state.model, updates, state.eval_set)
    try:
        norm = normalize(game)
    except DegenerateGameError:
        return None, 0
    meter = BudgetMeter(len(updates) * cfg.M)
    result = estimate(
        cfg.estimator,
        norm,
        M=_per_level(cfg),
        seed=derive_seed(state.seed, Purpose.VALUE, state.t),
        budget=meter,
        Q=cfg.Q,
        eta=cfg.eta,
        mode=cfg.owen_mode,
        gtg_eps=cfg.gtg_eps,
    )
    return np.asarray(result.values, dtype=float), meter.used


def run_round(state: ServerState) -> RoundRecord:
    cfg = state.cfg
    t = state.t
    if cfg.ablation:
        chosen = stream(state.seed, Purpose.SELECT, t).choice(cfg.n_clients, cfg.clients_per_round, replace=False)
        selected = np.sort(chosen)
    else:
        selected = select_clients(state.phi, state.bandit, state.selection, stream(state.seed, Purpose.SELECT, t))
    state.bandit.t += 1

    updates = []
    for i in selected:
        client = state.clients[i]
        client.model = models.local_train(
            state.model, client.shard, epochs=cfg.local_epochs, lr=cfg.lr, batch=cfg.batch,
            rng=stream(state.seed, Purpose.TRAIN, t, int(i)),
        )
        updates.append(client.model)

    est, calls = value_round(state, updates)

    if cfg.aggregator == "fedavg":
        alpha = np.full(len(updates), 1.0 / len(updates))
    elif cfg.aggregator == "shapfed-wa":
        grads = [models.last_layer(state.model.with_values(state.model.values - u.values)) for u in updates]
        alpha = shapfed_wa_weights(grads)
        if est is None and cfg.estimator == "none":
            est = alpha
    else:
        alpha = softmax_weights(est if est is not None else np.zeros(len(updates)))

    if est is not None:
        state.phi[selected] = PHI_DECAY * state.phi[selected] + (1.0 - PHI_DECAY) * est
    state.model = aggregate(updates, alpha)
    record = RoundRecord(
        round=t + 1,
        selected=tuple(int(i) for i in selected),
        phi=state.phi.copy(),
        alpha=np.asarray(alpha, dtype=float).copy(),
        eval_accuracy=models.accuracy(state.model, state.eval_set.features, state.eval_set.labels),
        utility_calls=calls,
        valued=est is not None and cfg.estimator != "none",
    )
    state.records.append(record)
    return record


@dataclass
class RunResult:
    seed: int
    initial_accuracy: float
    records: list[RoundRecord]

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].eval_accuracy if self.records else self.initial_accuracy

    @property
    def utility_calls(self) -> int:
        return sum(r.utility_calls for r in self.records)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    runs: list[RunResult]

    @property
    def final_accuracies(self) -> list[float]:
        return [r.final_accuracy for r in self.runs]

    @property
    def mean_final_accuracy(self) -> float:
        return float(np.mean(self.final_accuracies))

    @property
    def std_final_accuracy(self) -> float:
        return float(np.std(self.final_accuracies))

    def summary(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "rounds": self.config.rounds,
            "runs": [
                {
                    "seed": r.seed,
                    "initial_accuracy": r.initial_accuracy,
                    "final_accuracy": r.final_accuracy,
                    "utility_calls": r.utility_calls,
                }
                for r in self.runs
            ],
            "mean_final_accuracy": self.mean_final_accuracy,
            "std_final_accuracy": self.std_final_accuracy,
        }


def run_seed(cfg: ExperimentConfig, seed: int, source: Dataset | None = None) -> RunResult:
    state = setup_run(cfg, seed, source)
    for _ in range(cfg.rounds):
        run_round(state)
    return RunResult(seed, state.initial_accuracy, state.records)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    source = load_dataset(cfg)
    return ExperimentReport(cfg, [run_seed(cfg, s, source) for s in cfg.seeds])
