"""Round-by-round federated training with backdoor attackers."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import aggregation as agg
from .certification import clip_and_perturb, rho_schedule
from .config import ExperimentConfig
from .data import AttackSpec, Dataset, inject_trigger, load_csv, partition, synth_dataset, train_test_split
from .model import TrainConfig, local_train, zeros
from .seeding import derive_rng

log = logging.getLogger(__name__)

__all__ = [
    "ClientState",
    "RoundLedger",
    "ExperimentResult",
    "DivergenceError",
    "Aggregator",
    "make_aggregator",
    "run_round",
    "setup_clients",
    "run_experiment",
]


class DivergenceError(FloatingPointError):
    pass


@dataclass
class ClientState:
    id: int
    data: Dataset
    poisoned: Dataset | None = None
    history: np.ndarray | None = None

    @property
    def malicious(self) -> bool:
        return self.poisoned is not None

    @property
    def size(self) -> int:
        return len(self.data)


@dataclass
class RoundLedger:
    round: int
    updates: np.ndarray
    weights: np.ndarray
    global_before: np.ndarray
    aggregated: np.ndarray
    global_after: np.ndarray
    attacking: tuple[int, ...] = ()


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    theta: np.ndarray
    ledgers: list[RoundLedger]
    clients: list[ClientState]
    test: Dataset | None = None

    @property
    def final_weights(self) -> np.ndarray | None:
        return self.ledgers[-1].weights if self.ledgers else None

    @property
    def attacker_ids(self) -> list[int]:
        return [c.id for c in self.clients if c.malicious]


# (updates, histories, sizes, round) -> (aggregated update, per-client weights)
Aggregator = Callable[[np.ndarray, np.ndarray, np.ndarray, int], tuple[np.ndarray, np.ndarray]]


def make_aggregator(name: str, cfg: ExperimentConfig) -> Aggregator:
    """Build the named aggregation rule with settings from ``cfg``."""
    params = agg.WpcraParams(
        eps_s=cfg.eps_s, eps_r=cfg.eps_r, eps_g=cfg.eps_g, eps_w=cfg.eps_w,
        max_iters=cfg.max_iters, pardon=cfg.pardon, reweight=cfg.reweight, median=cfg.median,
    )

    def size_weights(sizes):
        return sizes / sizes.sum()

    if name == "wpcra":
        return lambda U, H, sizes, t: agg.aggregate_wpcra(U, H, sizes, params)
    if name in ("mean", "crfl"):
        return lambda U, H, sizes, t: (agg.aggregate_mean(U, sizes), size_weights(sizes))
    if name in ("rfa", "crfl-rfa"):
        def rfa(U, H, sizes, t):
            res = agg.wgme(U, np.ones(len(U)), sizes, cfg.eps_r, cfg.eps_g, cfg.max_iters)
            return res.median, res.weights
        return rfa
    if name == "krum":
        def krum(U, H, sizes, t):
            idx = int(np.argmin(agg.krum_scores(U, cfg.num_attackers)))
            w = np.zeros(len(U))
            w[idx] = 1.0
            return U[idx].copy(), w
        return krum
    if name == "perturbing":
        def perturbing(U, H, sizes, t):
            rng = derive_rng(cfg.seed, "perturbing", t)
            m = agg.aggregate_perturbing(U, sizes, cfg.perturb_clip, cfg.sigma, rng)
            return m, size_weights(sizes)
        return perturbing
    raise ValueError(f"unknown aggregator {name!r}; choose from {', '.join(agg.AGGREGATORS)}")


def run_round(
    t: int,
    theta: np.ndarray,
    clients: list[ClientState],
    attack: AttackSpec,
    aggregator: Aggregator,
    train_cfg: TrainConfig,
    seed: int = 0,
) -> tuple[np.ndarray, RoundLedger]:
    """One communication round; returns the aggregated (not yet clipped) model and its ledger.

    Client histories are updated in place.
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    attacking = attack.is_attack_round(t)
    updates = np.empty((len(clients), d))
    hit = []
    for k, client in enumerate(sorted(clients, key=lambda c: c.id)):
        poison = attacking and client.malicious
        data = client.poisoned if poison else client.data
        rng = derive_rng(seed, "train", client.id, t)
        w = local_train(theta, data.X, data.y, train_cfg, rng)
        if w.size != d:
            raise ValueError(f"client {client.id} returned {w.size} parameters, expected {d}")
        delta = w - theta
        if poison:
            delta = attack.scale_factor * delta
            hit.append(client.id)
        updates[k] = delta
        if client.history is None:
            client.history = np.zeros(d)
        client.history = client.history + delta

    ordered = sorted(clients, key=lambda c: c.id)
    histories = np.stack([c.history for c in ordered])
    sizes = np.array([c.size for c in ordered], dtype=float)
    m, weights = aggregator(updates, histories, sizes, t)
    new_theta = theta + m
    ledger = RoundLedger(
        round=t, updates=updates, weights=np.asarray(weights, dtype=float),
        global_before=theta, aggregated=new_theta, global_after=new_theta, attacking=tuple(hit),
    )
    return new_theta, ledger


def _select_attackers(shards: list[Dataset], cfg: ExperimentConfig) -> list[int]:
    R = cfg.num_attackers
    if R == 0:
        return []
    if cfg.attacker_selection == "first":
        return list(range(R))
    if cfg.attacker_selection == "random":
        rng = derive_rng(cfg.seed, "attackers")
        return sorted(int(i) for i in rng.choice(len(shards), size=R, replace=False))
    sizes = np.array([len(s) for s in shards])
    return sorted(int(i) for i in np.argsort(-sizes, kind="stable")[:R])


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.csv_path:
        return load_csv(cfg.csv_path, cfg.label_column, cfg.group_column or None, cfg.normalize)
    return synth_dataset(cfg.num_samples, cfg.num_features, cfg.num_classes,
                         cfg.class_separation, derive_rng(cfg.seed, "data"))


def attack_spec(cfg: ExperimentConfig, attacker_ids=()) -> AttackSpec:
    return AttackSpec(
        trigger_features=cfg.trigger_features, gamma=cfg.gamma, target_label=cfg.target_label,
        poison_fraction=cfg.poison_fraction, scale_factor=cfg.scale_factor,
        adversarial_round=max(cfg.adversarial_round, 1), attacker_ids=tuple(attacker_ids),
        repeat=cfg.repeat_attack,
    )


def setup_clients(cfg: ExperimentConfig) -> tuple[list[ClientState], Dataset, AttackSpec]:
    """Load or synthesize data, split off the test set, shard it and poison the attackers."""
    data = load_dataset(cfg)
    train, test = train_test_split(data, cfg.test_fraction, derive_rng(cfg.seed, "split"))
    if cfg.num_clients == 1:
        shards = [train]
    else:
        shards = partition(train, cfg.num_clients, cfg.partition,
                           derive_rng(cfg.seed, "partition"), cfg.dirichlet_beta)
    attackers = _select_attackers(shards, cfg)
    spec = attack_spec(cfg, attackers)
    clients = []
    for i, shard in enumerate(shards):
        poisoned = None
        if i in attackers:
            poisoned = inject_trigger(shard, spec, derive_rng(cfg.seed, "poison", i))
        clients.append(ClientState(id=i, data=shard, poisoned=poisoned))
    return clients, test, spec


def run_experiment(
    cfg: ExperimentConfig,
    clients: list[ClientState] | None = None,
    test: Dataset | None = None,
    attack: AttackSpec | None = None,
    aggregator: Aggregator | None = None,
) -> ExperimentResult:
    """Train for ``cfg.rounds`` rounds from an all-zero model.

    With ex-post processing on, every round's aggregate is clipped to the
    round's threshold and, before the last round, perturbed with Gaussian noise.
    """
    if clients is None:
        clients, test, attack = setup_clients(cfg)
    if attack is None:
        attack = attack_spec(cfg, [c.id for c in clients if c.malicious])
    aggregator = aggregator or make_aggregator(cfg.aggregator, cfg)
    train_cfg = TrainConfig(cfg.learning_rate, cfg.local_iterations, cfg.batch_size or None)
    dims = {(c.data.num_features, c.data.num_classes) for c in clients}
    if len(dims) != 1:
        raise ValueError(f"clients disagree on (features, classes): {sorted(dims)}")
    F, C = dims.pop()
    theta = zeros(F, C)
    for c in clients:
        c.history = np.zeros(theta.size)

    T = cfg.rounds
    ex_post = cfg.uses_ex_post()
    ledgers = []
    for t in range(1, T + 1):
        theta, ledger = run_round(t, theta, clients, attack, aggregator, train_cfg, cfg.seed)
        if ex_post:
            theta = clip_and_perturb(theta, t, T, cfg.sigma, rho_schedule(t),
                                     derive_rng(cfg.seed, "noise", t))
        ledger.global_after = theta
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"global model became non-finite at round {t}")
        ledgers.append(ledger)
        log.debug("round %d: |theta| = %.4g", t, np.linalg.norm(theta))
    return ExperimentResult(config=cfg, theta=theta, ledgers=ledgers, clients=clients, test=test)
