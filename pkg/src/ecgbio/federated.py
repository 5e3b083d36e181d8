"""FedAvg simulation: client partitioning, local training, sample-weighted
parameter aggregation and multi-round orchestration.

Clients exchange parameters only; the update type carries no samples, so raw
data never crosses the client boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace, asdict

import numpy as np

from . import numerics as nm
from .dataset import EXCLUDED, TRAIN
from .errors import ConfigError, DomainError
from .model import ModelConfig, ParameterSet, build_model
from .training import TrainConfig, evaluate_accuracy, train


@dataclass
class ClientState:
    """One simulated client: id, local data view, local parameters."""
    client_id: int
    data: object               # pipeline view whose train split is the local partition
    params: ParameterSet | None = None

    @property
    def n_samples(self) -> int:
        return len(self.data.train_idx)


@dataclass
class ClientUpdate:
    """What a client sends back: parameters and a sample count, nothing else."""
    client_id: int
    params: ParameterSet
    n_samples: int


@dataclass
class RoundRecord:
    round_index: int
    client_val_acc: dict[int, float]
    global_acc_before: float
    global_acc_after: float
    weights: dict[int, float]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FedConfig:
    n_clients: int
    rounds: int
    local_epochs: int
    partition: str = "by_subject"   # or "iid"
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise ConfigError(f"n_clients must be >= 1, got {self.n_clients}")
        if self.rounds < 0 or self.local_epochs < 0:
            raise ConfigError("rounds and local_epochs must be >= 0")
        if self.partition not in ("iid", "by_subject"):
            raise ConfigError(f"unknown partition mode {self.partition!r}")


def partition_clients(data, n_clients: int, mode: str = "by_subject",
                      seed: int = 0) -> list[ClientState]:
    """Split the dataset's train split into disjoint, exhaustive client partitions.

    by_subject assigns whole subjects to single clients; iid shuffles beats.
    Validation and test indices stay server-side and are excluded from every
    client view.
    """
    if n_clients < 2:
        raise DomainError(f"partition_clients: need >= 2 clients, got {n_clients}")
    train_idx = data.train_idx
    if len(train_idx) == 0:
        raise DomainError("partition_clients: dataset has no training samples")
    rng = np.random.default_rng(seed)
    parts: list[np.ndarray] = []
    if mode == "iid":
        shuffled = rng.permutation(train_idx)
        parts = [shuffled[i::n_clients] for i in range(n_clients)]
    elif mode == "by_subject":
        subjects = np.unique(data.labels[train_idx])
        if n_clients > len(subjects):
            raise DomainError(
                f"partition_clients: {n_clients} clients but only {len(subjects)} subjects")
        order = rng.permutation(subjects)
        groups = [order[i::n_clients] for i in range(n_clients)]
        for group in groups:
            mask = np.isin(data.labels[train_idx], group)
            parts.append(train_idx[mask])
    else:
        raise DomainError(f"partition_clients: unknown mode {mode!r}")
    clients = []
    for cid, part in enumerate(parts):
        split = np.full(len(data.labels), EXCLUDED, dtype=np.int8)
        split[np.sort(part)] = TRAIN
        clients.append(ClientState(cid, data.with_split(split)))
    return clients


def client_update(global_params: ParameterSet, client: ClientState, local_epochs: int,
                  train_config: TrainConfig) -> ClientUpdate:
    """Local training from the broadcast parameters; returns full parameters.

    The client view has no validation split, so training returns the final
    epoch's parameters (classic FedAvg).
    """
    cfg = replace(train_config, epochs=local_epochs)
    params, _ = train(cfg, global_params.config, client.data, init_params=global_params)
    client.params = params
    return ClientUpdate(client.client_id, params, client.n_samples)


def fedavg_aggregate(updates: list[ClientUpdate]) -> ParameterSet:
    """Sample-count-weighted mean of client parameters (and batch-norm buffers).

    Accumulation runs in client-id order so the result is bit-reproducible
    and independent of the argument ordering.
    """
    if not updates:
        raise DomainError("fedavg_aggregate: no updates")
    updates = sorted(updates, key=lambda u: u.client_id)
    ref = updates[0].params
    total = float(sum(u.n_samples for u in updates))
    if total <= 0:
        raise DomainError("fedavg_aggregate: total sample count is zero")
    for u in updates[1:]:
        for name, t in ref.tensors.items():
            other = u.params.tensors.get(name)
            if other is None or other.shape != t.shape:
                raise DomainError(
                    f"fedavg_aggregate: client {u.client_id} tensor {name!r} has shape "
                    f"{None if other is None else other.shape}, expected {t.shape}")
    out_tensors = {}
    for name in ref.tensors:
        acc = np.zeros(ref.tensors[name].shape, dtype=np.float64)
        for u in updates:
            acc += (u.n_samples / total) * u.params.tensors[name].data.astype(np.float64)
        out_tensors[name] = nm.tensor(acc.astype(np.float32), requires_grad=True)
    out_buffers = {}
    for name in ref.buffers:
        acc = np.zeros(ref.buffers[name].shape, dtype=np.float64)
        for u in updates:
            acc += (u.n_samples / total) * u.params.buffers[name].astype(np.float64)
        out_buffers[name] = acc.astype(np.float32)
    return ParameterSet(ref.config, out_tensors, out_buffers, ref.version)


def run_rounds(config: FedConfig, model_config: ModelConfig, train_config: TrainConfig,
               data) -> tuple[ParameterSet, list[RoundRecord]]:
    """Broadcast -> local update -> aggregate -> evaluate, `rounds` times.

    Per-client accuracies and the global before/after accuracies are measured
    server-side on the dataset's validation split.
    """
    global_params = build_model(model_config, config.seed)
    if config.n_clients == 1:
        split = np.full(len(data.labels), EXCLUDED, dtype=np.int8)
        split[data.train_idx] = TRAIN
        clients = [ClientState(0, data.with_split(split))]
    else:
        clients = partition_clients(data, config.n_clients, config.partition, config.seed)
    val_idx = data.val_idx
    history: list[RoundRecord] = []
    for rnd in range(config.rounds):
        updates = []
        client_acc = {}
        for client in clients:
            seed = int(np.random.SeedSequence(
                (train_config.seed, rnd, client.client_id)).generate_state(1)[0])
            cfg = replace(train_config, seed=seed)
            update = client_update(global_params, client, config.local_epochs, cfg)
            updates.append(update)
            if len(val_idx):
                client_acc[client.client_id] = evaluate_accuracy(
                    update.params, data, val_idx, train_config.batch_size)
        acc_before = evaluate_accuracy(global_params, data, val_idx,
                                       train_config.batch_size) if len(val_idx) else float("nan")
        global_params = fedavg_aggregate(updates)
        acc_after = evaluate_accuracy(global_params, data, val_idx,
                                      train_config.batch_size) if len(val_idx) else float("nan")
        total = float(sum(u.n_samples for u in updates))
        weights = {u.client_id: u.n_samples / total for u in updates}
        history.append(RoundRecord(rnd, client_acc, acc_before, acc_after, weights))
    return global_params, history


def history_to_json(history: list[RoundRecord]) -> str:
    return json.dumps([r.to_dict() for r in history], sort_keys=True, indent=2)
