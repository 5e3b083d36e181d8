"""Supervised training: class weighting, L2-regularized loss, Adam, plateau
LR scheduling and best-checkpoint selection."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace, asdict

import numpy as np

from . import numerics as nm
from .dataset import EXCLUDED, TEST, TRAIN, VAL
from .errors import ConfigError, DomainError, NumericError
from .model import ModelConfig, ParameterSet, build_model, forward, l2_parameter_names
from .numerics import Tensor

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class SchedulerConfig:
    patience: int = 5
    factor: float = 0.1
    min_lr: float = 1e-8

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError(f"scheduler patience must be >= 1, got {self.patience}")
        if not 0.0 < self.factor < 1.0:
            raise ConfigError(f"scheduler factor must be in (0, 1), got {self.factor}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    lr: float
    dropout_p: float = 0.0
    l2_scopes: dict[str, float] = field(default_factory=dict)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    balance: str = "class_weights"    # or "pre_balanced"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("epochs must be >= 0, batch_size >= 1, lr > 0")
        if self.scheduler.min_lr > self.lr:
            raise ConfigError(f"min_lr {self.scheduler.min_lr} exceeds lr {self.lr}")
        if self.balance not in ("class_weights", "pre_balanced"):
            raise ConfigError(f"unknown balance mode {self.balance!r}")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainHistory":
        return cls(**json.loads(text))


def split_dataset(labels: np.ndarray, ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
                  seed: int = 0, min_beats: int = 3) -> tuple[np.ndarray, list[str | int]]:
    """Per-subject stratified split into train/val/test index tags.

    Every subject contributes to each nonzero-ratio split. Subjects with
    fewer than `min_beats` beats are excluded and reported.

    Returns:
        (split tags aligned with labels: 0 train / 1 val / 2 test / -1 excluded,
         list of rejected labels)
    """
    labels = np.asarray(labels)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0):
        raise DomainError(f"split ratios must be three nonnegative values summing to 1, "
                          f"got {ratios}")
    rng = np.random.default_rng(seed)
    split = np.full(len(labels), EXCLUDED, dtype=np.int8)
    rejected = []
    for subject in np.unique(labels):
        idx = np.nonzero(labels == subject)[0]
        n = len(idx)
        if n < min_beats:
            rejected.append(subject.item() if hasattr(subject, "item") else subject)
            continue
        counts = [int(round(ratios[0] * n)), int(round(ratios[1] * n))]
        counts.append(n - counts[0] - counts[1])
        # each split with a positive ratio must get at least one beat
        for i in range(3):
            while ratios[i] > 0 and counts[i] < 1:
                donor = int(np.argmax(counts))
                counts[donor] -= 1
                counts[i] += 1
        perm = rng.permutation(idx)
        a, b = counts[0], counts[0] + counts[1]
        split[perm[:a]] = TRAIN
        split[perm[a:b]] = VAL
        split[perm[b:]] = TEST
    return split, rejected


def compute_class_weights(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """w_c = N / (C * n_c): rebalances so that w_c * n_c is constant."""
    labels = np.asarray(labels)
    if n_classes < 2:
        raise DomainError(f"need at least 2 classes, got {n_classes}")
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        missing = np.nonzero(counts == 0)[0].tolist()
        raise DomainError(f"classes {missing} have no samples; cannot weight")
    return len(labels) / (n_classes * counts.astype(np.float64))


def loss(probs: Tensor, labels: np.ndarray, class_weights: np.ndarray | None,
         params: ParameterSet | None, l2_scopes: dict[str, float]) -> Tensor:
    """Weighted cross entropy plus per-scope L2 penalties."""
    total = nm.cross_entropy(probs, labels, class_weights)
    if l2_scopes:
        if params is None:
            raise DomainError("loss: l2_scopes given without parameters")
        for scope in sorted(l2_scopes):
            lam = l2_scopes[scope]
            for name in l2_parameter_names(params, scope):
                total = nm.add(total, nm.mul(nm.sum_squares(params.tensors[name]), lam))
    return total


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: ParameterSet) -> "AdamState":
        return cls({k: np.zeros_like(p.data) for k, p in params.tensors.items()},
                   {k: np.zeros_like(p.data) for k, p in params.tensors.items()})


def adam_step(params: ParameterSet, grads: dict[str, np.ndarray], state: AdamState,
              lr: float, betas: tuple[float, float] = ADAM_BETAS,
              eps: float = ADAM_EPS) -> AdamState:
    """One bias-corrected Adam update; parameter data is replaced, not mutated."""
    b1, b2 = betas
    state.t += 1
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.tensors.items():
        g = grads.get(name)
        if g is None:
            continue
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


@dataclass
class PlateauState:
    lr: float
    patience: int
    factor: float
    min_lr: float
    best: float = math.inf
    bad_epochs: int = 0

    @classmethod
    def from_config(cls, lr: float, cfg: SchedulerConfig) -> "PlateauState":
        return cls(lr, cfg.patience, cfg.factor, cfg.min_lr)


def reduce_lr_on_plateau(state: PlateauState, val_loss: float) -> float:
    """Reduce lr after `patience` consecutive epochs without strict improvement."""
    if val_loss < state.best:
        state.best = val_loss
        state.bad_epochs = 0
    else:
        state.bad_epochs += 1
        if state.bad_epochs >= state.patience:
            state.lr = max(state.lr * state.factor, state.min_lr)
            state.bad_epochs = 0
    return state.lr


def iter_minibatches(indices: np.ndarray, batch_size: int):
    """Consecutive chunks of an (already shuffled) index array."""
    for start in range(0, len(indices), batch_size):
        yield indices[start:start + batch_size]


def evaluate_scores(params: ParameterSet, data, indices: np.ndarray,
                    batch_size: int = 32) -> np.ndarray:
    """Eval-mode class probabilities for the given sample indices."""
    out = np.empty((len(indices), params.config.n_classes), dtype=np.float32)
    for pos in range(0, len(indices), batch_size):
        chunk = indices[pos:pos + batch_size]
        images = data.batch(chunk, train=False)
        out[pos:pos + len(chunk)] = forward(params, images, "eval").data
    return out


def evaluate_accuracy(params: ParameterSet, data, indices: np.ndarray,
                      batch_size: int = 32) -> float:
    scores = evaluate_scores(params, data, indices, batch_size)
    return float(np.mean(scores.argmax(axis=1) == data.labels[indices]))


def train(config: TrainConfig, model_config: ModelConfig, data,
          init_params: ParameterSet | None = None) -> tuple[ParameterSet, TrainHistory]:
    """Shuffled minibatch training with augmentation on the train split only.

    Keeps the checkpoint with the lowest validation loss; when the dataset
    has no validation split the final parameters are returned and the
    scheduler tracks training loss instead.

    Raises:
        NumericError: if the loss diverges to NaN or infinity.
    """
    if model_config.dropout_p != config.dropout_p:
        raise ConfigError(
            f"dropout_p disagrees between model config ({model_config.dropout_p}) "
            f"and train config ({config.dropout_p})")
    train_idx = data.train_idx
    if len(train_idx) == 0:
        raise DomainError("train: dataset has no training samples")
    if init_params is not None:
        if init_params.config != model_config:
            raise ConfigError("train: init_params were built for a different model config")
        params = init_params.copy()
    else:
        params = build_model(model_config, config.seed)
    labels = data.labels
    if config.balance == "class_weights":
        class_weights = compute_class_weights(labels[train_idx], model_config.n_classes)
    else:
        class_weights = None
    val_idx = data.val_idx
    adam = AdamState.init(params)
    sched = PlateauState.from_config(config.lr, config.scheduler)
    history = TrainHistory()
    best_loss = math.inf
    best_params = params
    for epoch in range(config.epochs):
        epoch_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 1, epoch)))
        order = epoch_rng.permutation(train_idx)
        lr_used = sched.lr
        loss_sum = 0.0
        hit = 0
        for batch_no, chunk in enumerate(iter_minibatches(order, config.batch_size)):
            images = data.batch(chunk, train=True, epoch=epoch)
            drop_rng = np.random.default_rng(
                np.random.SeedSequence((config.seed, 2, epoch, batch_no)))
            probs = forward(params, images, "train", rng=drop_rng)
            batch_loss = loss(probs, labels[chunk], class_weights, params, config.l2_scopes)
            value = batch_loss.item()
            if not math.isfinite(value):
                raise NumericError(
                    f"training diverged: loss={value} at epoch {epoch}, batch {batch_no}, "
                    f"lr={lr_used}")
            loss_sum += value * len(chunk)
            hit += int((probs.data.argmax(axis=1) == labels[chunk]).sum())
            nm.backward(batch_loss)
            adam_step(params, {k: t.grad for k, t in params.tensors.items()}, adam, lr_used)
            params.zero_grad()
        history.train_loss.append(loss_sum / len(train_idx))
        history.train_acc.append(hit / len(train_idx))
        history.lr.append(lr_used)
        if len(val_idx) > 0:
            scores = evaluate_scores(params, data, val_idx, config.batch_size)
            v_probs = nm.tensor(scores)
            v_loss = nm.cross_entropy(v_probs, labels[val_idx], class_weights).item()
            v_acc = float(np.mean(scores.argmax(axis=1) == labels[val_idx]))
            history.val_loss.append(v_loss)
            history.val_acc.append(v_acc)
            monitored = v_loss
        else:
            monitored = history.train_loss[-1]
        if monitored < best_loss:
            best_loss = monitored
            best_params = params.copy()
            history.best_epoch = epoch
        reduce_lr_on_plateau(sched, monitored)
    if config.epochs == 0 or len(val_idx) == 0:
        best_params = params
        history.best_epoch = config.epochs - 1 if config.epochs else -1
    return best_params, history
