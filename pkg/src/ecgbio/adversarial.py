"""White-box FGSM attack and robustness sweep reporting."""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import numerics as nm
from .errors import DomainError
from .model import ParameterSet, forward


@dataclass
class AttackReport:
    """Accuracy and mean loss per perturbation budget."""
    epsilons: list[float]
    accuracy: list[float]
    mean_loss: list[float]
    base_accuracy: float
    base_loss: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AttackReport":
        return cls(**json.loads(text))


def input_gradient(params: ParameterSet, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the uniform cross entropy w.r.t. the input batch.

    Parameter gradients are suppressed for the duration of the call; the
    attack only ever needs the image gradient.
    """
    xt = nm.tensor(np.asarray(x, dtype=np.float32), requires_grad=True)
    flags = {name: t.requires_grad for name, t in params.tensors.items()}
    for t in params.tensors.values():
        t.requires_grad = False
    try:
        probs = forward(params, xt, "eval")
        loss = nm.cross_entropy(probs, y)  # uniform weights: attack ignores priors
        nm.backward(loss)
    finally:
        for name, t in params.tensors.items():
            t.requires_grad = flags[name]
    return xt.grad


def fgsm(params: ParameterSet, x: np.ndarray, y: np.ndarray, epsilon: float) -> np.ndarray:
    """x + epsilon * sign(grad_x loss), in normalized-image space, no clipping."""
    if epsilon < 0:
        raise DomainError(f"fgsm: epsilon must be >= 0, got {epsilon}")
    x = np.asarray(x, dtype=np.float32)
    if epsilon == 0.0:
        return x.copy()
    grad = input_gradient(params, x, y)
    x_adv = x + np.float32(epsilon) * np.sign(grad)
    assert float(np.max(np.abs(x_adv - x))) <= epsilon * (1 + 1e-6)
    return x_adv


def attack_sweep(params: ParameterSet, data, epsilons, indices=None,
                 batch_size: int = 32) -> AttackReport:
    """Clean evaluation followed by FGSM at each perturbation budget.

    `epsilons` must be strictly increasing. Uses the test split unless
    explicit indices are given.
    """
    epsilons = [float(e) for e in epsilons]
    if any(b <= a for a, b in zip(epsilons, epsilons[1:])):
        raise DomainError(f"attack_sweep: epsilons must be strictly increasing, got {epsilons}")
    if indices is None:
        indices = data.test_idx
    indices = np.asarray(indices)
    if len(indices) == 0:
        raise DomainError("attack_sweep: empty evaluation set")

    def eval_batches(eps: float) -> tuple[float, float]:
        hit = 0
        loss_sum = 0.0
        for pos in range(0, len(indices), batch_size):
            chunk = indices[pos:pos + batch_size]
            x = data.batch(chunk, train=False)
            y = data.labels[chunk]
            x_eval = fgsm(params, x, y, eps) if eps > 0 else x
            probs = forward(params, x_eval, "eval")
            loss_sum += nm.cross_entropy(probs, y).item() * len(chunk)
            hit += int((probs.data.argmax(axis=1) == y).sum())
        return hit / len(indices), loss_sum / len(indices)

    base_acc, base_loss = eval_batches(0.0)
    accuracy = []
    mean_loss = []
    for eps in epsilons:
        if eps == 0.0:
            accuracy.append(base_acc)
            mean_loss.append(base_loss)
        else:
            acc, ml = eval_batches(eps)
            accuracy.append(acc)
            mean_loss.append(ml)
    return AttackReport(epsilons, accuracy, mean_loss, base_acc, base_loss)
