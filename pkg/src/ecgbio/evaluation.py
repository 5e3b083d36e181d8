"""Biometric metric suite: confusion matrix, macro P/R/F1, top-k accuracy,
macro one-vs-rest ROC-AUC, and macro / top-5 equal error rates."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.stats import rankdata

from .errors import DomainError, ShapeError
from .model import predict_topk


@dataclass
class EerCurve:
    """FAR/FRR sweep for one class, plus the interpolated crossing."""
    class_index: int
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray
    eer: float


@dataclass
class MetricsReport:
    accuracy: float
    top5_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    roc_auc_macro: float
    eer_macro: float
    eer_top5: float
    per_class: list[dict] = field(default_factory=list)
    confusion: list[list[int]] = field(default_factory=list)
    excluded_classes: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def _check_scores(scores: np.ndarray, labels: np.ndarray):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or labels.shape != (scores.shape[0],):
        raise ShapeError(f"scores {scores.shape} do not match labels {labels.shape}")
    if len(labels) and (labels.min() < 0 or labels.max() >= scores.shape[1]):
        raise DomainError("label out of range for score matrix")
    return scores, labels


def confusion_and_prf(labels, predictions, n_classes: int):
    """Confusion matrix plus macro precision/recall/F1.

    Classes that were never predicted contribute precision 0 (they stay in
    the macro average).

    Returns:
        (confusion (C, C) with rows = true class, macro_p, macro_r, macro_f1,
         per-class dict list)
    """
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape:
        raise ShapeError(f"labels {labels.shape} vs predictions {predictions.shape}")
    if len(labels) == 0:
        raise DomainError("confusion_and_prf: empty input")
    if labels.min() < 0 or labels.max() >= n_classes or predictions.min() < 0 \
            or predictions.max() >= n_classes:
        raise DomainError("label or prediction out of range")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    tp = np.diag(cm).astype(np.float64)
    pred_pos = cm.sum(axis=0).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_pos > 0, tp / pred_pos, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    per_class = [{"class": int(c), "precision": float(precision[c]),
                  "recall": float(recall[c]), "f1": float(f1[c]),
                  "support": int(support[c])} for c in range(n_classes)]
    return cm, float(precision.mean()), float(recall.mean()), float(f1.mean()), per_class


def roc_auc_macro(scores, labels) -> tuple[float, list[int]]:
    """Unweighted mean of per-class one-vs-rest AUC (rank statistic, ties half).

    Classes without both a positive and a negative are excluded and reported.

    Returns:
        (macro AUC, excluded class indices)
    """
    scores, labels = _check_scores(scores, labels)
    aucs = []
    excluded = []
    for c in range(scores.shape[1]):
        pos = labels == c
        n_pos = int(pos.sum())
        n_neg = len(labels) - n_pos
        if n_pos == 0 or n_neg == 0:
            excluded.append(c)
            continue
        ranks = rankdata(scores[:, c], method="average")
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        aucs.append(auc)
    if not aucs:
        raise DomainError("roc_auc_macro: no class has both positives and negatives")
    return float(np.mean(aucs)), excluded


def _eer_sweep(genuine: np.ndarray, impostor: np.ndarray):
    """FAR/FRR over every distinct finite score, EER linearly interpolated.

    FAR(t) = fraction of impostor scores >= t; FRR(t) = fraction of genuine
    scores < t. The crossing is interpolated between adjacent thresholds,
    which makes the value invariant under strictly increasing transforms.
    """
    if genuine.size == 0 or impostor.size == 0:
        raise DomainError("EER needs at least one genuine and one impostor trial")
    finite = np.concatenate([genuine[np.isfinite(genuine)], impostor[np.isfinite(impostor)]])
    if finite.size == 0:
        raise DomainError("EER: no finite scores")
    grid = np.unique(finite)
    thresholds = np.concatenate([grid, [grid[-1] + 1.0]])  # top sentinel: reject all
    gs = np.sort(genuine)
    ims = np.sort(impostor)
    far = 1.0 - np.searchsorted(ims, thresholds, side="left") / len(ims)
    frr = np.searchsorted(gs, thresholds, side="left") / len(gs)
    diff = far - frr
    if diff[0] <= 0.0:
        # curves never cross from above; report the balanced point at the start
        eer = 0.5 * (far[0] + frr[0])
        return float(eer), thresholds, far, frr
    k = int(np.argmax(diff <= 0.0))
    if diff[k] == 0.0:
        eer = far[k]
    else:
        f0, f1 = far[k - 1], far[k]
        r0, r1 = frr[k - 1], frr[k]
        u = (f0 - r0) / ((r1 - r0) - (f1 - f0))
        eer = f0 + (f1 - f0) * u
    return float(eer), thresholds, far, frr


def eer_curves(scores, labels) -> tuple[float, list[EerCurve], list[int]]:
    """Per-class one-vs-rest EER curves and their unweighted mean.

    Returns:
        (macro EER, per-class curves, excluded class indices)
    """
    scores, labels = _check_scores(scores, labels)
    curves = []
    excluded = []
    for c in range(scores.shape[1]):
        pos = labels == c
        if pos.sum() == 0 or pos.sum() == len(labels):
            excluded.append(c)
            continue
        genuine = scores[pos, c]
        impostor = scores[~pos, c]
        eer, thresholds, far, frr = _eer_sweep(genuine, impostor)
        curves.append(EerCurve(c, thresholds, far, frr, eer))
    if not curves:
        raise DomainError("eer_curves: no class has both genuine and impostor trials")
    macro = float(np.mean([cv.eer for cv in curves]))
    return macro, curves, excluded


def eer_macro(scores, labels) -> float:
    return eer_curves(scores, labels)[0]


def topk_accuracy(scores, labels, k: int) -> float:
    """Fraction of rows whose true label is among the k best scores."""
    scores, labels = _check_scores(scores, labels)
    top = predict_topk(scores, k)
    return float(np.mean((top == labels[:, None]).any(axis=1)))


def eer_top5(scores, labels, k: int = 5) -> float:
    """EER where a trial is accepted when its score passes the threshold AND
    the trial's class ranks in the top-k of its row.

    A genuine trial scores the true class of a row; every other class of the
    row is an impostor trial. Gated-out trials can never be accepted, which
    is encoded as a score of -inf.
    """
    scores, labels = _check_scores(scores, labels)
    B, C = scores.shape
    k = min(k, C)
    top = predict_topk(scores, k)
    gated = np.zeros((B, C), dtype=bool)
    np.put_along_axis(gated, top, True, axis=1)
    eff = np.where(gated, scores, -np.inf)
    genuine = eff[np.arange(B), labels]
    mask = np.ones((B, C), dtype=bool)
    mask[np.arange(B), labels] = False
    impostor = eff[mask]
    eer, _, _, _ = _eer_sweep(genuine, impostor)
    return eer


def compute_report(scores, labels, n_classes: int | None = None) -> MetricsReport:
    """Full metric bundle from eval-mode probabilities."""
    scores, labels = _check_scores(scores, labels)
    if n_classes is None:
        n_classes = scores.shape[1]
    preds = scores.argmax(axis=1)
    cm, macro_p, macro_r, macro_f1, per_class = confusion_and_prf(labels, preds, n_classes)
    auc, auc_excluded = roc_auc_macro(scores, labels)
    macro_eer, _, eer_excluded = eer_curves(scores, labels)
    return MetricsReport(
        accuracy=float(np.mean(preds == labels)),
        top5_accuracy=topk_accuracy(scores, labels, min(5, n_classes)),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f1,
        roc_auc_macro=auc,
        eer_macro=macro_eer,
        eer_top5=eer_top5(scores, labels),
        per_class=per_class,
        confusion=cm.tolist(),
        excluded_classes=sorted(set(auc_excluded) | set(eer_excluded)),
    )
