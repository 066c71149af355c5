"""AUROC / ROC curves, the IID-to-OOD degradation ratio, and a saliency
overlap score against ground-truth relevant-feature masks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .masking import SaliencyMap
from .network import NetworkParams, forward
from .objectives import softmax


@dataclass
class EvalReport:
    auroc_iid: float
    auroc_ood: float
    difference: float  # ood - iid
    relative_degradation: float  # (iid - ood) / iid
    average: float

    @classmethod
    def from_aurocs(cls, auroc_iid: float, auroc_ood: float) -> "EvalReport":
        return cls(
            auroc_iid=auroc_iid,
            auroc_ood=auroc_ood,
            difference=auroc_ood - auroc_iid,
            relative_degradation=degradation(auroc_iid, auroc_ood),
            average=(auroc_iid + auroc_ood) / 2.0,
        )


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    n_pos = int((labels == 1).sum())
    if n_pos == 0 or n_pos == labels.size:
        raise ValueError(
            f"need both classes present, got {n_pos} positives of {labels.size}"
        )
    return scores, labels.astype(np.int64)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, ties sharing the mean rank of their block."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties 1/2.

    Rank-based: exactly equal to the pairwise count, at any tie pattern.
    """
    scores, labels = _check_binary(scores, labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    rank_sum = _average_ranks(scores)[pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def roc_points(scores, labels) -> list[tuple[float, float]]:
    """(fpr, tpr) staircase from (0,0) to (1,1), one point per threshold."""
    scores, labels = _check_binary(scores, labels)
    n_pos = int((labels == 1).sum())
    n_neg = labels.size - n_pos
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        block = labels[order[i : j + 1]]
        tp += int((block == 1).sum())
        fp += int((block == 0).sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j + 1
    return points


def roc_area(points) -> float:
    """Trapezoidal area under an ROC staircase."""
    area = 0.0
    for (f0, t0), (f1, t1) in zip(points[:-1], points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2.0
    return area


def degradation(auroc_iid: float, auroc_ood: float) -> float:
    """(iid - ood) / iid; positive means the model lost ground off-distribution."""
    if auroc_iid <= 0:
        raise ValueError(f"auroc_iid must be positive, got {auroc_iid}")
    return (auroc_iid - auroc_ood) / auroc_iid


def saliency_overlap(saliency: SaliencyMap, relevant_mask, q: float = 0.1) -> float:
    """Fraction of the top ceil(q*d) features by |saliency| inside the mask."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    mask = np.asarray(relevant_mask, dtype=bool).reshape(-1)
    values = saliency.values[0]
    if mask.size != values.size:
        raise ValueError(f"mask length {mask.size} != saliency length {values.size}")
    if not mask.any():
        raise ValueError("relevant_mask is empty")
    top = math.ceil(q * values.size)
    # stable sort on the negated magnitudes: ties fall back to ascending index
    picked = np.argsort(-np.abs(values), kind="stable")[:top]
    return float(mask[picked].mean())


def positive_scores(params: NetworkParams, features: np.ndarray) -> np.ndarray:
    """Positive-class softmax probability per row."""
    return softmax(forward(params, features))[:, 1]


def evaluate(params: NetworkParams, test_iid, test_ood) -> EvalReport:
    """AUROC on both test sets plus the derived comparison fields."""
    if params.spec.num_classes != 2:
        raise ValueError("evaluate requires a binary classifier")
    iid = auroc(positive_scores(params, test_iid.features), test_iid.labels)
    ood = auroc(positive_scores(params, test_ood.features), test_ood.labels)
    return EvalReport.from_aurocs(iid, ood)


def write_eval_report(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("auroc_iid,auroc_ood,difference,relative_degradation,average\n")
        fh.write(
            f"{report.auroc_iid!r},{report.auroc_ood!r},{report.difference!r},"
            f"{report.relative_degradation!r},{report.average!r}\n"
        )


def write_roc_csv(points, path) -> None:
    with open(path, "w") as fh:
        fh.write("fpr,tpr\n")
        for fpr, tpr in points:
            fh.write(f"{fpr!r},{tpr!r}\n")
