"""Ranking and correlation metrics, reported per annotator and averaged.

Cross-annotator label comparisons are unreliable by construction, so every
metric is computed inside each annotator's subset and the final numbers are
the unweighted mean over annotators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import MetricError

__all__ = ["MetricReport", "pra", "srocc", "plcc", "average_ranks", "evaluate"]


def _vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape[0] < 2:
        raise MetricError(f"{name} needs at least 2 values, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise MetricError(f"{name} contains non-finite values")
    return arr


def pra(predictions, labels) -> float:
    """Pairwise ranking accuracy over unordered pairs with distinct labels.

    A pair counts as correct when the predicted order matches the labeled
    order; prediction ties count as incorrect (a constant predictor must not
    score half). Label-tied pairs are excluded from the denominator.
    """
    y = _vector(predictions, "predictions")
    t = _vector(labels, "labels")
    if y.shape != t.shape:
        raise MetricError(f"length mismatch: {y.shape[0]} predictions vs {t.shape[0]} labels")
    i, j = np.triu_indices(len(y), k=1)
    label_sign = np.sign(t[i] - t[j])
    rankable = label_sign != 0
    total = int(rankable.sum())
    if total == 0:
        raise MetricError("no rankable pairs: all labels tied")
    pred_sign = np.sign(y[i] - y[j])
    correct = int(np.count_nonzero((pred_sign == label_sign) & rankable))
    return correct / total


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values receive the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise MetricError("zero variance: correlation undefined")
    return float((da @ db) / np.sqrt(va * vb))


def srocc(predictions, labels) -> float:
    """Spearman rank correlation.

    Tie-free inputs use the closed form 1 - 6*sum(d^2)/(n(n^2-1)) on the rank
    differences; inputs with ties fall back to the Pearson correlation of
    average ranks (the two differ under ties, and only the latter stays a
    correlation there).
    """
    y = _vector(predictions, "predictions")
    t = _vector(labels, "labels")
    if y.shape != t.shape:
        raise MetricError(f"length mismatch: {y.shape[0]} predictions vs {t.shape[0]} labels")
    if np.unique(y).size == 1 or np.unique(t).size == 1:
        raise MetricError("ranks undefined up to ties: constant vector")
    ranks_y = average_ranks(y)
    ranks_t = average_ranks(t)
    n = len(y)
    if np.unique(y).size == n and np.unique(t).size == n:
        d = ranks_y - ranks_t
        return float(1.0 - 6.0 * (d @ d) / (n * (n * n - 1.0)))
    return _pearson(ranks_y, ranks_t)


def plcc(predictions, labels) -> float:
    """Pearson linear correlation between predictions and labels."""
    y = _vector(predictions, "predictions")
    t = _vector(labels, "labels")
    if y.shape != t.shape:
        raise MetricError(f"length mismatch: {y.shape[0]} predictions vs {t.shape[0]} labels")
    return _pearson(y, t)


@dataclass
class MetricReport:
    """Per-annotator PRA/SROCC/PLCC with unweighted averages and subset sizes."""

    per_annotator: dict[int, dict[str, float]]
    counts: dict[int, int]
    pra: float
    srocc: float
    plcc: float

    def to_dict(self) -> dict:
        return {
            "per_annotator": {str(k): v for k, v in sorted(self.per_annotator.items())},
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "average": {"pra": self.pra, "srocc": self.srocc, "plcc": self.plcc},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> dict[str, float]:
        """Flat averaged triple in the conventional column order."""
        return {"pra": self.pra, "srocc": self.srocc, "plcc": self.plcc}


def evaluate(dataset, model) -> MetricReport:
    """Score a model on every annotator's subset and average the three metrics."""
    z = model.embed(dataset.features)
    predictions = model.predict_score(z).value[:, 0]
    per_annotator: dict[int, dict[str, float]] = {}
    counts: dict[int, int] = {}
    for k in dataset.annotators():
        members = np.nonzero(dataset.annotator_ids == k)[0]
        if len(members) < 2:
            raise MetricError(f"annotator {k}: needs >= 2 samples to evaluate, has {len(members)}")
        y = predictions[members]
        t = dataset.labels[members]
        try:
            per_annotator[int(k)] = {"pra": pra(y, t), "srocc": srocc(y, t), "plcc": plcc(y, t)}
        except MetricError as exc:
            raise MetricError(f"annotator {k}: {exc}") from None
        counts[int(k)] = len(members)
    keys = sorted(per_annotator)
    return MetricReport(
        per_annotator=per_annotator,
        counts=counts,
        pra=float(np.mean([per_annotator[k]["pra"] for k in keys])),
        srocc=float(np.mean([per_annotator[k]["srocc"] for k in keys])),
        plcc=float(np.mean([per_annotator[k]["plcc"] for k in keys])),
    )
