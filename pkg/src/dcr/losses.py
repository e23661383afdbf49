"""Objective terms for disjoint contrastive regression.

Terms: pairwise margin ranking loss (optionally restricted by the
same-annotator mask), a batch-distribution regularizer pulling predictions
toward zero mean / unit spread, the annotator cross-entropy, and its exact
negation used for adversarial invariance. `total_loss` combines them.

Ranking losses average over contributing ordered pairs (not over the batch
size), so their magnitude is stable across batch sizes and masks. Pairs with
tied labels are excluded: penalizing both orderings of a tie would be wrong
at any positive margin. Self-pairs are excluded as constant, gradient-free
terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DataError, ShapeMismatchError

__all__ = [
    "Batch",
    "LossWeights",
    "LossReport",
    "disjoint_mask",
    "margin_ranking_loss",
    "disjoint_ranking_loss",
    "distribution_regularizer",
    "annotator_ce_loss",
    "annotator_confusion_loss",
    "total_loss",
    "mse_loss",
]


@dataclass
class Batch:
    """Predictions (N x 1 graph node), annotated labels, annotator ids, margin."""

    predictions: ad.Node
    labels: np.ndarray
    annotator_ids: np.ndarray
    margin: float = 0.0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)
        self.annotator_ids = np.asarray(self.annotator_ids, dtype=np.int64)
        n = self.labels.shape[0]
        if self.labels.ndim != 1 or self.annotator_ids.shape != (n,):
            raise ShapeMismatchError(
                f"labels {self.labels.shape} and annotator ids {self.annotator_ids.shape} "
                "must be matching 1-D arrays"
            )
        if self.predictions.shape != (n, 1):
            raise ShapeMismatchError(
                f"predictions must be ({n}, 1) to match {n} labels, got {self.predictions.shape}"
            )
        if not np.isfinite(self.labels).all():
            raise DataError("labels contain NaN or Inf")
        if self.margin < 0:
            raise DataError(f"margin must be >= 0, got {self.margin}")

    @property
    def size(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights of the regularizer, annotator CE, and confusion terms."""

    reg_weight: float = 0.2
    ce_weight: float = 0.2
    confusion_weight: float = 0.2

    def __post_init__(self):
        for name in ("reg_weight", "ce_weight", "confusion_weight"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass
class LossReport:
    """Per-term values and the weighted total of the combined objective."""

    rank: float
    reg: float
    annotator_ce: float
    annotator_confusion: float
    total: float
    node: ad.Node | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict[str, float]:
        return {
            "rank": self.rank,
            "reg": self.reg,
            "annotator_ce": self.annotator_ce,
            "annotator_confusion": self.annotator_confusion,
            "total": self.total,
        }


def disjoint_mask(annotator_ids) -> np.ndarray:
    """N x N binary matrix: 1 where samples i and j share an annotator (diagonal included)."""
    ids = np.asarray(annotator_ids)
    return (ids[:, None] == ids[None, :]).astype(np.float64)


def _ranking_pairs(labels: np.ndarray, mask: np.ndarray | None):
    """Ordered pairs (i, j), i != j, with distinct labels, restricted by `mask`.

    Returns parallel index arrays plus the label-order sign per pair (+1 when
    label_i > label_j). Row-major enumeration keeps summation order fixed.
    """
    diff = labels[:, None] - labels[None, :]
    keep = diff != 0.0
    if mask is not None:
        keep &= mask > 0.0
    i_idx, j_idx = np.nonzero(keep)
    signs = np.where(diff[i_idx, j_idx] > 0.0, 1.0, -1.0)
    return i_idx, j_idx, signs


def _pairwise_hinge(predictions: ad.Node, i_idx, j_idx, signs, margin: float) -> ad.Node:
    # One row per pair: gap_m = sign_m * (y_i - y_j).
    m = len(i_idx)
    diffs = ad.subtract(ad.gather_rows(predictions, i_idx), ad.gather_rows(predictions, j_idx))
    gaps = ad.multiply(ad.constant(signs.reshape(-1, 1), "pair_signs"), diffs)
    violations = ad.hinge_clamp(
        ad.subtract(ad.constant(np.full((m, 1), float(margin)), "margin"), gaps)
    )
    return ad.mean_all(violations)


def margin_ranking_loss(batch: Batch) -> ad.Node:
    """Hinge penalty on every ordered pair whose predicted order violates the labels.

    Mean over ordered pairs i != j with distinct labels of
    [margin - sign(label_i - label_j) * (y_i - y_j)]_+.
    """
    if batch.size < 2:
        raise DataError("ranking loss needs at least 2 samples")
    i_idx, j_idx, signs = _ranking_pairs(batch.labels, mask=None)
    if len(i_idx) == 0:
        raise DataError("no rankable pairs: all labels tied")
    return _pairwise_hinge(batch.predictions, i_idx, j_idx, signs, batch.margin)


def disjoint_ranking_loss(batch: Batch) -> ad.Node:
    """Margin ranking loss restricted to pairs labeled by the same annotator."""
    if batch.size < 2:
        raise DataError("ranking loss needs at least 2 samples")
    mask = disjoint_mask(batch.annotator_ids)
    i_idx, j_idx, signs = _ranking_pairs(batch.labels, mask=mask)
    if len(i_idx) == 0:
        raise DataError("no rankable same-annotator pairs in batch")
    return _pairwise_hinge(batch.predictions, i_idx, j_idx, signs, batch.margin)


def distribution_regularizer(predictions: ad.Node) -> ad.Node:
    """Pull batch predictions toward zero mean and unit spread.

    (mean y)^2 + (sum(y^2)/(N-1) - 1)^2. The spread term uses the raw second
    moment over N-1; together with the zero-mean term its fixed point is the
    standard-normal batch statistic.
    """
    n = predictions.shape[0]
    if n < 2:
        raise DataError(f"distribution regularizer needs at least 2 samples, got {n}")
    mean_term = ad.square(ad.mean_all(predictions))
    spread = ad.scalar_multiply(ad.sum_all(ad.square(predictions)), 1.0 / (n - 1))
    spread_term = ad.square(ad.subtract(spread, ad.constant([[1.0]], "one")))
    return ad.add(mean_term, spread_term)


def _one_hot(annotator_ids: np.ndarray, classes: int) -> np.ndarray:
    ids = np.asarray(annotator_ids, dtype=np.int64)
    if ids.min() < 0 or ids.max() >= classes:
        raise DataError(f"annotator ids must lie in [0, {classes}), got range "
                        f"[{ids.min()}, {ids.max()}]")
    onehot = np.zeros((len(ids), classes))
    onehot[np.arange(len(ids)), ids] = 1.0
    return onehot


def annotator_ce_loss(probabilities: ad.Node, annotator_ids) -> ad.Node:
    """One-hot cross-entropy of the annotator classifier: -mean(log p[i, id_i])."""
    n, k = probabilities.shape
    ids = np.asarray(annotator_ids, dtype=np.int64)
    if ids.shape != (n,):
        raise ShapeMismatchError(
            f"annotator ids shape {ids.shape} does not match {n} probability rows"
        )
    onehot = ad.constant(_one_hot(ids, k), "one_hot")
    # Select the true-class probability per row, then log: entries off the
    # true class never reach the log (they may be exactly 0).
    picked = ad.matmul(ad.multiply(probabilities, onehot), ad.constant(np.ones((k, 1)), "ones"))
    return ad.scalar_multiply(ad.sum_all(ad.log(picked)), -1.0 / n)


def annotator_confusion_loss(probabilities: ad.Node, annotator_ids) -> ad.Node:
    """Exact negation of the annotator cross-entropy on the same inputs.

    Minimizing it rewards embeddings the classifier cannot tell apart; the
    training loop routes its gradient into the embedder only.
    """
    return ad.scalar_multiply(annotator_ce_loss(probabilities, annotator_ids), -1.0)


def total_loss(batch: Batch, probabilities: ad.Node, weights: LossWeights) -> LossReport:
    """Combined objective: rank + w_reg*reg + w_ce*ce + w_conf*(-ce).

    The report carries each term's value and the weighted total; `node` is
    the graph root of the combination (value-accurate; the training loop
    builds its own mode-specific graphs for gradient routing).
    """
    rank_node = disjoint_ranking_loss(batch)
    reg_node = distribution_regularizer(batch.predictions)
    ce_node = annotator_ce_loss(probabilities, batch.annotator_ids)
    confusion_node = ad.scalar_multiply(ce_node, -1.0)
    total_node = ad.add(
        ad.add(rank_node, ad.scalar_multiply(reg_node, weights.reg_weight)),
        ad.add(
            ad.scalar_multiply(ce_node, weights.ce_weight),
            ad.scalar_multiply(confusion_node, weights.confusion_weight),
        ),
    )
    return LossReport(
        rank=float(rank_node.value[0, 0]),
        reg=float(reg_node.value[0, 0]),
        annotator_ce=float(ce_node.value[0, 0]),
        annotator_confusion=float(confusion_node.value[0, 0]),
        total=float(total_node.value[0, 0]),
        node=total_node,
    )


def mse_loss(predictions: ad.Node, labels) -> ad.Node:
    """Mean squared error against the annotated labels (baseline objective)."""
    target = ad.constant(ad.column(labels), "labels")
    if target.shape != predictions.shape:
        raise ShapeMismatchError(
            f"mse: predictions {predictions.shape} vs labels {target.shape}"
        )
    return ad.mean_all(ad.square(ad.subtract(predictions, target)))
