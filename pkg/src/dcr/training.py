"""SGD training loop with the adversarial annotator-invariance schedule.

Two adversarial modes realize the same objective:

* ``alternate`` (default): per batch, a classifier pass minimizes the
  annotator cross-entropy updating only the classifier, then a
  representation pass minimizes rank + reg + confusion updating only the
  embedder and head. Each pass freezes the other side's parameters.
* ``grl``: one combined backward where the classifier branch's gradient is
  sign-flipped (and scaled by confusion_weight/ce_weight) at the embedding
  boundary; embedder, head, and classifier update together. At equal
  adversarial weights the embedder gradients match alternate mode exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import autodiff as ad
from .data import AnnotatedDataset
from .errors import ConfigError, DataError, NumericalError
from .losses import (
    Batch,
    LossReport,
    LossWeights,
    annotator_ce_loss,
    annotator_confusion_loss,
    disjoint_ranking_loss,
    margin_ranking_loss,
    distribution_regularizer,
    mse_loss,
)
from .metrics import evaluate
from .models import DcrModel

ADVERSARIAL_MODES = ("alternate", "grl")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    margin: float = 0.0
    reg_weight: float = 0.2
    ce_weight: float = 0.2
    confusion_weight: float = 0.2
    adversarial_mode: str = "alternate"
    masked_ranking: bool = True
    seed: int = 0
    eval_interval: int = 20

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 4:
            raise ConfigError(f"batch size must be >= 4, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.margin < 0:
            raise ConfigError(f"margin must be >= 0, got {self.margin}")
        for name in ("reg_weight", "ce_weight", "confusion_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.adversarial_mode not in ADVERSARIAL_MODES:
            raise ConfigError(
                f"adversarial mode must be one of {ADVERSARIAL_MODES}, got {self.adversarial_mode!r}"
            )

    def weights(self) -> LossWeights:
        return LossWeights(self.reg_weight, self.ce_weight, self.confusion_weight)


@dataclass
class SgdState:
    """Per-parameter velocity buffers, created lazily at zero."""

    velocity: dict[ad.Node, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class Minibatch:
    features: np.ndarray
    labels: np.ndarray
    annotator_ids: np.ndarray


def _has_pair(ids: np.ndarray) -> bool:
    return len(ids) >= 2 and np.unique(ids, return_counts=True)[1].max() >= 2


def make_batches(
    dataset: AnnotatedDataset, batch_size: int, seed: int, epoch: int
) -> list[np.ndarray]:
    """Deterministic per-epoch shuffle into batches, each holding a same-annotator pair.

    Chunks the shuffled order; a singleton tail joins the previous chunk. Any
    chunk without two samples from one annotator is repaired by swapping a
    sample with another chunk (deterministic scan order); if no swap works
    the dataset cannot supply ranking pairs and an error is raised.
    """
    if batch_size < 4:
        raise ConfigError(f"batch size must be >= 4, got {batch_size}")
    n = dataset.size
    order = np.random.default_rng([seed, 7, epoch]).permutation(n)
    chunks = [order[s:s + batch_size] for s in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    ids = dataset.annotator_ids
    chunks = [list(c) for c in chunks]
    for bi, chunk in enumerate(chunks):
        if _has_pair(ids[np.array(chunk)]):
            continue
        if not _swap_repair(chunks, bi, ids):
            raise DataError(
                "cannot form batches with same-annotator pairs; "
                "every annotator may own too few samples for this batch size"
            )
    return [np.array(c) for c in chunks]


def _swap_repair(chunks: list[list[int]], bi: int, ids: np.ndarray) -> bool:
    # Bring a sample sharing an annotator with someone in chunk bi, exchanging
    # it for another member so sizes stay fixed and the donor stays valid.
    chunk = chunks[bi]
    for si, s in enumerate(chunk):
        target = ids[s]
        for bj, donor in enumerate(chunks):
            if bj == bi:
                continue
            for dj, x in enumerate(donor):
                if ids[x] != target:
                    continue
                for ti, t in enumerate(chunk):
                    if ti == si:
                        continue
                    donor_after = donor.copy()
                    donor_after[dj] = t
                    if not _has_pair(ids[np.array(donor_after)]):
                        continue
                    donor[dj] = t
                    chunk[ti] = x
                    return True
    return False


def sgd_step(
    params: Iterable[ad.Node],
    grads: Mapping[ad.Node, np.ndarray],
    state: SgdState,
    config: TrainConfig,
) -> None:
    """v <- momentum*v + grad + weight_decay*param; param <- param - lr*v."""
    for p in params:
        g = grads[p]
        if not np.isfinite(g).all():
            raise NumericalError("non-finite gradient encountered in SGD step")
        v = state.velocity.get(p)
        if v is None:
            v = np.zeros_like(p.value)
        v = config.momentum * v + g + config.weight_decay * p.value
        state.velocity[p] = v
        p.assign(p.value - config.learning_rate * v)


def _check_report(report: LossReport) -> LossReport:
    for name, value in report.to_dict().items():
        if not np.isfinite(value):
            raise NumericalError(f"loss term {name!r} is non-finite ({value})")
    return report


def _rank_loss(batch: Batch, config: TrainConfig) -> ad.Node:
    if config.masked_ranking:
        return disjoint_ranking_loss(batch)
    return margin_ranking_loss(batch)


def classifier_pass(
    model: DcrModel, batch: Minibatch, config: TrainConfig, state: SgdState
) -> float:
    """Alternate-mode pass A: fit the annotator classifier; only its parameters move."""
    z = model.embed(batch.features)
    probs = model.classify_annotator(z)
    ce_node = annotator_ce_loss(probs, batch.annotator_ids)
    grads = ad.backward(ad.scalar_multiply(ce_node, config.ce_weight))
    sgd_step(model.parameters("classifier"), grads, state, config)
    return float(ce_node.value[0, 0])


def representation_pass(
    model: DcrModel, batch: Minibatch, config: TrainConfig, state: SgdState
) -> LossReport:
    """Alternate-mode pass B: rank + reg + confusion; embedder and head move, classifier frozen."""
    z = model.embed(batch.features)
    y = model.predict_score(z)
    loss_batch = Batch(y, batch.labels, batch.annotator_ids, margin=config.margin)
    rank_node = _rank_loss(loss_batch, config)
    reg_node = distribution_regularizer(y)
    objective = ad.add(rank_node, ad.scalar_multiply(reg_node, config.reg_weight))
    probs = model.classify_annotator(z)
    confusion_node = annotator_confusion_loss(probs, batch.annotator_ids)
    if config.confusion_weight > 0:
        objective = ad.add(
            objective, ad.scalar_multiply(confusion_node, config.confusion_weight)
        )
    grads = ad.backward(objective)
    report = _loss_report(rank_node, reg_node, confusion_node, config)
    _check_report(report)
    sgd_step(model.parameters("embedder") + model.parameters("head"), grads, state, config)
    return report


def _loss_report(rank_node, reg_node, confusion_node, config: TrainConfig) -> LossReport:
    rank = float(rank_node.value[0, 0])
    reg = float(reg_node.value[0, 0])
    confusion = float(confusion_node.value[0, 0])
    ce = -confusion
    total = (rank + config.reg_weight * reg + config.ce_weight * ce
             + config.confusion_weight * confusion)
    return LossReport(rank=rank, reg=reg, annotator_ce=ce,
                      annotator_confusion=confusion, total=total)


def grl_objective(
    model: DcrModel, batch: Minibatch, config: TrainConfig
) -> tuple[ad.Node, LossReport]:
    """Single-graph objective with the gradient-reversal boundary in the classifier branch."""
    weights = config.weights()
    if weights.ce_weight == 0 and weights.confusion_weight > 0:
        raise ConfigError(
            "grl mode needs ce_weight > 0 whenever confusion_weight > 0; use alternate mode"
        )
    z = model.embed(batch.features)
    y = model.predict_score(z)
    loss_batch = Batch(y, batch.labels, batch.annotator_ids, margin=config.margin)
    rank_node = _rank_loss(loss_batch, config)
    reg_node = distribution_regularizer(y)
    objective = ad.add(rank_node, ad.scalar_multiply(reg_node, weights.reg_weight))
    if weights.ce_weight > 0:
        scale = weights.confusion_weight / weights.ce_weight
        probs = model.classify_annotator(ad.grad_reverse(z, scale))
        ce_node = annotator_ce_loss(probs, batch.annotator_ids)
        objective = ad.add(objective, ad.scalar_multiply(ce_node, weights.ce_weight))
        confusion_node = ad.scalar_multiply(ce_node, -1.0)
    else:
        probs = model.classify_annotator(z)
        confusion_node = annotator_confusion_loss(probs, batch.annotator_ids)
    report = _loss_report(rank_node, reg_node, confusion_node, config)
    return objective, report


def grl_pass(
    model: DcrModel, batch: Minibatch, config: TrainConfig, state: SgdState
) -> LossReport:
    objective, report = grl_objective(model, batch, config)
    _check_report(report)
    grads = ad.backward(objective)
    params = model.parameters("embedder") + model.parameters("head")
    if config.ce_weight > 0:
        params += model.parameters("classifier")
    sgd_step(params, grads, state, config)
    return report


def train_step(
    model: DcrModel, batch: Minibatch, config: TrainConfig, state: SgdState
) -> LossReport:
    """One optimization step in the configured adversarial mode; updates the model in place."""
    if config.adversarial_mode == "grl":
        return grl_pass(model, batch, config, state)
    if config.ce_weight > 0:
        classifier_pass(model, batch, config, state)
    return representation_pass(model, batch, config, state)


def mse_step(
    model: DcrModel, batch: Minibatch, config: TrainConfig, state: SgdState
) -> float:
    """Plain regression step against the annotated labels; classifier untouched."""
    y = model.predict_score(model.embed(batch.features))
    objective = mse_loss(y, batch.labels)
    value = float(objective.value[0, 0])
    if not np.isfinite(value):
        raise NumericalError(f"loss term 'mse' is non-finite ({value})")
    grads = ad.backward(objective)
    sgd_step(model.parameters("embedder") + model.parameters("head"), grads, state, config)
    return value


def _slice(dataset: AnnotatedDataset, idx: np.ndarray) -> Minibatch:
    return Minibatch(
        features=dataset.features[idx],
        labels=dataset.labels[idx],
        annotator_ids=dataset.annotator_ids[idx],
    )


def _run_epochs(model, train_set, test_set, config, step) -> list[dict]:
    history = []
    state = SgdState()
    for epoch in range(config.epochs):
        sums: dict[str, float] = {}
        batches = make_batches(train_set, config.batch_size, config.seed, epoch)
        for idx in batches:
            outcome = step(model, _slice(train_set, idx), config, state)
            terms = outcome.to_dict() if isinstance(outcome, LossReport) else {"mse": outcome}
            for key, value in terms.items():
                sums[key] = sums.get(key, 0.0) + value
        record = {"epoch": epoch, "loss": {k: v / len(batches) for k, v in sums.items()}}
        last = epoch == config.epochs - 1
        if last or (config.eval_interval > 0 and (epoch + 1) % config.eval_interval == 0):
            record["metrics"] = evaluate(test_set, model).to_dict()
        history.append(record)
    return history


def fit(
    model: DcrModel,
    train_set: AnnotatedDataset,
    test_set: AnnotatedDataset,
    config: TrainConfig,
    checkpoint_path=None,
) -> list[dict]:
    """Train the combined objective; returns the per-epoch history (loss terms + metrics)."""
    history = _run_epochs(model, train_set, test_set, config, train_step)
    if checkpoint_path is not None:
        model.save(checkpoint_path)
    return history


def run_baseline_mse(
    model: DcrModel,
    train_set: AnnotatedDataset,
    test_set: AnnotatedDataset,
    config: TrainConfig,
    checkpoint_path=None,
) -> list[dict]:
    """Direct mean-squared-error regression on the annotated labels (comparison baseline)."""
    history = _run_epochs(model, train_set, test_set, config, mse_step)
    if checkpoint_path is not None:
        model.save(checkpoint_path)
    return history
