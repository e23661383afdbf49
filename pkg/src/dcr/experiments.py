"""Experiment orchestration shared by the CLI and the verification suite.

Method tags map onto fixed loss configurations:

* ``mse-baseline``  — direct regression on the annotated labels;
* ``dcr-minus``     — combined objective without the adversarial pair;
* ``dcr``           — the full combined objective;
* ``rank-only``     — the unmasked ranking loss in place of the disjoint one.

Seed discipline: a run's master seed drives everything. The dataset
generator derives its own sub-streams, the split uses seed+1, model init
seed+2, and batch shuffling the master seed itself, so a sweep row and a
standalone training run with the same master seed are identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import AnnotatedDataset, train_test_split
from .errors import ConfigError
from .metrics import MetricReport, evaluate
from .models import DcrModel, MlpSpec
from .training import TrainConfig, fit, run_baseline_mse

METHODS = ("mse-baseline", "dcr-minus", "dcr", "rank-only")

SWEEP_AXES = ("lambda1", "gamma", "k", "none")


def apply_method(config: TrainConfig, method: str) -> TrainConfig:
    """Specialize a base config for a method tag."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}, expected one of {METHODS}")
    if method == "dcr-minus":
        return replace(config, ce_weight=0.0, confusion_weight=0.0)
    if method == "rank-only":
        return replace(config, masked_ranking=False)
    return config


@dataclass
class ExperimentResult:
    method: str
    config: TrainConfig
    history: list[dict]
    model: DcrModel
    report: MetricReport


def run_experiment(
    dataset: AnnotatedDataset,
    method: str,
    config: TrainConfig,
    split_fraction: float = 0.8,
    hidden: tuple[int, ...] = (64, 32),
    checkpoint_path=None,
) -> ExperimentResult:
    """Split, build a fresh model, train with the method's objective, evaluate."""
    config = apply_method(config, method)
    train_set, test_set = train_test_split(dataset, split_fraction, seed=config.seed + 1)
    annotators = int(np.max(dataset.annotator_ids)) + 1
    embedder = MlpSpec((dataset.dim, *hidden))
    head = MlpSpec((hidden[-1], 1))
    classifier = MlpSpec((hidden[-1], annotators))
    model = DcrModel(embedder, head, classifier, seed=config.seed + 2)
    runner = run_baseline_mse if method == "mse-baseline" else fit
    history = runner(model, train_set, test_set, config, checkpoint_path=checkpoint_path)
    report = evaluate(test_set, model)
    return ExperimentResult(method=method, config=config, history=history,
                            model=model, report=report)


def sweep_config(config: TrainConfig, axis: str, value: float) -> TrainConfig:
    if axis == "lambda1":
        return replace(config, reg_weight=float(value))
    if axis == "gamma":
        return replace(config, margin=float(value))
    if axis in ("k", "none"):
        return config
    raise ConfigError(f"unknown sweep axis {axis!r}, expected one of {SWEEP_AXES}")
