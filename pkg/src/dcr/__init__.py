"""Disjoint contrastive regression: training on disjoint, mutually biased annotations.

The package provides a small reverse-mode autodiff core, the MLP model
bundle, the combined ranking/regularization/adversarial objective, a biased
annotator simulator, per-annotator ranking metrics, and the SGD training
loop plus CLI that reproduce the ablation structure on synthetic data.
"""

from .data import (
    AnnotatedDataset,
    AnnotatorProfile,
    LatentTask,
    generate_annotations,
    generate_dataset,
    generate_latent,
    load_csv,
    partition_disjoint,
    save_csv,
    train_test_split,
)
from .errors import DcrError
from .experiments import METHODS, apply_method, run_experiment
from .losses import (
    Batch,
    LossReport,
    LossWeights,
    annotator_ce_loss,
    annotator_confusion_loss,
    disjoint_mask,
    disjoint_ranking_loss,
    distribution_regularizer,
    margin_ranking_loss,
    mse_loss,
    total_loss,
)
from .metrics import MetricReport, evaluate, plcc, pra, srocc
from .models import DcrModel, MlpSpec, default_specs
from .training import SgdState, TrainConfig, fit, make_batches, run_baseline_mse, sgd_step, train_step

__version__ = "0.1.0"

__all__ = [
    "AnnotatedDataset",
    "AnnotatorProfile",
    "Batch",
    "DcrError",
    "DcrModel",
    "LatentTask",
    "LossReport",
    "LossWeights",
    "METHODS",
    "MetricReport",
    "MlpSpec",
    "SgdState",
    "TrainConfig",
    "annotator_ce_loss",
    "annotator_confusion_loss",
    "apply_method",
    "default_specs",
    "disjoint_mask",
    "disjoint_ranking_loss",
    "distribution_regularizer",
    "evaluate",
    "fit",
    "generate_annotations",
    "generate_dataset",
    "generate_latent",
    "load_csv",
    "make_batches",
    "margin_ranking_loss",
    "mse_loss",
    "partition_disjoint",
    "plcc",
    "pra",
    "run_baseline_mse",
    "run_experiment",
    "save_csv",
    "sgd_step",
    "srocc",
    "total_loss",
    "train_step",
    "train_test_split",
]
