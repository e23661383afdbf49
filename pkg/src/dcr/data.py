"""Synthetic disjoint-annotator regression data, plus CSV ingestion.

Corruption protocol: every sample is owned by exactly one annotator; each
annotator shifts the latent true scores by a personal bias and perturbs them
locally. Perturbations are bounded by half the smallest gap between distinct
true scores inside the annotator's subset, and are shared by tied scores, so
the within-annotator ranking of labels always equals the ranking of the true
scores (constructively, no rejection sampling). Cross-annotator comparisons,
by contrast, are deliberately unreliable once shifts differ.

Labels are finally mapped into the configured output range with one affine
map per annotator. Each map sends the global raw interval (over the whole
dataset, after shift and perturbation) onto the annotator's range, so with
equal ranges all annotators share one map and their relative biases survive
normalization.

All randomness funnels through one master seed; sub-streams use fixed
offsets (features 0, latent weights 1, noise 2, partition 3, perturbation 4,
profile shifts 5, train/test split 6, batching 7).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError

MANIFEST_VERSION = 1

LATENT_KINDS = ("linear", "mlp-random", "provided")


@dataclass(frozen=True)
class LatentTask:
    """Ground-truth generator: dimensionality, size, function family, noise level."""

    dim: int
    size: int
    kind: str = "linear"
    noise: float = 0.0
    weights: tuple[float, ...] | None = None
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dim < 1 or self.size < 1:
            raise DataError(f"task needs dim >= 1 and size >= 1, got {self.dim}, {self.size}")
        if self.kind not in LATENT_KINDS:
            raise DataError(f"unknown latent kind {self.kind!r}, expected one of {LATENT_KINDS}")
        if self.noise < 0:
            raise DataError(f"noise level must be >= 0, got {self.noise}")
        if self.kind == "provided" and self.scores is None:
            raise DataError("latent kind 'provided' requires scores")


@dataclass(frozen=True)
class AnnotatorProfile:
    """Per-annotator bias: mean shift, local perturbation scale, output range."""

    annotator: int
    shift: float
    perturb: float = 0.0
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.perturb < 0:
            raise DataError(f"perturbation scale must be >= 0, got {self.perturb}")
        if not self.low < self.high:
            raise DataError(f"output range must satisfy low < high, got ({self.low}, {self.high})")


@dataclass
class AnnotatedDataset:
    """Features with annotator ids, corrupted labels, and (when synthetic) true scores."""

    features: np.ndarray
    annotator_ids: np.ndarray
    labels: np.ndarray
    true_scores: np.ndarray | None = None
    split: str = "all"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.annotator_ids = np.asarray(self.annotator_ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.true_scores is not None:
            self.true_scores = np.asarray(self.true_scores, dtype=np.float64)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def annotators(self) -> np.ndarray:
        return np.unique(self.annotator_ids)

    def validate(self, min_per_annotator: int = 2) -> None:
        n = self.size
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.features.shape}")
        if self.annotator_ids.shape != (n,) or self.labels.shape != (n,):
            raise DataError("annotator ids and labels must match the number of feature rows")
        if self.true_scores is not None and self.true_scores.shape != (n,):
            raise DataError("true scores must match the number of feature rows")
        for arr, what in ((self.features, "features"), (self.labels, "labels")):
            if not np.isfinite(arr).all():
                raise DataError(f"{what} contain non-finite values")
        counts = np.bincount(self.annotator_ids[self.annotator_ids >= 0].astype(int))
        if self.annotator_ids.min(initial=0) < 0:
            raise DataError("annotator ids must be non-negative")
        for k in self.annotators():
            if counts[k] < min_per_annotator:
                raise DataError(
                    f"annotator {k} owns {counts[k]} samples, needs >= {min_per_annotator}"
                )

    def subset(self, indices) -> "AnnotatedDataset":
        idx = np.asarray(indices)
        return AnnotatedDataset(
            features=self.features[idx],
            annotator_ids=self.annotator_ids[idx],
            labels=self.labels[idx],
            true_scores=None if self.true_scores is None else self.true_scores[idx],
            split=self.split,
        )


def generate_latent(task: LatentTask, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw features iid uniform(-1, 1) and true scores from the task's function."""
    rng_features = np.random.default_rng([seed, 0])
    features = rng_features.uniform(-1.0, 1.0, size=(task.size, task.dim))
    rng_fn = np.random.default_rng([seed, 1])
    if task.kind == "linear":
        if task.weights is not None:
            w = np.asarray(task.weights, dtype=np.float64)
            if w.shape != (task.dim,):
                raise DataError(f"weights shape {w.shape} does not match dim {task.dim}")
        else:
            w = rng_fn.uniform(-1.0, 1.0, size=task.dim)
        scores = features @ w
    elif task.kind == "mlp-random":
        # random quadratic ridge plus a damped linear skip: smooth and easily
        # fit by a small tanh stack, yet its best linear approximation ranks
        # barely above chance, so collapsed (near-linear) models score low
        w_ridge = rng_fn.uniform(-1.0, 1.0, size=task.dim)
        w_skip = rng_fn.uniform(-1.0, 1.0, size=task.dim)
        scores = (features @ w_ridge) ** 2 + 0.3 * (features @ w_skip)
    else:  # provided
        scores = np.asarray(task.scores, dtype=np.float64)
        if scores.shape != (task.size,):
            raise DataError(f"provided scores shape {scores.shape} does not match size {task.size}")
    if task.noise > 0:
        scores = scores + task.noise * np.random.default_rng([seed, 2]).standard_normal(task.size)
    return features, scores


def partition_disjoint(n: int, annotators: int, seed: int) -> np.ndarray:
    """Assign each of n samples to exactly one of `annotators` near-equal subsets."""
    if annotators < 1:
        raise DataError(f"need at least one annotator, got {annotators}")
    if n < 2 * annotators:
        raise DataError(
            f"need at least {2 * annotators} samples for {annotators} annotators, got {n}"
        )
    perm = np.random.default_rng([seed, 3]).permutation(n)
    ids = np.empty(n, dtype=np.int64)
    ids[perm] = np.arange(n) % annotators
    return ids


def make_profiles(
    annotators: int,
    score_span: float,
    seed: int,
    shift_scale: float = 0.5,
    perturb_scale: float = 0.05,
    low: float = -1.0,
    high: float = 1.0,
) -> list[AnnotatorProfile]:
    """Random per-annotator mean shifts within +-shift_scale * score_span.

    Shifts are stratified: evenly spaced over the full shift range, randomly
    assigned to annotators, each jittered within its stratum. A plain iid
    draw occasionally clusters all annotators together, which would defeat
    the point of the simulation (visibly separated label distributions).
    Scales are fractions of the true-score span so biases stay comparable to
    the signal regardless of the latent function's output magnitude.
    """
    rng = np.random.default_rng([seed, 5])
    bound = shift_scale * score_span
    if annotators == 1 or bound == 0.0:
        shifts = rng.uniform(-bound, bound, size=annotators)
    else:
        base = np.linspace(-bound, bound, annotators)
        spacing = base[1] - base[0]
        jitter = rng.uniform(-0.25 * spacing, 0.25 * spacing, size=annotators)
        shifts = rng.permutation(base + jitter)
    return [
        AnnotatorProfile(annotator=k, shift=float(shifts[k]),
                         perturb=perturb_scale * score_span, low=low, high=high)
        for k in range(annotators)
    ]


def generate_annotations(
    true_scores: np.ndarray,
    annotator_ids: np.ndarray,
    profiles: list[AnnotatorProfile],
    seed: int,
) -> np.ndarray:
    """Produce corrupted labels: shift + rank-safe local perturbation + range mapping.

    Perturbations are drawn per distinct true-score value inside each
    annotator's subset (tied scores stay tied) and capped at 0.49x the
    smallest within-annotator gap, which guarantees the within-annotator
    label ranking matches the true-score ranking.
    """
    scores = np.asarray(true_scores, dtype=np.float64)
    ids = np.asarray(annotator_ids, dtype=np.int64)
    by_id = {p.annotator: p for p in profiles}
    present = np.unique(ids)
    missing = [int(k) for k in present if int(k) not in by_id]
    if missing:
        raise DataError(f"profiles missing for annotators {missing}")

    raw = np.empty_like(scores)
    for k in present:
        profile = by_id[int(k)]
        members = np.nonzero(ids == k)[0]
        subset = scores[members]
        unique_vals, inverse = np.unique(subset, return_inverse=True)
        eps = profile.perturb
        if len(unique_vals) >= 2:
            min_gap = np.diff(unique_vals).min()
            eps = min(eps, 0.49 * min_gap)
        rng = np.random.default_rng([seed, 4, int(k)])
        delta = rng.uniform(-eps, eps, size=len(unique_vals)) if eps > 0 else np.zeros(len(unique_vals))
        raw[members] = subset + profile.shift + delta[inverse]

    raw_min, raw_max = raw.min(), raw.max()
    labels = np.empty_like(raw)
    for k in present:
        profile = by_id[int(k)]
        members = np.nonzero(ids == k)[0]
        if raw_max > raw_min:
            scale = (profile.high - profile.low) / (raw_max - raw_min)
            labels[members] = profile.low + (raw[members] - raw_min) * scale
        else:
            labels[members] = 0.5 * (profile.low + profile.high)
    return labels


def generate_dataset(
    n: int = 2000,
    dim: int = 16,
    annotators: int = 4,
    seed: int = 0,
    shift_scale: float = 0.5,
    perturb_scale: float = 0.05,
    low: float = -1.0,
    high: float = 1.0,
    kind: str = "linear",
    noise: float = 0.0,
) -> tuple[AnnotatedDataset, dict]:
    """One-stop synthesis: latent task, disjoint partition, biased annotations.

    Returns the dataset and a manifest dict sufficient to regenerate it
    byte-for-byte (run metadata such as timestamps belongs in the manifest's
    `metadata` field only).
    """
    task = LatentTask(dim=dim, size=n, kind=kind, noise=noise)
    features, scores = generate_latent(task, seed)
    ids = partition_disjoint(n, annotators, seed)
    span = float(scores.max() - scores.min())
    profiles = make_profiles(annotators, span, seed, shift_scale=shift_scale,
                             perturb_scale=perturb_scale, low=low, high=high)
    labels = generate_annotations(scores, ids, profiles, seed)
    dataset = AnnotatedDataset(features, ids, labels, true_scores=scores)
    dataset.validate()
    manifest = {
        "format_version": MANIFEST_VERSION,
        "n": n,
        "dim": dim,
        "annotators": annotators,
        "seed": seed,
        "shift_scale": shift_scale,
        "perturb_scale": perturb_scale,
        "low": low,
        "high": high,
        "kind": kind,
        "noise": noise,
        "derived": {
            "score_span": span,
            "shifts": [p.shift for p in profiles],
        },
        "metadata": {},
    }
    return dataset, manifest


def dataset_from_manifest(manifest: dict) -> AnnotatedDataset:
    """Regenerate the dataset a manifest describes (metadata is ignored)."""
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {manifest.get('format_version')!r}")
    dataset, _ = generate_dataset(
        n=manifest["n"],
        dim=manifest["dim"],
        annotators=manifest["annotators"],
        seed=manifest["seed"],
        shift_scale=manifest["shift_scale"],
        perturb_scale=manifest["perturb_scale"],
        low=manifest["low"],
        high=manifest["high"],
        kind=manifest["kind"],
        noise=manifest["noise"],
    )
    return dataset


def save_csv(dataset: AnnotatedDataset, path) -> None:
    """Write `id,annotator,label[,true_score],f0..f{D-1}` with round-trip floats."""
    path = Path(path)
    with_truth = dataset.true_scores is not None
    header = ["id", "annotator", "label"]
    if with_truth:
        header.append("true_score")
    header += [f"f{j}" for j in range(dataset.dim)]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.size):
            row = [str(i), str(int(dataset.annotator_ids[i])), repr(float(dataset.labels[i]))]
            if with_truth:
                row.append(repr(float(dataset.true_scores[i])))
            row += [repr(float(v)) for v in dataset.features[i]]
            writer.writerow(row)


def load_csv(path) -> AnnotatedDataset:
    """Parse a dataset CSV, reporting schema problems with line numbers."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for required in ("id", "annotator", "label"):
            if required not in header:
                raise DataError(f"{path} line 1: missing required column {required!r}")
        col = {name: i for i, name in enumerate(header)}
        feature_cols = []
        j = 0
        while f"f{j}" in col:
            feature_cols.append(col[f"f{j}"])
            j += 1
        if not feature_cols:
            raise DataError(f"{path} line 1: no feature columns f0..fD found")
        has_truth = "true_score" in col

        ids, labels, truths, rows = [], [], [], []
        for ln, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(header):
                raise DataError(f"{path} line {ln}: expected {len(header)} fields, got {len(fields)}")
            try:
                ids.append(int(fields[col["annotator"]]))
                labels.append(float(fields[col["label"]]))
                if has_truth:
                    truths.append(float(fields[col["true_score"]]))
                rows.append([float(fields[c]) for c in feature_cols])
            except ValueError as exc:
                raise DataError(f"{path} line {ln}: non-numeric field ({exc})") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    dataset = AnnotatedDataset(
        features=np.array(rows),
        annotator_ids=np.array(ids),
        labels=np.array(labels),
        true_scores=np.array(truths) if has_truth else None,
    )
    dataset.validate()
    return dataset


def train_test_split(
    dataset: AnnotatedDataset, fraction: float = 0.8, seed: int = 0
) -> tuple[AnnotatedDataset, AnnotatedDataset]:
    """Stratified split: every annotator lands in both halves; subsets disjoint."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"split fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng([seed, 6])
    train_idx, test_idx = [], []
    for k in dataset.annotators():
        members = np.nonzero(dataset.annotator_ids == k)[0]
        if len(members) < 2:
            raise DataError(f"annotator {k} owns {len(members)} samples, cannot split")
        shuffled = members[rng.permutation(len(members))]
        n_train = int(round(fraction * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        train_idx.extend(shuffled[:n_train])
        test_idx.extend(shuffled[n_train:])
    train = dataset.subset(np.sort(np.array(train_idx)))
    test = dataset.subset(np.sort(np.array(test_idx)))
    train.split, test.split = "train", "test"
    train.validate(min_per_annotator=1)
    test.validate(min_per_annotator=1)
    return train, test


def save_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def load_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
