"""MLP parameter bundles: embedding net, regression head, annotator classifier.

The embedding net maps raw features to a representation, the regression head
turns a representation into one score per row, and the classifier predicts
which annotator labeled each row (softmax over annotators). All three are
plain fully connected stacks over the autodiff graph; hidden layers use the
spec's activation, outputs are linear (the classifier adds its softmax).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeMismatchError

CHECKPOINT_VERSION = 1

ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input, hidden..., output) and the hidden activation tag."""

    widths: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ConfigError(f"MlpSpec needs at least one layer (two widths), got {self.widths}")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"MlpSpec widths must be >= 1, got {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"unknown activation {self.activation!r}, expected one of {sorted(ACTIVATIONS)}"
            )

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]


def default_specs(input_dim: int = 16, annotators: int = 4) -> tuple[MlpSpec, MlpSpec, MlpSpec]:
    """Desk-scale defaults: D -> 64 -> 32 embedder, 32 -> 1 head, 32 -> K classifier."""
    embedder = MlpSpec((input_dim, 64, 32))
    head = MlpSpec((32, 1))
    classifier = MlpSpec((32, annotators))
    return embedder, head, classifier


def _init_layers(spec: MlpSpec, rng: np.random.Generator) -> list[tuple[ad.Node, ad.Node]]:
    # Weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
    layers = []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append((ad.parameter(w, "weight"), ad.parameter(np.zeros((1, fan_out)), "bias")))
    return layers


def _mlp_forward(x: ad.Node, spec: MlpSpec, layers) -> ad.Node:
    act = ACTIVATIONS[spec.activation]
    h = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        h = ad.add(ad.matmul(h, w), b)
        if i < last:
            h = act(h)
    return h


class DcrModel:
    """Embedder, regression head, and annotator classifier with shared embedding width.

    Forward passes build fresh graph nodes on top of the persistent parameter
    leaves, so a model can be reused across batches; row i of every output
    depends only on row i of the input.
    """

    def __init__(self, embedder: MlpSpec, head: MlpSpec, classifier: MlpSpec, seed: int = 0):
        if embedder.output_dim != head.input_dim or embedder.output_dim != classifier.input_dim:
            raise ConfigError(
                "embedder output width must match head/classifier input widths: "
                f"{embedder.output_dim} vs {head.input_dim}/{classifier.input_dim}"
            )
        if head.output_dim != 1:
            raise ConfigError(f"regression head must output width 1, got {head.output_dim}")
        self.embedder_spec = embedder
        self.head_spec = head
        self.classifier_spec = classifier
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.embedder_layers = _init_layers(embedder, rng)
        self.head_layers = _init_layers(head, rng)
        self.classifier_layers = _init_layers(classifier, rng)

    @property
    def embedding_dim(self) -> int:
        return self.embedder_spec.output_dim

    @property
    def annotator_count(self) -> int:
        return self.classifier_spec.output_dim

    def embed(self, batch) -> ad.Node:
        """Map an N x D feature batch to N x d representations."""
        x = batch if isinstance(batch, ad.Node) else ad.constant(batch, "features")
        if x.shape[1] != self.embedder_spec.input_dim:
            raise ShapeMismatchError(
                f"embed expects width {self.embedder_spec.input_dim}, got {x.shape}"
            )
        return _mlp_forward(x, self.embedder_spec, self.embedder_layers)

    def predict_score(self, z: ad.Node) -> ad.Node:
        """Map N x d representations to N x 1 scores."""
        if z.shape[1] != self.head_spec.input_dim:
            raise ShapeMismatchError(
                f"predict_score expects width {self.head_spec.input_dim}, got {z.shape}"
            )
        return _mlp_forward(z, self.head_spec, self.head_layers)

    def classify_annotator(self, z: ad.Node) -> ad.Node:
        """Map N x d representations to N x K annotator probabilities (rows sum to 1)."""
        if z.shape[1] != self.classifier_spec.input_dim:
            raise ShapeMismatchError(
                f"classify_annotator expects width {self.classifier_spec.input_dim}, got {z.shape}"
            )
        return ad.softmax_rows(_mlp_forward(z, self.classifier_spec, self.classifier_layers))

    def parameters(self, group: str | None = None) -> list[ad.Node]:
        """Flat parameter list; `group` selects embedder, head, or classifier."""
        groups = {
            "embedder": self.embedder_layers,
            "head": self.head_layers,
            "classifier": self.classifier_layers,
        }
        if group is not None:
            if group not in groups:
                raise ConfigError(f"unknown parameter group {group!r}")
            selected = [groups[group]]
        else:
            selected = [groups["embedder"], groups["head"], groups["classifier"]]
        return [node for layers in selected for pair in layers for node in pair]

    def named_parameters(self) -> list[tuple[str, ad.Node]]:
        named = []
        for group, layers in (
            ("embedder", self.embedder_layers),
            ("head", self.head_layers),
            ("classifier", self.classifier_layers),
        ):
            for i, (w, b) in enumerate(layers):
                named.append((f"{group}.{i}.weight", w))
                named.append((f"{group}.{i}.bias", b))
        return named

    def save(self, path) -> None:
        """Write a versioned JSON checkpoint; round-trips losslessly."""
        blob = {
            "format_version": CHECKPOINT_VERSION,
            "seed": self.seed,
            "specs": {
                "embedder": {"widths": list(self.embedder_spec.widths),
                             "activation": self.embedder_spec.activation},
                "head": {"widths": list(self.head_spec.widths),
                         "activation": self.head_spec.activation},
                "classifier": {"widths": list(self.classifier_spec.widths),
                               "activation": self.classifier_spec.activation},
            },
            "parameters": {name: node.value.tolist() for name, node in self.named_parameters()},
        }
        Path(path).write_text(json.dumps(blob, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DcrModel":
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        if blob.get("format_version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {blob.get('format_version')!r}")
        specs = {
            name: MlpSpec(tuple(entry["widths"]), entry["activation"])
            for name, entry in blob["specs"].items()
        }
        model = cls(specs["embedder"], specs["head"], specs["classifier"], seed=blob["seed"])
        stored = blob["parameters"]
        for name, node in model.named_parameters():
            if name not in stored:
                raise ConfigError(f"checkpoint missing parameter {name!r}")
            node.assign(np.array(stored[name]))
        return model
