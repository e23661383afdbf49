"""Reverse-mode automatic differentiation over dense 2-D float64 arrays.

Graphs are built eagerly: each operation computes its value at call time and
records a closure with the backward rule. `backward` walks the graph once in
reverse topological order and returns gradients for the trainable leaves.

Gradient policy: every `backward` call re-zeroes the gradients of all nodes
reachable from the root before accumulating, so repeated calls on the same
(or overlapping) graphs are independent and need no manual reset.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ShapeMismatchError

__all__ = [
    "Node",
    "as_matrix",
    "column",
    "parameter",
    "constant",
    "matmul",
    "add",
    "subtract",
    "scalar_multiply",
    "multiply",
    "square",
    "mean_all",
    "sum_all",
    "relu",
    "hinge_clamp",
    "tanh",
    "log",
    "softmax_rows",
    "gather_rows",
    "grad_reverse",
    "backward",
]


def as_matrix(values, name: str = "tensor") -> np.ndarray:
    """Convert input to a finite float64 2-D array, rejecting NaN/Inf."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} contains NaN or Inf")
    return arr


def column(values) -> np.ndarray:
    """Reshape a 1-D sequence into an N x 1 column matrix."""
    return as_matrix(np.asarray(values, dtype=np.float64).reshape(-1, 1), name="column")


class Node:
    """One vertex of the computation graph.

    Holds the computed value, the operation tag, references to parent nodes,
    and the gradient accumulated by the most recent `backward` call. The
    shape is fixed at creation; `assign` replaces the value in place (used by
    the optimizer) but never the shape.
    """

    __slots__ = ("value", "op", "parents", "grad", "trainable", "needs_grad", "_push")

    def __init__(
        self,
        value: np.ndarray,
        op: str = "leaf",
        parents: Sequence["Node"] = (),
        push: Callable[[np.ndarray], tuple] | None = None,
        trainable: bool = False,
    ):
        self.value = value
        self.op = op
        self.parents = tuple(parents)
        self.grad: np.ndarray | None = None
        self.trainable = trainable
        self.needs_grad = trainable or any(p.needs_grad for p in self.parents)
        self._push = push

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def assign(self, values) -> None:
        """Replace the stored value; the shape fixed at creation is kept."""
        arr = as_matrix(values, name=self.op)
        if arr.shape != self.value.shape:
            raise ShapeMismatchError(
                f"assign to {self.op} node: expected shape {self.value.shape}, got {arr.shape}"
            )
        self.value = arr

    def __repr__(self) -> str:
        return f"Node(op={self.op!r}, shape={self.shape})"


def parameter(values, name: str = "parameter") -> Node:
    """Trainable leaf; `backward` reports its gradient."""
    return Node(as_matrix(values, name=name), op=name, trainable=True)


def constant(values, name: str = "constant") -> Node:
    """Non-trainable leaf; gradients are not propagated into it."""
    return Node(as_matrix(values, name=name), op=name, trainable=False)


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    value = a.value @ b.value

    def push(g):
        return (
            g @ b.value.T if a.needs_grad else None,
            a.value.T @ g if b.needs_grad else None,
        )

    return Node(value, "matmul", (a, b), push)


def add(a: Node, b: Node) -> Node:
    """Elementwise sum; also accepts a 1 x cols bias as the second operand."""
    if a.shape == b.shape:
        def push(g):
            return (g, g)
    elif b.shape == (1, a.shape[1]):
        def push(g):
            return (g, g.sum(axis=0, keepdims=True))
    else:
        raise ShapeMismatchError(f"add: incompatible shapes {a.shape} and {b.shape}")
    return Node(a.value + b.value, "add", (a, b), push)


def subtract(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"subtract: incompatible shapes {a.shape} and {b.shape}")

    def push(g):
        return (g, -g)

    return Node(a.value - b.value, "subtract", (a, b), push)


def scalar_multiply(a: Node, scalar: float) -> Node:
    c = float(scalar)
    if not np.isfinite(c):
        raise DomainError(f"scalar_multiply by non-finite scalar {scalar}")

    def push(g):
        return (c * g,)

    return Node(c * a.value, "scalar_multiply", (a,), push)


def multiply(a: Node, b: Node) -> Node:
    """Elementwise (Hadamard) product of same-shape operands."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"multiply: incompatible shapes {a.shape} and {b.shape}")

    def push(g):
        return (
            g * b.value if a.needs_grad else None,
            g * a.value if b.needs_grad else None,
        )

    return Node(a.value * b.value, "multiply", (a, b), push)


def square(a: Node) -> Node:
    def push(g):
        return (2.0 * a.value * g,)

    return Node(a.value * a.value, "square", (a,), push)


def mean_all(a: Node) -> Node:
    """Mean over all entries, as a 1 x 1 node."""
    size = a.value.size

    def push(g):
        return (np.full(a.shape, g[0, 0] / size),)

    return Node(np.array([[a.value.mean()]]), "mean_all", (a,), push)


def sum_all(a: Node) -> Node:
    """Sum over all entries, as a 1 x 1 node."""

    def push(g):
        return (np.full(a.shape, g[0, 0]),)

    return Node(np.array([[a.value.sum()]]), "sum_all", (a,), push)


def _clamp_nonneg(a: Node, op: str) -> Node:
    # Subgradient at exactly 0 is 0 (strict > in the mask).
    mask = a.value > 0.0

    def push(g):
        return (g * mask,)

    return Node(np.where(mask, a.value, 0.0), op, (a,), push)


def relu(a: Node) -> Node:
    return _clamp_nonneg(a, "relu")


def hinge_clamp(a: Node) -> Node:
    """Clamp entries to be non-negative: max(x, 0), subgradient 0 at x = 0."""
    return _clamp_nonneg(a, "hinge_clamp")


def tanh(a: Node) -> Node:
    t = np.tanh(a.value)

    def push(g):
        return (g * (1.0 - t * t),)

    return Node(t, "tanh", (a,), push)


def log(a: Node) -> Node:
    if np.any(a.value <= 0.0):
        raise DomainError(f"log of non-positive value (min entry {a.value.min()})")

    def push(g):
        return (g / a.value,)

    return Node(np.log(a.value), "log", (a,), push)


def softmax_rows(a: Node) -> Node:
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def push(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return Node(p, "softmax_rows", (a,), push)


def gather_rows(a: Node, indices) -> Node:
    """Select rows by index (repeats allowed); backward scatter-adds."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeMismatchError(f"gather_rows indices must be 1-D, got shape {idx.shape}")
    if len(idx) and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise DomainError(f"gather_rows index out of range for {a.shape[0]} rows")

    def push(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return Node(a.value[idx, :], "gather_rows", (a,), push)


def grad_reverse(a: Node, scale: float = 1.0) -> Node:
    """Identity forward; backward negates and scales the upstream gradient.

    A training construct, not a mathematical function: deliberately excluded
    from finite-difference checks.
    """
    s = float(scale)

    def push(g):
        return (-s * g,)

    return Node(a.value, "grad_reverse", (a,), push)


def _topological(root: Node) -> list[Node]:
    """Parents-before-children order; each reachable node appears exactly once."""
    order: list[Node] = []
    visited: set[int] = {id(root)}
    stack: list[tuple[Node, int]] = [(root, 0)]
    while stack:
        node, child = stack[-1]
        if child < len(node.parents):
            stack[-1] = (node, child + 1)
            parent = node.parents[child]
            if id(parent) not in visited:
                visited.add(id(parent))
                stack.append((parent, 0))
        else:
            stack.pop()
            order.append(node)
    return order


def backward(root: Node) -> dict[Node, np.ndarray]:
    """Accumulate d(root)/d(leaf) for every trainable leaf under `root`.

    The root must be scalar-valued (1 x 1). Gradients of all reachable nodes
    are re-zeroed first, then each node is visited exactly once in reverse
    topological order. Returns a map from trainable leaf node to gradient.
    """
    if root.shape != (1, 1):
        raise ShapeMismatchError(f"backward requires a 1x1 scalar root, got shape {root.shape}")
    order = _topological(root)
    for node in order:
        node.grad = None
    root.grad = np.ones((1, 1))
    for node in reversed(order):
        if node.grad is None or node._push is None:
            continue
        for parent, contribution in zip(node.parents, node._push(node.grad)):
            if contribution is None or not parent.needs_grad:
                continue
            if parent.grad is None:
                parent.grad = contribution
            else:
                parent.grad = parent.grad + contribution
    return {node: node.grad for node in order if node.trainable and node.grad is not None}
