"""Independent reference implementations used as test oracles.

Everything here is deliberately brute force (explicit loops, no shared code
with the package) so it can serve as the second route of dual checks.
"""

from __future__ import annotations

import math

import numpy as np

from dcr import autodiff as ad


def finite_difference(build, leaves, h=1e-5):
    """Central-difference gradients of a scalar graph w.r.t. each leaf node.

    `build` must construct the graph afresh from the leaves' current values
    and return the root node.
    """
    grads = {}
    for leaf in leaves:
        g = np.zeros_like(leaf.value)
        base = leaf.value.copy()
        for idx in np.ndindex(*leaf.value.shape):
            leaf.value[idx] = base[idx] + h
            f_plus = build().value[0, 0]
            leaf.value[idx] = base[idx] - h
            f_minus = build().value[0, 0]
            leaf.value[idx] = base[idx]
            g[idx] = (f_plus - f_minus) / (2.0 * h)
        grads[leaf] = g
    return grads


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max over entries of |analytic - numeric| / max(1, |numeric|)."""
    denom = np.maximum(1.0, np.abs(numeric))
    return float((np.abs(analytic - numeric) / denom).max())


def check_gradients(build, leaves, h=1e-5, tol=1e-4):
    root = build()
    analytic = ad.backward(root)
    numeric = finite_difference(build, leaves, h=h)
    for leaf in leaves:
        err = max_rel_error(analytic[leaf], numeric[leaf])
        assert err < tol, f"gradient mismatch on {leaf.op}: rel error {err}"


def ref_margin_rank(predictions, labels, margin, ids=None, masked=False):
    """Hand-looped ranking loss over ordered pairs with distinct labels."""
    total, count = 0.0, 0
    n = len(labels)
    for i in range(n):
        for j in range(n):
            if i == j or labels[i] == labels[j]:
                continue
            if masked and ids[i] != ids[j]:
                continue
            sign = 1.0 if labels[i] >= labels[j] else -1.0
            total += max(margin - sign * (predictions[i] - predictions[j]), 0.0)
            count += 1
    if count == 0:
        raise ValueError("no pairs")
    return total / count


def ref_ranks(values):
    """Average ranks by explicit position counting."""
    n = len(values)
    ranks = [0.0] * n
    for i in range(n):
        less = sum(1 for v in values if v < values[i])
        equal = sum(1 for v in values if v == values[i])
        # positions less+1 .. less+equal, averaged
        ranks[i] = less + (equal + 1) / 2.0
    return ranks


def ref_pearson(a, b):
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def ref_pra(predictions, labels):
    correct, total = 0, 0
    n = len(labels)
    for i in range(n):
        for j in range(i + 1, n):
            if labels[i] == labels[j]:
                continue
            total += 1
            dl = labels[i] - labels[j]
            dp = predictions[i] - predictions[j]
            if dp != 0 and (dp > 0) == (dl > 0):
                correct += 1
    return correct / total


def ref_srocc(predictions, labels):
    """Rank-then-correlate; closed form only when both vectors are tie-free."""
    rp = ref_ranks(list(predictions))
    rl = ref_ranks(list(labels))
    n = len(rp)
    tie_free = len(set(predictions)) == n and len(set(labels)) == n
    if tie_free:
        d2 = sum((a - b) ** 2 for a, b in zip(rp, rl))
        return 1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    return ref_pearson(rp, rl)


def ref_plcc(predictions, labels):
    return ref_pearson(list(predictions), list(labels))
