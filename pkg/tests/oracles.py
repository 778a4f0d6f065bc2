"""Independent brute-force reference implementations used by the tests.

Everything here is written as plain double loops over python floats (with a
max-shift for stability), deliberately sharing no code with the tensor path
it checks.
"""
from __future__ import annotations

import math

import numpy as np


def lse_py(values) -> float:
    values = [float(v) for v in values]
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


def supct_brute(z: np.ndarray, pos_sets, tau: float) -> tuple[float, int]:
    """Spec formula for the supervised contrastive loss, double loop."""
    n = len(z)
    total = 0.0
    skipped = 0
    for i in range(n):
        pos = list(pos_sets[i])
        if not pos:
            skipped += 1
            continue
        denom = lse_py([float(z[i] @ z[a]) / tau for a in range(n) if a != i])
        inner = 0.0
        for j in pos:
            inner += float(z[i] @ z[j]) / tau - denom
        total += -inner / len(pos)
    return total, skipped


def supct_brute_labels(z: np.ndarray, labels, tau: float) -> tuple[float, int]:
    labels = list(labels)
    pos_sets = [
        [j for j in range(len(labels)) if j != i and labels[j] == labels[i]]
        for i in range(len(labels))
    ]
    return supct_brute(z, pos_sets, tau)


def feat_align_brute(z_main: np.ndarray, anchors: np.ndarray, pos_sets, neg_sets, tau: float):
    """Spec formula for the feature alignment loss, double loop."""
    total = 0.0
    skipped = 0
    for i in range(len(z_main)):
        pos = list(pos_sets[i])
        neg = list(neg_sets[i])
        if not pos:
            skipped += 1
            continue
        candidates = pos + neg
        denom = lse_py([float(z_main[i] @ anchors[a]) / tau for a in candidates])
        inner = 0.0
        for j in pos:
            inner += float(z_main[i] @ anchors[j]) / tau - denom
        total += -inner / len(pos)
    return total, skipped


def softmax_py(values, tau: float = 1.0):
    values = [float(v) / tau for v in values]
    m = max(values)
    exps = [math.exp(v - m) for v in values]
    s = sum(exps)
    return [e / s for e in exps]


def cross_entropy_py(p, q) -> float:
    return -sum(float(pi) * math.log(float(qi)) for pi, qi in zip(p, q) if pi > 0)


def kl_py(p, q) -> float:
    return sum(
        float(pi) * (math.log(float(pi)) - math.log(float(qi)))
        for pi, qi in zip(p, q)
        if pi > 0
    )


def random_unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    z = rng.normal(size=(n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_simplex(rng: np.random.Generator, n: int) -> np.ndarray:
    p = rng.random(n) + 1e-6
    return p / p.sum()
