"""Episode sampling, prototype classification, and accuracy aggregation.

The encoder is read-only during evaluation. Each episode draws from its own
generator stream split off the evaluation seed, so the report does not
depend on evaluation order and repeated runs with one seed are identical.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import l2_normalize
from .data import Split
from .exceptions import CapacityError, ContractError, ParameterError


@dataclass
class Episode:
    classes: np.ndarray  # (n,) novel class ids
    support_x: np.ndarray  # (n*k, dim)
    support_y: np.ndarray  # (n*k,) positions into ``classes``
    query_x: np.ndarray  # (n*q, dim)
    query_y: np.ndarray  # (n*q,) positions into ``classes``


@dataclass
class EvalReport:
    episodes: int
    mean_accuracy: float
    ci95: float
    per_episode: list[float]

    def summary(self) -> str:
        return f"{self.mean_accuracy:.4f} ± {self.ci95:.4f}"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode_id", "accuracy"])
            for i, acc in enumerate(self.per_episode):
                writer.writerow([i, f"{acc:.10g}"])
            writer.writerow(["mean_ci95", self.summary()])


def sample_episode(
    novel: Split, n: int, k: int, q: int, rng: np.random.Generator
) -> Episode:
    """Uniform N-way K-shot task: classes without replacement, then items
    without replacement within each class; support and query are disjoint."""
    if n < 1 or k < 1 or q < 1:
        raise ParameterError(f"n, k, q must be >= 1, got {(n, k, q)}")
    classes = novel.classes
    eligible = np.array([c for c in classes if len(novel.class_indices(c)) >= k + q])
    if len(eligible) < n:
        raise CapacityError(
            f"episode needs {n} classes with >= {k + q} items; only "
            f"{len(eligible)} of {len(classes)} novel classes qualify"
        )
    chosen = rng.choice(eligible, size=n, replace=False)
    support_x, support_y, query_x, query_y = [], [], [], []
    for pos, c in enumerate(chosen):
        idx = novel.class_indices(int(c))
        picked = rng.choice(idx, size=k + q, replace=False)
        support_x.append(novel.x[picked[:k]])
        query_x.append(novel.x[picked[k:]])
        support_y.append(np.full(k, pos))
        query_y.append(np.full(q, pos))
    return Episode(
        classes=np.asarray(chosen),
        support_x=np.concatenate(support_x).astype(np.float64),
        support_y=np.concatenate(support_y),
        query_x=np.concatenate(query_x).astype(np.float64),
        query_y=np.concatenate(query_y),
    )


def prototypes(enc, support_x: np.ndarray, support_y: np.ndarray, n: int) -> np.ndarray:
    """Per-class mean of support embeddings, then L2-normalized."""
    z = enc.encode(support_x)
    protos = np.zeros((n, z.shape[1]))
    for pos in range(n):
        members = z[support_y == pos]
        if len(members) == 0:
            raise ContractError(f"prototype class {pos} has no support items")
        protos[pos] = members.mean(axis=0)
    return l2_normalize(protos, axis=-1)


def classify_query(protos: np.ndarray, z_q: np.ndarray) -> int:
    """Argmax over cosine similarity; ties go to the lowest class index."""
    if len(protos) == 0:
        raise ParameterError("need at least one prototype")
    return int(np.argmax(protos @ np.asarray(z_q, dtype=np.float64)))


def evaluate(
    enc,
    novel: Split,
    n: int = 5,
    k: int = 1,
    q: int = 15,
    episodes: int = 600,
    rng: np.random.Generator | int | None = None,
) -> EvalReport:
    """Mean episode accuracy with a 95% normal-approximation interval."""
    if episodes < 1:
        raise ParameterError(f"episodes must be >= 1, got {episodes}")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(0 if rng is None else int(rng))
    streams = rng.spawn(episodes)
    accs: list[float] = []
    for stream in streams:
        episode = sample_episode(novel, n, k, q, stream)
        protos = prototypes(enc, episode.support_x, episode.support_y, n)
        z_q = enc.encode(episode.query_x)
        pred = np.argmax(z_q @ protos.T, axis=1)
        accs.append(float(np.mean(pred == episode.query_y)))
    per_episode = np.asarray(accs)
    mean = float(per_episode.mean())
    if episodes > 1:
        ci = float(1.96 * per_episode.std(ddof=1) / np.sqrt(episodes))
    else:
        ci = 0.0
    return EvalReport(episodes=episodes, mean_accuracy=mean, ci95=ci, per_episode=accs)
