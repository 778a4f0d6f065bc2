"""Augmented-batch construction and soft-anchor sampling.

A training batch holds the two independently augmented views of B raw items
stacked as 2B rows, with labels duplicated and the i <-> i+-B view pairing
kept explicit. Anchor pools are the frozen partner's embeddings of the
current batch (co-batch anchors), which keeps them fresh and gradient-free
by construction.

All sampling is driven by caller-provided generators; batch building and
anchor sampling are deterministic per generator state, so parallel prefetch
just needs per-batch streams split from the run seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import ContractError, ParameterError

if TYPE_CHECKING:
    from .encoders import Encoder


@dataclass(frozen=True)
class AugmentConfig:
    noise_sigma: float = 0.0
    mask_prob: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ParameterError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.mask_prob < 1.0:
            raise ParameterError(f"mask_prob must be in [0, 1), got {self.mask_prob}")


def augment(x: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    """Additive gaussian noise, then independent coordinate masking.

    Both draws always happen, so the generator stream position does not
    depend on the config values (sigma=0, mask_prob=0 is the identity).
    """
    x = np.asarray(x, dtype=np.float64)
    noisy = x + cfg.noise_sigma * rng.standard_normal(x.shape)
    keep = rng.random(x.shape) >= cfg.mask_prob
    return noisy * keep


@dataclass
class AugmentedBatch:
    """2B-sample batch: ``inputs = concat(Aug(raw), Aug(raw))``."""

    raw_ids: np.ndarray  # (B,)
    inputs: np.ndarray  # (2B, dim)
    labels: np.ndarray  # (2B,)

    @property
    def b(self) -> int:
        return len(self.raw_ids)

    @property
    def size(self) -> int:
        return 2 * self.b

    @property
    def view_map(self) -> np.ndarray:
        """``view_map[i]`` is the index of i's other augmented view."""
        b = self.b
        return np.concatenate([np.arange(b) + b, np.arange(b)])


def build_batch(
    raw_inputs: np.ndarray,
    raw_labels: np.ndarray,
    rng: np.random.Generator,
    cfg: AugmentConfig,
    raw_ids: np.ndarray | None = None,
) -> AugmentedBatch:
    raw_inputs = np.asarray(raw_inputs, dtype=np.float64)
    raw_labels = np.asarray(raw_labels)
    if raw_inputs.ndim != 2 or len(raw_inputs) == 0:
        raise ParameterError(f"raw batch must be a nonempty matrix, got shape {raw_inputs.shape}")
    if len(raw_labels) != len(raw_inputs):
        raise ParameterError(
            f"got {len(raw_labels)} labels for {len(raw_inputs)} items"
        )
    if raw_ids is None:
        raw_ids = np.arange(len(raw_inputs))
    first = augment(raw_inputs, rng, cfg)
    second = augment(raw_inputs, rng, cfg)
    return AugmentedBatch(
        raw_ids=np.asarray(raw_ids),
        inputs=np.concatenate([first, second], axis=0),
        labels=np.concatenate([raw_labels, raw_labels]),
    )


def positive_index_sets(batch: AugmentedBatch, mode: str) -> list[np.ndarray]:
    """Per-instance positive indices: same-class peers (supervised) or just
    the other view (unsupervised)."""
    n = batch.size
    if mode == "supervised":
        labels = batch.labels
        out = []
        for i in range(n):
            same = np.flatnonzero(labels == labels[i])
            out.append(same[same != i])
        return out
    if mode == "unsupervised":
        return [np.array([partner]) for partner in batch.view_map]
    raise ParameterError(f"mode must be 'supervised' or 'unsupervised', got {mode!r}")


@dataclass
class AnchorSets:
    """Per-instance positive/negative anchor features from the frozen partner.

    ``features`` rows are constants (never part of a graph); ``pos_indices``
    and ``neg_indices`` index into them per main-batch instance.
    """

    features: np.ndarray  # (A, d) unit rows
    anchor_labels: np.ndarray  # (A,)
    instance_labels: np.ndarray  # (n,)
    pos_indices: tuple[np.ndarray, ...]
    neg_indices: tuple[np.ndarray, ...]

    def validate(self) -> None:
        for i, (pos, neg) in enumerate(zip(self.pos_indices, self.neg_indices)):
            if not np.all(self.anchor_labels[pos] == self.instance_labels[i]):
                raise ContractError(f"instance {i}: positive anchor with a different class")
            if np.any(self.anchor_labels[neg] == self.instance_labels[i]):
                raise ContractError(f"instance {i}: negative anchor with the same class")


def sample_anchor_sets(
    partner: "Encoder",
    batch: AugmentedBatch,
    rng: np.random.Generator,
    n_pos: int | None = None,
    n_neg: int | None = None,
) -> AnchorSets:
    """Sample per-instance anchors from the partner's co-batch embeddings.

    ``None`` means "all available" (the default, mirroring the contrastive
    denominator structure); integers must be >= 1 and are capped at what the
    batch can provide. Positives exclude the instance itself but include its
    other view.
    """
    if not partner.frozen:
        raise ContractError("anchor sampling requires a frozen partner encoder")
    if n_pos is not None and n_pos < 1:
        raise ParameterError(f"n_pos must be >= 1 or None, got {n_pos}")
    if n_neg is not None and n_neg < 1:
        raise ParameterError(f"n_neg must be >= 1 or None, got {n_neg}")

    features = partner.encode(batch.inputs)
    labels = batch.labels
    pos_sets: list[np.ndarray] = []
    neg_sets: list[np.ndarray] = []
    for i in range(batch.size):
        same = np.flatnonzero(labels == labels[i])
        same = same[same != i]
        diff = np.flatnonzero(labels != labels[i])
        take_p = len(same) if n_pos is None else min(n_pos, len(same))
        take_n = len(diff) if n_neg is None else min(n_neg, len(diff))
        pos_sets.append(np.sort(rng.choice(same, size=take_p, replace=False)) if take_p else same[:0])
        neg_sets.append(np.sort(rng.choice(diff, size=take_n, replace=False)) if take_n else diff[:0])
    return AnchorSets(
        features=features,
        anchor_labels=labels.copy(),
        instance_labels=labels.copy(),
        pos_indices=tuple(pos_sets),
        neg_indices=tuple(neg_sets),
    )
