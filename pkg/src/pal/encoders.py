"""Dense encoders, the shared cosine classifier, and checkpoint files.

Encoders are small ReLU MLPs whose output is L2-normalized, so every
embedding lives on the unit sphere and cosine similarity is a plain dot
product. A frozen encoder is read-only and safe to share across threads;
trainable encoders have a single writer.

Checkpoint format (little-endian throughout)::

    magic "PALW" | u32 version | u32 n_layers | n_layers x (u32 in, u32 out)
    then per layer: in*out float32 weights (row-major) + out float32 biases
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import Tensor, l2_normalize, matmul, relu
from .exceptions import FormatError, ParameterError, ShapeError

CHECKPOINT_MAGIC = b"PALW"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    hidden_dims: tuple[int, ...] = (64, 64)
    embed_dim: int = 32
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.embed_dim)
        if any(d <= 0 for d in dims):
            raise ParameterError(f"encoder dims must be positive, got {dims}")
        if self.embed_dim < 2:
            raise ParameterError(f"embed_dim must be >= 2, got {self.embed_dim}")
        if not self.hidden_dims:
            raise ParameterError("at least one hidden layer is required")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        chain = (self.input_dim, *self.hidden_dims, self.embed_dim)
        return list(zip(chain[:-1], chain[1:]))


def _glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Encoder:
    """ReLU MLP with unit-norm output embeddings."""

    def __init__(self, config: EncoderConfig):
        self.config = config
        self.frozen = False
        rng = np.random.default_rng(config.seed)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in config.layer_dims:
            self.weights.append(Tensor(_glorot_uniform(rng, fan_in, fan_out), requires_grad=True))
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

    def parameters(self) -> list[Tensor]:
        return [*self.weights, *self.biases]

    def freeze(self) -> "Encoder":
        self.frozen = True
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None
        return self

    def _check_input(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise ShapeError(
                f"embed: expected inputs with {self.config.input_dim} features, "
                f"got shape {x.shape}"
            )
        return x, single

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Graph-free forward pass; unit embeddings, one per input row
        (a single vector in gives a single vector out)."""
        h, single = self._check_input(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i != last:
                h = np.maximum(h, 0.0)
        out = l2_normalize(h, axis=-1)
        return out[0] if single else out

    def embed(self, x: np.ndarray) -> Tensor:
        """Differentiable forward pass. Frozen encoders return a constant
        tensor, so no gradient can ever reach their parameters."""
        if self.frozen:
            return Tensor(self.encode(x))
        h_arr, single = self._check_input(x)
        h: Tensor = Tensor(h_arr)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = matmul(h, w) + b
            if i != last:
                h = relu(h)
        out = l2_normalize(h, axis=-1)
        if single:
            from .core import reshape

            out = reshape(out, (out.shape[1],))
        return out


class CosineClassifier:
    """Scaled cosine-similarity classifier over unit class-weight rows.

    The same object is shared between the partner path and the main path
    during logit alignment; mutating the weights is visible to both.
    """

    def __init__(self, n_classes: int, embed_dim: int, scale: float = 10.0, seed: int = 0):
        if n_classes < 2:
            raise ParameterError(f"need at least 2 classes, got {n_classes}")
        if scale <= 0:
            raise ParameterError(f"scale must be positive, got {scale}")
        rng = np.random.default_rng(seed)
        raw = rng.normal(size=(n_classes, embed_dim))
        self.weights = Tensor(l2_normalize(raw, axis=-1), requires_grad=True)
        self.scale = float(scale)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def parameters(self) -> list[Tensor]:
        return [self.weights]

    def logits(self, z):
        """``scale * <z, w_c>`` per class; Tensor in, Tensor out (and array
        in, array out for constant targets)."""
        if isinstance(z, Tensor):
            from .core import transpose

            return matmul(z, transpose(self.weights)) * self.scale
        return (np.asarray(z, dtype=np.float64) @ self.weights.data.T) * self.scale

    def renormalize(self) -> None:
        """Project weight rows back onto the unit sphere (run after every
        optimizer step)."""
        self.weights.data = l2_normalize(self.weights.data, axis=-1)


def _write_palw(path, layers: list[tuple[np.ndarray, np.ndarray]]) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(layers)))
        for w, b in layers:
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w, b in layers:
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def _read_palw(path) -> list[tuple[np.ndarray, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at byte 0, expected PALW")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header at byte {len(blob)}")
    version, n_layers = struct.unpack_from("<II", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    offset = 12
    dims = []
    for _ in range(n_layers):
        if offset + 8 > len(blob):
            raise FormatError(f"{path}: truncated layer table at byte {offset}")
        dims.append(struct.unpack_from("<II", blob, offset))
        offset += 8
    layers = []
    for fan_in, fan_out in dims:
        w_bytes = fan_in * fan_out * 4
        b_bytes = fan_out * 4
        if offset + w_bytes + b_bytes > len(blob):
            raise FormatError(f"{path}: truncated payload at byte {offset}")
        w = np.frombuffer(blob, dtype="<f4", count=fan_in * fan_out, offset=offset)
        offset += w_bytes
        b = np.frombuffer(blob, dtype="<f4", count=fan_out, offset=offset)
        offset += b_bytes
        layers.append((w.reshape(fan_in, fan_out).astype(np.float64), b.astype(np.float64)))
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes at byte {offset}")
    return layers


def save_encoder(encoder: Encoder, path) -> None:
    _write_palw(path, [(w.data, b.data) for w, b in zip(encoder.weights, encoder.biases)])


def load_encoder(path) -> Encoder:
    layers = _read_palw(path)
    if len(layers) < 2:
        raise FormatError(f"{path}: an encoder checkpoint needs >= 2 layers")
    hidden = tuple(w.shape[1] for w, _ in layers[:-1])
    config = EncoderConfig(
        input_dim=layers[0][0].shape[0],
        hidden_dims=hidden,
        embed_dim=layers[-1][0].shape[1],
        seed=0,
    )
    enc = Encoder(config)
    for i, (w, b) in enumerate(layers):
        enc.weights[i].data = w
        enc.biases[i].data = b
    return enc


def save_classifier(clf: CosineClassifier, path) -> None:
    # Stored as a single affine layer (embed_dim -> n_classes); the bias
    # slot is zeros, kept only so the container format stays uniform.
    w = clf.weights.data.T
    _write_palw(path, [(w, np.zeros(w.shape[1]))])


def load_classifier(path, scale: float = 10.0, seed: int = 0) -> CosineClassifier:
    layers = _read_palw(path)
    if len(layers) != 1:
        raise FormatError(f"{path}: a classifier checkpoint holds exactly 1 layer")
    w, _ = layers[0]
    clf = CosineClassifier(n_classes=w.shape[1], embed_dim=w.shape[0], scale=scale, seed=seed)
    clf.weights.data = w.T.copy()
    return clf
