"""Desk-scale dense retriever: token embedding lookup, mean pooling, L2 norm.

The embedding table plays the role of the heavy pre-trained encoder; it sits
behind ``encode``/``encode_gradient`` so a bigger interior can be swapped in
without touching training or indexing. Embeddings are float64 in memory and
float32 on disk.

Checkpoint format (little-endian throughout): magic ``FLRG``, u16 format
version, u32 dim, u32 vocab count, then per token a u16 byte length, the
UTF-8 token bytes, and dim float32 values. Byte-identical across platforms.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .lexical import tokenize

MAGIC = b"FLRG"
FORMAT_VERSION = 1


class NoKnownTokens(ValueError):
    """Every token of the text is out of vocabulary."""


class NearZeroVector(ValueError):
    """Pooled vector has norm below 1e-9 and cannot be normalized."""


class CheckpointFormatError(ValueError):
    pass


@dataclass
class EncoderModel:
    vocab: dict[str, int]
    embedding_table: np.ndarray  # |vocab| x dim, float64
    dim: int

    def token_rows(self, text: str) -> list[int]:
        """Row index per in-vocabulary token occurrence; OOV tokens skipped.
        Sorted so pooling sums in a canonical order and token permutations
        encode bit-identically."""
        return sorted(self.vocab[t] for t in tokenize(text) if t in self.vocab)


def build_vocab(texts: Iterable[str]) -> dict[str, int]:
    tokens: set[str] = set()
    for text in texts:
        tokens.update(tokenize(text))
    return {token: i for i, token in enumerate(sorted(tokens))}


def init_model(vocab: dict[str, int], dim: int = 32, seed: int = 0) -> EncoderModel:
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(seed)
    table = rng.normal(0.0, 1.0, size=(len(vocab), dim)) / np.sqrt(dim)
    return EncoderModel(vocab=dict(vocab), embedding_table=table, dim=dim)


def encode(model: EncoderModel, text: str) -> np.ndarray:
    rows = model.token_rows(text)
    if not rows:
        raise NoKnownTokens(f"no in-vocabulary tokens in {text!r}")
    pooled = model.embedding_table[rows].mean(axis=0)
    norm = float(np.linalg.norm(pooled))
    if norm < 1e-9:
        raise NearZeroVector(f"pooled norm {norm} below 1e-9 for {text!r}")
    return pooled / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    # Inputs are unit norm, so the dot product is the cosine; clamp the
    # floating-point residue back into [-1, 1].
    return float(min(1.0, max(-1.0, float(np.dot(a, b)))))


def encode_gradient(model: EncoderModel, text: str, upstream: np.ndarray) -> dict[int, np.ndarray]:
    """Exact gradient of ``upstream . encode(text)`` w.r.t. embedding rows.

    Backpropagates through normalization (Jacobian (I - vv^T)/|x|) and mean
    pooling (1/T per token occurrence). Returns a sparse map of row index to
    gradient vector.
    """
    rows = model.token_rows(text)
    if not rows:
        raise NoKnownTokens(f"no in-vocabulary tokens in {text!r}")
    pooled = model.embedding_table[rows].mean(axis=0)
    norm = float(np.linalg.norm(pooled))
    if norm < 1e-9:
        raise NearZeroVector(f"pooled norm {norm} below 1e-9 for {text!r}")
    v = pooled / norm
    grad_pooled = (upstream - v * float(np.dot(v, upstream))) / norm
    per_occurrence = grad_pooled / len(rows)
    grads: dict[int, np.ndarray] = {}
    for row in rows:
        if row in grads:
            grads[row] = grads[row] + per_occurrence
        else:
            grads[row] = per_occurrence.copy()
    return grads


# ---------------------------------------------------------------------------
# Persistence

def serialize_model(model: EncoderModel) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HII", FORMAT_VERSION, model.dim, len(model.vocab)))
    by_row = sorted(model.vocab.items(), key=lambda item: item[1])
    for token, row in by_row:
        raw = token.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(model.embedding_table[row].astype("<f4").tobytes())
    return buf.getvalue()


def deserialize_model(data: bytes) -> EncoderModel:
    buf = io.BytesIO(data)
    if buf.read(4) != MAGIC:
        raise CheckpointFormatError("bad magic; not an encoder checkpoint")
    version, dim, count = struct.unpack("<HII", buf.read(10))
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    vocab: dict[str, int] = {}
    table = np.empty((count, dim), dtype=np.float64)
    for row in range(count):
        (length,) = struct.unpack("<H", buf.read(2))
        token = buf.read(length).decode("utf-8")
        vocab[token] = row
        table[row] = np.frombuffer(buf.read(4 * dim), dtype="<f4").astype(np.float64)
    return EncoderModel(vocab=vocab, embedding_table=table, dim=dim)


def save_model(model: EncoderModel, path: Path) -> None:
    Path(path).write_bytes(serialize_model(model))


def load_model(path: Path) -> EncoderModel:
    return deserialize_model(Path(path).read_bytes())


def model_fingerprint(model: EncoderModel) -> bytes:
    """32-byte digest of the checkpoint bytes; stored in vector indices so a
    stale index cannot silently serve a different encoder."""
    return hashlib.sha256(serialize_model(model)).digest()
