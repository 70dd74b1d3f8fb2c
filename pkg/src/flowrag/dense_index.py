"""Exact-similarity vector index over catalog steps or tables.

A flat matrix scan: catalogs are small enough that O(N*n) per query is cheap
and exact search keeps recall noise out of experiments. Rows are stored
float32 so in-memory search and a save/load round trip rank identically.

Index file format (little-endian): magic ``FLIX``, u16 version, u8 kind
(0 = step, 1 = table), u32 dim, u32 count, 32-byte encoder fingerprint, then
per item a u16 name byte length, the UTF-8 name, and dim float32 values.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .catalog import Catalog, step_definition_line
from .encoder import EncoderModel, encode, model_fingerprint

MAGIC = b"FLIX"
FORMAT_VERSION = 1
_KIND_CODES = {"step": 0, "table": 1}
_KIND_NAMES = {code: kind for kind, code in _KIND_CODES.items()}


class IndexFormatError(ValueError):
    pass


class FingerprintMismatch(ValueError):
    """Index was built with a different encoder checkpoint."""


@dataclass
class VectorIndex:
    kind: str  # "step" or "table"
    ids: tuple[str, ...]
    matrix: np.ndarray  # count x dim, float32, unit rows
    encoder_fingerprint: bytes

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


def item_text(catalog: Catalog, kind: str, name: str) -> str:
    """Text encoded for an item: the prompt step line for steps, the bare
    name for tables."""
    if kind == "step":
        return step_definition_line(catalog.steps[name])
    return name


def build_index(model: EncoderModel, catalog: Catalog, kind: str) -> VectorIndex:
    if kind not in _KIND_CODES:
        raise ValueError(f"kind must be 'step' or 'table', got {kind!r}")
    names = sorted(catalog.steps) if kind == "step" else sorted(catalog.tables)
    matrix = np.empty((len(names), model.dim), dtype=np.float32)
    for i, name in enumerate(names):
        try:
            matrix[i] = encode(model, item_text(catalog, kind, name))
        except ValueError as exc:
            raise type(exc)(f"{kind} {name!r}: {exc}") from exc
    return VectorIndex(
        kind=kind,
        ids=tuple(names),
        matrix=matrix,
        encoder_fingerprint=model_fingerprint(model),
    )


def topk(index: VectorIndex, query_vec: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exact top-k by cosine descending, ties by ascending item name."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        return []
    scores = index.matrix @ query_vec.astype(np.float64)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.ids[i]))
    return [(index.ids[i], float(scores[i])) for i in order[: min(k, len(index))]]


# ---------------------------------------------------------------------------
# Persistence

def serialize_index(index: VectorIndex) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HBII", FORMAT_VERSION, _KIND_CODES[index.kind], index.dim, len(index)))
    buf.write(index.encoder_fingerprint)
    for i, name in enumerate(index.ids):
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(index.matrix[i].astype("<f4").tobytes())
    return buf.getvalue()


def save_index(index: VectorIndex, path: Path) -> None:
    Path(path).write_bytes(serialize_index(index))


def load_index(path: Path, expected_fingerprint: Optional[bytes] = None) -> VectorIndex:
    data = Path(path).read_bytes()
    buf = io.BytesIO(data)
    if buf.read(4) != MAGIC:
        raise IndexFormatError(f"{path}: bad magic; not an index file")
    version, kind_code, dim, count = struct.unpack("<HBII", buf.read(11))
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"{path}: unsupported index version {version}")
    if kind_code not in _KIND_NAMES:
        raise IndexFormatError(f"{path}: unknown kind code {kind_code}")
    fingerprint = buf.read(32)
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise FingerprintMismatch(
            f"{path}: index fingerprint {fingerprint.hex()[:12]}... does not match "
            f"encoder {expected_fingerprint.hex()[:12]}..."
        )
    ids = []
    matrix = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        (length,) = struct.unpack("<H", buf.read(2))
        ids.append(buf.read(length).decode("utf-8"))
        matrix[i] = np.frombuffer(buf.read(4 * dim), dtype="<f4")
    return VectorIndex(
        kind=_KIND_NAMES[kind_code], ids=tuple(ids), matrix=matrix, encoder_fingerprint=fingerprint
    )
