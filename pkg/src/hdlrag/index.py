"""Exact nearest-neighbor search over document vectors.

The index is flat and exhaustive: every query is compared against every
stored vector with L2 distance, so retrieval is exact by construction.
Vectors are stored as float32; distances are always computed in double
precision so orderings stay stable near ties. Ties break by insertion
order (first-indexed wins).

On-disk format (little-endian throughout):
magic ``HDLRGIDX`` | u32 version | u32 dim | u64 count |
per-id (u32 byte length + UTF-8 bytes) | count*dim float32 vectors |
u32 CRC32 of everything before it.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import IndexFormatError

MAGIC = b"HDLRGIDX"
FORMAT_VERSION = 1

SQRT2 = math.sqrt(2.0)

# Unit-norm rows survive the float32 round trip well within this.
_NORM_TOL = 1e-5


@dataclass(frozen=True)
class SearchHit:
    """One retrieved entry: id, L2 distance, converted relevance."""

    doc_id: str
    distance: float
    relevance: float


class VectorIndex:
    """Immutable flat index: ordered (doc_id, unit vector) entries."""

    def __init__(self, ids: list[str], matrix: np.ndarray):
        self._ids = list(ids)
        self._matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self._matrix.setflags(write=False)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    @property
    def dim(self) -> int:
        return int(self._matrix.shape[1])

    @property
    def vectors(self) -> np.ndarray:
        return self._matrix

    def __len__(self) -> int:
        return len(self._ids)


def relevance_from_distance(d: float) -> float:
    """Convert an L2 distance between unit vectors to a relevance score.

    relevance = 1 - d / sqrt(2): 1.0 at distance zero, 0.0 at sqrt(2)
    (orthogonal unit vectors), strictly decreasing, and negative beyond --
    antipodal vectors score 1 - sqrt(2). Downstream threshold filters
    absorb the negative range.
    """
    if d < 0:
        raise ValueError("distance must be non-negative")
    return 1.0 - d / SQRT2


def build_index(pairs: list[tuple[str, np.ndarray]]) -> VectorIndex:
    """Build an immutable index from (doc_id, unit vector) pairs.

    Entry order equals input order. Rejects empty input, mixed
    dimensions, non-unit vectors and duplicate ids.
    """
    if not pairs:
        raise ValueError("cannot build an index from an empty list")
    dim = None
    seen: set[str] = set()
    rows = []
    ids = []
    for doc_id, vector in pairs:
        arr = np.asarray(vector, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"entry {doc_id!r}: vector must be one-dimensional")
        if dim is None:
            dim = arr.shape[0]
        elif arr.shape[0] != dim:
            raise ValueError(
                f"entry {doc_id!r}: dimension {arr.shape[0]} does not match index dim {dim}"
            )
        if abs(float(np.linalg.norm(arr)) - 1.0) > _NORM_TOL:
            raise ValueError(f"entry {doc_id!r}: vector is not unit-norm")
        if doc_id in seen:
            raise ValueError(f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        ids.append(doc_id)
        rows.append(arr.astype(np.float32))
    return VectorIndex(ids, np.stack(rows))


def search(index: VectorIndex, query: np.ndarray, k: int) -> list[SearchHit]:
    """Exact top-k by ascending L2 distance; ties break by entry order.

    Returns min(k, len(index)) hits.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query has shape {q.shape}, index dim is {index.dim}")
    d2 = _kernels.l2sq_scan(index.vectors, q)
    order = np.argsort(d2, kind="stable")[: min(k, len(index))]
    hits = []
    for i in order:
        dist = math.sqrt(float(d2[i]))
        hits.append(
            SearchHit(doc_id=index.ids[i], distance=dist, relevance=relevance_from_distance(dist))
        )
    return hits


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Serialize the index; load_index(save_index(x)) is bit-exact."""
    path = Path(path)
    parts = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", index.dim),
        struct.pack("<Q", len(index)),
    ]
    for doc_id in index.ids:
        raw = doc_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())
    payload = b"".join(parts)
    payload += struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    path.write_bytes(payload)


def load_index(path: str | Path) -> VectorIndex:
    """Read an index file, verifying magic, version, length and checksum."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise IndexFormatError(f"{path}: not an index file (bad magic)")
    if len(data) < len(MAGIC) + 16 + 4:
        raise IndexFormatError(f"{path}: truncated header")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise IndexFormatError(f"{path}: checksum mismatch (truncated or corrupt)")
    offset = len(MAGIC)
    version, dim = struct.unpack_from("<II", data, offset)
    offset += 8
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"{path}: unsupported format version {version}")
    (count,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    ids = []
    try:
        for _ in range(count):
            (length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            ids.append(data[offset : offset + length].decode("utf-8"))
            offset += length
    except struct.error as exc:
        raise IndexFormatError(f"{path}: truncated id table") from exc
    expected = count * dim * 4
    blob = data[offset : offset + expected]
    if len(blob) != expected or offset + expected != len(data) - 4:
        raise IndexFormatError(f"{path}: vector payload has wrong length")
    matrix = np.frombuffer(blob, dtype="<f4").reshape(count, dim)
    return VectorIndex(ids, matrix)
