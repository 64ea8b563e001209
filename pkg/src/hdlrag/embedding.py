"""Text-to-vector conversion behind a pluggable provider contract.

Vectors are fixed-dimension (384 by default) and normalized to unit
Euclidean norm before they reach the index, which makes L2 distance over
them interchangeable with cosine similarity. Providers must be
deterministic at a fixed model version; the bundled deterministic
provider needs no model weights and is reproducible across platforms.
"""

from __future__ import annotations

import hashlib
import os
import re
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .errors import ProviderError, TransportError

DEFAULT_DIM = 384

_TOKEN_RE = re.compile(r"[a-z0-9_]+")


def normalize(vector: Sequence[float] | np.ndarray) -> np.ndarray:
    """Scale a raw vector to unit Euclidean norm (float64).

    Raises ValueError on the zero vector, whose direction is undefined.
    """
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("vector must be one-dimensional")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return arr / norm


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Capability contract: a named, fixed-dimension text embedder."""

    name: str
    dim: int

    def embed(self, text: str) -> np.ndarray:
        """Return a raw (not necessarily normalized) vector of length dim."""
        ...


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    """Embed one text and normalize the result to unit norm."""
    if not text:
        raise ValueError("text must be non-empty")
    raw = np.asarray(provider.embed(text), dtype=np.float64)
    if raw.shape != (provider.dim,):
        raise ProviderError(
            f"provider {provider.name!r} returned shape {raw.shape}, expected ({provider.dim},)"
        )
    return normalize(raw)


def embed_texts(provider: EmbeddingProvider, texts: Iterable[str]) -> np.ndarray:
    """Embed many texts; returns a (n, dim) float64 array of unit rows."""
    rows = [embed_text(provider, t) for t in texts]
    if not rows:
        return np.empty((0, provider.dim), dtype=np.float64)
    return np.stack(rows)


def _fold_ngrams(text: str, dim: int) -> np.ndarray:
    """Hash word unigrams and bigrams into dim signed buckets."""
    tokens = _TOKEN_RE.findall(text.lower())
    grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    vec = np.zeros(dim, dtype=np.float64)
    for gram in grams:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        bucket = int.from_bytes(digest[:4], "little") % dim
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[bucket] += sign
    return vec


def embed_deterministic(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Offline test embedding: hashed n-gram bag folded into dim buckets.

    Fully reproducible across runs and platforms (hashlib-based). Loosely
    preserves "similar text, similar vector": shared tokens land in shared
    buckets. Output is unit-norm.
    """
    if not text:
        raise ValueError("text must be non-empty")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = _fold_ngrams(text, dim)
    if not np.any(vec):
        # Token-free or fully cancelled input: fall back to a whole-text bucket.
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
        vec[int.from_bytes(digest[:4], "little") % dim] = 1.0
    return normalize(vec)


class DeterministicProvider:
    """EmbeddingProvider backed by embed_deterministic. Safe for concurrent use."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.name = f"deterministic-{dim}"
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        return embed_deterministic(text, self.dim)


class RemoteProvider:
    """Adapter over a remote embedding endpoint.

    The endpoint accepts ``{"texts": [string]}`` and returns
    ``{"vectors": [[number]]}``. A dimension mismatch against the
    configured dim is a hard error. The URL can come from the
    HDLRAG_EMBED_URL environment variable.
    """

    def __init__(self, url: str | None = None, dim: int = DEFAULT_DIM, timeout: float = 30.0):
        url = url or os.environ.get("HDLRAG_EMBED_URL", "")
        if not url:
            raise ValueError("remote embedding URL not configured (HDLRAG_EMBED_URL)")
        self.name = f"remote:{url}"
        self.url = url
        self.dim = dim
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        try:
            resp = requests.post(self.url, json={"texts": texts}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"embedding endpoint unreachable: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"embedding endpoint returned {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderError(f"embedding endpoint returned {resp.status_code}: {resp.text}")
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape != (len(texts), self.dim):
            raise ProviderError(
                f"embedding endpoint returned shape {arr.shape}, expected ({len(texts)}, {self.dim})"
            )
        return arr
