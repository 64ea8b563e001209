"""Multi-stage dynamic retrieval: pool, threshold filter, drop-factor
sampling, cap.

A query is embedded with the same provider as the corpus, the flat index
returns a candidate pool, distances become relevance scores, and the
sampler decides how many candidates actually enter the prompt: always
the best one, then more while the relevance curve stays flat, halting as
soon as a score drop exceeds alpha times the previous drop, never more
than k_max. All deltas are computed in double precision and the halt
test is strict (equality does not halt). A zero previous drop (tied
scores) makes any positive subsequent drop halt; that is the literal
reading of the halt inequality and is intentional.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Mapping

from .corpus import Document
from .embedding import EmbeddingProvider, embed_text
from .errors import CorpusError, HdlragError
from .index import VectorIndex, search

MODES = ("dynamic", "fixed", "disabled")

# Trace reasons: the first four are produced by dynamic_sample per the
# sampling contract; "disabled" only ever comes from retrieve().
REASON_DROP_FACTOR = "drop_factor"
REASON_CAP = "cap"
REASON_EXHAUSTED = "exhausted"
REASON_THRESHOLD_EMPTY = "threshold_empty"
REASON_DISABLED = "disabled"

_FIXED_MODE_RE = re.compile(r"^fixed[:(](\d+)\)?$")


@dataclass(frozen=True)
class RetrievalConfig:
    """Knobs of the retrieval pipeline.

    mode is one of "dynamic", "fixed" (top fixed_n of the
    threshold-filtered pool) or "disabled" (zero-shot baseline).
    """

    pool_size: int = 10
    tau: float = 0.55
    alpha: float = 1.5
    k_max: int = 5
    mode: str = "dynamic"
    fixed_n: int | None = None

    def validate(self) -> None:
        if not self.pool_size >= self.k_max >= 1:
            raise ValueError(
                f"need pool_size >= k_max >= 1, got pool_size={self.pool_size} k_max={self.k_max}"
            )
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "fixed":
            if self.fixed_n is None or not 1 <= self.fixed_n <= self.pool_size:
                raise ValueError(
                    f"fixed mode needs 1 <= n <= pool_size, got n={self.fixed_n}"
                )


@dataclass(frozen=True)
class ScoredCandidate:
    """A retrieved document with its distance and converted relevance."""

    doc_id: str
    relevance: float
    distance: float
    document: Document


@dataclass(frozen=True)
class SamplingTrace:
    """Observability record of one sampling run.

    drops holds every consecutive score difference the sampler computed,
    including the one that triggered a halt. halted_at is the 1-based
    rank (within the threshold-filtered pool) of the first candidate
    rejected by the drop test, None when no halt occurred.
    """

    drops: tuple[float, ...] = ()
    halted_at: int | None = None
    reason: str = REASON_EXHAUSTED


def parse_mode(text: str) -> tuple[str, int | None]:
    """Parse a mode string: "dynamic", "disabled", "fixed:N" or "fixed(N)"."""
    text = text.strip().lower()
    if text in ("dynamic", "disabled"):
        return text, None
    m = _FIXED_MODE_RE.match(text)
    if m:
        return "fixed", int(m.group(1))
    raise ValueError(f"unrecognized mode {text!r} (expected dynamic, disabled, or fixed:N)")


def config_from_dict(data: Mapping[str, object], base: RetrievalConfig | None = None) -> RetrievalConfig:
    """Build a config from file/CLI keys, overriding base where present."""
    cfg = base or RetrievalConfig()
    known = {"pool_size", "tau", "alpha", "k_max", "mode"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown retrieval config keys: {sorted(unknown)}")
    updates: dict[str, object] = {}
    coercers = {"pool_size": int, "tau": float, "alpha": float, "k_max": int}
    for key, coerce in coercers.items():
        if key in data:
            try:
                updates[key] = coerce(data[key])  # type: ignore[arg-type]
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for {key!r}: {exc}") from exc
    if "mode" in data:
        mode, fixed_n = parse_mode(str(data["mode"]))
        updates["mode"] = mode
        updates["fixed_n"] = fixed_n
    cfg = replace(cfg, **updates)  # type: ignore[arg-type]
    cfg.validate()
    return cfg


def _check_sorted(candidates: list[ScoredCandidate]) -> None:
    for a, b in zip(candidates, candidates[1:]):
        if b.relevance > a.relevance:
            raise ValueError(
                f"candidates not sorted by relevance: {a.doc_id} ({a.relevance}) "
                f"before {b.doc_id} ({b.relevance})"
            )


def dynamic_sample(
    candidates: list[ScoredCandidate], cfg: RetrievalConfig
) -> tuple[list[ScoredCandidate], SamplingTrace]:
    """Select a context set from relevance-sorted candidates.

    Keeps candidates scoring at least tau; always selects the most
    relevant survivor; selects the second (when allowed) to establish the
    initial drop; then keeps extending while each new drop stays within
    alpha times the previous one, up to k_max. The selection is always a
    prefix of the filtered pool.
    """
    cfg.validate()
    _check_sorted(candidates)
    filtered = [c for c in candidates if c.relevance >= cfg.tau]
    if not filtered:
        return [], SamplingTrace(reason=REASON_THRESHOLD_EMPTY)

    selected = [filtered[0]]
    drops: list[float] = []
    if len(filtered) >= 2 and cfg.k_max >= 2:
        selected.append(filtered[1])
        delta_prev = filtered[0].relevance - filtered[1].relevance
        drops.append(delta_prev)
        for i in range(3, min(len(filtered), cfg.k_max) + 1):
            delta_curr = filtered[i - 2].relevance - filtered[i - 1].relevance
            drops.append(delta_curr)
            if delta_curr > cfg.alpha * delta_prev:
                return selected, SamplingTrace(
                    drops=tuple(drops), halted_at=i, reason=REASON_DROP_FACTOR
                )
            selected.append(filtered[i - 1])
            delta_prev = delta_curr

    if len(selected) == cfg.k_max and len(filtered) > cfg.k_max:
        reason = REASON_CAP
    else:
        reason = REASON_EXHAUSTED
    return selected, SamplingTrace(drops=tuple(drops), halted_at=None, reason=reason)


def _fixed_sample(
    candidates: list[ScoredCandidate], cfg: RetrievalConfig
) -> tuple[list[ScoredCandidate], SamplingTrace]:
    # Fixed-n keeps the threshold filter so ablations stay comparable.
    filtered = [c for c in candidates if c.relevance >= cfg.tau]
    if not filtered:
        return [], SamplingTrace(reason=REASON_THRESHOLD_EMPTY)
    n = cfg.fixed_n or 1
    selected = filtered[:n]
    reason = REASON_CAP if len(filtered) > len(selected) else REASON_EXHAUSTED
    return selected, SamplingTrace(reason=reason)


def retrieve(
    index: VectorIndex,
    provider: EmbeddingProvider,
    documents: Mapping[str, Document],
    query_text: str,
    cfg: RetrievalConfig,
) -> tuple[list[ScoredCandidate], SamplingTrace]:
    """Run the full retrieval pipeline for one query.

    Embeds the query with the corpus provider, searches the pool,
    converts distances, then applies the configured mode. Errors from the
    provider or index propagate with a stage label prefixed.
    """
    cfg.validate()
    if not query_text:
        raise ValueError("query_text must be non-empty")
    if cfg.mode == "disabled":
        return [], SamplingTrace(reason=REASON_DISABLED)

    try:
        query_vec = embed_text(provider, query_text)
    except HdlragError as exc:
        exc.args = (f"stage embed_query: {exc.args[0]}",) + exc.args[1:]
        raise
    try:
        hits = search(index, query_vec, cfg.pool_size)
    except ValueError as exc:
        raise ValueError(f"stage search: {exc}") from exc

    candidates = []
    for hit in hits:
        doc = documents.get(hit.doc_id)
        if doc is None:
            raise CorpusError(
                f"stage join: index entry {hit.doc_id!r} has no document in the store"
            )
        candidates.append(
            ScoredCandidate(
                doc_id=hit.doc_id,
                relevance=hit.relevance,
                distance=hit.distance,
                document=doc,
            )
        )

    if cfg.mode == "fixed":
        return _fixed_sample(candidates, cfg)
    return dynamic_sample(candidates, cfg)
