"""Pipeline facade: retrieve, assemble, generate, extract.

The engine owns the immutable pieces (document store, index, embedding
provider, completion provider, configs) and exposes the operations the
CLI, HTTP service and benchmark runner share. It is safe for concurrent
use as long as the providers declare themselves so.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from .corpus import Document, load_documents
from .embedding import DEFAULT_DIM, DeterministicProvider, EmbeddingProvider, RemoteProvider
from .index import VectorIndex, load_index
from .llmclient import (
    BatchSample,
    CompletionProvider,
    GenerationConfig,
    MockProvider,
    RetryPolicy,
    generate,
    generate_batch,
)
from .promptgen import (
    AugmentedPrompt,
    ExtractionResult,
    RuleSet,
    assemble_prompt,
    extract_code,
)
from .retrieval import RetrievalConfig, SamplingTrace, ScoredCandidate, retrieve


@dataclass(frozen=True)
class GenerationResult:
    """Everything one generate run produced, for rendering and provenance."""

    code: str
    extraction: ExtractionResult
    raw: str
    prompt: AugmentedPrompt
    selected: tuple[ScoredCandidate, ...]
    trace: SamplingTrace
    timings: dict[str, float] = field(default_factory=dict)


class Engine:
    def __init__(
        self,
        documents: list[Document],
        index: VectorIndex,
        embedder: EmbeddingProvider,
        completion: CompletionProvider,
        retrieval_cfg: RetrievalConfig | None = None,
        rules: RuleSet | None = None,
        prompt_budget: int = 8192,
        retry: RetryPolicy = RetryPolicy(),
    ):
        self.documents = {doc.id: doc for doc in documents}
        if len(self.documents) != len(documents):
            raise ValueError("duplicate document ids in store")
        self.index = index
        self.embedder = embedder
        self.completion = completion
        self.retrieval_cfg = retrieval_cfg or RetrievalConfig()
        self.rules = rules or RuleSet()
        self.prompt_budget = prompt_budget
        self.retry = retry

    def describe(self) -> dict:
        """Configuration fingerprint recorded in benchmark reports."""
        return {
            "index_size": len(self.index),
            "dim": self.index.dim,
            "embedder": self.embedder.name,
            "provider": self.completion.name,
            "retrieval": {
                "mode": self.retrieval_cfg.mode,
                "fixed_n": self.retrieval_cfg.fixed_n,
                "pool_size": self.retrieval_cfg.pool_size,
                "tau": self.retrieval_cfg.tau,
                "alpha": self.retrieval_cfg.alpha,
                "k_max": self.retrieval_cfg.k_max,
            },
            "prompt_budget": self.prompt_budget,
        }

    def retrieve(
        self, query: str, cfg: RetrievalConfig | None = None
    ) -> tuple[list[ScoredCandidate], SamplingTrace]:
        return retrieve(
            self.index, self.embedder, self.documents, query, cfg or self.retrieval_cfg
        )

    def build_prompt(self, query: str, selected: list[ScoredCandidate]) -> AugmentedPrompt:
        return assemble_prompt(query, selected, self.rules, self.prompt_budget)

    def generate(
        self,
        query: str,
        gen_cfg: GenerationConfig | None = None,
        retrieval_cfg: RetrievalConfig | None = None,
        completion: CompletionProvider | None = None,
    ) -> GenerationResult:
        """Full pipeline for one query with optional per-call overrides."""
        gen_cfg = gen_cfg or GenerationConfig()
        provider = completion or self.completion
        timings: dict[str, float] = {}

        start = time.monotonic()
        selected, trace = self.retrieve(query, retrieval_cfg)
        timings["retrieve_s"] = time.monotonic() - start

        start = time.monotonic()
        prompt = self.build_prompt(query, selected)
        timings["assemble_s"] = time.monotonic() - start

        start = time.monotonic()
        raw = generate(provider, prompt, gen_cfg, self.retry)
        timings["generate_s"] = time.monotonic() - start

        start = time.monotonic()
        extraction = extract_code(raw)
        timings["extract_s"] = time.monotonic() - start

        return GenerationResult(
            code=extraction.code,
            extraction=extraction,
            raw=raw,
            prompt=prompt,
            selected=tuple(selected),
            trace=trace,
            timings=timings,
        )

    def generate_samples(
        self, query: str, gen_cfg: GenerationConfig, retrieval_cfg: RetrievalConfig | None = None
    ) -> list[BatchSample]:
        """samples_n generations for one query, extracted, order-stable.

        Failed samples keep their slot with text=None so downstream
        scoring can count them separately.
        """
        selected, _ = self.retrieve(query, retrieval_cfg)
        prompt = self.build_prompt(query, selected)
        raw_samples = generate_batch(self.completion, prompt, gen_cfg, self.retry)
        extracted: list[BatchSample] = []
        for sample in raw_samples:
            if not sample.ok:
                extracted.append(sample)
                continue
            extracted.append(replace(sample, text=extract_code(sample.text).code))
        return extracted


def make_embedder(spec: str, dim: int = DEFAULT_DIM) -> EmbeddingProvider:
    """Build an embedding provider from a CLI/env spec string."""
    if spec == "deterministic":
        return DeterministicProvider(dim=dim)
    if spec == "remote":
        return RemoteProvider(dim=dim)
    raise ValueError(f"unknown embedder {spec!r} (expected 'deterministic' or 'remote')")


def load_engine(
    index_path: str,
    docs_path: str,
    embedder_spec: str = "deterministic",
    completion: CompletionProvider | None = None,
    retrieval_cfg: RetrievalConfig | None = None,
    rules: RuleSet | None = None,
    prompt_budget: int = 8192,
) -> Engine:
    """Assemble an engine from persisted artifacts."""
    index = load_index(index_path)
    documents = load_documents(docs_path)
    embedder = make_embedder(embedder_spec, dim=index.dim)
    return Engine(
        documents=documents,
        index=index,
        embedder=embedder,
        completion=completion or MockProvider(),
        retrieval_cfg=retrieval_cfg,
        rules=rules,
        prompt_budget=prompt_budget,
    )
