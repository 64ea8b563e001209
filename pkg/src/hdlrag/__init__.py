"""Retrieval-augmented Verilog generation.

Index a pre-verified module corpus, retrieve a dynamically sized set of
in-context examples per request, assemble a constrained prompt, call a
completion provider, extract the code, and score it with a two-stage
compile/simulate harness reported as pass@k.
"""

from .corpus import Document, ModuleRecord, PortDecl, build_document, load_corpus
from .embedding import DeterministicProvider, EmbeddingProvider, embed_text
from .engine import Engine, GenerationResult, load_engine, make_embedder
from .errors import (
    BudgetError,
    CorpusError,
    EnvironmentGapError,
    HdlragError,
    IndexFormatError,
    ProviderError,
    RefusalError,
    TransportError,
)
from .evaluation import (
    BenchmarkProblem,
    PassAtKReport,
    ToolchainConfig,
    pass_at_k,
    run_benchmark,
)
from .index import VectorIndex, build_index, load_index, save_index, search
from .llmclient import (
    PROFILES,
    CompletionProvider,
    GenerationConfig,
    HttpChatProvider,
    MockProvider,
    RetryPolicy,
)
from .promptgen import AugmentedPrompt, RuleSet, assemble_prompt, extract_code
from .retrieval import RetrievalConfig, SamplingTrace, ScoredCandidate, dynamic_sample, retrieve

__version__ = "0.1.0"

__all__ = [
    "AugmentedPrompt",
    "BenchmarkProblem",
    "BudgetError",
    "CompletionProvider",
    "CorpusError",
    "DeterministicProvider",
    "Document",
    "EmbeddingProvider",
    "Engine",
    "EnvironmentGapError",
    "GenerationConfig",
    "GenerationResult",
    "HdlragError",
    "HttpChatProvider",
    "IndexFormatError",
    "MockProvider",
    "ModuleRecord",
    "PROFILES",
    "PassAtKReport",
    "PortDecl",
    "ProviderError",
    "RefusalError",
    "RetrievalConfig",
    "RetryPolicy",
    "RuleSet",
    "SamplingTrace",
    "ScoredCandidate",
    "ToolchainConfig",
    "TransportError",
    "VectorIndex",
    "assemble_prompt",
    "build_document",
    "build_index",
    "dynamic_sample",
    "embed_text",
    "extract_code",
    "load_corpus",
    "load_engine",
    "load_index",
    "make_embedder",
    "pass_at_k",
    "retrieve",
    "run_benchmark",
    "save_index",
    "search",
]
