"""Prompt assembly, token budgeting, and code extraction.

An augmented prompt is a three-part sequence: system role plus hard
rules, retrieved context examples in relevance order, then the user's
request verbatim. The budget is enforced by evicting whole context
blocks from the least relevant end; a truncated HDL example would be
worse than none. Extraction pulls the generated module out of the raw
completion by fence precedence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import parse_header
from .errors import BudgetError
from .retrieval import ScoredCandidate

SYSTEM_ROLE = "You are an expert Verilog RTL design engineer."

# Non-removable generation rules; extra rules from a rule file merge after.
DEFAULT_RULES = (
    "You must produce fully implemented, accurate Verilog-2005 code.",
    "You must not use placeholders or incomplete modules.",
    "You cannot nest a module inside another module.",
)

_VERILOG_TAGS = {"verilog", "v", "sv", "systemverilog"}

_FENCE_RE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)

SOURCE_TAGGED = "tagged_fence"
SOURCE_ANY = "any_fence"
SOURCE_WHOLE = "whole_text"


@dataclass(frozen=True)
class RuleSet:
    """Generation rules: fixed defaults plus optional extra lines."""

    extra: tuple[str, ...] = ()

    @property
    def rules(self) -> tuple[str, ...]:
        return DEFAULT_RULES + self.extra

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleSet":
        """Read extra rules: plain text, one rule per line, blanks ignored."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(extra=tuple(line.strip() for line in lines if line.strip()))


@dataclass(frozen=True)
class AugmentedPrompt:
    """The assembled three-part prompt plus bookkeeping."""

    system_text: str
    context_blocks: tuple[tuple[str, str], ...]  # (doc_id, document text), relevance-descending
    user_text: str
    estimated_tokens: int
    evicted_ids: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def render_user_payload(self) -> str:
        """Context examples followed by the verbatim user request."""
        parts = []
        for i, (doc_id, text) in enumerate(self.context_blocks, start=1):
            try:
                label = parse_header(text).name
            except Exception:
                label = doc_id
            parts.append(f"// Example {i}: {label}\n{text}")
        parts.append(self.user_text)
        return "\n\n".join(parts)

    def render_full(self) -> str:
        """Single concatenated text for completion-style providers."""
        return self.system_text + "\n\n" + self.render_user_payload()


@dataclass(frozen=True)
class ExtractionResult:
    code: str
    source: str  # tagged_fence | any_fence | whole_text
    warnings: tuple[str, ...] = ()


def estimate_tokens(text: str) -> int:
    """Deterministic heuristic token count: ceil(len/4)."""
    return (len(text) + 3) // 4


def render_system_text(rules: RuleSet) -> str:
    lines = [SYSTEM_ROLE, "Rules:"]
    lines.extend(f"- {rule}" for rule in rules.rules)
    return "\n".join(lines)


def _estimate(prompt: AugmentedPrompt) -> int:
    return estimate_tokens(prompt.render_full())


def fit_to_budget(prompt: AugmentedPrompt, budget: int) -> AugmentedPrompt:
    """Evict whole context blocks, least relevant first, until the prompt fits.

    Never touches the system or user text and never truncates a block
    mid-document. Each eviction records a warning naming the id.
    """
    floor = replace(prompt, context_blocks=(), estimated_tokens=0)
    if estimate_tokens(floor.render_full()) > budget:
        raise BudgetError(
            f"budget {budget} cannot hold system and user text alone "
            f"({estimate_tokens(floor.render_full())} tokens)"
        )
    current = prompt
    while _estimate(current) > budget and current.context_blocks:
        dropped_id = current.context_blocks[-1][0]
        current = replace(
            current,
            context_blocks=current.context_blocks[:-1],
            evicted_ids=current.evicted_ids + (dropped_id,),
            warnings=current.warnings
            + (f"context block {dropped_id!r} dropped to fit token budget {budget}",),
        )
    return replace(current, estimated_tokens=_estimate(current))


def assemble_prompt(
    query: str,
    selected: list[ScoredCandidate],
    rules: RuleSet | None = None,
    budget: int = 8192,
) -> AugmentedPrompt:
    """Build the augmented prompt for one query.

    selected must already be in relevance order (as the retrieval
    pipeline returns it); each block is the full document text, header
    included. With an empty selection the prompt degrades to the
    zero-shot baseline shape: system rules plus the user request.
    """
    if not query:
        raise ValueError("query must be non-empty")
    prompt = AugmentedPrompt(
        system_text=render_system_text(rules or RuleSet()),
        context_blocks=tuple((c.doc_id, c.document.text) for c in selected),
        user_text=query,
        estimated_tokens=0,
    )
    return fit_to_budget(prompt, budget)


def extract_code(raw: str) -> ExtractionResult:
    """Extract generated HDL from a raw completion.

    Precedence: first fence tagged as Verilog, then first fence with any
    other (or no) tag, then the whole trimmed text. Fence markers are
    excluded and surrounding whitespace stripped; fences with empty
    bodies are ignored. Fallbacks record a warning.
    """
    if not raw:
        raise ValueError("raw completion must be non-empty")
    tagged: str | None = None
    untagged: str | None = None
    for match in _FENCE_RE.finditer(raw):
        tag = match.group(1).strip().lower()
        body = match.group(2).strip()
        if not body:
            continue
        if tag in _VERILOG_TAGS:
            tagged = body
            break
        if untagged is None:
            untagged = body
    if tagged is not None:
        return ExtractionResult(code=tagged, source=SOURCE_TAGGED)
    if untagged is not None:
        return ExtractionResult(
            code=untagged,
            source=SOURCE_ANY,
            warnings=("no Verilog-tagged fence found; used the first fenced block",),
        )
    return ExtractionResult(
        code=raw.strip(),
        source=SOURCE_WHOLE,
        warnings=("no fenced code block found; returning whole trimmed text",),
    )
