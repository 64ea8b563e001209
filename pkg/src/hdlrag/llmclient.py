"""Completion-provider contract plus adapters.

Any chat/completion API can sit behind CompletionProvider; the engine
never sees provider identity. Transport failures are retried with
exponential backoff; provider refusals and bad content are never
retried, which keeps pass@k sampling honest. API keys live in memory for
the session only: they are never logged and never written to disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Protocol, runtime_checkable

import requests

from .errors import ProviderError, RefusalError, TransportError
from .promptgen import AugmentedPrompt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.8
    top_p: float = 0.95
    max_new_tokens: int = 1500
    samples_n: int = 1

    def validate(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 <= self.top_p <= 1:
            raise ValueError(f"top_p must be in [0, 1], got {self.top_p}")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.samples_n < 1:
            raise ValueError(f"samples_n must be >= 1, got {self.samples_n}")


# Named parameter profiles. Benchmark runs report which profile produced
# which column; pass@1-strict exists because headline pass@1 numbers are
# customarily sampled at low temperature.
PROFILES: Mapping[str, GenerationConfig] = {
    "benchmark": GenerationConfig(temperature=0.8, top_p=0.95, max_new_tokens=1500),
    "pass1-strict": GenerationConfig(temperature=0.2, top_p=0.95, max_new_tokens=1500),
    "case-study": GenerationConfig(temperature=1.0, top_p=0.95, max_new_tokens=10000),
}


@runtime_checkable
class CompletionProvider(Protocol):
    """Capability contract over a completion backend."""

    name: str

    def generate(self, system_text: str, user_text: str, cfg: GenerationConfig) -> str:
        """Return raw completion text; raise ProviderError subclasses on failure."""
        ...


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 0.5

    def delay(self, attempt: int) -> float:
        return self.base_delay * (2**attempt)


@dataclass(frozen=True)
class BatchSample:
    """Outcome of one independent generation in a batch."""

    index: int
    text: str | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.text is not None


def generate(
    provider: CompletionProvider,
    prompt: AugmentedPrompt,
    cfg: GenerationConfig,
    retry: RetryPolicy = RetryPolicy(),
) -> str:
    """One completion call with bounded retry on transport failures.

    Returns the provider text verbatim; extraction happens elsewhere.
    """
    cfg.validate()
    user_payload = prompt.render_user_payload()
    last_exc: TransportError | None = None
    for attempt in range(retry.attempts):
        start = time.monotonic()
        try:
            text = provider.generate(prompt.system_text, user_payload, cfg)
        except TransportError as exc:
            last_exc = exc
            logger.warning(
                "completion transport failure provider=%s attempt=%d/%d: %s",
                provider.name,
                attempt + 1,
                retry.attempts,
                exc,
            )
            if attempt + 1 < retry.attempts:
                time.sleep(retry.delay(attempt))
            continue
        duration = time.monotonic() - start
        logger.info(
            "completion ok provider=%s retries=%d duration=%.3fs chars=%d",
            provider.name,
            attempt,
            duration,
            len(text),
        )
        return text
    assert last_exc is not None
    raise last_exc


def generate_batch(
    provider: CompletionProvider,
    prompt: AugmentedPrompt,
    cfg: GenerationConfig,
    retry: RetryPolicy = RetryPolicy(),
    parallelism: int = 1,
) -> list[BatchSample]:
    """samples_n independent generations; per-sample failures are recorded,
    not fatal. Results are ordered by sample index regardless of
    completion order. Raises ProviderError only if every sample failed.
    """
    cfg.validate()
    single = replace(cfg, samples_n=1)

    def one(i: int) -> BatchSample:
        try:
            return BatchSample(index=i, text=generate(provider, prompt, single, retry))
        except ProviderError as exc:
            return BatchSample(index=i, text=None, error=str(exc))

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            samples = list(pool.map(one, range(cfg.samples_n)))
    else:
        samples = [one(i) for i in range(cfg.samples_n)]
    if not any(s.ok for s in samples):
        raise ProviderError(
            f"all {cfg.samples_n} samples failed; first error: {samples[0].error}"
        )
    return samples


class MockProvider:
    """Deterministic offline provider for tests and dry runs.

    Responses are selected by the first key phrase (in sorted key order)
    found in the user payload; otherwise a canned module derived from a
    stable hash of the payload is returned.
    """

    def __init__(self, responses: Mapping[str, str] | None = None, name: str = "mock"):
        self.name = name
        self.responses = dict(responses or {})

    def generate(self, system_text: str, user_text: str, cfg: GenerationConfig) -> str:
        cfg.validate()
        for phrase in sorted(self.responses):
            if phrase in user_text:
                return self.responses[phrase]
        tag = hashlib.blake2b(user_text.encode("utf-8"), digest_size=4).hexdigest()
        return (
            "```verilog\n"
            f"module canned_{tag}(input clk, output reg q);\n"
            "  always @(posedge clk) q <= 1'b1;\n"
            "endmodule\n"
            "```"
        )

    def with_key(self, api_key: str | None) -> "MockProvider":
        return self  # mock takes no credentials


@dataclass(frozen=True)
class ProviderAdapterConfig:
    """Wire settings for one chat-style HTTP provider."""

    name: str
    url: str
    model: str
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    key_env: str = ""
    timeout: float = 120.0


class HttpChatProvider:
    """Thin adapter over an OpenAI-style chat completions endpoint.

    The key is resolved once, from the explicit argument or the
    configured environment variable, and kept only in memory.
    """

    def __init__(self, config: ProviderAdapterConfig, api_key: str | None = None):
        self.name = config.name
        self.config = config
        self._api_key = api_key or (os.environ.get(config.key_env) if config.key_env else None)

    def with_key(self, api_key: str | None) -> "HttpChatProvider":
        """Clone bound to a per-session key (used once, then discarded)."""
        if not api_key:
            return self
        return HttpChatProvider(self.config, api_key=api_key)

    def generate(self, system_text: str, user_text: str, cfg: GenerationConfig) -> str:
        cfg.validate()
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            scheme = self.config.auth_scheme
            headers[self.config.auth_header] = (
                f"{scheme} {self._api_key}" if scheme else self._api_key
            )
        payload = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "max_tokens": cfg.max_new_tokens,
        }
        try:
            resp = requests.post(
                self.config.url, json=payload, headers=headers, timeout=self.config.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"provider {self.name}: {exc}") from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransportError(f"provider {self.name}: HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise RefusalError(
                f"provider {self.name}: HTTP {resp.status_code}: {resp.text[:500]}"
            )
        try:
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"provider {self.name}: malformed response: {exc}") from exc
        if content is None:
            raise ProviderError(f"provider {self.name}: empty completion")
        return content


def load_adapter_configs(path: str | Path) -> dict[str, ProviderAdapterConfig]:
    """Read provider adapter configs from a JSON file.

    Format: a list of objects with keys name, url, model and optional
    auth_header, auth_scheme, key_env, timeout.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError("provider config file must contain a JSON list")
    configs: dict[str, ProviderAdapterConfig] = {}
    for entry in raw:
        cfg = ProviderAdapterConfig(**entry)
        if cfg.name in configs:
            raise ValueError(f"duplicate provider name {cfg.name!r}")
        configs[cfg.name] = cfg
    return configs
