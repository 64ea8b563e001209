"""Operator command line.

Pipeline stages are separate files so each is cacheable: `ingest` turns
a corpus into documents, `index` embeds documents into an index file,
and query/generate/bench/report/serve consume those artifacts.

Exit codes: 0 success, 1 domain error (bad data, provider refusal),
2 usage error, 3 environment error (missing external tool or service).
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from .corpus import build_document, load_corpus, load_documents, parse_header, save_documents
from .embedding import DEFAULT_DIM, embed_texts
from .engine import load_engine, make_embedder
from .errors import EnvironmentGapError, HdlragError
from .evaluation import (
    DEFAULT_K_VALUES,
    PassAtKReport,
    ToolchainConfig,
    load_suite,
    render_report_table,
    run_benchmark,
)
from .index import build_index, save_index
from .llmclient import (
    PROFILES,
    GenerationConfig,
    HttpChatProvider,
    MockProvider,
    load_adapter_configs,
)
from .promptgen import RuleSet
from .retrieval import RetrievalConfig, config_from_dict

EXIT_DOMAIN = 1
EXIT_ENVIRONMENT = 3


def _fail(exc: BaseException, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _command(fn):
    """Map exceptions to the exit-code contract; click keeps 2 for usage."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EnvironmentGapError as exc:
            _fail(exc, EXIT_ENVIRONMENT)
        except (HdlragError, ValueError, OSError, json.JSONDecodeError) as exc:
            _fail(exc, EXIT_DOMAIN)

    return wrapper


def _retrieval_options(fn):
    for opt in reversed(
        [
            click.option("--config", "config_path", default=None, help="JSON retrieval config."),
            click.option("--mode", default=None, help="dynamic, disabled or fixed:N."),
            click.option("--pool-size", type=int, default=None),
            click.option("--tau", type=float, default=None),
            click.option("--alpha", type=float, default=None),
            click.option("--k-max", type=int, default=None),
        ]
    ):
        fn = opt(fn)
    return fn


def _generation_options(fn):
    for opt in reversed(
        [
            click.option(
                "--profile",
                type=click.Choice(sorted(PROFILES)),
                default=None,
                help="Named sampling preset; explicit flags override it.",
            ),
            click.option("--temperature", type=float, default=None),
            click.option("--top-p", type=float, default=None),
            click.option("--max-tokens", type=int, default=None),
            click.option("--samples", type=int, default=None, help="Samples per problem."),
        ]
    ):
        fn = opt(fn)
    return fn


def _provider_options(fn):
    for opt in reversed(
        [
            click.option("--provider", default="mock", help="Provider name to use."),
            click.option(
                "--providers", "providers_path", default=None, help="Provider adapters JSON."
            ),
            click.option(
                "--mock-responses",
                "mock_responses_path",
                default=None,
                help="JSON map of trigger phrase to canned completion for the mock provider.",
            ),
        ]
    ):
        fn = opt(fn)
    return fn


def _build_retrieval_cfg(config_path, mode, pool_size, tau, alpha, k_max) -> RetrievalConfig:
    cfg = RetrievalConfig()
    if config_path:
        cfg = config_from_dict(json.loads(Path(config_path).read_text(encoding="utf-8")))
    overrides = {
        key: value
        for key, value in {
            "mode": mode,
            "pool_size": pool_size,
            "tau": tau,
            "alpha": alpha,
            "k_max": k_max,
        }.items()
        if value is not None
    }
    if overrides:
        cfg = config_from_dict(overrides, base=cfg)
    return cfg


def _build_gen_cfg(profile, temperature, top_p, max_tokens, samples) -> GenerationConfig:
    base = PROFILES[profile] if profile else GenerationConfig()
    cfg = GenerationConfig(
        temperature=temperature if temperature is not None else base.temperature,
        top_p=top_p if top_p is not None else base.top_p,
        max_new_tokens=max_tokens if max_tokens is not None else base.max_new_tokens,
        samples_n=samples if samples is not None else base.samples_n,
    )
    cfg.validate()
    return cfg


def _build_providers(providers_path, mock_responses_path) -> dict:
    responses = None
    if mock_responses_path:
        responses = json.loads(Path(mock_responses_path).read_text(encoding="utf-8"))
        if not isinstance(responses, dict):
            raise ValueError("mock responses file must contain a JSON object")
    registry: dict = {"mock": MockProvider(responses=responses)}
    if providers_path:
        for name, adapter in load_adapter_configs(providers_path).items():
            registry[name] = HttpChatProvider(adapter)
    return registry


def _pick_provider(registry: dict, name: str):
    if name not in registry:
        raise ValueError(f"unknown provider {name!r} (have: {sorted(registry)})")
    return registry[name]


def _parse_k_values(text: str | None) -> tuple[int, ...]:
    if not text:
        return DEFAULT_K_VALUES
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"bad --k-values {text!r}: expected comma-separated integers")
    if not values or any(k < 1 for k in values):
        raise ValueError(f"bad --k-values {text!r}: values must be positive")
    return values


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", is_flag=True, help="INFO-level diagnostics on stderr.")
def main(verbose: bool) -> None:
    """Retrieval-augmented Verilog generation toolkit."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--corpus", "corpus_path", required=True, help="Corpus JSONL input.")
@click.option("--out", "out_path", required=True, help="Documents JSONL output.")
@_command
def ingest(corpus_path: str, out_path: str) -> None:
    """Render corpus records into embeddable documents."""
    records = load_corpus(corpus_path)
    docs = [build_document(rec) for rec in records]
    save_documents(docs, out_path)
    click.echo(f"wrote {len(docs)} documents to {out_path}")


@main.command()
@click.option("--docs", "docs_path", required=True, help="Documents JSONL input.")
@click.option("--out", "out_path", required=True, help="Index file output.")
@click.option("--embedder", default="deterministic", help="'deterministic' or 'remote'.")
@click.option("--dim", type=int, default=DEFAULT_DIM)
@click.option("--batch-size", type=int, default=256)
@_command
def index(docs_path: str, out_path: str, embedder: str, dim: int, batch_size: int) -> None:
    """Embed documents and write the vector index."""
    from .corpus import batch_documents

    docs = load_documents(docs_path)
    provider = make_embedder(embedder, dim=dim)
    pairs: list = []
    for batch in batch_documents(docs, batch_size=batch_size):
        vectors = embed_texts(provider, [doc.text for doc in batch])
        pairs.extend((doc.id, vec) for doc, vec in zip(batch, vectors))
    idx = build_index(pairs)
    save_index(idx, out_path)
    click.echo(f"indexed {len(idx)} documents (dim {idx.dim}) to {out_path}")


def _trace_line(trace) -> str:
    drops = ", ".join(f"{d:.4f}" for d in trace.drops)
    return f"trace: reason={trace.reason} halted_at={trace.halted_at} drops=[{drops}]"


@main.command()
@click.option("--index", "index_path", required=True, help="Index file.")
@click.option("--docs", "docs_path", required=True, help="Documents JSONL.")
@click.option("--embedder", default="deterministic")
@_retrieval_options
@click.argument("text")
@_command
def query(text, index_path, docs_path, embedder, **retrieval_flags) -> None:
    """Preview retrieval: ranked table plus the sampling trace."""
    cfg = _build_retrieval_cfg(**retrieval_flags)
    engine = load_engine(index_path, docs_path, embedder_spec=embedder, retrieval_cfg=cfg)
    selected, trace = engine.retrieve(text)
    click.echo(f"{'rank':<5} {'relevance':>9} {'distance':>9}  {'doc_id':<24} module")
    for rank, cand in enumerate(selected, start=1):
        try:
            module = parse_header(cand.document.text).name
        except Exception:
            module = "-"
        click.echo(
            f"{rank:<5} {cand.relevance:>9.4f} {cand.distance:>9.4f}  {cand.doc_id:<24} {module}"
        )
    click.echo(_trace_line(trace))


@main.command()
@click.option("--index", "index_path", required=True)
@click.option("--docs", "docs_path", required=True)
@click.option("--embedder", default="deterministic")
@click.option("--rules", "rules_path", default=None, help="Extra prompt rules, one per line.")
@click.option("--budget", type=int, default=8192, help="Prompt token budget.")
@_retrieval_options
@_generation_options
@_provider_options
@click.argument("request")
@_command
def generate(
    request,
    index_path,
    docs_path,
    embedder,
    rules_path,
    budget,
    provider,
    providers_path,
    mock_responses_path,
    profile,
    temperature,
    top_p,
    max_tokens,
    samples,
    **retrieval_flags,
) -> None:
    """Generate Verilog for one request; code on stdout, diagnostics on stderr."""
    if request == "-":
        request = sys.stdin.read()
    cfg = _build_retrieval_cfg(**retrieval_flags)
    gen_cfg = _build_gen_cfg(profile, temperature, top_p, max_tokens, samples)
    registry = _build_providers(providers_path, mock_responses_path)
    completion = _pick_provider(registry, provider)
    rules = RuleSet.from_file(rules_path) if rules_path else None
    engine = load_engine(
        index_path,
        docs_path,
        embedder_spec=embedder,
        completion=completion,
        retrieval_cfg=cfg,
        rules=rules,
        prompt_budget=budget,
    )
    result = engine.generate(request, gen_cfg=gen_cfg)
    for cand in result.selected:
        click.echo(f"retrieved {cand.doc_id} relevance={cand.relevance:.4f}", err=True)
    click.echo(_trace_line(result.trace), err=True)
    for warning in list(result.prompt.warnings) + list(result.extraction.warnings):
        click.echo(f"warning: {warning}", err=True)
    timings = " ".join(f"{k}={v:.3f}s" for k, v in result.timings.items())
    click.echo(f"extraction={result.extraction.source} {timings}", err=True)
    click.echo(result.code)


@main.command()
@click.option("--index", "index_path", required=True)
@click.option("--docs", "docs_path", required=True)
@click.option("--embedder", default="deterministic")
@click.option("--suite", "suite_path", required=True, help="Benchmark suite JSONL.")
@click.option("--out", "out_path", required=True, help="Report JSON output.")
@click.option("--toolchain", "toolchain_path", default=None, help="Toolchain config JSON.")
@click.option("--k-values", "k_values_text", default=None, help="Comma-separated k values.")
@_retrieval_options
@_generation_options
@_provider_options
@_command
def bench(
    index_path,
    docs_path,
    embedder,
    suite_path,
    out_path,
    toolchain_path,
    k_values_text,
    provider,
    providers_path,
    mock_responses_path,
    profile,
    temperature,
    top_p,
    max_tokens,
    samples,
    **retrieval_flags,
) -> None:
    """Run a benchmark suite and write a pass@k report."""
    cfg = _build_retrieval_cfg(**retrieval_flags)
    gen_cfg = _build_gen_cfg(
        profile or "benchmark",
        temperature,
        top_p,
        max_tokens,
        samples if samples is not None else 10,
    )
    registry = _build_providers(providers_path, mock_responses_path)
    completion = _pick_provider(registry, provider)
    k_values = _parse_k_values(k_values_text)
    toolchain = (
        ToolchainConfig.from_file(toolchain_path) if toolchain_path else ToolchainConfig()
    )
    problems = load_suite(suite_path)
    engine = load_engine(
        index_path, docs_path, embedder_spec=embedder, completion=completion, retrieval_cfg=cfg
    )
    report = run_benchmark(problems, engine, gen_cfg, toolchain, k_values=k_values)
    if not report.problems:
        reasons = "; ".join(f"{pid}: {why}" for pid, why in report.skipped)
        raise EnvironmentGapError(f"no problem could be evaluated ({reasons})")
    report.save(out_path)
    for pid, why in report.skipped:
        click.echo(f"skipped {pid}: {why}", err=True)
    click.echo(render_report_table(report))
    click.echo(f"wrote report to {out_path}")


@main.command()
@click.argument("report_path")
@click.option("--baseline", "baseline_path", default=None, help="Report to compare against.")
@_command
def report(report_path: str, baseline_path: str | None) -> None:
    """Render a saved pass@k report as a table."""
    current = PassAtKReport.from_file(report_path)
    baseline = PassAtKReport.from_file(baseline_path) if baseline_path else None
    click.echo(render_report_table(current, baseline))


@main.command()
@click.option("--index", "index_path", required=True)
@click.option("--docs", "docs_path", required=True)
@click.option("--embedder", default="deterministic")
@click.option("--providers", "providers_path", default=None, help="Provider adapters JSON.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--ui", "ui_dir", default=None, help="Static UI directory to mount at /ui.")
@_command
def serve(index_path, docs_path, embedder, providers_path, host, port, ui_dir) -> None:
    """Serve the HTTP API (and optionally the static UI)."""
    import uvicorn

    from .service import create_app

    registry = _build_providers(providers_path, None)
    engine = load_engine(index_path, docs_path, embedder_spec=embedder)
    app = create_app(engine, providers=registry)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
