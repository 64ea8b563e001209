"""Stateless HTTP facade over the engine.

Exposes retrieval preview, full generation, and a health probe. The
only server-side state is the immutable loaded engine; session API keys
travel per request, are used for that request's provider call, and are
never logged or persisted. Request logs carry method, path and status
only, never bodies.
"""

from __future__ import annotations

import logging
import os
import time

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import parse_header
from .engine import Engine, load_engine
from .errors import HdlragError, ProviderError
from .llmclient import GenerationConfig, load_adapter_configs
from .retrieval import RetrievalConfig, config_from_dict

logger = logging.getLogger("hdlrag.service")


class RetrieveRequest(BaseModel):
    query: str
    retrieval: dict | None = None


class GenerateRequest(BaseModel):
    query: str
    provider: str | None = None
    session_api_key: str | None = None
    retrieval: dict | None = None
    generation: dict | None = None


def _module_name(text: str, doc_id: str) -> str:
    try:
        return parse_header(text).name
    except Exception:
        return doc_id


def _trace_payload(trace) -> dict:
    return {"reason": trace.reason, "halted_at": trace.halted_at, "drops": list(trace.drops)}


def _retrieval_cfg(engine: Engine, overrides: dict | None) -> RetrievalConfig:
    if not overrides:
        return engine.retrieval_cfg
    try:
        return config_from_dict(overrides, base=engine.retrieval_cfg)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"invalid retrieval override: {exc}")


def _generation_cfg(overrides: dict | None) -> GenerationConfig:
    cfg = GenerationConfig()
    if overrides:
        known = {"temperature", "top_p", "max_new_tokens", "samples_n"}
        unknown = set(overrides) - known
        if unknown:
            raise HTTPException(
                status_code=400, detail=f"unknown generation keys: {sorted(unknown)}"
            )
        cfg = GenerationConfig(**{**cfg.__dict__, **overrides})
    try:
        cfg.validate()
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"invalid generation override: {exc}")
    return cfg


def create_app(engine: Engine | None = None, providers: dict | None = None) -> FastAPI:
    """Build the service app around an already-loaded engine.

    providers maps selector names to CompletionProvider instances; the
    engine's own provider is always available under its name and as the
    default.
    """
    app = FastAPI(title="hdlrag", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.engine = engine
    app.state.providers = dict(providers or {})
    if engine is not None:
        app.state.providers.setdefault(engine.completion.name, engine.completion)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        fields = sorted(
            {".".join(str(p) for p in err.get("loc", ())[1:]) or "body" for err in exc.errors()}
        )
        return JSONResponse(
            status_code=400,
            content={"detail": f"invalid request fields: {', '.join(fields)}", "fields": fields},
        )

    @app.middleware("http")
    async def _log_requests(request: Request, call_next):
        start = time.monotonic()
        response = await call_next(request)
        logger.info(
            "%s %s -> %d (%.3fs)",
            request.method,
            request.url.path,
            response.status_code,
            time.monotonic() - start,
        )
        return response

    def _engine() -> Engine:
        if app.state.engine is None:
            raise HTTPException(status_code=503, detail="index not loaded")
        return app.state.engine

    def _provider(engine: Engine, selector: str | None, session_key: str | None):
        if selector is None:
            provider = engine.completion
        else:
            provider = app.state.providers.get(selector)
            if provider is None:
                raise HTTPException(
                    status_code=400,
                    detail=f"unknown provider {selector!r} "
                    f"(have: {sorted(app.state.providers)})",
                )
        if session_key and hasattr(provider, "with_key"):
            provider = provider.with_key(session_key)
        return provider

    @app.get("/health")
    async def health():
        engine = _engine()
        return {
            "index_size": len(engine.index),
            "dim": engine.index.dim,
            "providers": sorted(app.state.providers),
        }

    @app.post("/retrieve")
    async def retrieve_endpoint(req: RetrieveRequest):
        engine = _engine()
        if not req.query:
            raise HTTPException(status_code=400, detail="field 'query' must be non-empty")
        cfg = _retrieval_cfg(engine, req.retrieval)
        try:
            selected, trace = engine.retrieve(req.query, cfg)
        except HdlragError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return {
            "retrieved": [
                {
                    "doc_id": c.doc_id,
                    "module_name": _module_name(c.document.text, c.doc_id),
                    "relevance": c.relevance,
                    "distance": c.distance,
                    "text": c.document.text,
                }
                for c in selected
            ],
            "trace": _trace_payload(trace),
        }

    @app.post("/generate")
    async def generate_endpoint(req: GenerateRequest):
        engine = _engine()
        if not req.query:
            raise HTTPException(status_code=400, detail="field 'query' must be non-empty")
        retrieval_cfg = _retrieval_cfg(engine, req.retrieval)
        gen_cfg = _generation_cfg(req.generation)
        provider = _provider(engine, req.provider, req.session_api_key)
        try:
            result = engine.generate(
                req.query, gen_cfg=gen_cfg, retrieval_cfg=retrieval_cfg, completion=provider
            )
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=f"provider failure: {exc}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except HdlragError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        evicted = set(result.prompt.evicted_ids)
        return {
            "code": result.code,
            "source": result.extraction.source,
            "warnings": list(result.extraction.warnings) + list(result.prompt.warnings),
            "retrieved": [
                {
                    "doc_id": c.doc_id,
                    "module_name": _module_name(c.document.text, c.doc_id),
                    "relevance": c.relevance,
                    "evicted": c.doc_id in evicted,
                }
                for c in result.selected
            ],
            "trace": _trace_payload(result.trace),
            "timings": result.timings,
        }

    return app


def engine_from_env() -> Engine | None:
    """Load an engine from HDLRAG_INDEX / HDLRAG_DOCS, if both are set."""
    index_path = os.environ.get("HDLRAG_INDEX")
    docs_path = os.environ.get("HDLRAG_DOCS")
    if not index_path or not docs_path:
        return None
    return load_engine(
        index_path,
        docs_path,
        embedder_spec=os.environ.get("HDLRAG_EMBEDDER", "deterministic"),
    )


def app_from_env() -> FastAPI:
    """App factory for `uvicorn hdlrag.service:app_from_env --factory`."""
    from .llmclient import HttpChatProvider, MockProvider

    providers: dict = {"mock": MockProvider()}
    adapters_path = os.environ.get("HDLRAG_PROVIDERS")
    if adapters_path:
        for name, cfg in load_adapter_configs(adapters_path).items():
            providers[name] = HttpChatProvider(cfg)
    return create_app(engine_from_env(), providers)
