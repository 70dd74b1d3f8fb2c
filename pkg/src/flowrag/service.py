"""Request/response service backing the workflow builder UI.

Endpoints:

* ``GET  /health``
* ``GET  /catalog/steps`` and ``GET /catalog/tables``
* ``POST /retrieve``  ``{query, k_steps?, k_tables?}`` -> ranked suggestions
  with scores
* ``POST /generate``  ``{query}`` -> generated workflow plus the validation
  verdict; hallucination lists come straight from the document parser so the
  UI can flag names that do not exist.

State (catalog, encoder, indices) is immutable after startup; requests never
mutate files. Malformed request bodies return 400, queries with no known
tokens 422, remote-generator failures 502/504.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .catalog import Catalog, MalformedDocument, load_catalog, serialize_workflow
from .dense_index import VectorIndex, load_index, topk
from .encoder import EncoderModel, NoKnownTokens, encode, load_model, model_fingerprint
from .pipeline import (
    GeneratorBinding,
    RemoteTimeout,
    RemoteUnavailable,
    assemble_prompt,
    generate,
    retrieve_suggestions,
)


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    catalog_dir: str = "catalog"
    encoder_path: str = "encoder.flrg"
    step_index_path: str = "steps.flix"
    table_index_path: str = "tables.flix"
    generator: GeneratorBinding = None
    k_steps: int = 15
    k_tables: int = 10

    def __post_init__(self):
        if self.generator is None:
            self.generator = GeneratorBinding(kind="oracle")


def load_service_config(path: Path) -> ServiceConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    gen = raw.pop("generator", {"kind": "oracle"})
    binding = GeneratorBinding(
        kind=gen.get("kind", "oracle"),
        endpoint=gen.get("endpoint"),
        timeout=float(gen.get("timeout", 30.0)),
        fallback_template_tables=bool(gen.get("fallback_template_tables", False)),
    )
    return ServiceConfig(generator=binding, **raw)


@dataclass
class ServiceState:
    catalog: Catalog
    model: EncoderModel
    step_index: VectorIndex
    table_index: VectorIndex
    binding: GeneratorBinding
    k_steps: int = 15
    k_tables: int = 10


def load_state(config: ServiceConfig) -> ServiceState:
    """Load all referenced files; index fingerprints must match the encoder."""
    catalog, report = load_catalog(Path(config.catalog_dir))
    if not report.ok():
        raise ValueError(f"catalog invalid: {report.as_dict()}")
    model = load_model(Path(config.encoder_path))
    fingerprint = model_fingerprint(model)
    step_index = load_index(Path(config.step_index_path), expected_fingerprint=fingerprint)
    table_index = load_index(Path(config.table_index_path), expected_fingerprint=fingerprint)
    return ServiceState(
        catalog=catalog,
        model=model,
        step_index=step_index,
        table_index=table_index,
        binding=config.generator,
        k_steps=config.k_steps,
        k_tables=config.k_tables,
    )


class RetrieveRequest(BaseModel):
    query: str
    k_steps: Optional[int] = None
    k_tables: Optional[int] = None


class GenerateRequest(BaseModel):
    query: str


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="flowrag", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed request"})

    @app.exception_handler(NoKnownTokens)
    async def no_known_tokens(request: Request, exc: NoKnownTokens):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(RemoteUnavailable)
    async def remote_unavailable(request: Request, exc: RemoteUnavailable):
        return JSONResponse(status_code=502, content={"detail": str(exc)})

    @app.exception_handler(RemoteTimeout)
    async def remote_timeout(request: Request, exc: RemoteTimeout):
        return JSONResponse(status_code=504, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/catalog/steps")
    def catalog_steps():
        return [
            {
                "name": defn.name,
                "category": defn.category.value,
                "description": defn.description,
                "requires_table": defn.requires_table,
            }
            for defn in (state.catalog.steps[n] for n in sorted(state.catalog.steps))
        ]

    @app.get("/catalog/tables")
    def catalog_tables():
        return sorted(state.catalog.tables)

    @app.post("/retrieve")
    def retrieve(request: RetrieveRequest):
        k_steps = request.k_steps or state.k_steps
        k_tables = request.k_tables or state.k_tables
        query_vec = encode(state.model, request.query)
        common = set(state.catalog.common_steps)
        ranked_steps = topk(state.step_index, query_vec, k_steps + len(common))
        steps = [
            {"name": name, "score": score}
            for name, score in ranked_steps
            if name not in common
        ][:k_steps]
        tables = [
            {"name": name, "score": score}
            for name, score in topk(state.table_index, query_vec, k_tables)
        ]
        return {"steps": steps, "tables": tables}

    @app.post("/generate")
    def generate_workflow(request: GenerateRequest):
        suggestions = retrieve_suggestions(
            request.query,
            state.step_index,
            state.table_index,
            state.catalog,
            state.model,
            state.k_steps,
            state.k_tables,
        )
        prompt = assemble_prompt(suggestions, request.query, state.catalog)
        payload = {
            "workflow": None,
            "suggestions": {"steps": list(suggestions.steps), "tables": list(suggestions.tables)},
            "hallucinated_steps": [],
            "hallucinated_tables": [],
            "valid": False,
            "raw": "",
        }
        try:
            doc, report, raw = generate(state.binding, prompt, state.catalog)
        except MalformedDocument as exc:
            payload["raw"] = getattr(exc, "raw", "")
            return payload
        payload["workflow"] = json.loads(serialize_workflow(doc))
        payload["hallucinated_steps"] = list(report.hallucinated_steps)
        payload["hallucinated_tables"] = list(report.hallucinated_tables)
        payload["valid"] = True
        payload["raw"] = raw
        return payload

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(load_state(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
