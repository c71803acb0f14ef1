"""FastAPI application exposing the seven provider endpoints.

In ``stub`` mode every endpoint is served by the deterministic models in
``stub.py``. In ``passthrough`` mode the request body is forwarded verbatim
to a real model service at ``upstream_base_url`` — that is the extension
point for mounting actual text-generation, image-generation, captioning,
and encoding backends.

All success responses are canonical JSON (sorted keys, compact separators)
so they can be compared byte-for-byte against the conformance vectors.
Errors come back as non-2xx with ``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import httpx
from fastapi import FastAPI, Request, Response

QA_KINDS = ("open", "yesno")
QA_ASPECTS = ("person", "action", "object", "location", "time", "colour", "quantity")

from paravid_adapter import stub


@dataclass(frozen=True)
class AdapterConfig:
    mode: str = "stub"
    stub_seed: int = 0
    dim: int = 64
    concept_dim: int | None = None
    upstream_base_url: str | None = None
    upstream_timeout_ms: int = 30_000

    def __post_init__(self) -> None:
        if self.mode not in ("stub", "passthrough"):
            raise ValueError(f"mode must be 'stub' or 'passthrough', got {self.mode!r}")
        if self.mode == "passthrough" and not self.upstream_base_url:
            raise ValueError("passthrough mode needs upstream_base_url")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def canonical(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


class BadRequest(Exception):
    def __init__(self, message: str, code: str = "bad_request"):
        super().__init__(message)
        self.code = code


def _error(status: int, code: str, message: str) -> Response:
    return Response(
        content=canonical({"error": {"code": code, "message": message}}),
        status_code=status,
        media_type="application/json",
    )


def _ok(body: dict) -> Response:
    return Response(content=canonical(body), media_type="application/json")


def _field(body: dict, name: str, kind: type):
    value = body.get(name)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise BadRequest(f"field {name!r} must be a {kind.__name__}")
    return value


def _b64_bytes(text: str, name: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (TypeError, ValueError) as exc:
        raise BadRequest(f"field {name!r} is not valid base64") from exc


def create_app(config: AdapterConfig) -> FastAPI:
    app = FastAPI(title="paravid-adapter", docs_url=None, redoc_url=None)

    async def _body(request: Request) -> dict:
        try:
            parsed = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise BadRequest(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise BadRequest("request body must be a JSON object")
        return parsed

    @app.exception_handler(BadRequest)
    async def _bad_request(_request: Request, exc: BadRequest) -> Response:
        return _error(400, exc.code, str(exc))

    async def _passthrough(request: Request) -> Response:
        assert config.upstream_base_url is not None
        try:
            async with httpx.AsyncClient(
                base_url=config.upstream_base_url,
                timeout=config.upstream_timeout_ms / 1000.0,
            ) as client:
                upstream = await client.post(
                    request.url.path,
                    content=await request.body(),
                    headers={"Content-Type": "application/json"},
                )
        except httpx.HTTPError as exc:
            return _error(502, "upstream_unavailable", f"upstream failed: {exc}")
        return Response(
            content=upstream.content,
            status_code=upstream.status_code,
            media_type="application/json",
        )

    def route(path: str):
        """Register a stub handler at `path`, diverted in passthrough mode."""

        def register(handler):
            async def endpoint(request: Request) -> Response:
                if config.mode == "passthrough":
                    return await _passthrough(request)
                return handler(await _body(request))

            app.post(path)(endpoint)
            return handler

        return register

    @route("/v1/t2t")
    def t2t(body: dict) -> Response:
        query = _field(body, "query", str)
        n = _field(body, "n", int)
        if not query or n < 1:
            raise BadRequest("query must be non-empty and n >= 1")
        return _ok({"paraphrases": stub.paraphrases(query, n)})

    @route("/v1/t2i")
    def t2i(body: dict) -> Response:
        query = _field(body, "query", str)
        seed = _field(body, "seed", int)
        n_images = _field(body, "n_images", int)
        if not query or n_images < 1:
            raise BadRequest("query must be non-empty and n_images >= 1")
        return _ok(
            {
                "images": [
                    {"id": img_id, "b64": base64.b64encode(data).decode("ascii")}
                    for img_id, data in stub.images(query, seed, n_images)
                ]
            }
        )

    @route("/v1/i2t")
    def i2t(body: dict) -> Response:
        data = _b64_bytes(_field(body, "image_b64", str), "image_b64")
        n = _field(body, "n", int)
        if n < 1:
            raise BadRequest("n must be >= 1")
        try:
            return _ok({"captions": stub.captions(data, n)})
        except ValueError as exc:
            raise BadRequest(str(exc), code="unreadable_image") from exc

    @route("/v1/qa/generate")
    def qa_generate(body: dict) -> Response:
        query = _field(body, "query", str)
        if not query.strip():
            raise BadRequest("query must be non-empty")
        return _ok({"pairs": stub.qa_pairs(query)})

    @route("/v1/qa/verify")
    def qa_verify(body: dict) -> Response:
        candidate = _field(body, "candidate", dict)
        pairs = _field(body, "pairs", list)
        if not pairs:
            raise BadRequest("pairs must be non-empty")
        answers = []
        for pair in pairs:
            if not isinstance(pair, dict):
                raise BadRequest("each pair must be an object")
            answers.append(_field(pair, "a", str))
            if _field(pair, "kind", str) not in QA_KINDS:
                raise BadRequest(f"pair kind must be one of {QA_KINDS}")
            if _field(pair, "aspect", str) not in QA_ASPECTS:
                raise BadRequest(f"pair aspect must be one of {QA_ASPECTS}")
        kind = _field(candidate, "kind", str)
        if kind == "text":
            text = _field(candidate, "text", str)
        elif kind == "image":
            data = _b64_bytes(_field(candidate, "image_b64", str), "image_b64")
            try:
                text = stub.prompt_of(data)
            except ValueError as exc:
                raise BadRequest(str(exc), code="unreadable_image") from exc
        else:
            raise BadRequest("candidate kind must be 'text' or 'image'")
        aligned = stub.qa_align(text, answers)
        return _ok({"aligned": aligned, "count": sum(aligned)})

    @route("/v1/encode/text")
    def encode_text(body: dict) -> Response:
        texts = _field(body, "texts", list)
        if not texts or not all(isinstance(t, str) for t in texts):
            raise BadRequest("texts must be a non-empty list of strings")
        response: dict = {
            "dim": config.dim,
            "embeddings": [
                stub.unit_vector("text", t.encode("utf-8"), config.stub_seed, config.dim)
                for t in texts
            ],
        }
        if config.concept_dim:
            response["concept_dim"] = config.concept_dim
            response["concepts"] = [
                stub.unit_vector(
                    "concept", t.encode("utf-8"), config.stub_seed, config.concept_dim
                )
                for t in texts
            ]
        return _ok(response)

    @route("/v1/encode/image")
    def encode_image(body: dict) -> Response:
        images_b64 = _field(body, "images_b64", list)
        if not images_b64 or not all(isinstance(i, str) for i in images_b64):
            raise BadRequest("images_b64 must be a non-empty list of strings")
        rows = [
            stub.unit_vector(
                "image", _b64_bytes(i, "images_b64"), config.stub_seed, config.dim
            )
            for i in images_b64
        ]
        return _ok({"dim": config.dim, "embeddings": rows})

    return app
