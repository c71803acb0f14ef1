"""Normative conformance vectors for the provider wire protocol.

The vectors pin the deterministic stub semantics: each entry is an endpoint,
a request body, and the exact response body (canonical JSON) any conforming
adapter service must return in stub mode. The file is generated here once
and committed; adapter implementations replay it byte-for-byte.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

from paravid.providers import (
    ProviderConfig,
    canonical_json,
    stub_i2t,
    stub_qa_align,
    stub_qa_generate,
    stub_t2i,
    stub_t2t,
    stub_vector,
)

FORMAT_VERSION = 1


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def generate_vectors(config: ProviderConfig) -> dict:
    """Build the request/response pairs covering all seven endpoints."""
    seed = config.stub_seed
    dim = config.stub_dim
    concept_dim = config.stub_concept_dim
    vectors: list[dict] = []

    def add(endpoint: str, request: dict, response: dict) -> None:
        vectors.append(
            {
                "endpoint": endpoint,
                "request": request,
                "response": canonical_json(response),
            }
        )

    add(
        "/v1/t2t",
        {"query": "a red hat", "n": 3},
        {"paraphrases": stub_t2t("a red hat", 3)},
    )
    images = stub_t2i("dog", 10, 2)
    add(
        "/v1/t2i",
        {"query": "dog", "seed": 10, "n_images": 2},
        {"images": [{"id": i, "b64": _b64(b)} for i, b in images]},
    )
    add(
        "/v1/i2t",
        {"image_b64": _b64(images[0][1]), "n": 2},
        {"captions": stub_i2t("dog", 2)},
    )
    add(
        "/v1/qa/generate",
        {"query": "red hat"},
        {"pairs": stub_qa_generate("red hat")},
    )
    pairs = stub_qa_generate("red hat")
    aligned = stub_qa_align("a yes-man said yes", [p["a"] for p in pairs])
    add(
        "/v1/qa/verify",
        {
            "candidate": {"kind": "text", "text": "a yes-man said yes"},
            "pairs": pairs,
        },
        {"aligned": aligned, "count": sum(aligned)},
    )
    dog_pairs = stub_qa_generate("dog yes")
    dog_aligned = stub_qa_align("dog", [p["a"] for p in dog_pairs])
    add(
        "/v1/qa/verify",
        {
            "candidate": {"kind": "image", "image_b64": _b64(images[0][1])},
            "pairs": dog_pairs,
        },
        {"aligned": dog_aligned, "count": sum(dog_aligned)},
    )
    texts = ["a red hat", "people dancing outdoors"]
    response: dict = {
        "dim": dim,
        "embeddings": [stub_vector("text", t.encode("utf-8"), seed, dim) for t in texts],
    }
    if concept_dim:
        response["concepts"] = [
            stub_vector("concept", t.encode("utf-8"), seed, concept_dim) for t in texts
        ]
        response["concept_dim"] = concept_dim
    add("/v1/encode/text", {"texts": texts}, response)
    add(
        "/v1/encode/image",
        {"images_b64": [_b64(b) for _, b in images]},
        {
            "dim": dim,
            "embeddings": [stub_vector("image", b, seed, dim) for _, b in images],
        },
    )
    return {
        "format_version": FORMAT_VERSION,
        "stub_seed": seed,
        "stub_dim": dim,
        "stub_concept_dim": concept_dim,
        "vectors": vectors,
    }


def write_vectors(doc: dict, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_vectors(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
