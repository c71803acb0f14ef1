"""Typed clients for the generative/encoding provider services.

Every endpoint has two modes: ``remote`` speaks the JSON-over-HTTP wire
protocol (with retries and a content-addressed response cache), ``stub``
computes a deterministic, model-free answer locally so the whole pipeline
is replayable offline.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np

from paravid.errors import ProtocolError, ProviderUnavailableError
from paravid.verification import QA_ASPECTS, QA_KINDS, AlignmentCount, QAPair

CACHE_DIR_ENV = "PARAVID_CACHE_DIR"

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = "http://localhost:8199"
    timeout_ms: int = 30_000
    max_retries: int = 2
    mode: str = "stub"
    stub_seed: int = 0
    cache_dir: Path = Path(".paravid-cache")
    stub_dim: int = 64
    stub_concept_dim: int | None = None
    bearer_token: str | None = None

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if not 0 <= self.max_retries <= 10:
            raise ValueError("max_retries must be in [0, 10]")
        if self.mode not in ("remote", "stub"):
            raise ValueError(f"mode must be 'remote' or 'stub', got {self.mode!r}")
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))


@dataclass(frozen=True)
class ImageArtifact:
    """An opaque generated image; the engine only forwards its bytes."""

    id: str
    bytes: bytes
    source_prompt: str
    seed: int

    @classmethod
    def from_bytes(cls, data: bytes, source_prompt: str, seed: int) -> "ImageArtifact":
        return cls(
            id=content_hash(data), bytes=data, source_prompt=source_prompt, seed=seed
        )


@dataclass(frozen=True)
class EncodeResult:
    dim: int
    embeddings: np.ndarray
    concepts: np.ndarray | None = None
    concept_dim: int | None = None


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(body: dict) -> str:
    """Canonical request encoding: sorted keys, no insignificant whitespace."""
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def cache_key(endpoint: str, body: dict) -> str:
    payload = endpoint + "\n" + canonical_json(body)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Deterministic stub semantics (the normative definition; the reference
# adapter service is held to these via the committed conformance vectors).
# ---------------------------------------------------------------------------


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 stream; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def _hash_u64(domain: str, payload: bytes) -> int:
    digest = hashlib.sha256(domain.encode("utf-8") + b"\x00" + payload).digest()
    return int.from_bytes(digest[:8], "little")


def stub_vector(domain: str, payload: bytes, stub_seed: int, dim: int) -> list[float]:
    """L2-normalized vector derived from a 64-bit hash of the payload."""
    state = _hash_u64(domain, payload) ^ (stub_seed & _MASK64)
    values = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        state, out = splitmix64(state)
        values[i] = (out >> 11) * (2.0**-53) * 2.0 - 1.0
    norm = float(np.sqrt(np.dot(values, values)))
    return [float(v) for v in values / norm]


def stub_t2t(query: str, n: int) -> list[str]:
    return [f"{query} ~v{i}" for i in range(1, n + 1)]


def stub_t2i(query: str, seed: int, n_images: int) -> list[tuple[str, bytes]]:
    out = []
    for i in range(1, n_images + 1):
        data = f"IMG|{seed}|{i}|{query}".encode("utf-8")
        out.append((content_hash(data), data))
    return out


def stub_i2t(source_prompt: str, n: int) -> list[str]:
    return [f"caption {i} of {source_prompt}" for i in range(1, n + 1)]


def stub_qa_generate(query: str) -> list[dict]:
    return [
        {"q": f"Is there {w}?", "a": "yes", "kind": "yesno", "aspect": "object"}
        for w in query.split()
    ]


def stub_qa_align(candidate_text: str, answers: Sequence[str]) -> list[bool]:
    text = candidate_text.lower()
    return [a.lower() in text for a in answers]


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


class ProviderGateway:
    """Immutable client over the seven provider endpoints.

    Safe to share across threads; remote responses are cached on disk keyed
    by the content hash of the canonical request, and a cache entry is only
    written after the body passed protocol validation.
    """

    def __init__(self, config: ProviderConfig, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._sleep = sleep
        env_dir = os.environ.get(CACHE_DIR_ENV)
        self.cache_dir = Path(env_dir) if env_dir else Path(config.cache_dir)
        self._client: httpx.Client | None = None
        if config.mode == "remote":
            headers = {}
            if config.bearer_token:
                headers["Authorization"] = f"Bearer {config.bearer_token}"
            self._client = httpx.Client(
                base_url=config.base_url,
                timeout=config.timeout_ms / 1000.0,
                headers=headers,
            )

    # -- transport ----------------------------------------------------------

    def _cache_path(self, digest: str) -> Path:
        return self.cache_dir / "responses" / digest

    def _post(self, endpoint: str, body: dict) -> tuple[dict, Callable[[], None]]:
        """POST with retry/backoff and content-addressed caching.

        Returns the parsed JSON body plus a commit callback the caller
        invokes once the body passed validation; only then is the cache
        entry written (no partial writes).
        """
        digest = cache_key(endpoint, body)
        path = self._cache_path(digest)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8")), lambda: None
        raw = self._fetch(endpoint, body)
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"{endpoint}: response is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ProtocolError(f"{endpoint}: response body must be an object")

        def commit() -> None:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + f".tmp{os.getpid()}.{id(raw)}")
            tmp.write_text(raw, encoding="utf-8")
            tmp.replace(path)

        return parsed, commit

    def _fetch(self, endpoint: str, body: dict) -> str:
        assert self._client is not None
        delay = 0.5
        last_exc: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(delay)
                delay *= 2
            try:
                resp = self._client.post(endpoint, content=canonical_json(body).encode("utf-8"),
                                         headers={"Content-Type": "application/json"})
            except httpx.HTTPError as exc:
                last_exc = exc
                continue
            if resp.status_code // 100 == 2:
                return resp.text
            if resp.status_code >= 500:
                last_exc = ProviderUnavailableError(
                    f"{endpoint}: HTTP {resp.status_code}"
                )
                continue
            raise ProtocolError(f"{endpoint}: HTTP {resp.status_code}: {resp.text}")
        raise ProviderUnavailableError(
            f"{endpoint}: transport failed after {self.config.max_retries + 1} attempts: {last_exc}"
        )

    def _is_stub(self) -> bool:
        return self.config.mode == "stub"

    # -- endpoints ----------------------------------------------------------

    def call_t2t(self, query: str, n: int) -> list[str]:
        if not query:
            raise ValueError("query must be non-empty")
        if n < 1:
            raise ValueError("n must be >= 1")
        if self._is_stub():
            return stub_t2t(query, n)
        body, commit = self._post("/v1/t2t", {"query": query, "n": n})
        paraphrases = body.get("paraphrases")
        if (
            not isinstance(paraphrases, list)
            or len(paraphrases) != n
            or not all(isinstance(p, str) for p in paraphrases)
        ):
            raise ProtocolError(f"/v1/t2t: expected {n} paraphrase strings")
        commit()
        return paraphrases

    def call_t2i(self, query: str, seed: int, n_images: int) -> list[ImageArtifact]:
        if not query:
            raise ValueError("query must be non-empty")
        if n_images < 1:
            raise ValueError("n_images must be >= 1")
        if self._is_stub():
            return [
                ImageArtifact(id=img_id, bytes=data, source_prompt=query, seed=seed)
                for img_id, data in stub_t2i(query, seed, n_images)
            ]
        body, commit = self._post("/v1/t2i", {"query": query, "seed": seed, "n_images": n_images})
        images = body.get("images")
        if not isinstance(images, list) or len(images) != n_images:
            raise ProtocolError(f"/v1/t2i: expected {n_images} images")
        artifacts = []
        for entry in images:
            try:
                data = base64.b64decode(entry["b64"], validate=True)
                img_id = entry["id"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"/v1/t2i: malformed image entry: {exc}") from exc
            if img_id != content_hash(data):
                raise ProtocolError("/v1/t2i: image id is not the content hash of its bytes")
            artifacts.append(
                ImageArtifact(id=img_id, bytes=data, source_prompt=query, seed=seed)
            )
        commit()
        return artifacts

    def call_i2t(self, image: ImageArtifact, n: int) -> list[str]:
        if not image.bytes:
            raise ValueError("image bytes must be non-empty")
        if n < 1:
            raise ValueError("n must be >= 1")
        if self._is_stub():
            return stub_i2t(image.source_prompt, n)
        body, commit = self._post(
            "/v1/i2t",
            {"image_b64": base64.b64encode(image.bytes).decode("ascii"), "n": n},
        )
        captions = body.get("captions")
        if (
            not isinstance(captions, list)
            or len(captions) != n
            or not all(isinstance(c, str) for c in captions)
        ):
            raise ProtocolError(f"/v1/i2t: expected {n} caption strings")
        commit()
        return captions

    def call_qa_generate(self, query: str) -> list[QAPair]:
        if not query:
            raise ValueError("query must be non-empty")
        if self._is_stub():
            raw_pairs = stub_qa_generate(query)
        else:
            body, commit = self._post("/v1/qa/generate", {"query": query})
            raw_pairs = body.get("pairs")
            if not isinstance(raw_pairs, list) or not raw_pairs:
                raise ProtocolError("/v1/qa/generate: expected a non-empty pair list")
        pairs = []
        for entry in raw_pairs:
            try:
                pair = QAPair(
                    question=entry["q"],
                    answer=entry["a"],
                    kind=entry["kind"],
                    aspect=entry["aspect"],
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"/v1/qa/generate: malformed pair: {exc}") from exc
            pairs.append(pair)
        if not pairs:
            raise ProtocolError("/v1/qa/generate: empty pair list")
        if not self._is_stub():
            commit()
        return pairs

    def call_qa_verify(
        self, candidate: str | ImageArtifact, pairs: Sequence[QAPair]
    ) -> AlignmentCount:
        if not pairs:
            raise ValueError("pairs must be non-empty")
        if self._is_stub():
            text = (
                candidate.source_prompt
                if isinstance(candidate, ImageArtifact)
                else candidate
            )
            aligned = stub_qa_align(text, [p.answer for p in pairs])
            return AlignmentCount(per_pair=tuple(aligned), count=sum(aligned))
        if isinstance(candidate, ImageArtifact):
            cand_body = {
                "kind": "image",
                "image_b64": base64.b64encode(candidate.bytes).decode("ascii"),
            }
        else:
            cand_body = {"kind": "text", "text": candidate}
        body, commit = self._post(
            "/v1/qa/verify",
            {
                "candidate": cand_body,
                "pairs": [
                    {"q": p.question, "a": p.answer, "kind": p.kind, "aspect": p.aspect}
                    for p in pairs
                ],
            },
        )
        aligned = body.get("aligned")
        count = body.get("count")
        if (
            not isinstance(aligned, list)
            or len(aligned) != len(pairs)
            or not all(isinstance(b, bool) for b in aligned)
            or not isinstance(count, int)
        ):
            raise ProtocolError("/v1/qa/verify: malformed aligned/count fields")
        if count != sum(aligned):
            raise ProtocolError(
                f"/v1/qa/verify: count {count} disagrees with booleans {aligned}"
            )
        commit()
        return AlignmentCount(per_pair=tuple(aligned), count=count)

    def call_encode_text(self, texts: Sequence[str]) -> EncodeResult:
        if not texts:
            raise ValueError("texts must be non-empty")
        if self._is_stub():
            cfg = self.config
            emb = np.array(
                [
                    stub_vector("text", t.encode("utf-8"), cfg.stub_seed, cfg.stub_dim)
                    for t in texts
                ],
                dtype=np.float64,
            )
            concepts = None
            if cfg.stub_concept_dim:
                concepts = np.array(
                    [
                        stub_vector(
                            "concept", t.encode("utf-8"), cfg.stub_seed, cfg.stub_concept_dim
                        )
                        for t in texts
                    ],
                    dtype=np.float64,
                )
            return EncodeResult(
                dim=cfg.stub_dim,
                embeddings=emb,
                concepts=concepts,
                concept_dim=cfg.stub_concept_dim,
            )
        body, commit = self._post("/v1/encode/text", {"texts": list(texts)})
        result = self._parse_encoding(body, "/v1/encode/text", len(texts), concepts_ok=True)
        commit()
        return result

    def call_encode_image(self, images: Sequence[ImageArtifact]) -> EncodeResult:
        if not images:
            raise ValueError("images must be non-empty")
        if self._is_stub():
            cfg = self.config
            emb = np.array(
                [
                    stub_vector("image", img.bytes, cfg.stub_seed, cfg.stub_dim)
                    for img in images
                ],
                dtype=np.float64,
            )
            return EncodeResult(dim=cfg.stub_dim, embeddings=emb)
        body, commit = self._post(
            "/v1/encode/image",
            {"images_b64": [base64.b64encode(i.bytes).decode("ascii") for i in images]},
        )
        result = self._parse_encoding(body, "/v1/encode/image", len(images), concepts_ok=False)
        commit()
        return result

    @staticmethod
    def _parse_encoding(
        body: dict, endpoint: str, n_rows: int, concepts_ok: bool
    ) -> EncodeResult:
        dim = body.get("dim")
        rows = body.get("embeddings")
        if not isinstance(dim, int) or dim < 1 or not isinstance(rows, list):
            raise ProtocolError(f"{endpoint}: malformed dim/embeddings")
        if len(rows) != n_rows or any(
            not isinstance(r, list) or len(r) != dim for r in rows
        ):
            raise ProtocolError(f"{endpoint}: ragged or miscounted embedding rows")
        emb = np.array(rows, dtype=np.float64)
        if not np.all(np.isfinite(emb)):
            raise ProtocolError(f"{endpoint}: non-finite embedding values")
        concepts = None
        concept_dim = None
        if concepts_ok and body.get("concepts") is not None:
            crows = body["concepts"]
            concept_dim = body.get("concept_dim")
            if not isinstance(concept_dim, int) or concept_dim < 1:
                raise ProtocolError(f"{endpoint}: concepts present without concept_dim")
            if (
                not isinstance(crows, list)
                or len(crows) != n_rows
                or any(not isinstance(r, list) or len(r) != concept_dim for r in crows)
            ):
                raise ProtocolError(f"{endpoint}: ragged or miscounted concept rows")
            concepts = np.array(crows, dtype=np.float64)
            if not np.all(np.isfinite(concepts)):
                raise ProtocolError(f"{endpoint}: non-finite concept values")
        return EncodeResult(
            dim=dim, embeddings=emb, concepts=concepts, concept_dim=concept_dim
        )
