"""Deterministic stub models behind the adapter endpoints.

The semantics here are pinned by the committed conformance vector file:
every response must match it byte-for-byte, so anything that affects float
formatting or accumulation order is deliberately kept boring (IEEE double
arithmetic, splitmix64, sha256).
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _mix(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _U64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return state, z ^ (z >> 31)


def unit_vector(domain: str, payload: bytes, seed: int, dim: int) -> list[float]:
    """Pseudorandom unit vector keyed by (domain, payload, seed)."""
    digest = hashlib.sha256(domain.encode("utf-8") + b"\x00" + payload).digest()
    state = int.from_bytes(digest[:8], "little") ^ (seed & _U64)
    values = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        state, word = _mix(state)
        values[i] = (word >> 11) * (2.0**-53) * 2.0 - 1.0
    return [float(v) for v in values / np.sqrt(np.dot(values, values))]


def paraphrases(query: str, n: int) -> list[str]:
    return [f"{query} ~v{i}" for i in range(1, n + 1)]


def images(query: str, seed: int, n_images: int) -> list[tuple[str, bytes]]:
    out = []
    for i in range(1, n_images + 1):
        data = f"IMG|{seed}|{i}|{query}".encode("utf-8")
        out.append((sha256_hex(data), data))
    return out


def prompt_of(image_bytes: bytes) -> str:
    """Stub image payloads are self-describing: 'IMG|seed|i|prompt'."""
    try:
        text = image_bytes.decode("utf-8")
        tag, _seed, _i, prompt = text.split("|", 3)
    except (UnicodeDecodeError, ValueError) as exc:
        raise ValueError("not a stub image payload") from exc
    if tag != "IMG":
        raise ValueError("not a stub image payload")
    return prompt


def captions(image_bytes: bytes, n: int) -> list[str]:
    prompt = prompt_of(image_bytes)
    return [f"caption {i} of {prompt}" for i in range(1, n + 1)]


def qa_pairs(query: str) -> list[dict]:
    return [
        {"q": f"Is there {word}?", "a": "yes", "kind": "yesno", "aspect": "object"}
        for word in query.split()
    ]


def qa_align(candidate_text: str, answers: list[str]) -> list[bool]:
    haystack = candidate_text.lower()
    return [answer.lower() in haystack for answer in answers]
