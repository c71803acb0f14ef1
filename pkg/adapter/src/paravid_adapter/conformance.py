"""Replay harness for the shared conformance vector file.

The vector file is generated and committed by the search-pipeline side; it
is the single normative definition of the stub semantics. Each entry holds
an endpoint, a request body, and the exact canonical-JSON response. The
check replays every request against an app instance and byte-compares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from fastapi.testclient import TestClient

from paravid_adapter.app import AdapterConfig, canonical, create_app


@dataclass(frozen=True)
class Mismatch:
    endpoint: str
    index: int
    byte_offset: int | None
    detail: str


@dataclass(frozen=True)
class ConformanceReport:
    vectors_checked: int
    mismatches: tuple[Mismatch, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        if self.passed:
            return f"PASS: {self.vectors_checked} vectors replayed byte-exactly"
        lines = [f"FAIL: {len(self.mismatches)} of {self.vectors_checked} vectors"]
        for m in self.mismatches:
            where = f" at byte {m.byte_offset}" if m.byte_offset is not None else ""
            lines.append(f"  [{m.index}] {m.endpoint}{where}: {m.detail}")
        return "\n".join(lines)


def config_from_vectors(doc: dict) -> AdapterConfig:
    """The adapter settings a vector file was generated against."""
    return AdapterConfig(
        mode="stub",
        stub_seed=int(doc["stub_seed"]),
        dim=int(doc["stub_dim"]),
        concept_dim=doc.get("stub_concept_dim") or None,
    )


def _first_difference(got: bytes, want: bytes) -> int:
    limit = min(len(got), len(want))
    for i in range(limit):
        if got[i] != want[i]:
            return i
    return limit


def check_vectors(doc: dict, config: AdapterConfig | None = None) -> ConformanceReport:
    """Replay every vector in-process and byte-compare the responses."""
    if config is None:
        config = config_from_vectors(doc)
    app = create_app(config)
    mismatches: list[Mismatch] = []
    vectors = doc["vectors"]
    with TestClient(app, raise_server_exceptions=False) as client:
        for index, vector in enumerate(vectors):
            endpoint = vector["endpoint"]
            expected = vector["response"].encode("utf-8")
            response = client.post(
                endpoint,
                content=canonical(vector["request"]).encode("utf-8"),
                headers={"Content-Type": "application/json"},
            )
            if response.status_code == 404:
                mismatches.append(
                    Mismatch(endpoint, index, None, f"endpoint {endpoint} not served")
                )
                continue
            if response.status_code != 200:
                mismatches.append(
                    Mismatch(endpoint, index, None, f"HTTP {response.status_code}")
                )
                continue
            got = response.content
            if got != expected:
                offset = _first_difference(got, expected)
                mismatches.append(
                    Mismatch(
                        endpoint,
                        index,
                        offset,
                        f"expected {expected[offset:offset + 20]!r}, "
                        f"got {got[offset:offset + 20]!r}",
                    )
                )
    return ConformanceReport(
        vectors_checked=len(vectors), mismatches=tuple(mismatches)
    )


def check_file(path: Path, config: AdapterConfig | None = None) -> ConformanceReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return check_vectors(doc, config)
