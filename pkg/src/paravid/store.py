"""Memory-mappable on-disk matrix of per-video embedding or concept vectors.

Binary layout (bit-exact): 32-byte header =
``"EMBS" | version u32 LE = 1 | dim u32 LE | count u64 LE | dtype u8 = 0 | 11 zero bytes``
followed by ``count * dim`` 32-bit LE floats, row-major. A sidecar ids file
holds exactly ``count`` UTF-8 lines, one video id per line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from paravid.errors import IngestError

MAGIC = b"EMBS"
VERSION = 1
HEADER_SIZE = 32
_HEADER = struct.Struct("<4sIIQB11x")


@dataclass(frozen=True)
class EmbeddingStore:
    dim: int
    count: int
    rows: np.ndarray  # count x dim, float32, read-only
    ids: tuple[str, ...]
    kind: str  # "embedding" | "concept"

    def row(self, index: int) -> np.ndarray:
        return self.rows[index]


def write_store(
    vector_file: Path, ids_file: Path, rows: np.ndarray, ids: Sequence[str]
) -> None:
    """Serialize a matrix plus aligned ids to the store format."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-D matrix")
    count, dim = rows.shape
    if len(ids) != count:
        raise ValueError(f"ids length {len(ids)} != row count {count}")
    header = _HEADER.pack(MAGIC, VERSION, dim, count, 0)
    vector_file = Path(vector_file)
    tmp = vector_file.with_suffix(vector_file.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes(order="C"))
    tmp.replace(vector_file)
    ids_file = Path(ids_file)
    tmp = ids_file.with_suffix(ids_file.suffix + ".tmp")
    tmp.write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")
    tmp.replace(ids_file)


def ingest_store(vector_file: Path, ids_file: Path, kind: str = "embedding") -> EmbeddingStore:
    """Load and validate a store; the payload is memory-mapped read-only."""
    if kind not in ("embedding", "concept"):
        raise ValueError(f"kind must be 'embedding' or 'concept', got {kind!r}")
    vector_file = Path(vector_file)
    ids_file = Path(ids_file)
    if not vector_file.exists():
        raise IngestError(f"{vector_file}: no such file")
    if not ids_file.exists():
        raise IngestError(f"{ids_file}: no such file")
    size = vector_file.stat().st_size
    if size < HEADER_SIZE:
        raise IngestError(f"{vector_file}: file shorter than the 32-byte header")
    with open(vector_file, "rb") as fh:
        magic, version, dim, count, dtype = _HEADER.unpack(fh.read(HEADER_SIZE))
    if magic != MAGIC:
        raise IngestError(f"{vector_file}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise IngestError(f"{vector_file}: unsupported version {version} at offset 4")
    if dim == 0:
        raise IngestError(f"{vector_file}: dim=0 at offset 8")
    if dtype != 0:
        raise IngestError(f"{vector_file}: unsupported dtype {dtype} at offset 24")
    expected = HEADER_SIZE + count * dim * 4
    if size != expected:
        raise IngestError(
            f"{vector_file}: payload length mismatch (expected {expected} bytes, found {size})"
        )
    if count:
        rows = np.memmap(
            vector_file, dtype="<f4", mode="r", offset=HEADER_SIZE, shape=(count, dim)
        )
    else:
        rows = np.empty((0, dim), dtype="<f4")
    raw_ids = ids_file.read_text(encoding="utf-8")
    if raw_ids.startswith("\ufeff"):
        raise IngestError(f"{ids_file}: BOM not allowed")
    lines = raw_ids.splitlines()
    if len(lines) != count:
        raise IngestError(
            f"{ids_file}: id count mismatch (expected {count} lines, found {len(lines)})"
        )
    seen: set[str] = set()
    for lineno, vid in enumerate(lines, start=1):
        if not vid:
            raise IngestError(f"{ids_file}: empty id at line {lineno}")
        if vid in seen:
            raise IngestError(f"{ids_file}: duplicate id {vid!r} at line {lineno}")
        seen.add(vid)
    if count:
        finite = np.isfinite(rows)
        if not finite.all():
            bad = int(np.argwhere(~finite)[0][0])
            raise IngestError(f"{vector_file}: non-finite value in row {bad}")
        if kind == "embedding":
            norms = np.linalg.norm(rows.astype(np.float64), axis=1)
            zero = np.nonzero(norms == 0.0)[0]
            if zero.size:
                raise IngestError(
                    f"{vector_file}: all-zero embedding row {int(zero[0])} "
                    f"(id {lines[int(zero[0])]!r}); cosine undefined"
                )
    return EmbeddingStore(dim=dim, count=count, rows=rows, ids=tuple(lines), kind=kind)
