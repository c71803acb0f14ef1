from __future__ import annotations

import struct

import numpy as np
import pytest

from support import make_store
from paravid.errors import IngestError
from paravid.store import HEADER_SIZE, ingest_store, write_store


def test_roundtrip(tmp_path):
    rows = np.array([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]], dtype=np.float32)
    store = make_store(tmp_path, rows, ["v1", "v2"], name="rt")
    assert store.dim == 4
    assert store.count == 2
    assert store.ids == ("v1", "v2")
    np.testing.assert_array_equal(np.asarray(store.rows), rows)


def test_write_read_write_byte_identical(tmp_path):
    rows = np.random.default_rng(0).normal(size=(5, 3)).astype(np.float32)
    ids = [f"v{i}" for i in range(5)]
    a_vec, a_ids = tmp_path / "a.embs", tmp_path / "a.ids"
    write_store(a_vec, a_ids, rows, ids)
    store = ingest_store(a_vec, a_ids)
    b_vec, b_ids = tmp_path / "b.embs", tmp_path / "b.ids"
    write_store(b_vec, b_ids, np.asarray(store.rows), list(store.ids))
    assert a_vec.read_bytes() == b_vec.read_bytes()
    assert a_ids.read_bytes() == b_ids.read_bytes()


def test_header_layout(tmp_path):
    write_store(tmp_path / "h.embs", tmp_path / "h.ids",
                np.zeros((2, 4), dtype=np.float32) + 1, ["a", "b"])
    raw = (tmp_path / "h.embs").read_bytes()
    assert raw[:4] == b"EMBS"
    version, dim = struct.unpack("<II", raw[4:12])
    count = struct.unpack("<Q", raw[12:20])[0]
    assert (version, dim, count) == (1, 4, 2)
    assert raw[20] == 0
    assert raw[21:32] == bytes(11)
    assert len(raw) == HEADER_SIZE + 2 * 4 * 4


def test_payload_length_mismatch(tmp_path):
    write_store(tmp_path / "p.embs", tmp_path / "p.ids",
                np.ones((2, 4), dtype=np.float32), ["a", "b"])
    data = (tmp_path / "p.embs").read_bytes()
    (tmp_path / "p.embs").write_bytes(data[:-1])
    with pytest.raises(IngestError, match="length mismatch"):
        ingest_store(tmp_path / "p.embs", tmp_path / "p.ids")


def test_bad_magic(tmp_path):
    write_store(tmp_path / "m.embs", tmp_path / "m.ids",
                np.ones((1, 2), dtype=np.float32), ["a"])
    data = bytearray((tmp_path / "m.embs").read_bytes())
    data[:4] = b"XXXX"
    (tmp_path / "m.embs").write_bytes(bytes(data))
    with pytest.raises(IngestError, match="magic"):
        ingest_store(tmp_path / "m.embs", tmp_path / "m.ids")


def test_duplicate_ids(tmp_path):
    write_store(tmp_path / "d.embs", tmp_path / "d.ids",
                np.ones((2, 2), dtype=np.float32), ["a", "b"])
    (tmp_path / "d.ids").write_text("a\na\n")
    with pytest.raises(IngestError, match="duplicate"):
        ingest_store(tmp_path / "d.embs", tmp_path / "d.ids")


def test_id_count_mismatch(tmp_path):
    write_store(tmp_path / "c.embs", tmp_path / "c.ids",
                np.ones((2, 2), dtype=np.float32), ["a", "b"])
    (tmp_path / "c.ids").write_text("a\n")
    with pytest.raises(IngestError, match="id count"):
        ingest_store(tmp_path / "c.embs", tmp_path / "c.ids")


def test_zero_row_rejected_for_embeddings(tmp_path):
    rows = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32)
    write_store(tmp_path / "z.embs", tmp_path / "z.ids", rows, ["a", "b"])
    with pytest.raises(IngestError, match="all-zero"):
        ingest_store(tmp_path / "z.embs", tmp_path / "z.ids", kind="embedding")
    store = ingest_store(tmp_path / "z.embs", tmp_path / "z.ids", kind="concept")
    assert store.kind == "concept"


def test_non_finite_rejected(tmp_path):
    rows = np.array([[1.0, np.nan]], dtype=np.float32)
    write_store(tmp_path / "n.embs", tmp_path / "n.ids", rows, ["a"])
    with pytest.raises(IngestError, match="non-finite"):
        ingest_store(tmp_path / "n.embs", tmp_path / "n.ids")


def test_empty_store_loads(tmp_path):
    write_store(tmp_path / "e.embs", tmp_path / "e.ids",
                np.empty((0, 3), dtype=np.float32), [])
    store = ingest_store(tmp_path / "e.embs", tmp_path / "e.ids")
    assert store.count == 0
    assert store.dim == 3
