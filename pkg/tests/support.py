from __future__ import annotations

import numpy as np

from paravid.store import ingest_store, write_store


def make_store(tmp_path, rows, ids, kind="embedding", name="store"):
    vec = tmp_path / f"{name}.embs"
    idf = tmp_path / f"{name}.ids"
    write_store(vec, idf, np.asarray(rows, dtype=np.float32), ids)
    return ingest_store(vec, idf, kind=kind)
