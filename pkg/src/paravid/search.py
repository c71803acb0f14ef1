"""Exact score-list computation over an embedding store.

All scoring is a brute-force scan: cosine over embeddings, cosine over
concept vectors, a theta-weighted blend of the two for text queries, and
embedding-only cosine for image queries. Accumulation is in float64 over
the float32 storage so results are deterministic at corpus scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from paravid.store import EmbeddingStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreVector:
    """Dense per-video scores for one query, aligned to store row order."""

    qid: str
    values: np.ndarray
    tag: str = "user"  # user | t2t | t2i | i2t | fused

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.qid}: non-finite score values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class RankedList:
    qid: str
    entries: tuple[tuple[str, float, int], ...]  # (video_id, score, rank from 1)
    depth: int


def minmax_normalize(sv: ScoreVector) -> ScoreVector:
    """Map scores to [0, 1] by (v - min) / (max - min); constant input to zeros."""
    v = sv.values
    if v.size == 0:
        return sv
    lo = float(v.min())
    hi = float(v.max())
    if hi == lo:
        return ScoreVector(qid=sv.qid, values=np.zeros_like(v), tag=sv.tag)
    return ScoreVector(qid=sv.qid, values=(v - lo) / (hi - lo), tag=sv.tag)


def _check_query(store: EmbeddingStore, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != store.dim:
        raise ValueError(
            f"query dim {q.shape[-1] if q.ndim else 0} != store dim {store.dim}"
        )
    if not np.any(q):
        raise ValueError("query vector is all-zero; cosine undefined")
    return q


def cosine_scores(store: EmbeddingStore, q: np.ndarray, qid: str = "", tag: str = "user") -> ScoreVector:
    """Cosine similarity of the query against every store row."""
    q = _check_query(store, q)
    if store.count == 0:
        return ScoreVector(qid=qid, values=np.empty(0), tag=tag)
    rows = store.rows.astype(np.float64, copy=False)
    dots = rows @ q
    norms = np.linalg.norm(rows, axis=1)
    values = dots / (norms * np.linalg.norm(q))
    return ScoreVector(qid=qid, values=values, tag=tag)


def concept_scores(store: EmbeddingStore, q_concepts: np.ndarray, qid: str = "", tag: str = "user") -> ScoreVector:
    """Cosine over the concept store; same kernel as cosine_scores."""
    return cosine_scores(store, q_concepts, qid=qid, tag=tag)


def fusion_text_search(
    emb_store: EmbeddingStore,
    q_emb: np.ndarray,
    con_store: EmbeddingStore | None = None,
    q_con: np.ndarray | None = None,
    theta: float = 0.5,
    qid: str = "",
    tag: str = "user",
) -> ScoreVector:
    """Blend concept and embedding search: theta*norm(concept) + (1-theta)*norm(embedding)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must be in [0, 1], got {theta}")
    emb = minmax_normalize(cosine_scores(emb_store, q_emb, qid=qid, tag=tag))
    if con_store is None:
        log.warning("%s: no concept store; falling back to embedding-only search", qid or tag)
        return emb
    if q_con is None:
        raise ValueError("concept store present but query concept vector missing")
    con = minmax_normalize(concept_scores(con_store, q_con, qid=qid, tag=tag))
    if con.values.shape != emb.values.shape:
        raise ValueError("embedding and concept stores cover different corpora")
    return ScoreVector(
        qid=qid, values=theta * con.values + (1.0 - theta) * emb.values, tag=tag
    )


def image_search(emb_store: EmbeddingStore, q_img_emb: np.ndarray, qid: str = "", tag: str = "t2i") -> ScoreVector:
    """Embedding-only cosine for an image query (treated as a one-frame video)."""
    return cosine_scores(emb_store, q_img_emb, qid=qid, tag=tag)


def top_k(sv: ScoreVector, store: EmbeddingStore, k: int) -> RankedList:
    """Top-k by descending score, ties broken by ascending video id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if sv.values.shape[0] != store.count:
        raise ValueError(
            f"score vector length {sv.values.shape[0]} != store count {store.count}"
        )
    ids = np.asarray(store.ids)
    order = np.lexsort((ids, -sv.values))
    depth = min(k, store.count)
    entries = tuple(
        (str(ids[i]), float(sv.values[i]), rank)
        for rank, i in enumerate(order[:depth], start=1)
    )
    return RankedList(qid=sv.qid, entries=entries, depth=depth)
