"""Batch driver: per-bundle searching, run-file fusion, and the
valid-query subsampling experiment.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from paravid.ensemble import (
    EnsembleWeights,
    TransformationScore,
    average_valid,
    argsort_rank,
    minmax_normalize,
    weighted_ensemble,
)
from paravid.errors import ParavidError
from paravid.evaluation import RunEntry, RunFile, xinfap
from paravid.paraphrase import ParaphraseBundle, ParaphrasedQuery
from paravid.providers import ProviderGateway
from paravid.search import (
    RankedList,
    ScoreVector,
    fusion_text_search,
    image_search,
)
from paravid.store import EmbeddingStore

TRANSFORMATION_TAGS = ("t2t", "t2i", "i2t")


@dataclass(frozen=True)
class BundleScores:
    """Member-level score vectors for one bundle (valid members only)."""

    qid: str
    user: ScoreVector
    t2t: tuple[ScoreVector, ...]
    t2i: tuple[ScoreVector, ...]
    i2t: tuple[ScoreVector, ...]

    def members(self, tag: str) -> tuple[ScoreVector, ...]:
        return getattr(self, tag)


def _check_dim(encoded_dim: int, store: EmbeddingStore, what: str) -> None:
    if encoded_dim != store.dim:
        raise ParavidError(
            f"{what}: encoder dim {encoded_dim} != store dim {store.dim}"
        )


def _selected(group: Sequence[ParaphrasedQuery], only_valid: bool) -> list[ParaphrasedQuery]:
    if only_valid:
        return [p for p in group if p.valid]
    return list(group)


def compute_bundle_scores(
    gateway: ProviderGateway,
    bundle: ParaphraseBundle,
    emb_store: EmbeddingStore,
    con_store: EmbeddingStore | None = None,
    theta: float = 0.5,
    only_valid: bool = True,
) -> BundleScores:
    """Score the user query and every (valid) paraphrase against the store.

    Text sources go through the theta-weighted fusion search; image sources
    use embedding-only cosine, never the concept store.
    """
    qid = bundle.query.qid

    def text_scores(texts: list[str], tag: str) -> list[ScoreVector]:
        if not texts:
            return []
        enc = gateway.call_encode_text(texts)
        _check_dim(enc.dim, emb_store, f"{qid}/{tag}")
        use_concepts = con_store is not None and enc.concepts is not None
        out = []
        for i in range(len(texts)):
            out.append(
                fusion_text_search(
                    emb_store,
                    enc.embeddings[i],
                    con_store=con_store if use_concepts else None,
                    q_con=enc.concepts[i] if use_concepts else None,
                    theta=theta,
                    qid=qid,
                    tag=tag,
                )
            )
        return out

    user = text_scores([bundle.query.text], "user")[0]
    t2t_members = _selected(bundle.t2t, only_valid)
    i2t_members = _selected(bundle.i2t, only_valid)
    t2i_members = _selected(bundle.t2i, only_valid)
    t2t = text_scores([p.text for p in t2t_members], "t2t")
    i2t = text_scores([p.text for p in i2t_members], "i2t")
    t2i: list[ScoreVector] = []
    if t2i_members:
        enc = gateway.call_encode_image([p.image for p in t2i_members])
        _check_dim(enc.dim, emb_store, f"{qid}/t2i")
        t2i = [
            image_search(emb_store, enc.embeddings[i], qid=qid, tag="t2i")
            for i in range(len(t2i_members))
        ]
    return BundleScores(
        qid=qid, user=user, t2t=tuple(t2t), t2i=tuple(t2i), i2t=tuple(i2t)
    )


def transformation_score(scores: BundleScores, tag: str) -> TransformationScore | None:
    members = scores.members(tag)
    if not members:
        return None
    return average_valid(list(members), kind=tag)


def ranked_to_entries(ranked: RankedList, tag: str) -> list[RunEntry]:
    return [
        RunEntry(video_id=vid, rank=rank, score=score, tag=tag)
        for vid, score, rank in ranked.entries
    ]


def search_runs(
    scores_by_topic: Mapping[str, BundleScores],
    store: EmbeddingStore,
    depth: int = 1000,
    tag: str = "paravid",
) -> dict[str, RunFile]:
    """Build the user run plus one averaged run per transformation.

    A transformation with no valid members anywhere yields no run for that
    source (the caller notes the absence in the manifest).
    """
    per_source: dict[str, dict[str, list[RunEntry]]] = {
        "user": {},
        "t2t": {},
        "t2i": {},
        "i2t": {},
    }
    for qid in sorted(scores_by_topic):
        scores = scores_by_topic[qid]
        user_ranked = argsort_rank(minmax_normalize(scores.user), store, depth)
        per_source["user"][qid] = ranked_to_entries(user_ranked, tag)
        for source in TRANSFORMATION_TAGS:
            ts = transformation_score(scores, source)
            if ts is None:
                continue
            ranked = argsort_rank(ts.score, store, depth)
            per_source[source][qid] = ranked_to_entries(ranked, tag)
    return {
        source: RunFile(topics=topics)
        for source, topics in per_source.items()
        if topics
    }


def _rank_value_map(values: dict[str, float], qid: str, depth: int, tag: str) -> list[RunEntry]:
    order = sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))[:depth]
    return [
        RunEntry(video_id=vid, rank=rank, score=score, tag=tag)
        for rank, (vid, score) in enumerate(order, start=1)
    ]


def fuse_runs(
    user_run: RunFile,
    t2t_run: RunFile | None = None,
    t2i_run: RunFile | None = None,
    i2t_run: RunFile | None = None,
    weights: EnsembleWeights = EnsembleWeights(),
    depth: int = 1000,
    tag: str = "fused",
) -> RunFile:
    """Weighted per-topic combination of the per-source runs.

    Scores are combined over the union of documents the source runs
    retrieved; a document absent from a source contributes zero there.
    The user-run scores are min-max normalized before weighting, matching
    the score-vector path.
    """
    fused: dict[str, list[RunEntry]] = {}
    for topic in sorted(user_run.topics):
        combined: dict[str, float] = {}
        user_entries = user_run.topics[topic]
        scores = np.array([e.score for e in user_entries], dtype=np.float64)
        lo, hi = float(scores.min()), float(scores.max())
        span = hi - lo
        for e, s in zip(user_entries, scores):
            norm = 0.0 if span == 0.0 else (s - lo) / span
            combined[e.video_id] = combined.get(e.video_id, 0.0) + weights.w_user * norm
        for run, w in (
            (t2t_run, weights.w_t2t),
            (t2i_run, weights.w_t2i),
            (i2t_run, weights.w_i2t),
        ):
            if run is None or topic not in run.topics:
                continue
            for e in run.topics[topic]:
                combined[e.video_id] = combined.get(e.video_id, 0.0) + w * e.score
        fused[topic] = _rank_value_map(combined, topic, depth, tag)
    return RunFile(topics=fused)


def subsample_experiment(
    scores_by_topic: Mapping[str, BundleScores],
    store: EmbeddingStore,
    qrels_by_topic: Mapping[str, list],
    sizes: Sequence[int],
    trials: int = 5,
    seed: int = 0,
    weights: EnsembleWeights = EnsembleWeights(),
    depth: int = 1000,
) -> list[dict]:
    """Mean/stddev of mean-xinfAP as a function of the number of valid
    queries subsampled (without replacement) per transformation.
    """
    if not scores_by_topic:
        raise ParavidError("no scored bundles to subsample")
    if any(s < 1 for s in sizes):
        raise ValueError("sizes must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not any(
        scores.members(tag)
        for scores in scores_by_topic.values()
        for tag in TRANSFORMATION_TAGS
    ):
        raise ParavidError("no valid paraphrases in any bundle")
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        trial_means = []
        for _ in range(trials):
            per_topic_ap = []
            for qid in sorted(scores_by_topic):
                scores = scores_by_topic[qid]
                terms: dict[str, TransformationScore | None] = {}
                for source in TRANSFORMATION_TAGS:
                    members = list(scores.members(source))
                    if not members:
                        terms[source] = None
                        continue
                    take = min(size, len(members))
                    idx = sorted(rng.choice(len(members), size=take, replace=False))
                    terms[source] = average_valid([members[i] for i in idx], kind=source)
                fused = weighted_ensemble(
                    scores.user,
                    t2t=terms["t2t"],
                    t2i=terms["t2i"],
                    i2t=terms["i2t"],
                    weights=weights,
                )
                ranked = argsort_rank(fused, store, depth)
                entries = ranked_to_entries(ranked, "subsample")
                per_topic_ap.append(xinfap(entries, qrels_by_topic[qid], depth))
            trial_means.append(float(np.mean(per_topic_ap)))
        rows.append(
            {
                "size": size,
                "trials": trials,
                "mean": float(np.mean(trial_means)),
                "stddev": float(np.std(trial_means)),
            }
        )
    return rows


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, files: Sequence[Path], notes: dict | None = None) -> Path:
    """Record every emitted file with its content hash."""
    out_dir = Path(out_dir)
    entries = {
        str(Path(f).relative_to(out_dir)): file_sha256(f) for f in sorted(files)
    }
    doc = {"files": entries}
    if notes:
        doc["notes"] = notes
    path = out_dir / "manifest.json"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path
