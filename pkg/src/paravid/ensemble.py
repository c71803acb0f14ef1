"""Score aggregation: per-transformation averaging and the weighted ensemble.

Within one transformation all valid paraphrase score lists are averaged
with equal weight and min-max normalized. Across transformations the
normalized lists are combined linearly with weights defaulting to
(user, t2t, t2i, i2t) = (1, 1, 0.5, 1); the image term gets the lower
weight because still images model motion poorly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from paravid.search import EmbeddingStore, RankedList, ScoreVector, minmax_normalize, top_k

__all__ = [
    "EnsembleWeights",
    "TransformationScore",
    "minmax_normalize",
    "average_valid",
    "weighted_ensemble",
    "argsort_rank",
]


@dataclass(frozen=True)
class EnsembleWeights:
    w_user: float = 1.0
    w_t2t: float = 1.0
    w_t2i: float = 0.5
    w_i2t: float = 1.0

    def __post_init__(self) -> None:
        for name in ("w_user", "w_t2t", "w_t2i", "w_i2t"):
            w = getattr(self, name)
            if not np.isfinite(w) or w < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {w}")


@dataclass(frozen=True)
class TransformationScore:
    kind: str
    score: ScoreVector
    n_members: int


def average_valid(members: Sequence[ScoreVector], kind: str = "") -> TransformationScore:
    """Equal-weight elementwise mean of the member score lists, then normalize."""
    if not members:
        raise ValueError(
            "no valid members for this transformation; drop the term instead"
        )
    length = members[0].values.shape[0]
    if any(m.values.shape[0] != length for m in members):
        raise ValueError("member score vectors are not aligned to one store")
    mean = np.mean(np.stack([m.values for m in members]), axis=0)
    sv = minmax_normalize(
        ScoreVector(qid=members[0].qid, values=mean, tag=members[0].tag)
    )
    return TransformationScore(kind=kind, score=sv, n_members=len(members))


def weighted_ensemble(
    user: ScoreVector,
    t2t: TransformationScore | None = None,
    t2i: TransformationScore | None = None,
    i2t: TransformationScore | None = None,
    weights: EnsembleWeights = EnsembleWeights(),
) -> ScoreVector:
    """Linear combination of the user list and the present transformation lists.

    The user list is min-max normalized before weighting so all four terms
    live on the same [0, 1] scale; an absent transformation contributes
    nothing and the other weights are unchanged.
    """
    user_norm = minmax_normalize(user)
    total = weights.w_user * user_norm.values
    for term, w in ((t2t, weights.w_t2t), (t2i, weights.w_t2i), (i2t, weights.w_i2t)):
        if term is None:
            continue
        if term.score.values.shape != user_norm.values.shape:
            raise ValueError(f"{term.kind}: score vector not aligned with user scores")
        total = total + w * term.score.values
    return ScoreVector(qid=user.qid, values=total, tag="fused")


def argsort_rank(sv: ScoreVector, store: EmbeddingStore, depth: int = 1000) -> RankedList:
    """Descending argsort of the fused scores, truncated to the search depth."""
    return top_k(sv, store, depth)
