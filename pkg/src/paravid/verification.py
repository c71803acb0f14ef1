"""Consistency-based filtering of paraphrased queries.

Each paraphrase is scored by the number of question/answer pairs it stays
consistent with; within every transformation only the paraphrases reaching
the maximum count are kept as valid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from paravid.paraphrase import ParaphraseBundle, ParaphrasedQuery
    from paravid.providers import ProviderGateway

QA_ASPECTS = ("person", "action", "object", "location", "time", "colour", "quantity")
QA_KINDS = ("open", "yesno")


@dataclass(frozen=True)
class QAPair:
    """One question/answer pair probing a single aspect of the user query."""

    question: str
    answer: str
    kind: str
    aspect: str

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("question must be non-empty")
        if self.kind not in QA_KINDS:
            raise ValueError(f"kind must be one of {QA_KINDS}, got {self.kind!r}")
        if self.aspect not in QA_ASPECTS:
            raise ValueError(f"aspect must be one of {QA_ASPECTS}, got {self.aspect!r}")


@dataclass(frozen=True)
class AlignmentCount:
    """Per-pair alignment booleans plus their total."""

    per_pair: tuple[bool, ...]
    count: int

    def __post_init__(self) -> None:
        if self.count != sum(self.per_pair):
            raise ValueError(
                f"count {self.count} disagrees with boolean vector {self.per_pair}"
            )


@dataclass(frozen=True)
class ValidSet:
    """Ordinals of the paraphrases that reached the per-transformation maximum."""

    kind: str
    max_count: int
    member_ordinals: tuple[int, ...]


def select_valid(counts: Iterable[int], kind: str = "") -> ValidSet:
    """Keep exactly the argmax set of alignment counts, in ordinal order.

    An all-zero vector keeps every member: the maximum is still attained by
    all of them, and dropping a whole transformation would silently change
    the ensemble.
    """
    counts = list(counts)
    if not counts:
        raise ValueError("counts must be non-empty")
    max_count = max(counts)
    members = tuple(i for i, c in enumerate(counts) if c == max_count)
    return ValidSet(kind=kind, max_count=max_count, member_ordinals=members)


def generate_qa(gateway: "ProviderGateway", query_text: str) -> list[QAPair]:
    """Produce QA pairs for a user query via the provider."""
    return gateway.call_qa_generate(query_text)


def score_paraphrase(
    gateway: "ProviderGateway", paraphrase: "ParaphrasedQuery", qa: list[QAPair]
) -> AlignmentCount:
    """Count the QA pairs a single paraphrase is aligned with."""
    if not qa:
        raise ValueError("qa pairs must be non-empty")
    candidate = paraphrase.image if paraphrase.kind == "T2I" else paraphrase.text
    result = gateway.call_qa_verify(candidate, qa)
    paraphrase.verified_count = result.count
    return result


def verify_bundle(
    gateway: "ProviderGateway", bundle: "ParaphraseBundle"
) -> dict[str, ValidSet]:
    """Score every paraphrase in the bundle and set the valid flags.

    A paraphrase whose verification keeps failing is excluded (treated as
    count -inf) rather than dragging down the whole transformation.
    """
    if not bundle.qa:
        raise ValueError("bundle has no QA pairs; run QA generation first")
    valid_sets: dict[str, ValidSet] = {}
    for kind, group in (("T2T", bundle.t2t), ("T2I", bundle.t2i), ("I2T", bundle.i2t)):
        failed: set[int] = set()
        for p in group:
            try:
                score_paraphrase(gateway, p, bundle.qa)
            except Exception as exc:  # noqa: BLE001 - conservative exclusion
                p.verified_count = None
                p.error = str(exc)
                failed.add(p.ordinal)
        scored = [p for p in group if p.ordinal not in failed]
        if not scored:
            # every member failed: nothing can be valid
            for p in group:
                p.valid = False
            valid_sets[kind] = ValidSet(kind=kind, max_count=0, member_ordinals=())
            continue
        vs = select_valid([p.verified_count for p in scored], kind=kind)
        members = {scored[i].ordinal for i in vs.member_ordinals}
        for p in group:
            p.valid = p.ordinal in members
        valid_sets[kind] = ValidSet(
            kind=kind, max_count=vs.max_count, member_ordinals=tuple(sorted(members))
        )
    return valid_sets


def write_audit(bundle: "ParaphraseBundle", path: Path) -> None:
    """Write the per-paraphrase audit table (ordinal, kind, count, valid)."""
    lines = ["ordinal\tkind\tcount\tvalid"]
    for group in (bundle.t2t, bundle.t2i, bundle.i2t):
        for p in group:
            count = "" if p.verified_count is None else str(p.verified_count)
            valid = "" if p.valid is None else str(p.valid).lower()
            lines.append(f"{p.ordinal}\t{p.kind}\t{count}\t{valid}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
