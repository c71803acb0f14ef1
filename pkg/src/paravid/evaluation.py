"""TRECVid-style evaluation: stratified inferred AP, median rank, and the
paired randomization significance test.

Qrels line format: ``topic stratum video_id rel`` with rel = -1 for
pooled-but-unsampled, 0 for judged nonrelevant, >= 1 for judged relevant.
Run files use the six-field TREC format ``topic Q0 video_id rank score tag``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean as _mean
from typing import Mapping, Sequence

import numpy as np

from paravid.errors import EvaluationError

DEFAULT_DEPTH = 1000
DEFAULT_EPSILON = 1e-5
EXACT_TEST_MAX_N = 20


@dataclass(frozen=True)
class QrelsEntry:
    stratum: int
    video_id: str
    rel: int


@dataclass(frozen=True)
class Qrels:
    topics: dict[str, list[QrelsEntry]]

    def topic(self, topic: str) -> list[QrelsEntry]:
        if topic not in self.topics:
            raise EvaluationError(f"topic {topic!r} absent from qrels")
        return self.topics[topic]


@dataclass(frozen=True)
class RunEntry:
    video_id: str
    rank: int
    score: float
    tag: str


@dataclass(frozen=True)
class RunFile:
    topics: dict[str, list[RunEntry]]

    def topic(self, topic: str) -> list[RunEntry]:
        if topic not in self.topics:
            raise EvaluationError(f"topic {topic!r} absent from run")
        return self.topics[topic]


@dataclass(frozen=True)
class MetricReport:
    metric: str
    depth: int
    per_topic: dict[str, float]
    mean: float
    aggregate: float  # mean for xinfAP, lower-median for medR


def parse_qrels(path: Path) -> Qrels:
    """Parse and validate a stratified qrels file."""
    topics: dict[str, list[QrelsEntry]] = {}
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise EvaluationError(
                    f"{path}:{lineno}: expected 4 fields, found {len(fields)}"
                )
            topic, stratum_s, video_id, rel_s = fields
            try:
                stratum = int(stratum_s)
                rel = int(rel_s)
            except ValueError as exc:
                raise EvaluationError(f"{path}:{lineno}: {exc}") from exc
            if rel < -1:
                raise EvaluationError(f"{path}:{lineno}: rel must be >= -1, got {rel}")
            if (topic, video_id) in seen:
                raise EvaluationError(
                    f"{path}:{lineno}: duplicate ({topic}, {video_id})"
                )
            seen.add((topic, video_id))
            topics.setdefault(topic, []).append(QrelsEntry(stratum, video_id, rel))
    for topic, entries in topics.items():
        for stratum in {e.stratum for e in entries}:
            judged = sum(1 for e in entries if e.stratum == stratum and e.rel >= 0)
            unsampled = sum(1 for e in entries if e.stratum == stratum and e.rel == -1)
            if judged == 0 and unsampled > 0:
                raise EvaluationError(
                    f"{path}: topic {topic} stratum {stratum} has unsampled entries "
                    "but no judged ones; sampling rate undefined"
                )
    return Qrels(topics=topics)


def _sampling_rates(entries: Sequence[QrelsEntry]) -> dict[int, float]:
    rates: dict[int, float] = {}
    for stratum in {e.stratum for e in entries}:
        judged = sum(1 for e in entries if e.stratum == stratum and e.rel >= 0)
        unsampled = sum(1 for e in entries if e.stratum == stratum and e.rel == -1)
        rates[stratum] = judged / (judged + unsampled)
    return rates


def xinfap(
    run: Sequence[RunEntry],
    qrels_entries: Sequence[QrelsEntry],
    depth: int = DEFAULT_DEPTH,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Inferred-AP estimator over stratified sampled judgments for one topic.

    Smoothing by ``epsilon`` follows the sample_eval convention. When the
    topic is completely sampled (no -1 rows) the smoothing is dropped so the
    estimator reduces bit-for-bit to exact average precision.
    """
    rates = _sampling_rates(qrels_entries)
    fully_sampled = all(rate == 1.0 for rate in rates.values())
    eps = 0.0 if fully_sampled else epsilon
    judgment = {e.video_id: e for e in qrels_entries}
    r_hat = 0.0
    for stratum, rate in rates.items():
        rel_s = sum(
            1 for e in qrels_entries if e.stratum == stratum and e.rel >= 1
        )
        r_hat += rel_s / rate
    if r_hat == 0.0:
        return 0.0
    strata = sorted(rates)
    pooled_above = {s: 0 for s in strata}  # pooled docs (incl. unsampled) above rank k
    rel_above = {s: 0 for s in strata}  # sampled relevant above rank k
    nonrel_above = {s: 0 for s in strata}  # sampled nonrelevant above rank k
    total = 0.0
    for entry in run:
        k = entry.rank
        if k > depth:
            break
        judged = judgment.get(entry.video_id)
        if judged is not None and judged.rel >= 1:
            if k == 1:
                total += 1.0 / r_hat
            else:
                p_hat = 0.0
                for s in strata:
                    n_s = pooled_above[s]
                    if n_s == 0:
                        continue
                    num = rel_above[s] + eps
                    den = rel_above[s] + nonrel_above[s] + 2.0 * eps
                    if den == 0.0:
                        continue
                    p_hat += (n_s / (k - 1)) * (num / den)
                total += (1.0 / r_hat) * (1.0 / k + ((k - 1) / k) * p_hat)
        if judged is not None:
            pooled_above[judged.stratum] += 1
            if judged.rel >= 1:
                rel_above[judged.stratum] += 1
            elif judged.rel == 0:
                nonrel_above[judged.stratum] += 1
    return total


def xinfap_report(run: RunFile, qrels: Qrels, depth: int = DEFAULT_DEPTH,
                  epsilon: float = DEFAULT_EPSILON) -> MetricReport:
    """xinfAP for every topic in the run; topics missing from qrels are errors."""
    per_topic: dict[str, float] = {}
    for topic in sorted(run.topics):
        per_topic[topic] = xinfap(run.topic(topic), qrels.topic(topic), depth, epsilon)
    if not per_topic:
        raise EvaluationError("run contains no topics")
    mean = _mean(per_topic.values())
    return MetricReport(
        metric="xinfAP", depth=depth, per_topic=per_topic, mean=mean, aggregate=mean
    )


def lower_median(values: Sequence[float]) -> float:
    """Median taking the lower of the two central values for even counts."""
    if not values:
        raise EvaluationError("cannot take the median of an empty list")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def medr(run: RunFile, targets: Mapping[str, str]) -> MetricReport:
    """Rank of the known target item per topic; aggregate is the lower median."""
    per_topic: dict[str, float] = {}
    for topic, target in sorted(targets.items()):
        entries = run.topic(topic)
        rank = next((e.rank for e in entries if e.video_id == target), None)
        if rank is None:
            raise EvaluationError(
                f"topic {topic!r}: target {target!r} absent from the ranked corpus"
            )
        per_topic[topic] = float(rank)
    return MetricReport(
        metric="medR",
        depth=max(len(v) for v in run.topics.values()),
        per_topic=per_topic,
        mean=_mean(per_topic.values()),
        aggregate=lower_median(list(per_topic.values())),
    )


def randomization_test(
    per_topic_a: Sequence[float],
    per_topic_b: Sequence[float],
    iters: int = 100_000,
    seed: int = 0,
) -> float:
    """Two-sided paired sign-flip test on the per-topic differences.

    Exact enumeration of all 2^n sign assignments for n <= 20; otherwise a
    seeded Monte Carlo with the add-one estimator so p is never zero.
    """
    if len(per_topic_a) != len(per_topic_b):
        raise EvaluationError(
            f"paired lists differ in length: {len(per_topic_a)} vs {len(per_topic_b)}"
        )
    n = len(per_topic_a)
    if n == 0:
        raise EvaluationError("cannot test empty score lists")
    d = np.asarray(per_topic_a, dtype=np.float64) - np.asarray(per_topic_b, dtype=np.float64)
    observed = abs(float(d.sum()))
    # The observed assignment itself must always count as a hit, but a
    # sign-flipped sum can differ from `observed` by rounding alone when the
    # two are accumulated in different orders. Compare with a hair of slack.
    threshold = observed - 1e-12 * max(1.0, observed)
    if n <= EXACT_TEST_MAX_N:
        sums = np.zeros(1)
        for di in d:
            sums = np.concatenate([sums + di, sums - di])
        hits = int(np.count_nonzero(np.abs(sums) >= threshold))
        return hits / float(2**n)
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = iters
    chunk = max(1, 2_000_000 // n)
    while remaining > 0:
        m = min(chunk, remaining)
        signs = rng.integers(0, 2, size=(m, n)) * 2 - 1
        sums = signs @ d
        hits += int(np.count_nonzero(np.abs(sums) >= threshold))
        remaining -= m
    return (1 + hits) / (1 + iters)


def parse_run(path: Path) -> RunFile:
    """Parse and validate a six-field TREC run file."""
    topics: dict[str, list[RunEntry]] = {}
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 6:
                raise EvaluationError(
                    f"{path}:{lineno}: expected 6 fields, found {len(fields)}"
                )
            topic, _q0, video_id, rank_s, score_s, tag = fields
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError as exc:
                raise EvaluationError(f"{path}:{lineno}: {exc}") from exc
            if (topic, video_id) in seen:
                raise EvaluationError(
                    f"{path}:{lineno}: duplicate ({topic}, {video_id})"
                )
            seen.add((topic, video_id))
            entries = topics.setdefault(topic, [])
            expected = len(entries) + 1
            if rank != expected:
                raise EvaluationError(
                    f"{path}:{lineno}: topic {topic}: expected rank {expected}, found {rank}"
                )
            entries.append(RunEntry(video_id=video_id, rank=rank, score=score, tag=tag))
    return RunFile(topics=topics)


def write_run(run: RunFile, path: Path) -> None:
    """Emit the run in TREC format with six-decimal scores, atomically."""
    path = Path(path)
    lines = []
    for topic in sorted(run.topics):
        for e in run.topics[topic]:
            lines.append(f"{topic} Q0 {e.video_id} {e.rank} {e.score:.6f} {e.tag}")
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n" if lines else "", encoding="utf-8")
    tmp.replace(path)


def format_report(report: MetricReport) -> str:
    """Tab-separated 'metric topic value' lines plus a final aggregate line."""
    lines = []
    for topic in sorted(report.per_topic):
        lines.append(f"{report.metric}\t{topic}\t{report.per_topic[topic]:.6f}")
    lines.append(f"{report.metric}\tall\t{report.aggregate:.6f}")
    return "\n".join(lines) + "\n"
