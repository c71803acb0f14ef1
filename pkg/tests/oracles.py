"""Independent brute-force oracles the implementation is checked against.

Everything here is written as a straight-line transcription of the
definitions, deliberately sharing no code with the package.
"""

from __future__ import annotations

import itertools


def exact_ap(ranked_ids, relevant_ids, depth=None):
    """Textbook average precision over complete judgments."""
    relevant_ids = set(relevant_ids)
    if not relevant_ids:
        return 0.0
    hits = 0
    total = 0.0
    for k, doc in enumerate(ranked_ids, start=1):
        if depth is not None and k > depth:
            break
        if doc in relevant_ids:
            hits += 1
            total += hits / k
    return total / len(relevant_ids)


def xinfap_oracle(run, qrels, depth=1000, eps=1e-5):
    """Straight-line stratified inferred-AP estimator.

    run: list of (video_id, rank); qrels: list of (stratum, video_id, rel)
    with rel -1 = pooled-but-unsampled, 0 = nonrelevant, >=1 = relevant.
    The smoothing constant is applied exactly as stated, unconditionally.
    """
    strata = sorted({s for s, _, _ in qrels})
    judgment = {vid: (s, rel) for s, vid, rel in qrels}
    # per-stratum sampling rates over the whole pool
    rates = {}
    for s in strata:
        judged = sum(1 for st, _, rel in qrels if st == s and rel >= 0)
        unsampled = sum(1 for st, _, rel in qrels if st == s and rel == -1)
        rates[s] = judged / (judged + unsampled)
    r_hat = 0.0
    for s in strata:
        rel_s = sum(1 for st, _, rel in qrels if st == s and rel >= 1)
        r_hat += rel_s / rates[s]
    if r_hat == 0.0:
        return 0.0
    total = 0.0
    for vid, k in run:
        if k > depth:
            continue
        if vid in judgment and judgment[vid][1] >= 1:
            if k == 1:
                total += 1.0 / r_hat
                continue
            p_hat = 0.0
            for s in strata:
                n_s = 0
                rel_above = 0
                nonrel_above = 0
                for vid2, k2 in run:
                    if k2 >= k or vid2 not in judgment:
                        continue
                    s2, rel2 = judgment[vid2]
                    if s2 != s:
                        continue
                    n_s += 1
                    if rel2 >= 1:
                        rel_above += 1
                    elif rel2 == 0:
                        nonrel_above += 1
                if n_s == 0:
                    continue
                p_hat += (n_s / (k - 1)) * (
                    (rel_above + eps) / (rel_above + nonrel_above + 2 * eps)
                )
            total += (1.0 / r_hat) * (1.0 / k + ((k - 1) / k) * p_hat)
    return total


def brute_force_top_k(ids, values, k):
    """Full sort by descending score then ascending id, truncated to k."""
    order = sorted(zip(ids, values), key=lambda pair: (-pair[1], pair[0]))
    return [
        (vid, score, rank) for rank, (vid, score) in enumerate(order[:k], start=1)
    ]


def argmax_set(counts):
    """All indices attaining the maximum, ascending."""
    best = max(counts)
    return [i for i, c in enumerate(counts) if c == best]


def exhaustive_sign_flip_p(differences):
    """Two-sided sign-flip p-value by enumerating every assignment."""
    observed = abs(sum(differences))
    hits = 0
    total = 0
    for signs in itertools.product((1, -1), repeat=len(differences)):
        total += 1
        flipped = sum(s * d for s, d in zip(signs, differences))
        if abs(flipped) >= observed:
            hits += 1
    return hits / total
