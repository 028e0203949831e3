"""Pairwise fairness: group-conditioned ordering accuracy over system scores.

These metrics do not look at the emitted top-N list; they ask whether the
system's scores order a more-relevant document above a less-relevant one,
conditioned on the pair's group memberships.  Group indices follow the
binarized convention: 0 = protected, 1 = unprotected.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .core import AlignmentMatrix, FairRankError, GroupSpace, NoPairs, RelevanceTable


@dataclass(frozen=True)
class ScoredPair:
    """A document pair where ``doc_hi`` is strictly more relevant than ``doc_lo``."""

    request: str
    doc_hi: str
    doc_lo: str
    score_hi: float
    score_lo: float
    group_hi: int
    group_lo: int


@dataclass(frozen=True)
class PairSample:
    pairs: tuple[ScoredPair, ...]
    n_fallback: int  # requests whose negative pool was smaller than n_negatives
    n_skipped: int   # requests with no scorable relevant document


def sample_pairs(
    relevance: RelevanceTable,
    scores: Mapping[str, Mapping[str, float]],
    alignment: AlignmentMatrix,
    groups: GroupSpace,
    n_negatives: int = 10000,
    seed: int = 42,
    threshold: float = 0.5,
) -> PairSample:
    """Build relevant-vs-negative pairs with seeded negative sampling.

    For each labeled relevant document (grade > 0) with a score, draw up to
    ``n_negatives`` distinct negatives — scored labeled documents that are
    unjudged or judged non-relevant — uniformly without replacement; a pool
    smaller than that is used exhaustively (counted).  Pairs of relevant
    documents with differing grades are always emitted exhaustively.
    Identical seeds yield identical samples.
    """
    if n_negatives < 1:
        raise FairRankError(f"n_negatives must be >= 1, got {n_negatives}")
    p = groups.require_protected()
    rng = np.random.default_rng(seed)
    pairs: list[ScoredPair] = []
    n_fallback = 0
    n_skipped = 0

    def grp(doc: str) -> int | None:
        row = alignment.row(doc)
        if row is None:
            return None
        return 0 if row[p] >= threshold else 1

    for q in sorted(scores):
        sc = scores[q]
        judged = relevance.judged(q)
        positives = []
        negatives = []
        for d in sorted(sc):
            g = grp(d)
            if g is None:
                continue
            if judged.get(d, 0.0) > 0:
                positives.append((d, g))
            else:
                negatives.append((d, g))
        if not positives:
            n_skipped += 1
            continue
        if len(negatives) < n_negatives:
            n_fallback += 1
        for d_hi, g_hi in positives:
            if len(negatives) <= n_negatives:
                chosen = negatives
            else:
                idx = rng.choice(len(negatives), size=n_negatives, replace=False)
                chosen = [negatives[i] for i in np.sort(idx)]
            for d_lo, g_lo in chosen:
                pairs.append(ScoredPair(q, d_hi, d_lo, sc[d_hi], sc[d_lo], g_hi, g_lo))
        for (d1, g1), (d2, g2) in combinations(positives, 2):
            y1, y2 = judged[d1], judged[d2]
            if y1 == y2:
                continue
            if y1 < y2:
                (d1, g1), (d2, g2) = (d2, g2), (d1, g1)
            pairs.append(ScoredPair(q, d1, d2, sc[d1], sc[d2], g1, g2))
    return PairSample(tuple(pairs), n_fallback, n_skipped)


def pairwise_accuracy(pairs: Iterable[ScoredPair], group_hi: int, group_lo: int) -> float:
    """Fraction of (group_hi, group_lo) pairs scored in the correct order.

    Ties between the two scores count half.
    """
    hits = 0.0
    total = 0
    for pair in pairs:
        if pair.group_hi != group_hi or pair.group_lo != group_lo:
            continue
        total += 1
        if pair.score_hi > pair.score_lo:
            hits += 1.0
        elif pair.score_hi == pair.score_lo:
            hits += 0.5
    if total == 0:
        raise NoPairs(f"no pairs with groups ({group_hi}, {group_lo})")
    return hits / total


def accuracy_table(pairs: Iterable[ScoredPair]) -> dict[tuple[int, int], float]:
    """The 2x2 accuracy table over (group_hi, group_lo) in {0, 1}^2."""
    pairs = list(pairs)
    return {
        (hi, lo): pairwise_accuracy(pairs, hi, lo)
        for hi in (0, 1)
        for lo in (0, 1)
    }


def intra_inter(acc: Mapping[tuple[int, int], float]) -> tuple[float, float]:
    """Signed accuracy differences (IntraAcc, InterAcc); 0 is fair.

    IntraAcc compares within-group ordering accuracy (unprotected minus
    protected); InterAcc compares cross-group accuracy (unprotected-above-
    protected minus protected-above-unprotected).
    """
    try:
        intra = acc[(1, 1)] - acc[(0, 0)]
        inter = acc[(1, 0)] - acc[(0, 1)]
    except KeyError as exc:
        raise NoPairs(f"missing accuracy cell {exc.args[0]}") from None
    return intra, inter
